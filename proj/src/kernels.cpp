#include "evw/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace evw::kernels {
namespace {

struct Selected {
    const Ops* ops;
    const char* name;
};

Selected select() {
    const char* force = std::getenv("EVW_KERNELS");
    if (force && std::strcmp(force, "scalar") == 0) return {&scalar_ops(), "scalar"};
    if (force && std::strcmp(force, "avx2") == 0) {
        if (const Ops* v = avx2_ops()) return {v, "avx2"};
        return {&scalar_ops(), "scalar"};  // requested but unavailable
    }
    if (const Ops* v = avx2_ops()) return {v, "avx2"};
    return {&scalar_ops(), "scalar"};
}

const Selected& selected() {
    static const Selected s = select();
    return s;
}

}  // namespace

const Ops& ops() { return *selected().ops; }

std::string backend_name() { return selected().name; }

}  // namespace evw::kernels
