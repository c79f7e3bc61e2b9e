#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace evw {

// mt19937_64 with explicit bounded sampling. The std distributions are
// implementation-defined, which would break the byte-identical-report
// contract across standard libraries, so the mappings live here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    // Independent stream for (seed, index) pairs, e.g. one per image.
    static Rng derive(std::uint64_t seed, std::uint64_t index) {
        return Rng(splitmix(seed ^ (0x9e3779b97f4a7c15ULL + splitmix(index))));
    }

    std::uint64_t bits() { return eng_(); }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    std::uint64_t uniform_int(std::uint64_t n) {
        const std::uint64_t bound = n * ((~std::uint64_t{0}) / n);
        std::uint64_t x;
        do {
            x = eng_();
        } while (x >= bound);
        return x % n;
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[uniform_int(i)]);
    }

private:
    explicit Rng(std::uint64_t seed, int) : eng_(seed) {}

    static std::uint64_t splitmix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    std::mt19937_64 eng_;
};

}  // namespace evw
