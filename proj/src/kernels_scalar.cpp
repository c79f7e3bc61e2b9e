#include "evw/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace evw::kernels {
namespace {

void gemm_nn_s(int m, int n, int k, const double* a, const double* b, double* c) {
    std::memset(c, 0, sizeof(double) * static_cast<std::size_t>(m) * n);
    for (int i = 0; i < m; ++i) {
        double* ci = c + static_cast<std::size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double aip = a[static_cast<std::size_t>(i) * k + p];
            const double* bp = b + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
}

void gemm_tn_s(int m, int n, int k, const double* a, const double* b, double* c) {
    std::memset(c, 0, sizeof(double) * static_cast<std::size_t>(m) * n);
    for (int p = 0; p < k; ++p) {
        const double* ap = a + static_cast<std::size_t>(p) * m;
        const double* bp = b + static_cast<std::size_t>(p) * n;
        for (int i = 0; i < m; ++i) {
            const double api = ap[i];
            double* ci = c + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) ci[j] += api * bp[j];
        }
    }
}

void gemm_nt_s(int m, int n, int k, const double* a, const double* b, double* c) {
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<std::size_t>(i) * k;
        double* ci = c + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* bj = b + static_cast<std::size_t>(j) * k;
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
            ci[j] = acc;
        }
    }
}

void relu_fwd_s(const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_bwd_s(const double* x, const double* dy, double* dx, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
}

void axpy_s(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double dot_s(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double asum_s(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += std::fabs(x[i]);
    return acc;
}

void sign_step_s(double alpha, const double* g, double* y, double lo, double hi,
                 std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double s = g[i] > 0.0 ? 1.0 : (g[i] < 0.0 ? -1.0 : 0.0);
        y[i] = std::clamp(y[i] - alpha * s, lo, hi);
    }
}

}  // namespace

const Ops& scalar_ops() {
    static const Ops ops{gemm_nn_s, gemm_tn_s, gemm_nt_s, relu_fwd_s, relu_bwd_s,
                         axpy_s,    dot_s,     asum_s,    sign_step_s};
    return ops;
}

}  // namespace evw::kernels
