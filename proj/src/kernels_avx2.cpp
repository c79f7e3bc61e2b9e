// AVX2/FMA variants of the hot loops. This translation unit is the only
// one compiled with -mavx2 -mfma; callers go through the dispatch table.

#include "evw/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define EVW_HAVE_AVX2_BUILD 1
#include <immintrin.h>
#else
#define EVW_HAVE_AVX2_BUILD 0
#endif

#include <algorithm>
#include <cmath>
#include <cstring>

namespace evw::kernels {

#if EVW_HAVE_AVX2_BUILD
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(lo) + _mm_cvtsd_f64(_mm_unpackhi_pd(lo, lo));
}

// Broadcast-FMA over the contiguous N dimension.
inline void fma_row(double aip, const double* bp, double* ci, int n) {
    const __m256d av = _mm256_set1_pd(aip);
    int j = 0;
    for (; j + 4 <= n; j += 4) {
        __m256d cv = _mm256_loadu_pd(ci + j);
        cv = _mm256_fmadd_pd(av, _mm256_loadu_pd(bp + j), cv);
        _mm256_storeu_pd(ci + j, cv);
    }
    for (; j < n; ++j) ci[j] += aip * bp[j];
}

void gemm_nn_v(int m, int n, int k, const double* a, const double* b, double* c) {
    std::memset(c, 0, sizeof(double) * static_cast<std::size_t>(m) * n);
    for (int i = 0; i < m; ++i) {
        double* ci = c + static_cast<std::size_t>(i) * n;
        for (int p = 0; p < k; ++p)
            fma_row(a[static_cast<std::size_t>(i) * k + p],
                    b + static_cast<std::size_t>(p) * n, ci, n);
    }
}

void gemm_tn_v(int m, int n, int k, const double* a, const double* b, double* c) {
    std::memset(c, 0, sizeof(double) * static_cast<std::size_t>(m) * n);
    for (int p = 0; p < k; ++p) {
        const double* ap = a + static_cast<std::size_t>(p) * m;
        const double* bp = b + static_cast<std::size_t>(p) * n;
        for (int i = 0; i < m; ++i)
            fma_row(ap[i], bp, c + static_cast<std::size_t>(i) * n, n);
    }
}

void gemm_nt_v(int m, int n, int k, const double* a, const double* b, double* c) {
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<std::size_t>(i) * k;
        double* ci = c + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* bj = b + static_cast<std::size_t>(j) * k;
            __m256d acc = _mm256_setzero_pd();
            int p = 0;
            for (; p + 4 <= k; p += 4)
                acc = _mm256_fmadd_pd(_mm256_loadu_pd(ai + p), _mm256_loadu_pd(bj + p), acc);
            double s = hsum(acc);
            for (; p < k; ++p) s += ai[p] * bj[p];
            ci[j] = s;
        }
    }
}

void relu_fwd_v(const double* x, double* y, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
    for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_bwd_v(const double* x, const double* dy, double* dx, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
        _mm256_storeu_pd(dx + i, _mm256_and_pd(mask, _mm256_loadu_pd(dy + i)));
    }
    for (; i < n; ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
}

void axpy_v(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d av = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d yv = _mm256_loadu_pd(y + i);
        yv = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), yv);
        _mm256_storeu_pd(y + i, yv);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

double dot_v(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
    double s = hsum(acc);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

double asum_v(const double* x, std::size_t n) {
    const __m256d absmask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_add_pd(acc, _mm256_and_pd(absmask, _mm256_loadu_pd(x + i)));
    double s = hsum(acc);
    for (; i < n; ++i) s += std::fabs(x[i]);
    return s;
}

void sign_step_v(double alpha, const double* g, double* y, double lo, double hi,
                 std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    const __m256d av = _mm256_set1_pd(alpha);
    const __m256d lov = _mm256_set1_pd(lo);
    const __m256d hiv = _mm256_set1_pd(hi);
    const __m256d one = _mm256_set1_pd(1.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d gv = _mm256_loadu_pd(g + i);
        const __m256d pos = _mm256_and_pd(_mm256_cmp_pd(gv, zero, _CMP_GT_OQ), one);
        const __m256d neg = _mm256_and_pd(_mm256_cmp_pd(gv, zero, _CMP_LT_OQ), one);
        const __m256d sgn = _mm256_sub_pd(pos, neg);
        __m256d yv = _mm256_loadu_pd(y + i);
        yv = _mm256_fnmadd_pd(av, sgn, yv);
        yv = _mm256_min_pd(_mm256_max_pd(yv, lov), hiv);
        _mm256_storeu_pd(y + i, yv);
    }
    for (; i < n; ++i) {
        const double s = g[i] > 0.0 ? 1.0 : (g[i] < 0.0 ? -1.0 : 0.0);
        y[i] = std::clamp(y[i] - alpha * s, lo, hi);
    }
}

}  // namespace

bool avx2_available() {
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

const Ops* avx2_ops() {
    if (!avx2_available()) return nullptr;
    static const Ops ops{gemm_nn_v, gemm_tn_v, gemm_nt_v, relu_fwd_v, relu_bwd_v,
                         axpy_v,    dot_v,     asum_v,    sign_step_v};
    return &ops;
}

#else  // non-x86 build

bool avx2_available() { return false; }
const Ops* avx2_ops() { return nullptr; }

#endif

}  // namespace evw::kernels
