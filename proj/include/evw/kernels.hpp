#pragma once

#include <cstddef>
#include <string>

// Data-parallel inner loops used by the network and the attack engine.
// Every kernel has a scalar reference implementation and, on x86 with
// AVX2+FMA, a vectorized variant. Dispatch is resolved once at startup;
// the EVW_KERNELS environment variable (scalar|avx2) forces a backend.

namespace evw::kernels {

struct Ops {
    // C[M x N] += / = A[M x K] * B[K x N], row-major, C overwritten.
    void (*gemm_nn)(int m, int n, int k, const double* a, const double* b, double* c);
    // C[M x N] = A[K x M]^T * B[K x N]
    void (*gemm_tn)(int m, int n, int k, const double* a, const double* b, double* c);
    // C[M x N] = A[M x K] * B[N x K]^T
    void (*gemm_nt)(int m, int n, int k, const double* a, const double* b, double* c);

    void (*relu_fwd)(const double* x, double* y, std::size_t n);
    // dx = dy where x > 0 else 0
    void (*relu_bwd)(const double* x, const double* dy, double* dx, std::size_t n);

    // y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*asum)(const double* x, std::size_t n);
    // y = clamp(y - alpha * sign(g), lo, hi) elementwise
    void (*sign_step)(double alpha, const double* g, double* y, double lo, double hi,
                      std::size_t n);
};

// Active backend (set on first use, overridable via EVW_KERNELS).
const Ops& ops();
const Ops& scalar_ops();
bool avx2_available();
// nullptr when unavailable on this CPU
const Ops* avx2_ops();
std::string backend_name();

}  // namespace evw::kernels
