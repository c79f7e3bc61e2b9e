#include "doctest.h"

#include <cmath>
#include <vector>

#include "evw/kernels.hpp"
#include "evw/rng.hpp"

using namespace evw;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-2.0, 2.0);
    return v;
}

void check_close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(std::fabs(a[i] - b[i]) <= tol * (1.0 + std::fabs(a[i])));
}

}  // namespace

TEST_CASE("gemm_nn matches naive triple loop") {
    Rng rng(11);
    const int shapes[][3] = {{3, 5, 4}, {1, 17, 9}, {8, 8, 8}, {5, 1, 3}};
    for (const auto& s : shapes) {
        const int m = s[0], n = s[1], k = s[2];
        const auto a = random_vec(m * k, rng), b = random_vec(k * n, rng);
        std::vector<double> c(m * n), ref(m * n, 0.0);
        kernels::ops().gemm_nn(m, n, k, a.data(), b.data(), c.data());
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
                for (int p = 0; p < k; ++p) ref[i * n + j] += a[i * k + p] * b[p * n + j];
        check_close(c, ref, 1e-12);
    }
}

TEST_CASE("gemm_tn and gemm_nt agree with transposed gemm_nn") {
    Rng rng(12);
    const int m = 6, n = 10, k = 7;
    const auto a_t = random_vec(k * m, rng);  // stored K x M
    const auto b = random_vec(k * n, rng);
    std::vector<double> a(m * k);
    for (int p = 0; p < k; ++p)
        for (int i = 0; i < m; ++i) a[i * k + p] = a_t[p * m + i];
    std::vector<double> c1(m * n), c2(m * n);
    kernels::ops().gemm_nn(m, n, k, a.data(), b.data(), c1.data());
    kernels::ops().gemm_tn(m, n, k, a_t.data(), b.data(), c2.data());
    check_close(c1, c2, 1e-12);

    const auto bt = random_vec(n * k, rng);  // stored N x K
    std::vector<double> b_nn(k * n);
    for (int j = 0; j < n; ++j)
        for (int p = 0; p < k; ++p) b_nn[p * n + j] = bt[j * k + p];
    kernels::ops().gemm_nn(m, n, k, a.data(), b_nn.data(), c1.data());
    kernels::ops().gemm_nt(m, n, k, a.data(), bt.data(), c2.data());
    check_close(c1, c2, 1e-12);
}

TEST_CASE("scalar and avx2 backends are equivalent") {
    const kernels::Ops* vec = kernels::avx2_ops();
    if (!vec) return;  // no AVX2 on this host
    const kernels::Ops& ref = kernels::scalar_ops();
    Rng rng(13);

    for (std::size_t n : {1u, 3u, 4u, 17u, 256u, 1000u}) {
        const auto x = random_vec(n, rng), y0 = random_vec(n, rng);
        auto y1 = y0, y2 = y0;
        ref.axpy(0.7, x.data(), y1.data(), n);
        vec->axpy(0.7, x.data(), y2.data(), n);
        check_close(y1, y2, 1e-13);

        CHECK(ref.dot(x.data(), y0.data(), n) ==
              doctest::Approx(vec->dot(x.data(), y0.data(), n)).epsilon(1e-12));
        CHECK(ref.asum(x.data(), n) == doctest::Approx(vec->asum(x.data(), n)).epsilon(1e-12));

        std::vector<double> r1(n), r2(n);
        ref.relu_fwd(x.data(), r1.data(), n);
        vec->relu_fwd(x.data(), r2.data(), n);
        check_close(r1, r2, 0.0);
        ref.relu_bwd(x.data(), y0.data(), r1.data(), n);
        vec->relu_bwd(x.data(), y0.data(), r2.data(), n);
        check_close(r1, r2, 0.0);

        auto s1 = y0, s2 = y0;
        ref.sign_step(0.05, x.data(), s1.data(), -0.3, 0.3, n);
        vec->sign_step(0.05, x.data(), s2.data(), -0.3, 0.3, n);
        check_close(s1, s2, 0.0);
    }

    const int shapes[][3] = {{5, 33, 9}, {12, 64, 27}, {3, 7, 2}};
    for (const auto& s : shapes) {
        const int m = s[0], n = s[1], k = s[2];
        const auto a = random_vec(m * k, rng), b = random_vec(k * n, rng);
        std::vector<double> c1(m * n), c2(m * n);
        ref.gemm_nn(m, n, k, a.data(), b.data(), c1.data());
        vec->gemm_nn(m, n, k, a.data(), b.data(), c2.data());
        check_close(c1, c2, 1e-12);

        const auto at = random_vec(k * m, rng);
        ref.gemm_tn(m, n, k, at.data(), b.data(), c1.data());
        vec->gemm_tn(m, n, k, at.data(), b.data(), c2.data());
        check_close(c1, c2, 1e-12);

        const auto bt = random_vec(n * k, rng);
        ref.gemm_nt(m, n, k, a.data(), bt.data(), c1.data());
        vec->gemm_nt(m, n, k, a.data(), bt.data(), c2.data());
        check_close(c1, c2, 1e-12);
    }
}

TEST_CASE("sign_step clamps and handles zero gradient") {
    const kernels::Ops& ops = kernels::ops();
    std::vector<double> g{1.0, -2.0, 0.0};
    std::vector<double> y{0.0, 0.0, 0.1};
    ops.sign_step(0.5, g.data(), y.data(), -0.2, 0.2, 3);
    CHECK(y[0] == doctest::Approx(-0.2));  // clamped
    CHECK(y[1] == doctest::Approx(0.2));
    CHECK(y[2] == doctest::Approx(0.1));  // zero gradient leaves value
}
