#include "doctest.h"

#include <cmath>

#include "evw/attack.hpp"
#include "evw/dataset.hpp"
#include "evw/rng.hpp"
#include "evw/zoo.hpp"

using namespace evw;

namespace {

AttackConfig small_cfg(std::uint64_t seed) {
    AttackConfig cfg;
    cfg.iterations = 4;
    cfg.partitions = 2;
    cfg.samples = 2;
    cfg.ti_kernel_size = 3;
    cfg.seed = seed;
    return cfg;
}

Image random_image(const ModelHandle& m, Rng& rng) {
    Tensor raw({m.in_c, m.in_h, m.in_w});
    for (double& v : raw.vec()) v = rng.uniform(0.0, 255.0);
    return normalize(raw, m.spec);
}

}  // namespace

TEST_CASE("config validation") {
    AttackConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.eps_unit() == doctest::Approx(16.0 / 255.0));
    CHECK(cfg.alpha_unit() == doctest::Approx(2.0 / 255.0));

    auto expect_invalid = [](AttackConfig c) {
        CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    };
    AttackConfig c = cfg;
    c.epsilon = 0;
    expect_invalid(c);
    c = cfg;
    c.samples = 17;  // > M^2 = 16
    expect_invalid(c);
    c = cfg;
    c.ti_kernel_size = 4;
    expect_invalid(c);
    c = cfg;
    c.di_probability = 1.5;
    expect_invalid(c);
    c = cfg;
    c.mi_decay = -0.1;
    expect_invalid(c);
}

TEST_CASE("di transform identity, shape, determinism") {
    Rng rng(1);
    Tensor x({3, 8, 8});
    for (double& v : x.vec()) v = rng.uniform(-1.0, 1.0);

    Rng r0(2);
    const auto id = di_transform({x}, 0.0, 0.84, r0);  // p = 0 -> identity
    CHECK(id[0].vec() == x.vec());

    Rng r1(3), r2(3);
    const auto a = di_transform({x, x}, 1.0, 0.5, r1);
    const auto b = di_transform({x, x}, 1.0, 0.5, r2);
    for (int i = 0; i < 2; ++i) {
        CHECK(a[i].shape() == x.shape());  // dims preserved
        CHECK(a[i].vec() == b[i].vec());   // same rng, same transform
    }
}

TEST_CASE("di gradients route through the map") {
    // <dy, di_apply(x)> must equal <di_backward(dy), x> (adjoint identity)
    Rng rng(7);
    Tensor x({2, 9, 9}), dy({2, 9, 9});
    for (double& v : x.vec()) v = rng.uniform(-1.0, 1.0);
    for (double& v : dy.vec()) v = rng.uniform(-1.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        const DiParams p = di_draw(9, 9, 1.0, 0.5, rng);
        const Tensor y = di_apply(x, p);
        const Tensor dx = di_backward(dy, p);
        double lhs = 0.0, rhs = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            lhs += dy[i] * y[i];
            rhs += dx[i] * x[i];
        }
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
    }
    CHECK_THROWS_AS(di_draw(4, 5, 1.0, 0.5, rng), std::invalid_argument);
}

TEST_CASE("ti kernel and smoothing") {
    const Tensor k1 = ti_kernel(1);
    CHECK(k1.size() == 1);
    CHECK(k1[0] == doctest::Approx(1.0));

    const Tensor k5 = ti_kernel(5);
    double sum = 0.0;
    for (double v : k5.vec()) sum += v;
    CHECK(sum == doctest::Approx(1.0));
    CHECK_THROWS_AS(ti_kernel(4), std::invalid_argument);

    Rng rng(5);
    Tensor g({2, 6, 6});
    for (double& v : g.vec()) v = rng.uniform(-1.0, 1.0);
    const Tensor same = ti_smooth(g, k1);  // 1x1 kernel is the identity
    CHECK(same.vec() == g.vec());

    Tensor c({2, 6, 6});
    c.fill(0.37);
    const Tensor smoothed = ti_smooth(c, k5);  // constant field unchanged
    for (double v : smoothed.vec()) CHECK(v == doctest::Approx(0.37));
}

TEST_CASE("mi accumulation") {
    MomentumState s{Tensor({2})};
    Tensor g({2}, {2.0, -2.0});
    mi_accumulate(s, g, 1.0);
    CHECK(s.g[0] == doctest::Approx(0.5));
    CHECK(s.g[1] == doctest::Approx(-0.5));

    Tensor zero({2});
    mi_accumulate(s, zero, 0.9);  // zero grad: pure decay
    CHECK(s.g[0] == doctest::Approx(0.45));
    CHECK(s.g[1] == doctest::Approx(-0.45));

    MomentumState s2{Tensor({2}, {1.0, 1.0})};
    mi_accumulate(s2, g, 0.0);  // mu = 0 keeps only the normalized grad
    CHECK(s2.g[0] == doctest::Approx(0.5));
    CHECK(s2.g[1] == doctest::Approx(-0.5));
}

TEST_CASE("batch gradient matches finite differences on a 4x4 toy") {
    Rng rng(99);
    ModelHandle m = arch::convnet(4, 4, 5, rng);
    const NormalizationSpec spec = m.spec;
    Tensor adv({3, 4, 4});
    for (double& v : adv.vec()) v = rng.uniform(0.1, 0.9);

    IterationPlan plan;
    plan.di = di_draw(4, 4, 1.0, 0.6, rng);
    const BlockGrid grid = split_blocks(4, 4, 2);
    plan.rects = sample_blocks(grid, 3, rng);

    TargetSpec target{2, 0, 3};
    for (LossKind kind : {LossKind::CE, LossKind::Logit, LossKind::Margin}) {
        LossParams lp;
        lp.kind = kind;
        lp.tau = 1.7;
        auto [loss, grad] = iteration_grad(m, adv, plan, lp, target, spec);
        CHECK(loss == doctest::Approx(iteration_loss(m, adv, plan, lp, target, spec)));
        const double h = 1e-3;
        for (std::size_t i = 0; i < adv.size(); ++i) {
            Tensor ap = adv, am = adv;
            ap[i] += h;
            am[i] -= h;
            const double fd = (iteration_loss(m, ap, plan, lp, target, spec) -
                               iteration_loss(m, am, plan, lp, target, spec)) /
                              (2 * h);
            const double rel = std::fabs(grad[i] - fd) / (std::fabs(grad[i]) + 1e-6);
            CHECK(rel <= 1e-3);
        }
    }
    LossParams sh;
    sh.kind = LossKind::SupHigh;
    CHECK_THROWS_AS(iteration_loss(m, adv, plan, sh, target, spec), std::invalid_argument);
}

TEST_CASE("N=0 everywhere equals baseline bit for bit") {
    Rng rng(13);
    ModelHandle m = arch::skipnet(8, 8, 6, rng);
    const Image img = random_image(m, rng);
    TargetSpec target{3, 1, 3};

    AttackConfig cfg = small_cfg(555);
    cfg.samples = 0;
    const AttackResult a = everywhere_attack(m, img, target, cfg);
    const AttackResult b = baseline_attack(m, img, target, cfg);
    CHECK(a.delta.delta.vec() == b.delta.delta.vec());
    CHECK(a.adversarial.data.vec() == b.adversarial.data.vec());
    CHECK(a.loss_trace == b.loss_trace);

    // baseline ignores samples entirely
    AttackConfig cfg2 = small_cfg(555);
    cfg2.samples = 2;
    const AttackResult c = baseline_attack(m, img, target, cfg2);
    CHECK(c.delta.delta.vec() == b.delta.delta.vec());
}

TEST_CASE("T=0 returns the input unchanged") {
    Rng rng(17);
    ModelHandle m = arch::convnet(8, 8, 6, rng);
    const Image img = random_image(m, rng);
    AttackConfig cfg = small_cfg(1);
    cfg.iterations = 0;
    const AttackResult res = everywhere_attack(m, img, TargetSpec{1, 0, 3}, cfg);
    for (double v : res.delta.delta.vec()) CHECK(v == 0.0);
    CHECK(res.adversarial.data.vec() == img.data.vec());
    CHECK(res.loss_trace.empty());
}

TEST_CASE("attacks respect the budget and are deterministic") {
    Rng rng(23);
    ModelHandle m = arch::widenet(8, 8, 6, rng);
    const Image img = random_image(m, rng);
    TargetSpec target{4, 2, 3};
    AttackConfig cfg = small_cfg(777);
    cfg.iterations = 6;

    const AttackResult a = everywhere_attack(m, img, target, cfg);
    const AttackResult b = everywhere_attack(m, img, target, cfg);
    CHECK(a.delta.delta.vec() == b.delta.delta.vec());  // bit-determinism

    const Tensor unit = image_to_unit(img);
    const double eps = cfg.eps_unit();
    for (std::size_t i = 0; i < unit.size(); ++i) {
        CHECK(std::fabs(a.delta.delta[i]) <= eps + 1e-12);
        const double v = unit[i] + a.delta.delta[i];
        CHECK(v >= -1e-12);
        CHECK(v <= 1.0 + 1e-12);
    }
    for (double l : a.loss_trace) CHECK(std::isfinite(l));
    CHECK(static_cast<int>(a.loss_trace.size()) == cfg.iterations);
}

TEST_CASE("suphigh attack runs and respects the budget") {
    Rng rng(29);
    ModelHandle m = arch::convnet(8, 8, 6, rng);
    const Image img = random_image(m, rng);
    AttackConfig cfg = small_cfg(31);
    cfg.loss.kind = LossKind::SupHigh;
    const AttackResult res = everywhere_attack(m, img, TargetSpec{2, 0, 3}, cfg);
    const double eps = cfg.eps_unit();
    for (double d : res.delta.delta.vec()) CHECK(std::fabs(d) <= eps + 1e-12);
}

TEST_CASE("dtuap bounds and T=0 degenerate") {
    Rng rng(37);
    ModelHandle m = arch::convnet(8, 8, 6, rng);
    AttackConfig cfg = small_cfg(41);
    const Perturbation uap = dtuap_craft(m, 3, cfg);
    for (double d : uap.delta.vec()) CHECK(std::fabs(d) <= cfg.eps_unit() + 1e-12);

    AttackConfig zero = cfg;
    zero.iterations = 0;
    const Perturbation none = dtuap_craft(m, 3, zero);
    for (double d : none.delta.vec()) CHECK(d == 0.0);
}

TEST_CASE("apply_uap clamps and matches elementwise application") {
    Rng rng(43);
    NormalizationSpec spec = NormalizationSpec::centered(3);
    Tensor raw({3, 4, 4});
    for (double& v : raw.vec()) v = rng.uniform(0.0, 255.0);
    raw[0] = 255.0;  // saturated pixel
    const Image img = normalize(raw, spec);

    Perturbation zero{Tensor({3, 4, 4}), 16.0 / 255.0};
    const auto same = apply_uap(zero, {img});
    CHECK(same[0].data.vec() == img.data.vec());

    Perturbation up{Tensor({3, 4, 4}), 16.0 / 255.0};
    up.delta.fill(0.05);
    const auto pushed = apply_uap(up, {img, img});
    const Tensor u = image_to_unit(pushed[0]);
    CHECK(u[0] == doctest::Approx(1.0));  // clamped at the ceiling
    CHECK(pushed[1].data.vec() == pushed[0].data.vec());  // batch row-equals single

    Perturbation bad{Tensor({3, 5, 5}), 16.0 / 255.0};
    CHECK_THROWS_AS(apply_uap(bad, {img}), std::invalid_argument);
}

TEST_CASE("attack progress on a trained-ish model") {
    // a few iterations should raise the target logit on the surrogate
    const Dataset data = make_synthetic(40, 7);
    ModelHandle m = train_model("convnet", data, 3, 2);
    const Image img = normalize(data.items[0].raw255, m.spec);
    const int y_o = data.items[0].label;
    const int y_t = (y_o + 4) % data.classes;
    AttackConfig cfg;
    cfg.iterations = 20;
    cfg.partitions = 2;
    cfg.samples = 2;
    cfg.ti_kernel_size = 3;
    cfg.seed = 5;
    const double before = forward(m, img.data).logits()[y_t];
    const AttackResult res = everywhere_attack(m, img, TargetSpec{y_t, y_o, 3}, cfg);
    const double after = forward(m, res.adversarial.data).logits()[y_t];
    CHECK(after > before);
}
