#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "evw/attention.hpp"
#include "evw/net.hpp"
#include "evw/rng.hpp"

using namespace evw;

namespace {

Tensor random_input(const ModelHandle& m, Rng& rng) {
    Tensor x({m.in_c, m.in_h, m.in_w});
    for (double& v : x.vec()) v = rng.uniform(-1.0, 1.0);
    return x;
}

}  // namespace

TEST_CASE("gradcam basic properties") {
    Rng rng(3);
    ModelHandle m = arch::convnet(16, 16, 6, rng);
    const Tensor x = random_input(m, rng);
    const AttentionMap map = gradcam(m, x, 2);
    CHECK(map.heat.shape() == std::vector<int>{16, 16});
    CHECK(map.class_index == 2);
    CHECK(map.model_id == "convnet");
    double mx = 0.0;
    for (double v : map.heat.vec()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        mx = std::max(mx, v);
    }
    // non-degenerate map normalizes to max exactly 1
    if (mx > 0.0) CHECK(mx == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("gradcam of a constant logit is the zero map") {
    Rng rng(5);
    ModelHandle m = arch::convnet(16, 16, 6, rng);
    Layer& dense = m.layers.back();
    // zero the weight row of class 0: its logit no longer depends on the input
    std::fill(dense.w.vec().begin(), dense.w.vec().begin() + dense.in_dim, 0.0);
    const AttentionMap map = gradcam(m, random_input(m, rng), 0);
    for (double v : map.heat.vec()) CHECK(v == 0.0);
}

TEST_CASE("gradcam is invariant to a constant logit shift") {
    Rng rng(7);
    ModelHandle m = arch::widenet(16, 16, 6, rng);
    const Tensor x = random_input(m, rng);
    const AttentionMap a = gradcam(m, x, 3);
    ModelHandle shifted = m;
    for (double& b : shifted.layers.back().b) b += 11.0;
    const AttentionMap b = gradcam(shifted, x, 3);
    for (std::size_t i = 0; i < a.heat.size(); ++i)
        CHECK(a.heat[i] == doctest::Approx(b.heat[i]).epsilon(1e-12));
}

TEST_CASE("binarize thresholds and idempotence") {
    AttentionMap zero;
    zero.heat = Tensor({4, 4});
    const Tensor empty = binarize(zero);
    for (double v : empty.vec()) CHECK(v == 0.0);

    AttentionMap map;
    map.heat = Tensor({2, 2}, {0.0, 0.5, 0.7, 1.0});
    const Tensor m23 = binarize(map);
    CHECK(m23.vec() == std::vector<double>{0.0, 0.0, 1.0, 1.0});

    const Tensor support = binarize(map, 0.0);  // mask = support of heat
    CHECK(support.vec() == std::vector<double>{0.0, 1.0, 1.0, 1.0});

    // binarizing an already 0/1 map with threshold < 1 is the identity
    AttentionMap again;
    again.heat = m23;
    CHECK(binarize(again).vec() == m23.vec());

    CHECK_THROWS_AS(binarize(map, 1.5), std::invalid_argument);
}

TEST_CASE("normalized non-degenerate map binarizes non-empty") {
    Rng rng(9);
    ModelHandle m = arch::skipnet(16, 16, 6, rng);
    const AttentionMap map = gradcam(m, random_input(m, rng), 1);
    const double mx = *std::max_element(map.heat.vec().begin(), map.heat.vec().end());
    const Tensor mask = binarize(map);
    double count = 0.0;
    for (double v : mask.vec()) count += v;
    if (mx > 0.0) CHECK(count >= 1.0);
}

TEST_CASE("coverage cases") {
    Tensor a({2, 2}, {1.0, 1.0, 0.0, 0.0});
    const CoverageResult same = coverage(a, a);
    CHECK(same.c == 1.0);
    CHECK(same.victim_pixels == 2);
    CHECK(same.intersection == 2);

    Tensor b({2, 2}, {0.0, 0.0, 1.0, 1.0});
    CHECK(coverage(a, b).c == 0.0);

    Tensor super({2, 2}, {1.0, 1.0, 1.0, 0.0});
    CHECK(coverage(a, super).c == 1.0);  // att_v subset of att_s

    Tensor half({2, 2}, {1.0, 0.0, 0.0, 0.0});
    CHECK(coverage(a, half).c == doctest::Approx(0.5));

    Tensor empty({2, 2});
    CHECK_THROWS_AS(coverage(empty, a), std::invalid_argument);
    Tensor wrong({3, 3});
    CHECK_THROWS_AS(coverage(a, wrong), std::invalid_argument);
}

TEST_CASE("coverage is scale-free under integer upsampling") {
    Rng rng(11);
    Tensor v({4, 4}), s({4, 4});
    for (double& x : v.vec()) x = rng.uniform() < 0.5 ? 1.0 : 0.0;
    for (double& x : s.vec()) x = rng.uniform() < 0.5 ? 1.0 : 0.0;
    v[0] = 1.0;  // keep att_v nonempty
    auto upsample2 = [](const Tensor& t) {
        const int h = t.shape()[0], w = t.shape()[1];
        Tensor out({2 * h, 2 * w});
        for (int y = 0; y < 2 * h; ++y)
            for (int x = 0; x < 2 * w; ++x)
                out[static_cast<std::size_t>(y) * 2 * w + x] =
                    t[static_cast<std::size_t>(y / 2) * w + x / 2];
        return out;
    };
    CHECK(coverage(v, s).c == doctest::Approx(coverage(upsample2(v), upsample2(s)).c));
}

TEST_CASE("coverage_study with surrogate as its own victim reports C = 1") {
    Rng rng(13);
    ModelHandle m = arch::convnet(16, 16, 6, rng);
    std::vector<Image> images;
    std::vector<int> targets;
    for (int i = 0; i < 3; ++i) {
        Tensor x({3, 16, 16});
        for (double& v : x.vec()) v = rng.uniform(-1.0, 1.0);
        images.push_back(Image{x, m.spec});
        targets.push_back(i % m.classes);
    }
    const auto rows = coverage_study(m, {&m}, {{"self", images}}, targets);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].victim == "convnet");
    CHECK(rows[0].variant == "self");
    CHECK(rows[0].n_images + rows[0].n_excluded == 3);
    if (rows[0].n_images > 0) CHECK(rows[0].mean_c == doctest::Approx(1.0));

    const std::string csv = coverage_csv(rows);
    CHECK(csv.rfind("victim,variant,mean_c,n_images,n_excluded\n", 0) == 0);
    CHECK(csv.find("convnet,self,") != std::string::npos);
}
