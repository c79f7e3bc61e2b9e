#include "evw/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "evw/rng.hpp"

namespace evw {
namespace {

constexpr int kSize = 32;
constexpr int kClasses = 10;

struct Palette {
    double bg[3], fg[3];
};

Palette pick_colors(Rng& rng) {
    Palette p{};
    double dist = 0.0;
    do {
        dist = 0.0;
        for (int c = 0; c < 3; ++c) {
            p.bg[c] = rng.uniform(0.05, 0.95);
            p.fg[c] = rng.uniform(0.05, 0.95);
            dist += std::fabs(p.bg[c] - p.fg[c]);
        }
    } while (dist < 0.35);  // keep figure/ground separable
    return p;
}

// Each class is a small glyph placed at a random position on a noisy
// background, so class evidence is local and position-free: a classifier
// must detect the shape wherever it appears. The label never depends on
// global texture.
bool glyph_hit(int label, double u, double v, double thick) {
    const double r = std::sqrt(u * u + v * v);
    switch (label) {
        case 0:  // filled disc
            return r <= 0.75;
        case 1:  // ring
            return std::fabs(r - 0.72) <= thick;
        case 2:  // upright cross
            return (std::fabs(u) <= thick || std::fabs(v) <= thick) && r <= 1.0;
        case 3:  // diagonal cross
            return (std::fabs(u - v) <= 1.3 * thick || std::fabs(u + v) <= 1.3 * thick) &&
                   std::fabs(u) <= 0.8 && std::fabs(v) <= 0.8;
        case 4:  // square outline
            return std::max(std::fabs(u), std::fabs(v)) <= 0.75 &&
                   std::max(std::fabs(u), std::fabs(v)) >= 0.75 - 2.0 * thick;
        case 5:  // filled square
            return std::max(std::fabs(u), std::fabs(v)) <= 0.62;
        case 6:  // horizontal bars
            return std::fabs(u) <= 0.8 &&
                   (std::fabs(v - 0.42) <= thick || std::fabs(v + 0.42) <= thick);
        case 7:  // vertical bars
            return std::fabs(v) <= 0.8 &&
                   (std::fabs(u - 0.42) <= thick || std::fabs(u + 0.42) <= thick);
        case 8:  // triangle (filled, pointing up)
            return v >= -0.7 && v <= 0.75 && std::fabs(u) <= (v + 0.7) * 0.6;
        case 9:  // four-dot cluster
            for (const double s : {-0.45, 0.45})
                for (const double t : {-0.45, 0.45}) {
                    const double du = u - s, dv = v - t;
                    if (du * du + dv * dv <= 0.32 * 0.32) return true;
                }
            return false;
        default:
            return false;
    }
}

Tensor render(int label, Rng& rng) {
    Tensor img({3, kSize, kSize});
    const Palette pal = pick_colors(rng);
    const double angle = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
    const double gx = std::cos(angle), gy = std::sin(angle);
    const double amp = rng.uniform(0.0, 0.25);  // background shading depth

    // glyph placement: fully inside the canvas, half-size 5..7 px
    const double half = 5.0 + rng.uniform(0.0, 2.0);
    const int margin = static_cast<int>(half) + 1;
    const double cx = margin + rng.uniform(0.0, kSize - 1.0 - 2 * margin);
    const double cy = margin + rng.uniform(0.0, kSize - 1.0 - 2 * margin);
    const double thick = rng.uniform(0.14, 0.22);

    for (int y = 0; y < kSize; ++y) {
        for (int x = 0; x < kSize; ++x) {
            const double shade = amp * (((x - 16) * gx + (y - 16) * gy) / 32.0);
            const bool fg = glyph_hit(label, (x - cx) / half, (y - cy) / half, thick);
            for (int c = 0; c < 3; ++c) {
                double v = fg ? pal.fg[c] : pal.bg[c] + shade;
                v += rng.uniform(-0.08, 0.08);  // sensor-style noise
                img.at(c, y, x) = std::clamp(v, 0.0, 1.0) * 255.0;
            }
        }
    }
    return img;
}

}  // namespace

Dataset make_synthetic(int count, std::uint64_t seed) {
    Dataset ds;
    ds.classes = kClasses;
    ds.height = kSize;
    ds.width = kSize;
    ds.items.reserve(count);
    for (int i = 0; i < count; ++i) {
        Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(i));
        const int label = i % kClasses;
        ds.items.push_back({render(label, rng), label});
    }
    return ds;
}

std::vector<std::string> synthetic_class_names() {
    return {"disc",  "ring",  "cross", "xcross",   "box",
            "square", "hbars", "vbars", "triangle", "dots"};
}

}  // namespace evw
