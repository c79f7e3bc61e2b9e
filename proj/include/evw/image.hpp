#pragma once

#include <vector>

#include "evw/rng.hpp"
#include "evw/tensor.hpp"

namespace evw {

// Per-channel mapping from raw pixels to model input space:
// x = (raw/255 - mean) / std. The dataset mean maps to exactly 0, which
// is also the padding value used by local images.
struct NormalizationSpec {
    std::vector<double> mean;  // per channel, unit scale [0,1]
    std::vector<double> stdev;

    int channels() const { return static_cast<int>(mean.size()); }
    bool valid() const;

    static NormalizationSpec centered(int channels) {
        return {std::vector<double>(channels, 0.5), std::vector<double>(channels, 0.5)};
    }
};

// Image in model-input (normalized) units, C x H x W.
struct Image {
    Tensor data;
    NormalizationSpec spec;

    int channels() const { return data.shape()[0]; }
    int height() const { return data.shape()[1]; }
    int width() const { return data.shape()[2]; }
};

// Additive perturbation in unit pixel scale (fractions of [0,1]).
struct Perturbation {
    Tensor delta;
    double budget = 0.0;  // epsilon, unit scale
};

struct Rect {
    int row = 0, col = 0, height = 0, width = 0;
    bool operator==(const Rect&) const = default;
};

struct BlockGrid {
    int m = 0;
    std::vector<Rect> rects;  // M*M rects tiling the image, row-major
};

// (raw/255 - mean)/std, raw pixels expected in [0, 255]
Image normalize(const Tensor& raw255, const NormalizationSpec& spec);
// inverse of normalize, back to [0, 255]
Tensor denormalize(const Image& img);

// unit-scale [0,1] conversions used by the attack engine
Image image_from_unit(const Tensor& unit, const NormalizationSpec& spec);
Tensor image_to_unit(const Image& img);

// Enforce |delta| <= budget and unit(image) + delta in [0,1]. Idempotent.
Perturbation clip_perturbation(const Perturbation& delta, const Image& image);

// Boundaries at floor(i*L/m); exact tiling even when L % m != 0.
BlockGrid split_blocks(int height, int width, int m);

// Copy rect verbatim, everything else set to the normalized mean (0).
Image make_local_image(const Image& image, const Rect& rect);

// n distinct rects, uniform without replacement, deterministic given rng.
std::vector<Rect> sample_blocks(const BlockGrid& grid, int n, Rng& rng);

}  // namespace evw
