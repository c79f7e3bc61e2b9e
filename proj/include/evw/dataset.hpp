#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evw/tensor.hpp"

namespace evw {

struct Example {
    Tensor raw255;  // 3 x H x W, raw pixel scale
    int label = 0;
};

struct Dataset {
    std::vector<Example> items;
    int classes = 0;
    int height = 0, width = 0;
};

// Procedurally generated 32x32 RGB images: one small glyph (disc, ring,
// cross, bars, triangle, ...) at a random position on a noisy shaded
// background; the glyph shape is the class. Deterministic in (seed, count);
// disjoint splits come from disjoint seeds.
Dataset make_synthetic(int count, std::uint64_t seed);

std::vector<std::string> synthetic_class_names();

}  // namespace evw
