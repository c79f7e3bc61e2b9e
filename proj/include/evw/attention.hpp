#pragma once

#include <string>
#include <vector>

#include "evw/image.hpp"
#include "evw/net.hpp"
#include "evw/tensor.hpp"

namespace evw {

// GradCAM heat map, bilinearly upsampled to image resolution and
// max-normalized to [0,1] (identically-zero maps stay zero).
struct AttentionMap {
    Tensor heat;  // H x W
    int class_index = 0;
    std::string model_id;
};

struct CoverageResult {
    double c = 0.0;
    std::size_t victim_pixels = 0;
    std::size_t intersection = 0;
};

AttentionMap gradcam(const ModelHandle& model, const Tensor& input, int class_index);

// heat > threshold, as a 0/1 H x W mask
Tensor binarize(const AttentionMap& map, double threshold = 2.0 / 3.0);

// c = |att_v AND att_s| / |att_v|; empty att_v is an error (callers exclude
// such images from averages)
CoverageResult coverage(const Tensor& att_v_mask, const Tensor& att_s_mask);

struct CoverageRow {
    std::string victim;
    std::string variant;
    double mean_c = 0.0;
    int n_images = 0;
    int n_excluded = 0;
};

// Mean coverage per (victim, variant) over crafted adversarial examples,
// attention taken at the target class on both models.
std::vector<CoverageRow> coverage_study(
    const ModelHandle& surrogate, const std::vector<const ModelHandle*>& victims,
    const std::vector<std::pair<std::string, std::vector<Image>>>& variants,
    const std::vector<int>& targets, double threshold = 2.0 / 3.0);

std::string coverage_csv(const std::vector<CoverageRow>& rows);

}  // namespace evw
