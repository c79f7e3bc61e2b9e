#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "evw/image.hpp"
#include "evw/losses.hpp"
#include "evw/net.hpp"
#include "evw/rng.hpp"
#include "evw/tensor.hpp"

namespace evw {

struct AttackConfig {
    double epsilon = 16.0;  // raw 0..255 scale
    double alpha = 2.0;     // raw scale step size
    int iterations = 200;   // T
    int partitions = 4;     // M
    int samples = 9;        // N, 0 disables the block scheme
    LossParams loss;
    double di_probability = 0.7;
    double di_scale_min = 0.84;
    int ti_kernel_size = 5;
    double mi_decay = 1.0;
    std::uint64_t seed = 0;

    double eps_unit() const { return epsilon / 255.0; }
    double alpha_unit() const { return alpha / 255.0; }
    void validate() const;  // throws std::invalid_argument
};

struct MomentumState {
    Tensor g;  // accumulated, zero-initialized to the delta shape
};

// Random resize + placement on a zero (mean-valued) canvas. Parameters are
// drawn once per iteration; the map is linear so gradients route through it.
struct DiParams {
    bool active = false;
    int resized = 0;  // target side length
    int off_y = 0, off_x = 0;
};

DiParams di_draw(int height, int width, double p, double scale_min, Rng& rng);
// x in model-input space (mean == 0); output dims equal input dims
Tensor di_apply(const Tensor& x, const DiParams& params);
// transpose of the forward map
Tensor di_backward(const Tensor& dy, const DiParams& params);
// spec-level batch form
std::vector<Tensor> di_transform(const std::vector<Tensor>& batch, double p, double scale_min,
                                 Rng& rng);

// Normalized Gaussian, odd side length.
Tensor ti_kernel(int size);
// channel-wise 2-D convolution with reflect padding
Tensor ti_smooth(const Tensor& grad, const Tensor& kernel);

// g <- mu*g + grad/||grad||_1 (grad unchanged if its L1 norm is zero)
void mi_accumulate(MomentumState& state, const Tensor& grad, double mu);

// One iteration's frozen randomness: the DI draw plus sampled blocks.
// Exposed so the concatenated objective can be finite-difference checked.
struct IterationPlan {
    DiParams di;
    std::vector<Rect> rects;
};

// Mean loss of the N+1 concatenated images given the adversarial image in
// unit scale. SupHigh has no scalar loss and is rejected here.
double iteration_loss(const ModelHandle& model, const Tensor& adv_unit,
                      const IterationPlan& plan, const LossParams& loss,
                      const TargetSpec& target, const NormalizationSpec& spec);

// Loss (or progress proxy for SupHigh) and the update gradient w.r.t. the
// unit-scale adversarial image: local gradients masked to their blocks,
// routed back through the DI map and the normalization.
std::pair<double, Tensor> iteration_grad(const ModelHandle& model, const Tensor& adv_unit,
                                         const IterationPlan& plan, const LossParams& loss,
                                         const TargetSpec& target,
                                         const NormalizationSpec& spec);

struct AttackResult {
    Image adversarial;
    Perturbation delta;
    std::vector<double> loss_trace;
};

// Block-everywhere iterative attack; degenerates to the plain TMDI baseline
// when cfg.samples == 0.
AttackResult everywhere_attack(const ModelHandle& model, const Image& image,
                               const TargetSpec& target, const AttackConfig& cfg);

// TMDI without any block machinery; bit-identical to samples == 0 above.
AttackResult baseline_attack(const ModelHandle& model, const Image& image,
                             const TargetSpec& target, const AttackConfig& cfg);

// Universal perturbation crafted from the constant mid-gray image.
Perturbation dtuap_craft(const ModelHandle& model, int y_t, const AttackConfig& cfg);

// clip(image + uap) per image, valid range preserved
std::vector<Image> apply_uap(const Perturbation& uap, const std::vector<Image>& images);

}  // namespace evw
