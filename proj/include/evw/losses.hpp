#pragma once

#include <string>
#include <utility>
#include <vector>

#include "evw/net.hpp"
#include "evw/tensor.hpp"

namespace evw {

enum class LossKind { CE, Logit, Margin, SupHigh };

LossKind loss_kind_from_string(const std::string& s);
std::string to_string(LossKind k);

struct LossParams {
    LossKind kind = LossKind::CE;
    double tau = 1.0;    // Margin temperature
    double beta1 = 1.0;  // SupHigh original-class weight
    double beta2 = 1.0;  // SupHigh suppression weight
    int n_high = 3;      // SupHigh high-confidence class count
};

struct TargetSpec {
    int y_t = 0;
    int y_o = 0;
    int n_high = 3;
};

std::vector<double> softmax(const std::vector<double>& logits);

// -log softmax(logits)[y_t]
double ce_targeted(const std::vector<double>& logits, int y_t);
std::pair<double, std::vector<double>> ce_targeted_with_grad(const std::vector<double>& logits,
                                                             int y_t);

// -logits[y_t]
double logit_loss(const std::vector<double>& logits, int y_t);
std::pair<double, std::vector<double>> logit_loss_with_grad(const std::vector<double>& logits,
                                                            int y_t);

// ce_targeted(logits / tau, y_t)
double margin_loss(const std::vector<double>& logits, int y_t, double tau);
std::pair<double, std::vector<double>> margin_loss_with_grad(const std::vector<double>& logits,
                                                             int y_t, double tau);

// Dispatch for the minimization losses (CE/Logit/Margin).
std::pair<double, std::vector<double>> loss_with_dlogits(const LossParams& params,
                                                         const std::vector<double>& logits,
                                                         int y_t);

// Gram-Schmidt rejection: b - a <a,b>/<a,a>. ||a|| = 0 returns b unchanged
// and sets *degenerate when provided.
Tensor perp_project(const Tensor& b, const Tensor& a, bool* degenerate = nullptr);

// Ascent direction grad(l_t - beta1 l_o) minus the beta2-weighted
// perpendicular part of the high-confidence suppression gradient.
// High-confidence classes are re-picked from the current logits.
Tensor suphigh_direction(const ModelHandle& model, const Tensor& input, const TargetSpec& spec,
                         double beta1, double beta2);

}  // namespace evw
