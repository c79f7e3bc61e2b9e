#include "evw/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "evw/kernels.hpp"

namespace evw {

LossKind loss_kind_from_string(const std::string& s) {
    if (s == "CE") return LossKind::CE;
    if (s == "Logit") return LossKind::Logit;
    if (s == "Margin") return LossKind::Margin;
    if (s == "SupHigh") return LossKind::SupHigh;
    throw std::invalid_argument("unknown loss kind: " + s);
}

std::string to_string(LossKind k) {
    switch (k) {
        case LossKind::CE: return "CE";
        case LossKind::Logit: return "Logit";
        case LossKind::Margin: return "Margin";
        case LossKind::SupHigh: return "SupHigh";
    }
    return "?";
}

std::vector<double> softmax(const std::vector<double>& logits) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

static void check_target(const std::vector<double>& logits, int y_t) {
    if (y_t < 0 || y_t >= static_cast<int>(logits.size()))
        throw std::invalid_argument("target class out of range");
    for (double v : logits)
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite logits");
}

double ce_targeted(const std::vector<double>& logits, int y_t) {
    check_target(logits, y_t);
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - mx);
    return -(logits[y_t] - mx - std::log(sum));
}

std::pair<double, std::vector<double>> ce_targeted_with_grad(const std::vector<double>& logits,
                                                             int y_t) {
    check_target(logits, y_t);
    std::vector<double> g = softmax(logits);
    const double loss = -std::log(std::max(g[y_t], 1e-300));
    g[y_t] -= 1.0;
    return {loss, std::move(g)};
}

double logit_loss(const std::vector<double>& logits, int y_t) {
    check_target(logits, y_t);
    return -logits[y_t];
}

std::pair<double, std::vector<double>> logit_loss_with_grad(const std::vector<double>& logits,
                                                            int y_t) {
    check_target(logits, y_t);
    std::vector<double> g(logits.size(), 0.0);
    g[y_t] = -1.0;
    return {-logits[y_t], std::move(g)};
}

double margin_loss(const std::vector<double>& logits, int y_t, double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("margin_loss: tau must be > 0");
    std::vector<double> scaled(logits);
    for (double& v : scaled) v /= tau;
    return ce_targeted(scaled, y_t);
}

std::pair<double, std::vector<double>> margin_loss_with_grad(const std::vector<double>& logits,
                                                             int y_t, double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("margin_loss: tau must be > 0");
    std::vector<double> scaled(logits);
    for (double& v : scaled) v /= tau;
    auto [loss, g] = ce_targeted_with_grad(scaled, y_t);
    for (double& v : g) v /= tau;  // chain through the temperature
    return {loss, std::move(g)};
}

std::pair<double, std::vector<double>> loss_with_dlogits(const LossParams& params,
                                                         const std::vector<double>& logits,
                                                         int y_t) {
    switch (params.kind) {
        case LossKind::CE: return ce_targeted_with_grad(logits, y_t);
        case LossKind::Logit: return logit_loss_with_grad(logits, y_t);
        case LossKind::Margin: return margin_loss_with_grad(logits, y_t, params.tau);
        case LossKind::SupHigh:
            throw std::invalid_argument("SupHigh is a direction, not a scalar loss");
    }
    throw std::logic_error("unreachable");
}

Tensor perp_project(const Tensor& b, const Tensor& a, bool* degenerate) {
    if (!a.same_shape(b)) throw std::invalid_argument("perp_project: shape mismatch");
    const double aa = kernels::ops().dot(a.data(), a.data(), a.size());
    if (degenerate) *degenerate = false;
    if (aa == 0.0) {
        if (degenerate) *degenerate = true;
        return b;
    }
    const double ab = kernels::ops().dot(a.data(), b.data(), b.size());
    Tensor out = b;
    kernels::ops().axpy(-ab / aa, a.data(), out.data(), out.size());
    return out;
}

Tensor suphigh_direction(const ModelHandle& model, const Tensor& input, const TargetSpec& spec,
                         double beta1, double beta2) {
    if (spec.y_t == spec.y_o) throw std::invalid_argument("suphigh: y_t == y_o");
    const Trace tr = forward(model, input);
    const std::vector<double>& logits = tr.logits();
    check_target(logits, spec.y_t);
    check_target(logits, spec.y_o);

    std::vector<double> d1(logits.size(), 0.0);
    d1[spec.y_t] += 1.0;
    d1[spec.y_o] -= beta1;
    Tensor g1 = backward(model, tr, d1);

    if (beta2 == 0.0 || spec.n_high <= 0) return g1;

    // top n_high confident classes, excluding y_t / y_o
    std::vector<int> order(logits.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return logits[a] != logits[b] ? logits[a] > logits[b] : a < b;
    });
    std::vector<double> d2(logits.size(), 0.0);
    int picked = 0;
    for (int c : order) {
        if (c == spec.y_t || c == spec.y_o) continue;
        d2[c] += 1.0;
        if (++picked == spec.n_high) break;
    }
    if (picked == 0) return g1;
    Tensor g2 = backward(model, tr, d2);

    const Tensor rej = perp_project(g2, g1);
    Tensor out = g1;
    kernels::ops().axpy(-beta2, rej.data(), out.data(), out.size());
    return out;
}

}  // namespace evw
