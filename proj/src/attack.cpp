#include "evw/attack.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "evw/kernels.hpp"

namespace evw {

void AttackConfig::validate() const {
    if (!(epsilon > 0.0)) throw std::invalid_argument("attack: epsilon must be > 0");
    if (!(alpha > 0.0)) throw std::invalid_argument("attack: alpha must be > 0");
    if (iterations < 0) throw std::invalid_argument("attack: iterations must be >= 0");
    if (partitions < 1) throw std::invalid_argument("attack: partitions must be >= 1");
    if (samples < 0 || samples > partitions * partitions)
        throw std::invalid_argument("attack: samples must be in [0, M^2]");
    if (di_probability < 0.0 || di_probability > 1.0)
        throw std::invalid_argument("attack: di_probability must be in [0,1]");
    if (!(di_scale_min > 0.0) || di_scale_min > 1.0)
        throw std::invalid_argument("attack: di_scale_min must be in (0,1]");
    if (ti_kernel_size < 1 || ti_kernel_size % 2 == 0)
        throw std::invalid_argument("attack: ti kernel size must be odd");
    if (mi_decay < 0.0) throw std::invalid_argument("attack: mi_decay must be >= 0");
    if (loss.kind == LossKind::Margin && !(loss.tau > 0.0))
        throw std::invalid_argument("attack: margin tau must be > 0");
}

// ------------------------------------------------------------------ DI

DiParams di_draw(int height, int width, double p, double scale_min, Rng& rng) {
    DiParams dp;
    if (height != width) throw std::invalid_argument("di: square inputs only");
    if (rng.uniform() >= p) return dp;  // identity
    dp.active = true;
    const double scale = rng.uniform(scale_min, 1.0);
    dp.resized = std::max(1, static_cast<int>(std::lround(scale * height)));
    if (dp.resized >= height) {
        dp.active = false;  // full-size resize is the identity
        return dp;
    }
    dp.off_y = static_cast<int>(rng.uniform_int(height - dp.resized + 1));
    dp.off_x = static_cast<int>(rng.uniform_int(width - dp.resized + 1));
    return dp;
}

namespace {

// bilinear source coordinates and weights for one output index
struct Lerp {
    int i0, i1;
    double w0, w1;
};

Lerp lerp_coeff(int out_idx, int out_len, int in_len) {
    const double src = (out_idx + 0.5) * in_len / out_len - 0.5;
    double f = std::floor(src);
    int i0 = static_cast<int>(f);
    double t = src - f;
    int i1 = i0 + 1;
    i0 = std::clamp(i0, 0, in_len - 1);
    i1 = std::clamp(i1, 0, in_len - 1);
    return {i0, i1, 1.0 - t, t};
}

}  // namespace

Tensor di_apply(const Tensor& x, const DiParams& p) {
    if (!p.active) return x;
    const int c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
    Tensor out(x.shape());  // zero canvas == dataset mean in model space
    for (int oy = 0; oy < p.resized; ++oy) {
        const Lerp ly = lerp_coeff(oy, p.resized, h);
        for (int ox = 0; ox < p.resized; ++ox) {
            const Lerp lx = lerp_coeff(ox, p.resized, w);
            for (int ch = 0; ch < c; ++ch) {
                const double v = ly.w0 * (lx.w0 * x.at(ch, ly.i0, lx.i0) +
                                          lx.w1 * x.at(ch, ly.i0, lx.i1)) +
                                 ly.w1 * (lx.w0 * x.at(ch, ly.i1, lx.i0) +
                                          lx.w1 * x.at(ch, ly.i1, lx.i1));
                out.at(ch, p.off_y + oy, p.off_x + ox) = v;
            }
        }
    }
    return out;
}

Tensor di_backward(const Tensor& dy, const DiParams& p) {
    if (!p.active) return dy;
    const int c = dy.shape()[0], h = dy.shape()[1], w = dy.shape()[2];
    Tensor dx(dy.shape());
    for (int oy = 0; oy < p.resized; ++oy) {
        const Lerp ly = lerp_coeff(oy, p.resized, h);
        for (int ox = 0; ox < p.resized; ++ox) {
            const Lerp lx = lerp_coeff(ox, p.resized, w);
            for (int ch = 0; ch < c; ++ch) {
                const double g = dy.at(ch, p.off_y + oy, p.off_x + ox);
                dx.at(ch, ly.i0, lx.i0) += ly.w0 * lx.w0 * g;
                dx.at(ch, ly.i0, lx.i1) += ly.w0 * lx.w1 * g;
                dx.at(ch, ly.i1, lx.i0) += ly.w1 * lx.w0 * g;
                dx.at(ch, ly.i1, lx.i1) += ly.w1 * lx.w1 * g;
            }
        }
    }
    return dx;
}

std::vector<Tensor> di_transform(const std::vector<Tensor>& batch, double p, double scale_min,
                                 Rng& rng) {
    std::vector<Tensor> out;
    out.reserve(batch.size());
    for (const Tensor& x : batch)
        out.push_back(di_apply(x, di_draw(x.shape()[1], x.shape()[2], p, scale_min, rng)));
    return out;
}

// ------------------------------------------------------------------ TI

Tensor ti_kernel(int size) {
    if (size < 1 || size % 2 == 0) throw std::invalid_argument("ti_kernel: size must be odd");
    Tensor k({size, size});
    const double sigma = size / 3.0;
    const int r = size / 2;
    double sum = 0.0;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double dy = y - r, dx = x - r;
            const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            k[static_cast<std::size_t>(y) * size + x] = v;
            sum += v;
        }
    for (double& v : k.vec()) v /= sum;
    return k;
}

Tensor ti_smooth(const Tensor& grad, const Tensor& kernel) {
    const int ks = kernel.shape()[0];
    if (ks % 2 == 0) throw std::invalid_argument("ti_smooth: even kernel");
    const int r = ks / 2;
    const int c = grad.shape()[0], h = grad.shape()[1], w = grad.shape()[2];
    Tensor out(grad.shape());
    auto reflect = [](int i, int n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - 1 - i;
        return i;
    };
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int ky = -r; ky <= r; ++ky)
                    for (int kx = -r; kx <= r; ++kx)
                        acc += kernel[static_cast<std::size_t>(ky + r) * ks + (kx + r)] *
                               grad.at(ch, reflect(y + ky, h), reflect(x + kx, w));
                out.at(ch, y, x) = acc;
            }
    return out;
}

// ------------------------------------------------------------------ MI

void mi_accumulate(MomentumState& state, const Tensor& grad, double mu) {
    if (!state.g.same_shape(grad)) throw std::invalid_argument("mi: shape mismatch");
    const double l1 = kernels::ops().asum(grad.data(), grad.size());
    for (std::size_t i = 0; i < state.g.size(); ++i)
        state.g[i] = mu * state.g[i] + (l1 > 0.0 ? grad[i] / l1 : 0.0);
}

// ------------------------------------------------- concatenated objective

namespace {

Tensor unit_to_model(const Tensor& unit, const NormalizationSpec& spec) {
    return image_from_unit(unit, spec).data;
}

void mask_to_rect(Tensor& g, const Rect& r) {
    Tensor masked(g.shape());
    for (int c = 0; c < g.shape()[0]; ++c)
        for (int y = r.row; y < r.row + r.height; ++y)
            for (int x = r.col; x < r.col + r.width; ++x)
                masked.at(c, y, x) = g.at(c, y, x);
    g = std::move(masked);
}

}  // namespace

double iteration_loss(const ModelHandle& model, const Tensor& adv_unit,
                      const IterationPlan& plan, const LossParams& loss,
                      const TargetSpec& target, const NormalizationSpec& spec) {
    if (loss.kind == LossKind::SupHigh)
        throw std::invalid_argument("SupHigh has no scalar batch loss");
    const Tensor xd = di_apply(unit_to_model(adv_unit, spec), plan.di);
    Image global{xd, spec};
    double total = loss_with_dlogits(loss, forward(model, xd).logits(), target.y_t).first;
    for (const Rect& r : plan.rects) {
        const Image local = make_local_image(global, r);
        total += loss_with_dlogits(loss, forward(model, local.data).logits(), target.y_t).first;
    }
    return total / static_cast<double>(plan.rects.size() + 1);
}

std::pair<double, Tensor> iteration_grad(const ModelHandle& model, const Tensor& adv_unit,
                                         const IterationPlan& plan, const LossParams& loss,
                                         const TargetSpec& target,
                                         const NormalizationSpec& spec) {
    const Tensor x_model = unit_to_model(adv_unit, spec);
    const Tensor xd = di_apply(x_model, plan.di);
    const Image global{xd, spec};

    Tensor dxd(xd.shape());
    double total = 0.0;
    auto accumulate = [&](const Tensor& element, const Rect* rect) {
        Tensor g;
        if (loss.kind == LossKind::SupHigh) {
            g = suphigh_direction(model, element, target, loss.beta1, loss.beta2);
            // progress proxy: the negative target logit
            total += -forward(model, element).logits()[target.y_t];
        } else {
            const Trace tr = forward(model, element);
            auto [l, dlogits] = loss_with_dlogits(loss, tr.logits(), target.y_t);
            total += l;
            g = backward(model, tr, dlogits);
        }
        if (rect) mask_to_rect(g, *rect);  // outside the block is constant padding
        kernels::ops().axpy(1.0, g.data(), dxd.data(), dxd.size());
    };

    accumulate(xd, nullptr);
    for (const Rect& r : plan.rects) accumulate(make_local_image(global, r).data, &r);

    const double inv = 1.0 / static_cast<double>(plan.rects.size() + 1);
    for (double& v : dxd.vec()) v *= inv;

    Tensor d_model = di_backward(dxd, plan.di);
    // chain through x = (u - mean)/std
    const std::size_t plane = d_model.size() / spec.channels();
    for (int c = 0; c < spec.channels(); ++c) {
        double* p = d_model.data() + c * plane;
        for (std::size_t i = 0; i < plane; ++i) p[i] /= spec.stdev[c];
    }
    return {total * inv, std::move(d_model)};
}

// ------------------------------------------------------------ attack loops

namespace {

AttackResult run_attack(const ModelHandle& model, const Image& image, const TargetSpec& target,
                        const AttackConfig& cfg, bool block_scheme) {
    cfg.validate();
    if (image.data.shape() != std::vector<int>{model.in_c, model.in_h, model.in_w})
        throw std::invalid_argument("attack: image/model dims incompatible");
    if (target.y_t < 0 || target.y_t >= model.classes)
        throw std::invalid_argument("attack: target class out of range");

    const Tensor unit0 = image_to_unit(image);
    const double eps = cfg.eps_unit();
    // SupHigh accumulates an ascent direction; the others minimize.
    const double step =
        cfg.loss.kind == LossKind::SupHigh ? -cfg.alpha_unit() : cfg.alpha_unit();

    Tensor delta(unit0.shape());
    MomentumState mom{Tensor(unit0.shape())};
    const Tensor kernel = ti_kernel(cfg.ti_kernel_size);
    const BlockGrid grid =
        block_scheme ? split_blocks(model.in_h, model.in_w, cfg.partitions) : BlockGrid{};
    Rng rng(cfg.seed);

    AttackResult res;
    res.loss_trace.reserve(cfg.iterations);
    Tensor adv_unit(unit0.shape());
    for (int t = 0; t < cfg.iterations; ++t) {
        for (std::size_t i = 0; i < adv_unit.size(); ++i) adv_unit[i] = unit0[i] + delta[i];

        IterationPlan plan;
        plan.di = di_draw(model.in_h, model.in_w, cfg.di_probability, cfg.di_scale_min, rng);
        if (block_scheme && cfg.samples > 0) plan.rects = sample_blocks(grid, cfg.samples, rng);

        auto [loss, grad] = iteration_grad(model, adv_unit, plan, cfg.loss, target, image.spec);
        res.loss_trace.push_back(loss);

        const Tensor smoothed = ti_smooth(grad, kernel);
        mi_accumulate(mom, smoothed, cfg.mi_decay);

        kernels::ops().sign_step(step, mom.g.data(), delta.data(), -eps, eps, delta.size());
        for (std::size_t i = 0; i < delta.size(); ++i)
            delta[i] = std::clamp(unit0[i] + delta[i], 0.0, 1.0) - unit0[i];
    }

    for (std::size_t i = 0; i < adv_unit.size(); ++i) adv_unit[i] = unit0[i] + delta[i];
    res.adversarial = image_from_unit(adv_unit, image.spec);
    res.delta = Perturbation{std::move(delta), eps};
    return res;
}

}  // namespace

AttackResult everywhere_attack(const ModelHandle& model, const Image& image,
                               const TargetSpec& target, const AttackConfig& cfg) {
    return run_attack(model, image, target, cfg, true);
}

AttackResult baseline_attack(const ModelHandle& model, const Image& image,
                             const TargetSpec& target, const AttackConfig& cfg) {
    AttackConfig base = cfg;
    base.samples = 0;
    return run_attack(model, image, target, base, false);
}

Perturbation dtuap_craft(const ModelHandle& model, int y_t, const AttackConfig& cfg) {
    Tensor unit({model.in_c, model.in_h, model.in_w});
    unit.fill(0.5);
    const Image mean_image = image_from_unit(unit, model.spec);
    TargetSpec target;
    target.y_t = y_t;
    const auto logits = forward(model, mean_image.data).logits();
    target.y_o = argmax_logit(logits);
    if (target.y_o == y_t)  // pick the runner-up so y_o stays distinct
        target.y_o = (y_t + 1) % model.classes;
    const AttackResult res = everywhere_attack(model, mean_image, target, cfg);
    return res.delta;
}

std::vector<Image> apply_uap(const Perturbation& uap, const std::vector<Image>& images) {
    std::vector<Image> out;
    out.reserve(images.size());
    for (const Image& img : images) {
        if (!img.data.same_shape(uap.delta))
            throw std::invalid_argument("apply_uap: shape mismatch");
        Tensor unit = image_to_unit(img);
        for (std::size_t i = 0; i < unit.size(); ++i)
            unit[i] = std::clamp(unit[i] + uap.delta[i], 0.0, 1.0);
        out.push_back(image_from_unit(unit, img.spec));
    }
    return out;
}

}  // namespace evw
