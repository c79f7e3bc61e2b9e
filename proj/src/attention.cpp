#include "evw/attention.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace evw {

namespace {

Tensor upsample_bilinear(const Tensor& src, int out_h, int out_w) {
    const int h = src.shape()[0], w = src.shape()[1];
    Tensor out({out_h, out_w});
    for (int y = 0; y < out_h; ++y) {
        const double sy = (y + 0.5) * h / out_h - 0.5;
        const int y0 = std::clamp(static_cast<int>(std::floor(sy)), 0, h - 1);
        const int y1 = std::min(y0 + 1, h - 1);
        const double ty = std::clamp(sy - std::floor(sy), 0.0, 1.0);
        for (int x = 0; x < out_w; ++x) {
            const double sx = (x + 0.5) * w / out_w - 0.5;
            const int x0 = std::clamp(static_cast<int>(std::floor(sx)), 0, w - 1);
            const int x1 = std::min(x0 + 1, w - 1);
            const double tx = std::clamp(sx - std::floor(sx), 0.0, 1.0);
            const double v =
                (1 - ty) * ((1 - tx) * src[static_cast<std::size_t>(y0) * w + x0] +
                            tx * src[static_cast<std::size_t>(y0) * w + x1]) +
                ty * ((1 - tx) * src[static_cast<std::size_t>(y1) * w + x0] +
                      tx * src[static_cast<std::size_t>(y1) * w + x1]);
            out[static_cast<std::size_t>(y) * out_w + x] = v;
        }
    }
    return out;
}

}  // namespace

AttentionMap gradcam(const ModelHandle& model, const Tensor& input, int class_index) {
    const FeatureProbe probe = feature_activations(model, input, class_index);
    const auto& fshape = probe.activations.shape();
    const int fc = fshape[0], fh = fshape[1], fw = fshape[2];
    const std::size_t plane = static_cast<std::size_t>(fh) * fw;

    // channel weights: spatial mean of the class-score gradient
    Tensor cam({fh, fw});
    for (int c = 0; c < fc; ++c) {
        const double* g = probe.gradients.data() + c * plane;
        double wsum = 0.0;
        for (std::size_t i = 0; i < plane; ++i) wsum += g[i];
        const double weight = wsum / static_cast<double>(plane);
        const double* a = probe.activations.data() + c * plane;
        for (std::size_t i = 0; i < plane; ++i) cam[i] += weight * a[i];
    }
    for (double& v : cam.vec()) v = std::max(0.0, v);

    AttentionMap map;
    map.class_index = class_index;
    map.model_id = model.arch;
    map.heat = upsample_bilinear(cam, input.shape()[1], input.shape()[2]);
    const double mx = *std::max_element(map.heat.vec().begin(), map.heat.vec().end());
    if (mx > 0.0)
        for (double& v : map.heat.vec()) v /= mx;
    return map;
}

Tensor binarize(const AttentionMap& map, double threshold) {
    if (threshold < 0.0 || threshold > 1.0)
        throw std::invalid_argument("binarize: threshold outside [0,1]");
    Tensor mask(map.heat.shape());
    for (std::size_t i = 0; i < mask.size(); ++i)
        mask[i] = map.heat[i] > threshold ? 1.0 : 0.0;
    return mask;
}

CoverageResult coverage(const Tensor& att_v_mask, const Tensor& att_s_mask) {
    if (!att_v_mask.same_shape(att_s_mask))
        throw std::invalid_argument("coverage: mask dims differ");
    CoverageResult res;
    for (std::size_t i = 0; i < att_v_mask.size(); ++i) {
        if (att_v_mask[i] != 0.0) {
            ++res.victim_pixels;
            if (att_s_mask[i] != 0.0) ++res.intersection;
        }
    }
    if (res.victim_pixels == 0)
        throw std::invalid_argument("coverage: empty victim attention (undefined)");
    res.c = static_cast<double>(res.intersection) / static_cast<double>(res.victim_pixels);
    return res;
}

std::vector<CoverageRow> coverage_study(
    const ModelHandle& surrogate, const std::vector<const ModelHandle*>& victims,
    const std::vector<std::pair<std::string, std::vector<Image>>>& variants,
    const std::vector<int>& targets, double threshold) {
    std::vector<CoverageRow> rows;
    for (const ModelHandle* victim : victims) {
        for (const auto& [variant, images] : variants) {
            if (images.size() != targets.size())
                throw std::invalid_argument("coverage_study: images/targets size mismatch");
            CoverageRow row{victim->arch, variant, 0.0, 0, 0};
            double sum = 0.0;
            for (std::size_t i = 0; i < images.size(); ++i) {
                const Tensor& x = images[i].data;
                const Tensor att_s = binarize(gradcam(surrogate, x, targets[i]), threshold);
                const Tensor att_v = binarize(gradcam(*victim, x, targets[i]), threshold);
                bool empty = true;
                for (double v : att_v.vec())
                    if (v != 0.0) {
                        empty = false;
                        break;
                    }
                if (empty) {
                    ++row.n_excluded;
                    continue;
                }
                sum += coverage(att_v, att_s).c;
                ++row.n_images;
            }
            row.mean_c = row.n_images > 0 ? sum / row.n_images : 0.0;
            rows.push_back(row);
        }
    }
    return rows;
}

std::string coverage_csv(const std::vector<CoverageRow>& rows) {
    std::ostringstream ss;
    ss << "victim,variant,mean_c,n_images,n_excluded\n";
    ss.precision(17);
    for (const CoverageRow& r : rows)
        ss << r.victim << ',' << r.variant << ',' << r.mean_c << ',' << r.n_images << ','
           << r.n_excluded << '\n';
    return ss.str();
}

}  // namespace evw
