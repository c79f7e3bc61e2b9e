#include "evw/image.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace evw {

bool NormalizationSpec::valid() const {
    if (mean.empty() || mean.size() != stdev.size()) return false;
    for (double s : stdev)
        if (!(s > 0.0) || !std::isfinite(s)) return false;
    for (double m : mean)
        if (!std::isfinite(m)) return false;
    return true;
}

static void check_spec(const Tensor& t, const NormalizationSpec& spec) {
    if (!spec.valid()) throw std::invalid_argument("normalization spec invalid (std must be > 0)");
    if (t.shape().size() != 3 || t.shape()[0] != spec.channels())
        throw std::invalid_argument("image tensor must be CxHxW with C matching spec");
    if (!all_finite(t)) throw std::invalid_argument("non-finite image data");
}

Image normalize(const Tensor& raw255, const NormalizationSpec& spec) {
    check_spec(raw255, spec);
    Image out{Tensor(raw255.shape()), spec};
    const int c = raw255.shape()[0];
    const std::size_t plane = raw255.size() / c;
    for (int ch = 0; ch < c; ++ch) {
        const double m = spec.mean[ch], s = spec.stdev[ch];
        const double* src = raw255.data() + ch * plane;
        double* dst = out.data.data() + ch * plane;
        for (std::size_t i = 0; i < plane; ++i) dst[i] = (src[i] / 255.0 - m) / s;
    }
    return out;
}

Tensor denormalize(const Image& img) {
    Tensor out(img.data.shape());
    const int c = img.channels();
    const std::size_t plane = img.data.size() / c;
    for (int ch = 0; ch < c; ++ch) {
        const double m = img.spec.mean[ch], s = img.spec.stdev[ch];
        const double* src = img.data.data() + ch * plane;
        double* dst = out.data() + ch * plane;
        for (std::size_t i = 0; i < plane; ++i) dst[i] = (src[i] * s + m) * 255.0;
    }
    return out;
}

Image image_from_unit(const Tensor& unit, const NormalizationSpec& spec) {
    check_spec(unit, spec);
    Image out{Tensor(unit.shape()), spec};
    const int c = unit.shape()[0];
    const std::size_t plane = unit.size() / c;
    for (int ch = 0; ch < c; ++ch) {
        const double m = spec.mean[ch], s = spec.stdev[ch];
        const double* src = unit.data() + ch * plane;
        double* dst = out.data.data() + ch * plane;
        for (std::size_t i = 0; i < plane; ++i) dst[i] = (src[i] - m) / s;
    }
    return out;
}

Tensor image_to_unit(const Image& img) {
    Tensor out(img.data.shape());
    const int c = img.channels();
    const std::size_t plane = img.data.size() / c;
    for (int ch = 0; ch < c; ++ch) {
        const double m = img.spec.mean[ch], s = img.spec.stdev[ch];
        const double* src = img.data.data() + ch * plane;
        double* dst = out.data() + ch * plane;
        for (std::size_t i = 0; i < plane; ++i) dst[i] = src[i] * s + m;
    }
    return out;
}

Perturbation clip_perturbation(const Perturbation& delta, const Image& image) {
    if (!delta.delta.same_shape(image.data))
        throw std::invalid_argument("perturbation/image shape mismatch");
    const Tensor unit = image_to_unit(image);
    Perturbation out = delta;
    const double eps = delta.budget;
    for (std::size_t i = 0; i < out.delta.size(); ++i) {
        double d = std::clamp(out.delta[i], -eps, eps);
        d = std::clamp(unit[i] + d, 0.0, 1.0) - unit[i];
        out.delta[i] = d;
    }
    return out;
}

BlockGrid split_blocks(int height, int width, int m) {
    if (m < 1) throw std::invalid_argument("split_blocks: m must be >= 1");
    if (m > height || m > width)
        throw std::invalid_argument("split_blocks: m exceeds image dimension");
    auto bound = [m](int len, int i) {
        return static_cast<int>((static_cast<long long>(i) * len) / m);
    };
    BlockGrid grid;
    grid.m = m;
    grid.rects.reserve(static_cast<std::size_t>(m) * m);
    for (int r = 0; r < m; ++r) {
        const int y0 = bound(height, r), y1 = bound(height, r + 1);
        for (int c = 0; c < m; ++c) {
            const int x0 = bound(width, c), x1 = bound(width, c + 1);
            grid.rects.push_back({y0, x0, y1 - y0, x1 - x0});
        }
    }
    return grid;
}

Image make_local_image(const Image& image, const Rect& rect) {
    if (rect.row < 0 || rect.col < 0 || rect.height <= 0 || rect.width <= 0 ||
        rect.row + rect.height > image.height() || rect.col + rect.width > image.width())
        throw std::invalid_argument("make_local_image: rect out of bounds");
    Image out{Tensor(image.data.shape()), image.spec};
    for (int c = 0; c < image.channels(); ++c)
        for (int y = rect.row; y < rect.row + rect.height; ++y)
            for (int x = rect.col; x < rect.col + rect.width; ++x)
                out.data.at(c, y, x) = image.data.at(c, y, x);
    return out;
}

std::vector<Rect> sample_blocks(const BlockGrid& grid, int n, Rng& rng) {
    const int total = static_cast<int>(grid.rects.size());
    if (n < 0 || n > total) throw std::invalid_argument("sample_blocks: n out of range");
    std::vector<int> idx(total);
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<Rect> out;
    out.reserve(n);
    // partial Fisher-Yates
    for (int i = 0; i < n; ++i) {
        const int j = i + static_cast<int>(rng.uniform_int(total - i));
        std::swap(idx[i], idx[j]);
        out.push_back(grid.rects[idx[i]]);
    }
    return out;
}

}  // namespace evw
