#include "evw/net.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "evw/kernels.hpp"

namespace evw {

namespace {

using kernels::ops;

struct Shape3 {
    int c, h, w;
    std::vector<int> vec() const { return {c, h, w}; }
    std::size_t count() const { return static_cast<std::size_t>(c) * h * w; }
};

Shape3 output_shape(const Layer& l, Shape3 in) {
    switch (l.kind) {
        case Layer::Kind::Conv: return {l.out_c, in.h, in.w};
        case Layer::Kind::Relu: return in;
        case Layer::Kind::MaxPool: return {in.c, in.h / l.pool, in.w / l.pool};
        case Layer::Kind::Residual: return in;
        case Layer::Kind::Dense: return {l.out_dim, 1, 1};
    }
    throw std::logic_error("unreachable");
}

void im2col(const double* x, int c, int h, int w, int k, double* col) {
    const int pad = k / 2;
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    double* dst = col;
    for (int ch = 0; ch < c; ++ch) {
        const double* plane = x + ch * hw;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                for (int y = 0; y < h; ++y) {
                    const int sy = y + ky - pad;
                    if (sy < 0 || sy >= h) {
                        std::memset(dst, 0, sizeof(double) * w);
                        dst += w;
                        continue;
                    }
                    const double* srow = plane + static_cast<std::size_t>(sy) * w;
                    for (int x2 = 0; x2 < w; ++x2) {
                        const int sx = x2 + kx - pad;
                        *dst++ = (sx < 0 || sx >= w) ? 0.0 : srow[sx];
                    }
                }
            }
        }
    }
}

void col2im(const double* col, int c, int h, int w, int k, double* x) {
    const int pad = k / 2;
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    std::memset(x, 0, sizeof(double) * c * hw);
    const double* src = col;
    for (int ch = 0; ch < c; ++ch) {
        double* plane = x + ch * hw;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                for (int y = 0; y < h; ++y) {
                    const int sy = y + ky - pad;
                    if (sy < 0 || sy >= h) {
                        src += w;
                        continue;
                    }
                    double* drow = plane + static_cast<std::size_t>(sy) * w;
                    for (int x2 = 0; x2 < w; ++x2) {
                        const int sx = x2 + kx - pad;
                        if (sx >= 0 && sx < w) drow[sx] += *src;
                        ++src;
                    }
                }
            }
        }
    }
}

// y = conv(x) + b, same padding
void conv_fwd(const Tensor& w, const std::vector<double>& b, const double* x, Shape3 in,
              double* y) {
    const int k = w.shape()[2];
    const int oc = w.shape()[0];
    const int cols = in.h * in.w;
    const int rows = in.c * k * k;
    std::vector<double> col(static_cast<std::size_t>(rows) * cols);
    im2col(x, in.c, in.h, in.w, k, col.data());
    ops().gemm_nn(oc, cols, rows, w.data(), col.data(), y);
    for (int o = 0; o < oc; ++o) {
        double* row = y + static_cast<std::size_t>(o) * cols;
        const double bo = b[o];
        for (int i = 0; i < cols; ++i) row[i] += bo;
    }
}

// Given dY, accumulate dW/dB (if any) and produce dX (if non-null).
void conv_bwd(const Tensor& w, const double* x, Shape3 in, const double* dy, Tensor* dw,
              std::vector<double>* db, double* dx) {
    const int k = w.shape()[2];
    const int oc = w.shape()[0];
    const int cols = in.h * in.w;
    const int rows = in.c * k * k;
    if (db) {
        for (int o = 0; o < oc; ++o) {
            const double* row = dy + static_cast<std::size_t>(o) * cols;
            double acc = 0.0;
            for (int i = 0; i < cols; ++i) acc += row[i];
            (*db)[o] += acc;
        }
    }
    if (dw) {
        std::vector<double> col(static_cast<std::size_t>(rows) * cols);
        im2col(x, in.c, in.h, in.w, k, col.data());
        std::vector<double> tmp(static_cast<std::size_t>(oc) * rows);
        ops().gemm_nt(oc, rows, cols, dy, col.data(), tmp.data());
        ops().axpy(1.0, tmp.data(), dw->data(), tmp.size());
    }
    if (dx) {
        std::vector<double> dcol(static_cast<std::size_t>(rows) * cols);
        ops().gemm_tn(rows, cols, oc, w.data(), dy, dcol.data());
        col2im(dcol.data(), in.c, in.h, in.w, k, dx);
    }
}

void maxpool_fwd(const double* x, Shape3 in, int p, double* y, std::vector<int>& idx) {
    const int oh = in.h / p, ow = in.w / p;
    idx.assign(static_cast<std::size_t>(in.c) * oh * ow, 0);
    std::size_t o = 0;
    for (int c = 0; c < in.c; ++c) {
        const double* plane = x + static_cast<std::size_t>(c) * in.h * in.w;
        for (int y0 = 0; y0 < oh; ++y0) {
            for (int x0 = 0; x0 < ow; ++x0, ++o) {
                int best = (y0 * p) * in.w + x0 * p;
                double bv = plane[best];
                for (int dy = 0; dy < p; ++dy)
                    for (int dx = 0; dx < p; ++dx) {
                        const int pos = (y0 * p + dy) * in.w + x0 * p + dx;
                        if (plane[pos] > bv) {
                            bv = plane[pos];
                            best = pos;
                        }
                    }
                y[o] = bv;
                idx[o] = best;
            }
        }
    }
}

void maxpool_bwd(const double* dy, Shape3 in, int p, const std::vector<int>& idx,
                 double* dx) {
    const int oh = in.h / p, ow = in.w / p;
    std::memset(dx, 0, sizeof(double) * in.c * in.h * in.w);
    std::size_t o = 0;
    for (int c = 0; c < in.c; ++c) {
        double* plane = dx + static_cast<std::size_t>(c) * in.h * in.w;
        for (int i = 0; i < oh * ow; ++i, ++o) plane[idx[o]] += dy[o];
    }
}

Shape3 input_shape(const ModelHandle& m) { return {m.in_c, m.in_h, m.in_w}; }

}  // namespace

Trace forward(const ModelHandle& model, const Tensor& input) {
    if (input.shape() != std::vector<int>{model.in_c, model.in_h, model.in_w})
        throw std::invalid_argument("forward: input shape " + input.shape_str() +
                                    " does not match model " + model.arch);
    Trace tr;
    tr.input = input;
    tr.out.resize(model.layers.size());
    tr.aux.resize(model.layers.size());
    tr.argmax.resize(model.layers.size());
    Shape3 shape = input_shape(model);
    const Tensor* x = &tr.input;
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const Layer& l = model.layers[i];
        const Shape3 os = output_shape(l, shape);
        Tensor y(os.vec());
        switch (l.kind) {
            case Layer::Kind::Conv:
                conv_fwd(l.w, l.b, x->data(), shape, y.data());
                break;
            case Layer::Kind::Relu:
                ops().relu_fwd(x->data(), y.data(), y.size());
                break;
            case Layer::Kind::MaxPool:
                maxpool_fwd(x->data(), shape, l.pool, y.data(), tr.argmax[i]);
                break;
            case Layer::Kind::Residual: {
                Tensor t1(shape.vec());
                conv_fwd(l.w, l.b, x->data(), shape, t1.data());
                Tensor a1(shape.vec());
                ops().relu_fwd(t1.data(), a1.data(), a1.size());
                conv_fwd(l.w2, l.b2, a1.data(), shape, y.data());
                ops().axpy(1.0, x->data(), y.data(), y.size());  // skip connection
                tr.aux[i] = std::move(a1);
                ops().relu_fwd(y.data(), y.data(), y.size());
                break;
            }
            case Layer::Kind::Dense: {
                ops().gemm_nn(l.out_dim, 1, l.in_dim, l.w.data(), x->data(), y.data());
                for (int o = 0; o < l.out_dim; ++o) y[o] += l.b[o];
                break;
            }
        }
        tr.out[i] = std::move(y);
        x = &tr.out[i];
        shape = os;
    }
    for (double v : tr.out.back().vec())
        if (!std::isfinite(v)) throw std::runtime_error("forward: non-finite logits");
    return tr;
}

std::vector<std::vector<double>> forward_batch(const ModelHandle& model,
                                               const std::vector<Tensor>& batch) {
    std::vector<std::vector<double>> out;
    out.reserve(batch.size());
    for (const Tensor& x : batch) out.push_back(forward(model, x).logits());
    return out;
}

ParamGrads make_param_grads(const ModelHandle& model) {
    ParamGrads g;
    const std::size_t n = model.layers.size();
    g.dw.resize(n);
    g.dw2.resize(n);
    g.db.resize(n);
    g.db2.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Layer& l = model.layers[i];
        if (!l.w.empty()) {
            g.dw[i] = Tensor(l.w.shape());
            g.db[i].assign(l.b.size(), 0.0);
        }
        if (!l.w2.empty()) {
            g.dw2[i] = Tensor(l.w2.shape());
            g.db2[i].assign(l.b2.size(), 0.0);
        }
    }
    return g;
}

void scale_param_grads(ParamGrads& g, double s) {
    for (auto& t : g.dw)
        for (double& v : t.vec()) v *= s;
    for (auto& t : g.dw2)
        for (double& v : t.vec()) v *= s;
    for (auto& b : g.db)
        for (double& v : b) v *= s;
    for (auto& b : g.db2)
        for (double& v : b) v *= s;
}

Tensor backward(const ModelHandle& model, const Trace& trace,
                const std::vector<double>& dlogits, ParamGrads* grads, Tensor* dfeature) {
    if (static_cast<int>(dlogits.size()) != model.classes)
        throw std::invalid_argument("backward: dlogits size mismatch");

    // input shapes per layer
    std::vector<Shape3> in_shapes(model.layers.size());
    Shape3 shape = input_shape(model);
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        in_shapes[i] = shape;
        shape = output_shape(model.layers[i], shape);
    }

    Tensor cur({model.classes}, dlogits);
    for (int i = static_cast<int>(model.layers.size()) - 1; i >= 0; --i) {
        if (dfeature && i == model.feature_layer) *dfeature = cur;
        const Layer& l = model.layers[i];
        const Shape3 in = in_shapes[i];
        const Tensor& x = (i == 0) ? trace.input : trace.out[i - 1];
        Tensor dx(in.vec());
        switch (l.kind) {
            case Layer::Kind::Conv:
                conv_bwd(l.w, x.data(), in, cur.data(), grads ? &grads->dw[i] : nullptr,
                         grads ? &grads->db[i] : nullptr, dx.data());
                break;
            case Layer::Kind::Relu:
                ops().relu_bwd(x.data(), cur.data(), dx.data(), dx.size());
                break;
            case Layer::Kind::MaxPool:
                maxpool_bwd(cur.data(), in, l.pool, trace.argmax[i], dx.data());
                break;
            case Layer::Kind::Residual: {
                // out = relu(pre), pre = conv2(a1) + x, a1 = relu(conv1(x)).
                // relu_bwd keyed on the stored post-relu output (pre > 0 iff out > 0).
                Tensor dpre(in.vec());
                ops().relu_bwd(trace.out[i].data(), cur.data(), dpre.data(), dpre.size());
                Tensor da1(in.vec());
                conv_bwd(l.w2, trace.aux[i].data(), in, dpre.data(),
                         grads ? &grads->dw2[i] : nullptr, grads ? &grads->db2[i] : nullptr,
                         da1.data());
                Tensor dt1(in.vec());
                ops().relu_bwd(trace.aux[i].data(), da1.data(), dt1.data(), dt1.size());
                conv_bwd(l.w, x.data(), in, dt1.data(), grads ? &grads->dw[i] : nullptr,
                         grads ? &grads->db[i] : nullptr, dx.data());
                ops().axpy(1.0, dpre.data(), dx.data(), dx.size());  // skip path
                break;
            }
            case Layer::Kind::Dense: {
                if (grads) {
                    for (int o = 0; o < l.out_dim; ++o) {
                        ops().axpy(cur[o], x.data(),
                                   grads->dw[i].data() + static_cast<std::size_t>(o) * l.in_dim,
                                   l.in_dim);
                        grads->db[i][o] += cur[o];
                    }
                }
                ops().gemm_tn(l.in_dim, 1, l.out_dim, l.w.data(), cur.data(), dx.data());
                break;
            }
        }
        cur = std::move(dx);
    }
    return cur;
}

FeatureProbe feature_activations(const ModelHandle& model, const Tensor& input,
                                 int class_index) {
    if (model.feature_layer < 0) throw std::invalid_argument("model has no feature layer");
    if (class_index < 0 || class_index >= model.classes)
        throw std::invalid_argument("class index out of range");
    const Trace tr = forward(model, input);
    std::vector<double> dlogits(model.classes, 0.0);
    dlogits[class_index] = 1.0;
    FeatureProbe probe;
    backward(model, tr, dlogits, nullptr, &probe.gradients);
    probe.activations = tr.out[model.feature_layer];
    return probe;
}

int argmax_logit(const std::vector<double>& logits) {
    int best = 0;
    for (std::size_t i = 1; i < logits.size(); ++i)
        if (logits[i] > logits[best]) best = static_cast<int>(i);
    return best;
}

// ---------------------------------------------------------------- save/load

namespace {
constexpr const char* kMagic = "EVWNET v1";

void write_f32(std::ofstream& f, const std::vector<double>& v) {
    std::vector<float> buf(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) buf[i] = static_cast<float>(v[i]);
    f.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

void read_f32(std::ifstream& f, std::vector<double>& v) {
    std::vector<float> buf(v.size());
    f.read(reinterpret_cast<char*>(buf.data()),
           static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (static_cast<std::size_t>(f.gcount()) != buf.size() * sizeof(float))
        throw std::runtime_error("model file truncated");
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = buf[i];
}
}  // namespace

void save_model(const ModelHandle& model, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for write: " + path.string());
    f << kMagic << '\n';
    f << "arch " << model.arch << '\n';
    f << "classes " << model.classes << '\n';
    f << "input " << model.in_c << ' ' << model.in_h << ' ' << model.in_w << '\n';
    f << "norm";
    for (double m : model.spec.mean) f << ' ' << m;
    for (double s : model.spec.stdev) f << ' ' << s;
    f << '\n';
    f << "feature_layer " << model.feature_layer << '\n';
    f << "layers " << model.layers.size() << '\n';
    for (const Layer& l : model.layers) {
        switch (l.kind) {
            case Layer::Kind::Conv:
                f << "conv " << l.in_c << ' ' << l.out_c << ' ' << l.k << '\n';
                break;
            case Layer::Kind::Relu: f << "relu\n"; break;
            case Layer::Kind::MaxPool: f << "maxpool " << l.pool << '\n'; break;
            case Layer::Kind::Residual:
                f << "residual " << l.in_c << ' ' << l.k << '\n';
                break;
            case Layer::Kind::Dense:
                f << "dense " << l.in_dim << ' ' << l.out_dim << '\n';
                break;
        }
    }
    f << "end\n";
    for (const Layer& l : model.layers) {
        if (!l.w.empty()) {
            write_f32(f, l.w.vec());
            write_f32(f, l.b);
        }
        if (!l.w2.empty()) {
            write_f32(f, l.w2.vec());
            write_f32(f, l.b2);
        }
    }
    if (!f) throw std::runtime_error("write failed: " + path.string());
}

ModelHandle load_model(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path.string());
    std::string line;
    if (!std::getline(f, line) || line != kMagic)
        throw std::runtime_error("bad model magic in " + path.string());
    ModelHandle m;
    std::size_t nlayers = 0;
    while (std::getline(f, line)) {
        if (line == "end") break;
        std::istringstream ss(line);
        std::string key;
        ss >> key;
        if (key == "arch") {
            ss >> m.arch;
        } else if (key == "classes") {
            ss >> m.classes;
        } else if (key == "input") {
            ss >> m.in_c >> m.in_h >> m.in_w;
        } else if (key == "norm") {
            std::vector<double> vals;
            for (double v; ss >> v;) vals.push_back(v);
            if (vals.size() % 2 != 0) throw std::runtime_error("bad norm line");
            const std::size_t c = vals.size() / 2;
            m.spec.mean.assign(vals.begin(), vals.begin() + c);
            m.spec.stdev.assign(vals.begin() + c, vals.end());
        } else if (key == "feature_layer") {
            ss >> m.feature_layer;
        } else if (key == "layers") {
            ss >> nlayers;
        } else if (key == "conv" || key == "residual" || key == "dense" || key == "relu" ||
                   key == "maxpool") {
            Layer l{};
            if (key == "conv") {
                l.kind = Layer::Kind::Conv;
                ss >> l.in_c >> l.out_c >> l.k;
                l.w = Tensor({l.out_c, l.in_c, l.k, l.k});
                l.b.assign(l.out_c, 0.0);
            } else if (key == "residual") {
                l.kind = Layer::Kind::Residual;
                ss >> l.in_c >> l.k;
                l.out_c = l.in_c;
                l.w = Tensor({l.out_c, l.in_c, l.k, l.k});
                l.b.assign(l.out_c, 0.0);
                l.w2 = Tensor({l.out_c, l.in_c, l.k, l.k});
                l.b2.assign(l.out_c, 0.0);
            } else if (key == "dense") {
                l.kind = Layer::Kind::Dense;
                ss >> l.in_dim >> l.out_dim;
                l.w = Tensor({l.out_dim, l.in_dim});
                l.b.assign(l.out_dim, 0.0);
            } else if (key == "relu") {
                l.kind = Layer::Kind::Relu;
            } else {
                l.kind = Layer::Kind::MaxPool;
                ss >> l.pool;
            }
            if (ss.fail()) throw std::runtime_error("bad layer line: " + line);
            m.layers.push_back(std::move(l));
        } else {
            throw std::runtime_error("unknown model header key: " + key);
        }
    }
    if (m.layers.size() != nlayers || m.classes <= 0 || !m.spec.valid())
        throw std::runtime_error("inconsistent model header in " + path.string());
    for (Layer& l : m.layers) {
        if (!l.w.empty()) {
            read_f32(f, l.w.vec());
            read_f32(f, l.b);
        }
        if (!l.w2.empty()) {
            read_f32(f, l.w2.vec());
            read_f32(f, l.b2);
        }
    }
    return m;
}

// ------------------------------------------------------------------- archs

namespace arch {
namespace {

void he_init(Tensor& w, std::vector<double>& b, int fan_in, Rng& rng) {
    const double limit = std::sqrt(6.0 / fan_in);
    for (double& v : w.vec()) v = rng.uniform(-limit, limit);
    std::fill(b.begin(), b.end(), 0.0);
}

Layer conv(int in_c, int out_c, int k, Rng& rng) {
    Layer l{};
    l.kind = Layer::Kind::Conv;
    l.in_c = in_c;
    l.out_c = out_c;
    l.k = k;
    l.w = Tensor({out_c, in_c, k, k});
    l.b.assign(out_c, 0.0);
    he_init(l.w, l.b, in_c * k * k, rng);
    return l;
}

Layer residual(int c, int k, Rng& rng) {
    Layer l{};
    l.kind = Layer::Kind::Residual;
    l.in_c = c;
    l.out_c = c;
    l.k = k;
    l.w = Tensor({c, c, k, k});
    l.b.assign(c, 0.0);
    he_init(l.w, l.b, c * k * k, rng);
    l.w2 = Tensor({c, c, k, k});
    l.b2.assign(c, 0.0);
    he_init(l.w2, l.b2, c * k * k, rng);
    return l;
}

Layer relu() {
    Layer l{};
    l.kind = Layer::Kind::Relu;
    return l;
}

Layer maxpool(int p) {
    Layer l{};
    l.kind = Layer::Kind::MaxPool;
    l.pool = p;
    return l;
}

Layer dense(int in_dim, int out_dim, Rng& rng) {
    Layer l{};
    l.kind = Layer::Kind::Dense;
    l.in_dim = in_dim;
    l.out_dim = out_dim;
    l.w = Tensor({out_dim, in_dim});
    l.b.assign(out_dim, 0.0);
    he_init(l.w, l.b, in_dim, rng);
    return l;
}

ModelHandle base(const std::string& name, int in_h, int in_w, int classes) {
    ModelHandle m;
    m.arch = name;
    m.classes = classes;
    m.in_c = 3;
    m.in_h = in_h;
    m.in_w = in_w;
    m.spec = NormalizationSpec::centered(3);
    return m;
}

}  // namespace

ModelHandle convnet(int in_h, int in_w, int classes, Rng& rng) {
    ModelHandle m = base("convnet", in_h, in_w, classes);
    m.layers.push_back(conv(3, 12, 3, rng));
    m.layers.push_back(relu());
    m.layers.push_back(maxpool(2));
    m.layers.push_back(conv(12, 24, 3, rng));
    m.layers.push_back(relu());
    m.layers.push_back(maxpool(2));
    m.layers.push_back(conv(24, 24, 3, rng));
    m.layers.push_back(relu());
    m.feature_layer = 7;
    const int fh = in_h / 4, fw = in_w / 4;
    m.layers.push_back(dense(24 * fh * fw, classes, rng));
    return m;
}

ModelHandle skipnet(int in_h, int in_w, int classes, Rng& rng) {
    ModelHandle m = base("skipnet", in_h, in_w, classes);
    m.layers.push_back(conv(3, 16, 3, rng));
    m.layers.push_back(relu());
    m.layers.push_back(maxpool(2));
    m.layers.push_back(residual(16, 3, rng));
    m.feature_layer = 3;
    m.layers.push_back(maxpool(2));
    const int fh = in_h / 4, fw = in_w / 4;
    m.layers.push_back(dense(16 * fh * fw, classes, rng));
    return m;
}

ModelHandle widenet(int in_h, int in_w, int classes, Rng& rng) {
    ModelHandle m = base("widenet", in_h, in_w, classes);
    m.layers.push_back(conv(3, 24, 5, rng));
    m.layers.push_back(relu());
    m.layers.push_back(maxpool(2));
    m.layers.push_back(conv(24, 24, 5, rng));
    m.layers.push_back(relu());
    m.feature_layer = 4;
    m.layers.push_back(maxpool(2));
    const int fh = in_h / 4, fw = in_w / 4;
    m.layers.push_back(dense(24 * fh * fw, classes, rng));
    return m;
}

// Bag-of-local-features topology: a stack with a deliberately limited
// receptive field produces a per-location class-score map that a global max
// pool aggregates, so the decision is position-free local evidence with no
// large-scale interactions — the patch-model counterpart to the other
// members.
ModelHandle bagnet(int in_h, int in_w, int classes, Rng& rng) {
    ModelHandle m = base("bagnet", in_h, in_w, classes);
    m.layers.push_back(conv(3, 16, 3, rng));
    m.layers.push_back(relu());
    m.layers.push_back(maxpool(2));
    m.layers.push_back(conv(16, 32, 3, rng));
    m.layers.push_back(relu());
    m.layers.push_back(conv(32, 32, 3, rng));
    m.layers.push_back(relu());
    m.feature_layer = 6;
    m.layers.push_back(conv(32, classes, 1, rng));
    m.layers.push_back(maxpool(in_h / 2));
    m.layers.push_back(dense(classes, classes, rng));
    return m;
}

// Same bag-of-local-features family with a distinct topology: wide 5x5 stem
// (receptive field ~13 px).
ModelHandle patchnet(int in_h, int in_w, int classes, Rng& rng) {
    ModelHandle m = base("patchnet", in_h, in_w, classes);
    m.layers.push_back(conv(3, 24, 5, rng));
    m.layers.push_back(relu());
    m.layers.push_back(maxpool(2));
    m.layers.push_back(conv(24, 24, 3, rng));
    m.layers.push_back(relu());
    m.layers.push_back(conv(24, 24, 3, rng));
    m.layers.push_back(relu());
    m.feature_layer = 6;
    m.layers.push_back(conv(24, classes, 1, rng));
    m.layers.push_back(maxpool(in_h / 2));
    m.layers.push_back(dense(classes, classes, rng));
    return m;
}

// Bag-of-features with a residual block in the local feature extractor
// (receptive field ~15 px).
ModelHandle localnet(int in_h, int in_w, int classes, Rng& rng) {
    ModelHandle m = base("localnet", in_h, in_w, classes);
    m.layers.push_back(conv(3, 16, 3, rng));
    m.layers.push_back(relu());
    m.layers.push_back(maxpool(2));
    m.layers.push_back(residual(16, 3, rng));
    m.layers.push_back(conv(16, 32, 3, rng));
    m.layers.push_back(relu());
    m.feature_layer = 5;
    m.layers.push_back(conv(32, classes, 1, rng));
    m.layers.push_back(maxpool(in_h / 2));
    m.layers.push_back(dense(classes, classes, rng));
    return m;
}

ModelHandle by_name(const std::string& name, int in_h, int in_w, int classes, Rng& rng) {
    if (name == "convnet") return convnet(in_h, in_w, classes, rng);
    if (name == "skipnet") return skipnet(in_h, in_w, classes, rng);
    if (name == "widenet") return widenet(in_h, in_w, classes, rng);
    if (name == "bagnet") return bagnet(in_h, in_w, classes, rng);
    if (name == "patchnet") return patchnet(in_h, in_w, classes, rng);
    if (name == "localnet") return localnet(in_h, in_w, classes, rng);
    throw std::invalid_argument("unknown architecture: " + name);
}

std::vector<std::string> names() {
    return {"convnet", "skipnet", "widenet", "bagnet", "patchnet", "localnet"};
}

}  // namespace arch

}  // namespace evw
