#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "evw/image.hpp"
#include "evw/rng.hpp"
#include "evw/tensor.hpp"

namespace evw {

// Sequential CNN with an optional two-conv residual block. Convolutions are
// stride 1 with same padding; pooling is non-overlapping max.
struct Layer {
    enum class Kind { Conv, Relu, MaxPool, Residual, Dense };
    Kind kind;

    // Conv / Residual(first conv) / Dense (w is out_dim x in_dim)
    Tensor w;
    std::vector<double> b;
    int in_c = 0, out_c = 0, k = 0;
    // Residual second conv
    Tensor w2;
    std::vector<double> b2;
    // MaxPool window (stride == window)
    int pool = 0;
    // Dense dims
    int in_dim = 0, out_dim = 0;
};

// Immutable after training/loading; forward and gradient calls are safe to
// run concurrently on one handle.
struct ModelHandle {
    std::string arch;
    int classes = 0;
    int in_c = 0, in_h = 0, in_w = 0;
    NormalizationSpec spec;
    std::vector<Layer> layers;
    int feature_layer = -1;  // layer whose output feeds GradCAM
};

// Per-call activation record; owns everything backward needs.
struct Trace {
    Tensor input;
    std::vector<Tensor> out;             // output of each layer
    std::vector<Tensor> aux;             // residual: post-relu of inner conv
    std::vector<std::vector<int>> argmax;  // maxpool winner offsets
    const std::vector<double>& logits() const { return out.back().vec(); }
};

struct ParamGrads {
    // mirrors Layer storage; only entries for parameterized layers are used
    std::vector<Tensor> dw, dw2;
    std::vector<std::vector<double>> db, db2;
};

Trace forward(const ModelHandle& model, const Tensor& input);

// Logits only, batched; row i equals the single-image result for batch[i].
std::vector<std::vector<double>> forward_batch(const ModelHandle& model,
                                               const std::vector<Tensor>& batch);

// Backpropagate dlogits to the input. When grads is non-null, parameter
// gradients are accumulated into it. When dfeature is non-null, the gradient
// w.r.t. the feature layer's output is stored there.
Tensor backward(const ModelHandle& model, const Trace& trace,
                const std::vector<double>& dlogits, ParamGrads* grads = nullptr,
                Tensor* dfeature = nullptr);

ParamGrads make_param_grads(const ModelHandle& model);
void scale_param_grads(ParamGrads& g, double s);

// Feature maps A and d(logit of class)/dA at the designated layer.
struct FeatureProbe {
    Tensor activations;
    Tensor gradients;
};
FeatureProbe feature_activations(const ModelHandle& model, const Tensor& input,
                                 int class_index);

int argmax_logit(const std::vector<double>& logits);

// Weight file: textual header, then little-endian float32 parameter blocks
// in declaration order.
void save_model(const ModelHandle& model, const std::filesystem::path& path);
ModelHandle load_model(const std::filesystem::path& path);

// Builders used by the zoo and by tests needing toy geometries.
namespace arch {
ModelHandle convnet(int in_h, int in_w, int classes, Rng& rng);
ModelHandle skipnet(int in_h, int in_w, int classes, Rng& rng);
ModelHandle widenet(int in_h, int in_w, int classes, Rng& rng);
// Bag-of-local-features family: limited receptive field + global max pool of
// a per-location class-score map.
ModelHandle bagnet(int in_h, int in_w, int classes, Rng& rng);
ModelHandle patchnet(int in_h, int in_w, int classes, Rng& rng);
ModelHandle localnet(int in_h, int in_w, int classes, Rng& rng);
ModelHandle by_name(const std::string& name, int in_h, int in_w, int classes, Rng& rng);
std::vector<std::string> names();
}  // namespace arch

}  // namespace evw
