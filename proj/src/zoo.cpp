#include "evw/zoo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "evw/kernels.hpp"
#include "evw/losses.hpp"
#include "evw/rng.hpp"

namespace evw {

namespace {

struct Momentum {
    ParamGrads v;
};

void sgd_step(ModelHandle& m, const ParamGrads& g, Momentum& mom, double lr, double mu) {
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        Layer& l = m.layers[i];
        auto update = [&](Tensor& w, const Tensor& dw, Tensor& vw) {
            for (std::size_t j = 0; j < w.size(); ++j) {
                vw[j] = mu * vw[j] + dw[j];
                w[j] -= lr * vw[j];
            }
        };
        auto update_b = [&](std::vector<double>& b, const std::vector<double>& db,
                            std::vector<double>& vb) {
            for (std::size_t j = 0; j < b.size(); ++j) {
                vb[j] = mu * vb[j] + db[j];
                b[j] -= lr * vb[j];
            }
        };
        if (!l.w.empty()) {
            update(l.w, g.dw[i], mom.v.dw[i]);
            update_b(l.b, g.db[i], mom.v.db[i]);
        }
        if (!l.w2.empty()) {
            update(l.w2, g.dw2[i], mom.v.dw2[i]);
            update_b(l.b2, g.db2[i], mom.v.db2[i]);
        }
    }
}

void snap_to_f32(ModelHandle& m) {
    for (Layer& l : m.layers) {
        for (double& v : l.w.vec()) v = static_cast<float>(v);
        for (double& v : l.b) v = static_cast<float>(v);
        for (double& v : l.w2.vec()) v = static_cast<float>(v);
        for (double& v : l.b2) v = static_cast<float>(v);
    }
}

}  // namespace

ModelHandle train_model(const std::string& architecture, const Dataset& data,
                        std::uint64_t seed, int epochs, TrainStats* stats,
                        const TrainOptions& opts) {
    if (data.items.empty()) throw std::invalid_argument("train_model: empty dataset");
    for (const Example& e : data.items)
        if (e.label < 0 || e.label >= data.classes)
            throw std::invalid_argument("train_model: label out of range");

    Rng rng = Rng::derive(seed, std::hash<std::string>{}(architecture));
    ModelHandle model = arch::by_name(architecture, data.height, data.width, data.classes, rng);

    // normalized inputs, computed once
    std::vector<Tensor> inputs;
    inputs.reserve(data.items.size());
    for (const Example& e : data.items) inputs.push_back(normalize(e.raw255, model.spec).data);

    Momentum mom{make_param_grads(model)};
    std::vector<int> order(data.items.size());
    std::iota(order.begin(), order.end(), 0);

    double lr = opts.lr;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        if (std::find(opts.lr_steps.begin(), opts.lr_steps.end(), epoch) != opts.lr_steps.end())
            lr *= opts.lr_decay;
        rng.shuffle(order);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += opts.batch_size) {
            const std::size_t end = std::min(order.size(), start + opts.batch_size);
            ParamGrads grads = make_param_grads(model);
            for (std::size_t i = start; i < end; ++i) {
                const int idx = order[i];
                Tensor x = inputs[idx];
                if (opts.block_aug > 0.0 && rng.uniform() < opts.block_aug) {
                    const int m = rng.uniform() < 0.5 ? 2 : 4;
                    const BlockGrid grid = split_blocks(data.height, data.width, m);
                    const Rect& r = grid.rects[rng.uniform_int(grid.rects.size())];
                    x = make_local_image(Image{std::move(x), model.spec}, r).data;
                }
                const Trace tr = forward(model, x);
                const auto [loss, dlogits] =
                    ce_targeted_with_grad(tr.logits(), data.items[idx].label);
                loss_sum += loss;
                backward(model, tr, dlogits, &grads);
            }
            scale_param_grads(grads, 1.0 / static_cast<double>(end - start));
            sgd_step(model, grads, mom, lr, opts.momentum);
        }
        if (stats) stats->epoch_loss.push_back(loss_sum / static_cast<double>(order.size()));
    }
    snap_to_f32(model);
    return model;
}

double clean_accuracy(const ModelHandle& model, const Dataset& data) {
    int correct = 0;
    for (const Example& e : data.items) {
        const Trace tr = forward(model, normalize(e.raw255, model.spec).data);
        if (argmax_logit(tr.logits()) == e.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.items.size());
}

const ModelHandle& ModelZoo::by_name(const std::string& name) const {
    for (const ModelHandle& m : models)
        if (m.arch == name) return m;
    throw std::invalid_argument("no such model in zoo: " + name);
}

ModelZoo train_zoo(const Dataset& data, std::uint64_t seed, int epochs,
                   const TrainOptions& opts) {
    ModelZoo zoo;
    for (const std::string& name : opts.archs)
        zoo.models.push_back(train_model(name, data, seed, epochs, nullptr, opts));
    // Prefer the bag-of-local-features member as the default surrogate: its
    // peaked, position-free attention makes it the most informative base for
    // the block-level experiments.
    zoo.surrogate = zoo.models.front().arch;
    for (const ModelHandle& m : zoo.models)
        if (m.arch == "bagnet") zoo.surrogate = m.arch;
    return zoo;
}

void save_zoo(const ModelZoo& zoo, const std::filesystem::path& dir, std::uint64_t seed) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["seed"] = seed;
    manifest["surrogate"] = zoo.surrogate;
    manifest["models"] = nlohmann::json::array();
    for (const ModelHandle& m : zoo.models) {
        save_model(m, dir / (m.arch + ".evw"));
        manifest["models"].push_back(
            {{"arch", m.arch}, {"file", m.arch + ".evw"}, {"classes", m.classes}});
    }
    std::ofstream f(dir / "zoo.json");
    if (!f) throw std::runtime_error("cannot write zoo manifest");
    f << manifest.dump(2) << '\n';
}

ModelZoo load_zoo(const std::filesystem::path& dir) {
    std::ifstream f(dir / "zoo.json");
    if (!f) throw std::runtime_error("no zoo manifest in " + dir.string());
    nlohmann::json manifest = nlohmann::json::parse(f);
    ModelZoo zoo;
    zoo.surrogate = manifest.at("surrogate").get<std::string>();
    for (const auto& entry : manifest.at("models"))
        zoo.models.push_back(load_model(dir / entry.at("file").get<std::string>()));
    return zoo;
}

}  // namespace evw
