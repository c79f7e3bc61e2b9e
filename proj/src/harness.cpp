#include "evw/harness.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

namespace evw {

TargetModeKind target_mode_from_string(const std::string& s) {
    if (s == "random") return TargetModeKind::Random;
    if (s == "least_likely") return TargetModeKind::LeastLikely;
    throw std::invalid_argument("unknown target mode: " + s);
}

std::string to_string(TargetModeKind m) {
    return m == TargetModeKind::Random ? "random" : "least_likely";
}

int select_target(TargetModeKind mode, const std::vector<double>& clean_logits, int y_o,
                  Rng& rng) {
    const int k = static_cast<int>(clean_logits.size());
    if (k < 2) throw std::invalid_argument("select_target: need at least 2 classes");
    if (mode == TargetModeKind::LeastLikely) {
        int best = 0;
        for (int i = 1; i < k; ++i)
            if (clean_logits[i] < clean_logits[best]) best = i;
        return best;
    }
    const int draw = static_cast<int>(rng.uniform_int(k - 1));
    return draw >= y_o ? draw + 1 : draw;  // uniform over classes != y_o
}

namespace {

void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
    jobs = std::max(1, jobs);
    if (jobs == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (int t = 0; t < jobs; ++t)
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    for (std::thread& t : pool) t.join();
}

struct PoolItem {
    Image image;
    int dataset_index = 0;
    int y_o = 0;
    int y_t = 0;
};

// Evaluation images must be correctly classified by the surrogate.
std::vector<PoolItem> build_pool(const ModelHandle& surrogate, const Dataset& dataset,
                                 const TargetMode& mode, int want) {
    std::vector<PoolItem> pool;
    for (std::size_t i = 0; i < dataset.items.size() && static_cast<int>(pool.size()) < want;
         ++i) {
        const Example& e = dataset.items[i];
        const Image img = normalize(e.raw255, surrogate.spec);
        const auto logits = forward(surrogate, img.data).logits();
        if (argmax_logit(logits) != e.label) continue;
        Rng rng = Rng::derive(mode.seed, i);
        PoolItem item{img, static_cast<int>(i), e.label,
                      select_target(mode.mode, logits, e.label, rng)};
        pool.push_back(std::move(item));
    }
    return pool;
}

// success[image][victim], victims in zoo order
std::vector<std::vector<bool>> craft_and_score(const ModelZoo& zoo, const ModelHandle& surrogate,
                                               const std::vector<PoolItem>& pool,
                                               const AttackConfig& cfg, int jobs) {
    std::vector<std::vector<bool>> success(pool.size(),
                                           std::vector<bool>(zoo.models.size(), false));
    parallel_for(static_cast<int>(pool.size()), jobs, [&](int i) {
        const PoolItem& item = pool[i];
        AttackConfig c = cfg;
        c.seed = Rng::derive(cfg.seed, item.dataset_index).bits();
        TargetSpec target{item.y_t, item.y_o, cfg.loss.n_high};
        const AttackResult res = everywhere_attack(surrogate, item.image, target, c);
        for (std::size_t v = 0; v < zoo.models.size(); ++v) {
            const auto logits = forward(zoo.models[v], res.adversarial.data).logits();
            success[i][v] = argmax_logit(logits) == item.y_t;
        }
    });
    return success;
}

std::vector<std::string> surrogate_list(const ModelZoo& zoo, const EvalOptions& opts) {
    if (!opts.surrogates.empty()) return opts.surrogates;
    std::vector<std::string> names;
    for (const ModelHandle& m : zoo.models) names.push_back(m.arch);
    return names;
}

std::vector<LossParams> loss_list(const EvalOptions& opts) {
    if (!opts.losses.empty()) return opts.losses;
    return {LossParams{LossKind::CE}, LossParams{LossKind::Logit}};
}

}  // namespace

TransferReport run_transfer_eval(const ModelZoo& zoo, const Dataset& dataset,
                                 const EvalOptions& opts) {
    TransferReport report;
    report.seed = opts.attack.seed;
    const std::string mode_name = to_string(opts.target_mode.mode);

    for (const std::string& sname : surrogate_list(zoo, opts)) {
        const ModelHandle& surrogate = zoo.by_name(sname);
        const auto pool = build_pool(surrogate, dataset, opts.target_mode, opts.eval_images);
        if (pool.empty()) throw std::runtime_error("no correctly classified eval images for " +
                                                   sname);
        for (const LossParams& loss : loss_list(opts)) {
            std::vector<int> variants{0};
            if (opts.attack.samples > 0) variants.push_back(opts.attack.samples);
            for (int n : variants) {
                AttackConfig cfg = opts.attack;
                cfg.loss = loss;
                cfg.samples = n;
                const auto success = craft_and_score(zoo, surrogate, pool, cfg, opts.jobs);
                const std::string attack_name = n > 0 ? "everywhere" : "baseline";
                int avg_successes = 0, avg_total = 0;
                for (std::size_t v = 0; v < zoo.models.size(); ++v) {
                    TransferCell cell;
                    cell.surrogate = sname;
                    cell.victim = zoo.models[v].arch;
                    cell.attack = attack_name;
                    cell.loss = to_string(loss.kind);
                    cell.mode = mode_name;
                    cell.n_blocks = n;
                    cell.m_partitions = cfg.partitions;
                    cell.epsilon = cfg.epsilon;
                    cell.total = static_cast<int>(pool.size());
                    for (std::size_t i = 0; i < pool.size(); ++i)
                        if (success[i][v]) ++cell.successes;
                    cell.rate = static_cast<double>(cell.successes) / cell.total;
                    if (zoo.models[v].arch != sname) {
                        avg_successes += cell.successes;
                        avg_total += cell.total;
                    }
                    report.cells.push_back(cell);
                }
                // victim-averaged row, surrogate (white-box) excluded
                TransferCell avg;
                avg.surrogate = sname;
                avg.victim = "AVG";
                avg.attack = attack_name;
                avg.loss = to_string(loss.kind);
                avg.mode = mode_name;
                avg.n_blocks = n;
                avg.m_partitions = cfg.partitions;
                avg.epsilon = cfg.epsilon;
                avg.successes = avg_successes;
                avg.total = avg_total;
                avg.rate = avg_total > 0 ? static_cast<double>(avg_successes) / avg_total : 0.0;
                report.cells.push_back(avg);
            }
        }
    }
    return report;
}

UapReport run_uap_eval(const ModelZoo& zoo, const Dataset& dataset,
                       const std::vector<int>& targets, const EvalOptions& opts) {
    UapReport report;
    report.seed = opts.attack.seed;
    const int total = std::min<int>(opts.eval_images, static_cast<int>(dataset.items.size()));
    if (total <= 0) throw std::invalid_argument("run_uap_eval: empty dataset");

    for (const std::string& sname : surrogate_list(zoo, opts)) {
        const ModelHandle& surrogate = zoo.by_name(sname);
        std::vector<Image> images;
        images.reserve(total);
        for (int i = 0; i < total; ++i)
            images.push_back(normalize(dataset.items[i].raw255, surrogate.spec));
        for (const LossParams& loss : loss_list(opts)) {
            std::vector<int> variants{0};
            if (opts.attack.samples > 0) variants.push_back(opts.attack.samples);
            for (int n : variants) {
                for (int y_t : targets) {
                    AttackConfig cfg = opts.attack;
                    cfg.loss = loss;
                    cfg.samples = n;
                    cfg.seed = Rng::derive(opts.attack.seed, static_cast<std::uint64_t>(y_t)).bits();
                    Perturbation uap;
                    if (cfg.epsilon == 0.0) {
                        // zero budget: no crafting, apply the null perturbation
                        uap = Perturbation{Tensor({surrogate.in_c, surrogate.in_h, surrogate.in_w}),
                                           0.0};
                    } else {
                        uap = dtuap_craft(surrogate, y_t, cfg);
                    }
                    UapCell cell;
                    cell.surrogate = sname;
                    cell.attack = n > 0 ? "everywhere" : "baseline";
                    cell.loss = to_string(loss.kind);
                    cell.target_class = y_t;
                    cell.total = total;
                    for (const Image& adv : apply_uap(uap, images))
                        if (argmax_logit(forward(surrogate, adv.data).logits()) == y_t)
                            ++cell.successes;
                    cell.rate = static_cast<double>(cell.successes) / cell.total;
                    report.cells.push_back(cell);
                }
            }
        }
    }
    return report;
}

AblationReport ablation_sweep(const std::string& param, const std::vector<int>& values,
                              const ModelZoo& zoo, const Dataset& dataset,
                              const EvalOptions& opts) {
    if (param != "M" && param != "N")
        throw std::invalid_argument("ablation_sweep: param must be M or N");
    AblationReport report;
    report.param = param;
    report.seed = opts.attack.seed;
    const LossParams loss = loss_list(opts).front();

    for (const std::string& sname : surrogate_list(zoo, opts)) {
        const ModelHandle& surrogate = zoo.by_name(sname);
        const auto pool = build_pool(surrogate, dataset, opts.target_mode, opts.eval_images);
        for (int value : values) {
            AttackConfig cfg = opts.attack;
            cfg.loss = loss;
            if (param == "N")
                cfg.samples = value;
            else {
                cfg.partitions = value;
                cfg.samples = std::min(cfg.samples, value * value);
            }
            if (cfg.samples > cfg.partitions * cfg.partitions || cfg.partitions < 1 ||
                cfg.partitions > std::min(surrogate.in_h, surrogate.in_w)) {
                report.skipped.push_back(sname + ":" + param + "=" + std::to_string(value));
                continue;
            }
            const auto success = craft_and_score(zoo, surrogate, pool, cfg, opts.jobs);
            int hits = 0, total = 0;
            for (std::size_t i = 0; i < pool.size(); ++i)
                for (std::size_t v = 0; v < zoo.models.size(); ++v) {
                    if (zoo.models[v].arch == sname) continue;
                    ++total;
                    if (success[i][v]) ++hits;
                }
            report.points.push_back(
                {sname, value, total > 0 ? static_cast<double>(hits) / total : 0.0});
        }
    }
    return report;
}

// ------------------------------------------------------------------ reports

std::string transfer_csv(const TransferReport& report) {
    std::ostringstream ss;
    ss.precision(17);
    ss << "# config_hash=" << report.config_hash << " seed=" << report.seed << '\n';
    ss << "surrogate,victim,attack,loss,mode,n_blocks,m_partitions,epsilon,successes,total,rate\n";
    for (const TransferCell& c : report.cells)
        ss << c.surrogate << ',' << c.victim << ',' << c.attack << ',' << c.loss << ',' << c.mode
           << ',' << c.n_blocks << ',' << c.m_partitions << ',' << c.epsilon << ','
           << c.successes << ',' << c.total << ',' << c.rate << '\n';
    return ss.str();
}

std::string transfer_json(const TransferReport& report) {
    nlohmann::json j;
    j["config_hash"] = report.config_hash;
    j["seed"] = report.seed;
    j["cells"] = nlohmann::json::array();
    for (const TransferCell& c : report.cells)
        j["cells"].push_back({{"surrogate", c.surrogate},
                              {"victim", c.victim},
                              {"attack", c.attack},
                              {"loss", c.loss},
                              {"mode", c.mode},
                              {"n_blocks", c.n_blocks},
                              {"m_partitions", c.m_partitions},
                              {"epsilon", c.epsilon},
                              {"successes", c.successes},
                              {"total", c.total},
                              {"rate", c.rate}});
    return j.dump(2) + "\n";
}

std::string uap_csv(const UapReport& report) {
    std::ostringstream ss;
    ss.precision(17);
    ss << "# config_hash=" << report.config_hash << " seed=" << report.seed << '\n';
    ss << "surrogate,attack,loss,target_class,successes,total,rate\n";
    for (const UapCell& c : report.cells)
        ss << c.surrogate << ',' << c.attack << ',' << c.loss << ',' << c.target_class << ','
           << c.successes << ',' << c.total << ',' << c.rate << '\n';
    return ss.str();
}

std::string uap_json(const UapReport& report) {
    nlohmann::json j;
    j["config_hash"] = report.config_hash;
    j["seed"] = report.seed;
    j["cells"] = nlohmann::json::array();
    for (const UapCell& c : report.cells)
        j["cells"].push_back({{"surrogate", c.surrogate},
                              {"attack", c.attack},
                              {"loss", c.loss},
                              {"target_class", c.target_class},
                              {"successes", c.successes},
                              {"total", c.total},
                              {"rate", c.rate}});
    return j.dump(2) + "\n";
}

std::string ablation_curve_csv(const AblationReport& report, const std::string& surrogate) {
    std::ostringstream ss;
    ss.precision(17);
    ss << "value,rate\n";
    for (const AblationPoint& p : report.points)
        if (p.surrogate == surrogate) ss << p.value << ',' << p.rate << '\n';
    return ss.str();
}

void emit_report(const std::string& content, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write report: " + path.string());
    f << content;
    if (!f) throw std::runtime_error("report write failed: " + path.string());
}

TransferReport parse_transfer_csv(const std::string& text) {
    TransferReport report;
    std::istringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("surrogate,", 0) == 0) continue;
        std::istringstream ls(line);
        TransferCell c;
        std::string field;
        auto next = [&]() {
            if (!std::getline(ls, field, ',')) throw std::runtime_error("bad csv row: " + line);
            return field;
        };
        c.surrogate = next();
        c.victim = next();
        c.attack = next();
        c.loss = next();
        c.mode = next();
        c.n_blocks = std::stoi(next());
        c.m_partitions = std::stoi(next());
        c.epsilon = std::stod(next());
        c.successes = std::stoi(next());
        c.total = std::stoi(next());
        c.rate = std::stod(next());
        report.cells.push_back(c);
    }
    return report;
}

}  // namespace evw
