// Command-line driver for training the model zoo, crafting block-everywhere
// adversarial examples, and running the evaluation harness.
//
// Exit codes: 0 success, 2 configuration error, 3 runtime error.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "evw/attack.hpp"
#include "evw/attention.hpp"
#include "evw/config.hpp"
#include "evw/dataset.hpp"
#include "evw/harness.hpp"
#include "evw/io.hpp"
#include "evw/zoo.hpp"

namespace fs = std::filesystem;
using namespace evw;

namespace {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CommonArgs {
    std::string config_file;
    std::string out_dir;
    std::vector<std::string> sets;  // key=value overrides
    int jobs = 1;
};

fs::path default_out_dir() {
    if (const char* env = std::getenv("EVW_OUT_DIR")) return env;
    return "out";
}

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_file, "key=value config file");
    cmd->add_option("--out", args.out_dir, "output directory (default $EVW_OUT_DIR or ./out)");
    cmd->add_option("--set", args.sets, "override a config key, e.g. --set epsilon=8")
        ->take_all();
    cmd->add_option("--jobs", args.jobs, "parallel image attacks")->check(CLI::PositiveNumber);
}

// precedence: --set > file > defaults (defaults live at the read sites)
KeyValueConfig load_config(const CommonArgs& args) {
    KeyValueConfig cfg;
    if (!args.config_file.empty()) {
        try {
            cfg = KeyValueConfig::from_file(args.config_file);
        } catch (const std::exception& e) {
            throw ConfigError(e.what());
        }
    }
    for (const std::string& kv : args.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ConfigError("--set expects key=value, got: " + kv);
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
}

fs::path resolve_out(const CommonArgs& args) {
    return args.out_dir.empty() ? default_out_dir() : fs::path(args.out_dir);
}

AttackConfig parse_attack(const KeyValueConfig& cfg) {
    try {
        return attack_config_from(cfg);
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
}

std::vector<int> parse_int_list(const std::string& text, const std::string& what) {
    std::vector<int> out;
    std::istringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            out.push_back(std::stoi(tok));
        } catch (const std::exception&) {
            throw ConfigError("bad integer in " + what + ": " + tok);
        }
    }
    if (out.empty()) throw ConfigError(what + " must be a non-empty comma list");
    return out;
}

std::vector<std::string> parse_str_list(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) out.push_back(tok);
    return out;
}

std::vector<LossParams> parse_losses(const KeyValueConfig& cfg, const AttackConfig& attack) {
    std::vector<LossParams> out;
    for (const std::string& name : parse_str_list(cfg.get("losses", "CE,Logit"))) {
        LossParams p = attack.loss;
        try {
            p.kind = loss_kind_from_string(name);
        } catch (const std::exception& e) {
            throw ConfigError(e.what());
        }
        out.push_back(p);
    }
    if (out.empty()) throw ConfigError("losses must name at least one loss");
    return out;
}

ModelZoo load_zoo_checked(const fs::path& dir) {
    if (!fs::exists(dir / "zoo.json"))
        throw ConfigError("no trained zoo at " + dir.string() + " (run `evw train` first)");
    return load_zoo(dir);
}

EvalOptions eval_options(const KeyValueConfig& cfg, const CommonArgs& args) {
    EvalOptions opts;
    opts.attack = parse_attack(cfg);
    opts.losses = parse_losses(cfg, opts.attack);
    try {
        opts.target_mode.mode = target_mode_from_string(cfg.get("target_mode", "random"));
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    opts.target_mode.seed = cfg.get_u64("target_seed", opts.attack.seed);
    opts.eval_images = cfg.get_int("eval_images", 200);
    if (opts.eval_images < 1) throw ConfigError("eval_images must be >= 1");
    opts.jobs = args.jobs;
    opts.surrogates = parse_str_list(cfg.get("surrogates", ""));
    return opts;
}

Dataset eval_dataset(const KeyValueConfig& cfg) {
    const int count = cfg.get_int("data_count", 600);
    if (count < 1) throw ConfigError("data_count must be >= 1");
    return make_synthetic(count, cfg.get_u64("data_seed", 2));
}

// Raw pixels quantized the way PNG emission quantizes them.
Tensor quantize_bytes(const Tensor& raw255) {
    Tensor out(raw255.shape());
    for (std::size_t i = 0; i < raw255.size(); ++i)
        out[i] = std::clamp(std::lround(raw255[i]), 0L, 255L);
    return out;
}

// Byte-exact adversarial raster: original bytes plus the rounded raw-scale
// perturbation, clamped so the audit invariants hold by construction.
Tensor quantize_adv(const Tensor& orig_bytes, const Tensor& delta_unit, double epsilon) {
    const long budget = static_cast<long>(std::floor(epsilon));
    Tensor out(orig_bytes.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const long db = std::clamp(std::lround(delta_unit[i] * 255.0), -budget, budget);
        out[i] = std::clamp(static_cast<long>(orig_bytes[i]) + db, 0L, 255L);
    }
    return out;
}

// ----------------------------------------------------------------- commands

int cmd_train(const CommonArgs& args) {
    const KeyValueConfig cfg = load_config(args);
    const fs::path out = resolve_out(args);
    const int count = cfg.get_int("train_count", 3000);
    const int epochs = cfg.get_int("epochs", TrainOptions{}.epochs);
    const std::uint64_t data_seed = cfg.get_u64("train_data_seed", 1);
    const std::uint64_t seed = cfg.get_u64("seed", 0);
    if (count < 1 || epochs < 1) throw ConfigError("train_count and epochs must be >= 1");

    const Dataset train = make_synthetic(count, data_seed);
    const Dataset test = make_synthetic(cfg.get_int("test_count", 200),
                                        cfg.get_u64("test_data_seed", data_seed + 1));
    const ModelZoo zoo = train_zoo(train, seed, epochs);
    save_zoo(zoo, out / "zoo", seed);

    std::ostringstream csv;
    csv.precision(17);
    csv << "# config_hash=" << config_hash(cfg) << " seed=" << seed << '\n';
    csv << "arch,clean_accuracy\n";
    for (const ModelHandle& m : zoo.models) {
        const double acc = clean_accuracy(m, test);
        csv << m.arch << ',' << acc << '\n';
        std::cout << m.arch << ": clean accuracy " << acc * 100.0 << "%\n";
    }
    emit_report(csv.str(), out / "zoo" / "accuracy.csv");
    std::cout << "zoo written to " << (out / "zoo").string() << '\n';
    return 0;
}

int cmd_attack(const CommonArgs& args) {
    const KeyValueConfig cfg = load_config(args);
    const fs::path out = resolve_out(args);
    const AttackConfig attack = parse_attack(cfg);
    const int count = cfg.get_int("attack_count", 8);
    if (count < 1) throw ConfigError("attack_count must be >= 1");

    const ModelZoo zoo = load_zoo_checked(
        cfg.has("models") ? fs::path(cfg.get("models", "")) : out / "zoo");
    const std::string sname = cfg.get("surrogate", zoo.surrogate);
    const ModelHandle& surrogate = [&]() -> const ModelHandle& {
        try {
            return zoo.by_name(sname);
        } catch (const std::exception& e) {
            throw ConfigError(e.what());
        }
    }();

    const Dataset data = eval_dataset(cfg);
    TargetMode mode;
    try {
        mode.mode = target_mode_from_string(cfg.get("target_mode", "random"));
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    mode.seed = cfg.get_u64("target_seed", attack.seed);

    const fs::path dir = out / "attack";
    fs::create_directories(dir);
    nlohmann::json manifest;
    manifest["config_hash"] = config_hash(cfg);
    manifest["seed"] = attack.seed;
    manifest["epsilon"] = attack.epsilon;
    manifest["images"] = nlohmann::json::array();

    int emitted = 0;
    for (std::size_t i = 0; i < data.items.size() && emitted < count; ++i) {
        const Example& e = data.items[i];
        const Tensor orig_bytes = quantize_bytes(e.raw255);
        const Image img = normalize(orig_bytes, surrogate.spec);
        const auto clean_logits = forward(surrogate, img.data).logits();
        if (argmax_logit(clean_logits) != e.label) continue;

        Rng trng = Rng::derive(mode.seed, i);
        const int y_t = select_target(mode.mode, clean_logits, e.label, trng);
        AttackConfig c = attack;
        c.seed = Rng::derive(attack.seed, i).bits();
        const AttackResult res =
            everywhere_attack(surrogate, img, TargetSpec{y_t, e.label, attack.loss.n_high}, c);

        const Tensor adv_bytes = quantize_adv(orig_bytes, res.delta.delta, attack.epsilon);
        char name[32];
        std::snprintf(name, sizeof(name), "%04d", emitted);
        const std::string orig_file = std::string("orig_") + name + ".png";
        const std::string adv_file = std::string("adv_") + name + ".png";
        io::write_png_rgb(orig_bytes, dir / orig_file);
        io::write_png_rgb(adv_bytes, dir / adv_file);

        const Image adv_img = normalize(adv_bytes, surrogate.spec);
        const bool hit = argmax_logit(forward(surrogate, adv_img.data).logits()) == y_t;
        manifest["images"].push_back({{"dataset_index", i},
                                      {"y_o", e.label},
                                      {"y_t", y_t},
                                      {"surrogate_success", hit},
                                      {"orig", orig_file},
                                      {"adv", adv_file}});
        ++emitted;
    }
    if (emitted < count)
        std::cerr << "warning: only " << emitted << " of " << count
                  << " requested images were correctly classified\n";
    emit_report(manifest.dump(2) + "\n", dir / "manifest.json");
    std::cout << "wrote " << emitted << " adversarial examples to " << dir.string() << '\n';
    return 0;
}

int cmd_eval(const CommonArgs& args) {
    const KeyValueConfig cfg = load_config(args);
    const fs::path out = resolve_out(args);
    const EvalOptions opts = eval_options(cfg, args);
    const ModelZoo zoo = load_zoo_checked(
        cfg.has("models") ? fs::path(cfg.get("models", "")) : out / "zoo");
    const Dataset data = eval_dataset(cfg);

    TransferReport report = run_transfer_eval(zoo, data, opts);
    report.config_hash = config_hash(cfg);
    emit_report(transfer_csv(report), out / "transfer.csv");
    emit_report(transfer_json(report), out / "transfer.json");
    for (const TransferCell& c : report.cells)
        if (c.victim == "AVG")
            std::printf("%s %s %s N=%d: %.1f%%\n", c.surrogate.c_str(), c.attack.c_str(),
                        c.loss.c_str(), c.n_blocks, c.rate * 100.0);
    std::cout << "reports written to " << (out / "transfer.csv").string() << '\n';
    return 0;
}

int cmd_dtuap(const CommonArgs& args) {
    const KeyValueConfig cfg = load_config(args);
    const fs::path out = resolve_out(args);
    const EvalOptions opts = eval_options(cfg, args);
    const ModelZoo zoo = load_zoo_checked(
        cfg.has("models") ? fs::path(cfg.get("models", "")) : out / "zoo");
    const Dataset data = eval_dataset(cfg);

    std::vector<int> targets;
    if (cfg.has("targets")) {
        targets = parse_int_list(cfg.get("targets", ""), "targets");
    } else {
        targets.resize(data.classes);
        for (int i = 0; i < data.classes; ++i) targets[i] = i;
    }
    for (int t : targets)
        if (t < 0 || t >= data.classes) throw ConfigError("target class out of range");

    UapReport report = run_uap_eval(zoo, data, targets, opts);
    report.config_hash = config_hash(cfg);
    emit_report(uap_csv(report), out / "uap.csv");
    emit_report(uap_json(report), out / "uap.json");
    std::cout << "reports written to " << (out / "uap.csv").string() << '\n';
    return 0;
}

int cmd_ablate(const CommonArgs& args) {
    const KeyValueConfig cfg = load_config(args);
    const fs::path out = resolve_out(args);
    const EvalOptions opts = eval_options(cfg, args);
    const ModelZoo zoo = load_zoo_checked(
        cfg.has("models") ? fs::path(cfg.get("models", "")) : out / "zoo");
    const Dataset data = eval_dataset(cfg);

    const std::string param = cfg.get("param", "N");
    if (param != "M" && param != "N") throw ConfigError("param must be M or N");
    const std::vector<int> values = parse_int_list(cfg.get("values", "0,1,2,3"), "values");

    AblationReport report = ablation_sweep(param, values, zoo, data, opts);
    report.config_hash = config_hash(cfg);

    std::ostringstream csv;
    csv.precision(17);
    csv << "# config_hash=" << report.config_hash << " seed=" << report.seed << '\n';
    csv << "surrogate,value,rate\n";
    for (const AblationPoint& p : report.points)
        csv << p.surrogate << ',' << p.value << ',' << p.rate << '\n';
    for (const std::string& s : report.skipped) csv << "# skipped " << s << '\n';
    emit_report(csv.str(), out / ("ablation_" + param + ".csv"));

    for (const ModelHandle& m : zoo.models)
        emit_report(ablation_curve_csv(report, m.arch),
                    out / ("curve_" + param + "_" + m.arch + ".csv"));
    std::cout << "reports written to " << (out / ("ablation_" + param + ".csv")).string()
              << '\n';
    return 0;
}

int cmd_coverage(const CommonArgs& args) {
    const KeyValueConfig cfg = load_config(args);
    const fs::path out = resolve_out(args);
    const AttackConfig attack = parse_attack(cfg);
    const ModelZoo zoo = load_zoo_checked(
        cfg.has("models") ? fs::path(cfg.get("models", "")) : out / "zoo");
    const Dataset data = eval_dataset(cfg);
    const int count = cfg.get_int("coverage_count", 20);
    if (count < 1) throw ConfigError("coverage_count must be >= 1");
    const double threshold = cfg.get_double("threshold", 2.0 / 3.0);
    if (threshold < 0.0 || threshold > 1.0) throw ConfigError("threshold outside [0,1]");

    const std::string sname = cfg.get("surrogate", zoo.surrogate);
    const ModelHandle& surrogate = [&]() -> const ModelHandle& {
        try {
            return zoo.by_name(sname);
        } catch (const std::exception& e) {
            throw ConfigError(e.what());
        }
    }();
    TargetMode mode;
    try {
        mode.mode = target_mode_from_string(cfg.get("target_mode", "random"));
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    mode.seed = cfg.get_u64("target_seed", attack.seed);

    std::vector<Image> baseline_aes, everywhere_aes;
    std::vector<int> targets;
    for (std::size_t i = 0; i < data.items.size() &&
                            static_cast<int>(targets.size()) < count;
         ++i) {
        const Example& e = data.items[i];
        const Image img = normalize(e.raw255, surrogate.spec);
        const auto logits = forward(surrogate, img.data).logits();
        if (argmax_logit(logits) != e.label) continue;
        Rng trng = Rng::derive(mode.seed, i);
        const int y_t = select_target(mode.mode, logits, e.label, trng);
        const TargetSpec target{y_t, e.label, attack.loss.n_high};
        AttackConfig c = attack;
        c.seed = Rng::derive(attack.seed, i).bits();
        baseline_aes.push_back(baseline_attack(surrogate, img, target, c).adversarial);
        everywhere_aes.push_back(everywhere_attack(surrogate, img, target, c).adversarial);
        targets.push_back(y_t);
    }
    if (targets.empty()) throw std::runtime_error("no correctly classified images for coverage");

    std::vector<const ModelHandle*> victims;
    const bool self = cfg.get_int("include_surrogate", 0) != 0;
    for (const ModelHandle& m : zoo.models)
        if (self || m.arch != sname) victims.push_back(&m);

    const auto rows =
        coverage_study(surrogate, victims,
                       {{"baseline", baseline_aes}, {"everywhere", everywhere_aes}}, targets,
                       threshold);
    std::ostringstream csv;
    csv << "# config_hash=" << config_hash(cfg) << " seed=" << attack.seed << '\n';
    csv << coverage_csv(rows);
    emit_report(csv.str(), out / "coverage.csv");
    for (const CoverageRow& r : rows)
        std::printf("%s %s: mean C %.3f over %d images (%d excluded)\n", r.victim.c_str(),
                    r.variant.c_str(), r.mean_c, r.n_images, r.n_excluded);
    return 0;
}

int cmd_audit(const CommonArgs& args) {
    const KeyValueConfig cfg = load_config(args);
    const fs::path out = resolve_out(args);
    const fs::path dir = cfg.has("dir") ? fs::path(cfg.get("dir", "")) : out / "attack";
    const double epsilon = cfg.get_double("epsilon", 16.0);
    if (!(epsilon >= 0.0)) throw ConfigError("epsilon must be >= 0");
    if (!fs::exists(dir)) throw ConfigError("audit directory not found: " + dir.string());

    std::vector<fs::path> adv_files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("adv_", 0) == 0 && entry.path().extension() == ".png")
            adv_files.push_back(entry.path());
    }
    std::sort(adv_files.begin(), adv_files.end());
    if (adv_files.empty()) throw std::runtime_error("no adv_*.png files in " + dir.string());

    int violations = 0;
    for (const fs::path& adv_path : adv_files) {
        std::string orig_name = adv_path.filename().string();
        orig_name.replace(0, 4, "orig_");
        const fs::path orig_path = adv_path.parent_path() / orig_name;
        if (!fs::exists(orig_path)) {
            std::cerr << "missing original for " << adv_path.filename().string() << '\n';
            ++violations;
            continue;
        }
        const Tensor adv = io::read_png_rgb(adv_path);
        const Tensor orig = io::read_png_rgb(orig_path);
        if (!adv.same_shape(orig)) {
            std::cerr << adv_path.filename().string() << ": shape mismatch\n";
            ++violations;
            continue;
        }
        double max_diff = 0.0, min_v = 255.0, max_v = 0.0;
        for (std::size_t i = 0; i < adv.size(); ++i) {
            max_diff = std::max(max_diff, std::fabs(adv[i] - orig[i]));
            min_v = std::min(min_v, adv[i]);
            max_v = std::max(max_v, adv[i]);
        }
        if (max_diff > epsilon || min_v < 0.0 || max_v > 255.0) {
            std::cerr << adv_path.filename().string() << ": max|diff|=" << max_diff
                      << " range=[" << min_v << ',' << max_v << "]\n";
            ++violations;
        }
    }
    if (violations > 0) {
        std::cerr << "AUDIT FAIL: " << violations << " of " << adv_files.size()
                  << " images violate the budget\n";
        return 3;
    }
    std::cout << "AUDIT PASS: " << adv_files.size() << " images within epsilon=" << epsilon
              << " and [0,255]\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"block-everywhere targeted adversarial attack toolkit"};
    app.require_subcommand(1);

    CommonArgs args;
    int (*handler)(const CommonArgs&) = nullptr;
    auto sub = [&](const char* name, const char* desc, int (*fn)(const CommonArgs&)) {
        CLI::App* cmd = app.add_subcommand(name, desc);
        add_common(cmd, args);
        cmd->callback([&handler, fn] { handler = fn; });
        return cmd;
    };
    sub("train", "train and save the model zoo", cmd_train);
    sub("attack", "craft adversarial examples and emit PNG pairs", cmd_attack);
    sub("eval", "transfer-matrix evaluation (baseline vs everywhere)", cmd_eval);
    sub("dtuap", "data-free targeted UAP evaluation", cmd_dtuap);
    sub("ablate", "M/N ablation sweep", cmd_ablate);
    sub("coverage", "attention coverage study", cmd_coverage);
    sub("audit", "check emitted AEs against the budget and pixel range", cmd_audit);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        return handler(args);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
