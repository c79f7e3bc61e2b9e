#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "evw/attack.hpp"
#include "evw/dataset.hpp"
#include "evw/zoo.hpp"

namespace evw {

enum class TargetModeKind { Random, LeastLikely };

struct TargetMode {
    TargetModeKind mode = TargetModeKind::Random;
    std::uint64_t seed = 0;
};

TargetModeKind target_mode_from_string(const std::string& s);
std::string to_string(TargetModeKind m);

// random: uniform over classes != y_o; least_likely: argmin of clean logits
int select_target(TargetModeKind mode, const std::vector<double>& clean_logits, int y_o,
                  Rng& rng);

struct TransferCell {
    std::string surrogate, victim, attack, loss, mode;
    int n_blocks = 0, m_partitions = 0;
    double epsilon = 0.0;
    int successes = 0, total = 0;
    double rate = 0.0;
};

struct TransferReport {
    std::vector<TransferCell> cells;
    std::string config_hash;
    std::uint64_t seed = 0;
};

struct EvalOptions {
    AttackConfig attack;                 // samples field = the everywhere N
    std::vector<LossParams> losses;      // defaults to {CE, Logit}
    TargetMode target_mode;
    int eval_images = 200;               // per surrogate, after the clean filter
    int jobs = 1;
    std::vector<std::string> surrogates; // empty = every zoo member takes a turn
};

// Crafts AEs once per (surrogate, loss, N in {0, attack.samples}) and scores
// every other zoo member as victim; emits per-victim cells plus an AVG row.
TransferReport run_transfer_eval(const ModelZoo& zoo, const Dataset& dataset,
                                 const EvalOptions& opts);

struct UapCell {
    std::string surrogate, attack, loss;
    int target_class = 0;
    int successes = 0, total = 0;
    double rate = 0.0;
};

struct UapReport {
    std::vector<UapCell> cells;
    std::string config_hash;
    std::uint64_t seed = 0;
};

UapReport run_uap_eval(const ModelZoo& zoo, const Dataset& dataset,
                       const std::vector<int>& targets, const EvalOptions& opts);

struct AblationPoint {
    std::string surrogate;
    int value = 0;      // the swept M or N
    double rate = 0.0;  // victim-averaged success
};

struct AblationReport {
    std::string param;  // "M" or "N"
    std::vector<AblationPoint> points;
    std::vector<std::string> skipped;  // invalid (M, N) pairs, logged
    std::string config_hash;
    std::uint64_t seed = 0;
};

AblationReport ablation_sweep(const std::string& param, const std::vector<int>& values,
                              const ModelZoo& zoo, const Dataset& dataset,
                              const EvalOptions& opts);

// Full precision in files; console renders 1-decimal percents.
std::string transfer_csv(const TransferReport& report);
std::string transfer_json(const TransferReport& report);
std::string uap_csv(const UapReport& report);
std::string uap_json(const UapReport& report);
std::string ablation_curve_csv(const AblationReport& report, const std::string& surrogate);

void emit_report(const std::string& content, const std::filesystem::path& path);

TransferReport parse_transfer_csv(const std::string& text);

}  // namespace evw
