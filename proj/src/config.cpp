#include "evw/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace evw {

KeyValueConfig KeyValueConfig::from_file(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config: " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return from_string(ss.str());
}

KeyValueConfig KeyValueConfig::from_string(const std::string& text) {
    KeyValueConfig cfg;
    std::istringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(lineno) +
                                     ": expected key=value");
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty()) throw std::runtime_error("config line " + std::to_string(lineno) +
                                                  ": empty key");
        cfg.values_[key] = val;
    }
    return cfg;
}

std::string KeyValueConfig::get(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        return std::stod(it->second);
    } catch (const std::exception&) {
        throw std::runtime_error("config: bad number for " + key + ": " + it->second);
    }
}

int KeyValueConfig::get_int(const std::string& key, int fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        return std::stoi(it->second);
    } catch (const std::exception&) {
        throw std::runtime_error("config: bad integer for " + key + ": " + it->second);
    }
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        return std::stoull(it->second);
    } catch (const std::exception&) {
        throw std::runtime_error("config: bad integer for " + key + ": " + it->second);
    }
}

std::string KeyValueConfig::canonical() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
    return out;
}

AttackConfig attack_config_from(const KeyValueConfig& cfg) {
    AttackConfig a;
    a.epsilon = cfg.get_double("epsilon", a.epsilon);
    a.alpha = cfg.get_double("alpha", a.alpha);
    a.iterations = cfg.get_int("iterations", a.iterations);
    a.partitions = cfg.get_int("partitions", a.partitions);
    a.samples = cfg.get_int("samples", a.samples);
    a.di_probability = cfg.get_double("di_probability", a.di_probability);
    a.di_scale_min = cfg.get_double("di_scale_min", a.di_scale_min);
    a.ti_kernel_size = cfg.get_int("ti_kernel_size", a.ti_kernel_size);
    a.mi_decay = cfg.get_double("mi_decay", a.mi_decay);
    a.seed = cfg.get_u64("seed", a.seed);
    a.loss.kind = loss_kind_from_string(cfg.get("loss", "CE"));
    a.loss.tau = cfg.get_double("tau", a.loss.tau);
    a.loss.beta1 = cfg.get_double("beta1", a.loss.beta1);
    a.loss.beta2 = cfg.get_double("beta2", a.loss.beta2);
    a.loss.n_high = cfg.get_int("n_high", a.loss.n_high);
    a.validate();
    return a;
}

std::string fnv1a_hex(const std::string& data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string config_hash(const KeyValueConfig& cfg) { return fnv1a_hex(cfg.canonical()); }

}  // namespace evw
