#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "evw/attack.hpp"

namespace evw {

// Flat key=value settings; '#' starts a comment. CLI overrides are applied
// on top of file values which sit on top of defaults.
class KeyValueConfig {
public:
    static KeyValueConfig from_file(const std::filesystem::path& path);
    static KeyValueConfig from_string(const std::string& text);

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;

    const std::map<std::string, std::string>& values() const { return values_; }

    // canonical "k=v\n" serialization, keys sorted
    std::string canonical() const;

private:
    std::map<std::string, std::string> values_;
};

AttackConfig attack_config_from(const KeyValueConfig& cfg);

// FNV-1a over the canonical form, as fixed-width hex
std::string config_hash(const KeyValueConfig& cfg);
std::string fnv1a_hex(const std::string& data);

}  // namespace evw
