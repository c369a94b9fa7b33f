#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "sparsect/geometry.hpp"

namespace sparsect {

/// Flat `section.key = value` configuration. `#` starts a comment. Every
/// CLI flag has a config equivalent; flags win on conflict.
class RunConfig {
public:
    RunConfig() = default;

    static RunConfig from_file(const std::filesystem::path& path);
    static RunConfig parse(const std::string& text);

    bool has(const std::string& key) const { return kv_.count(key) != 0; }
    void set(const std::string& key, const std::string& value) { kv_[key] = value; }
    void set_double(const std::string& key, double v);
    void set_int(const std::string& key, int64_t v);

    std::string get(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int64_t get_int(const std::string& key, int64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    /// Canonical serialization (sorted keys); also hashed into checkpoints.
    std::string serialize() const;
    uint64_t hash() const;

    void write_file(const std::filesystem::path& path) const;

    /// Geometry block accessors shared by dataset directories and the CLI.
    void put_geometry(const std::string& section, const Geometry& g);
    Geometry geometry(const std::string& section) const;

private:
    std::map<std::string, std::string> kv_;
};

}  // namespace sparsect
