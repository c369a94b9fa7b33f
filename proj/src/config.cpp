#include "sparsect/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "sparsect/io.hpp"

namespace sparsect {

namespace {
std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}
}  // namespace

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config file '" + path.string() + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
}

RunConfig RunConfig::parse(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(lineno) +
                                     ": expected 'key = value', got '" + line + "'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw std::runtime_error("config line " + std::to_string(lineno) + ": empty key");
        cfg.kv_[key] = value;
    }
    return cfg;
}

void RunConfig::set_double(const std::string& key, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    kv_[key] = buf;
}

void RunConfig::set_int(const std::string& key, int64_t v) { kv_[key] = std::to_string(v); }

std::string RunConfig::get(const std::string& key, const std::string& fallback) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
}

double RunConfig::get_double(const std::string& key, double fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
        size_t pos = 0;
        double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw std::runtime_error("config key '" + key + "': '" + it->second + "' is not a number");
    }
}

int64_t RunConfig::get_int(const std::string& key, int64_t fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
        size_t pos = 0;
        int64_t v = std::stoll(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw std::runtime_error("config key '" + key + "': '" + it->second + "' is not an integer");
    }
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::runtime_error("config key '" + key + "': '" + v + "' is not a boolean");
}

std::string RunConfig::serialize() const {
    std::string out;
    for (const auto& [k, v] : kv_) {
        out += k;
        out += " = ";
        out += v;
        out += '\n';
    }
    return out;
}

uint64_t RunConfig::hash() const { return io::fnv1a64(serialize()); }

void RunConfig::write_file(const std::filesystem::path& path) const {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    f << serialize();
}

void RunConfig::put_geometry(const std::string& section, const Geometry& g) {
    set_int(section + ".n_angles", g.n_angles);
    set_int(section + ".n_detectors", g.n_detectors);
    set_int(section + ".rows", g.rows);
    set_int(section + ".cols", g.cols);
    set_double(section + ".angular_span", g.angular_span);
    set_double(section + ".detector_spacing", g.detector_spacing);
    set_double(section + ".pixel_spacing", g.pixel_spacing);
}

Geometry RunConfig::geometry(const std::string& section) const {
    if (!has(section + ".n_angles"))
        throw std::runtime_error("config is missing geometry section '" + section + "'");
    return make_geometry(static_cast<int>(get_int(section + ".n_angles", 0)),
                         static_cast<int>(get_int(section + ".n_detectors", 0)),
                         static_cast<int>(get_int(section + ".rows", 0)),
                         static_cast<int>(get_int(section + ".cols", 0)),
                         get_double(section + ".pixel_spacing", 1.0),
                         get_double(section + ".detector_spacing", 1.0),
                         get_double(section + ".angular_span", 0.0));
}

}  // namespace sparsect
