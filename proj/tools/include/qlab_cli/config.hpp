#pragma once

// key=value run configuration with dotted keys (solve.grad_tol). Everything
// after '#' on a line is a comment. Every key must be consumed by the command
// that reads the file; leftovers are reported as unknown.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qlab/qtensor.hpp"

namespace qlab::cli {

struct ConfigEntry {
    std::string value;
    int line = 0;
};

using ConfigMap = std::map<std::string, ConfigEntry, std::less<>>;

/// Throws ConfigError on malformed lines and duplicate keys.
ConfigMap parse_config_text(std::string_view text);
ConfigMap read_config_file(const std::filesystem::path& path);

/// Typed, consuming view of a ConfigMap. Every lookup is recorded together
/// with the effective value so the run can echo what it actually used.
class ConfigReader {
public:
    explicit ConfigReader(ConfigMap entries) : entries_(std::move(entries)) {}

    double require_double(std::string_view key);
    int require_int(std::string_view key);
    std::string require_string(std::string_view key);
    std::vector<double> require_doubles(std::string_view key);

    double get_double(std::string_view key, double fallback);
    int get_int(std::string_view key, int fallback);
    std::string get_string(std::string_view key, std::string_view fallback);
    bool get_bool(std::string_view key, bool fallback);
    std::vector<double> get_doubles(std::string_view key, std::vector<double> fallback);
    Vec3 get_vec3(std::string_view key, Vec3 fallback);
    /// "x,y,z; x,y,z; ..."
    std::vector<Vec3> get_points(std::string_view key, std::vector<Vec3> fallback);
    std::optional<double> find_double(std::string_view key);

    bool has(std::string_view key) const { return entries_.find(key) != entries_.end(); }

    /// Throws ConfigError naming the first key nobody asked for.
    void finish(std::string_view command) const;

    /// Effective configuration, one key per line in lookup order.
    std::string echo() const;

private:
    const ConfigEntry* take(std::string_view key);
    void record(std::string_view key, std::string value);

    ConfigMap entries_;
    std::vector<std::string> consumed_;
    std::vector<std::pair<std::string, std::string>> effective_;
};

std::string format_double(double v);
std::string format_doubles(const std::vector<double>& v);

}  // namespace qlab::cli
