#include "qlab_cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "qlab/errors.hpp"

namespace qlab::cli {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

bool valid_key(std::string_view key) {
    if (key.empty() || key.front() == '.' || key.back() == '.') return false;
    if (std::count(key.begin(), key.end(), '.') > 1) return false;
    return std::all_of(key.begin(), key.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '.';
    });
}

double parse_double(std::string_view key, std::string_view text) {
    text = trim(text);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
        throw ConfigError(std::string(key), "expected a number, got '" + std::string(text) + "'");
    if (!std::isfinite(v)) throw ConfigError(std::string(key), "value must be finite");
    return v;
}

int parse_int(std::string_view key, std::string_view text) {
    text = trim(text);
    int v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
        throw ConfigError(std::string(key), "expected an integer, got '" + std::string(text) + "'");
    return v;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = text.find(sep, start);
        parts.push_back(trim(text.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return parts;
}

std::vector<double> parse_doubles(std::string_view key, std::string_view text) {
    std::vector<double> out;
    for (std::string_view part : split(text, ',')) out.push_back(parse_double(key, part));
    return out;
}

Vec3 parse_vec3(std::string_view key, std::string_view text) {
    const std::vector<double> v = parse_doubles(key, text);
    if (v.size() != 3) throw ConfigError(std::string(key), "expected three comma-separated numbers");
    return {v[0], v[1], v[2]};
}

std::string format_vec3(const Vec3& v) {
    return format_double(v[0]) + "," + format_double(v[1]) + "," + format_double(v[2]);
}

}  // namespace

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string format_doubles(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += format_double(v[i]);
    }
    return out;
}

ConfigMap parse_config_text(std::string_view text) {
    ConfigMap out;
    int line_no = 0;
    for (std::string_view raw : split(text, '\n')) {
        ++line_no;
        const std::string_view line = trim(raw.substr(0, raw.find('#')));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("", "line " + std::to_string(line_no) + ": expected key = value");
        const std::string key(trim(line.substr(0, eq)));
        const std::string value(trim(line.substr(eq + 1)));
        if (!valid_key(key))
            throw ConfigError(key, "line " + std::to_string(line_no) + ": malformed key");
        if (value.empty()) throw ConfigError(key, "line " + std::to_string(line_no) + ": empty value");
        if (out.count(key)) throw ConfigError(key, "line " + std::to_string(line_no) + ": duplicate key");
        out.emplace(key, ConfigEntry{value, line_no});
    }
    return out;
}

ConfigMap read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

const ConfigEntry* ConfigReader::take(std::string_view key) {
    consumed_.emplace_back(key);
    const auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : &it->second;
}

void ConfigReader::record(std::string_view key, std::string value) {
    effective_.emplace_back(std::string(key), std::move(value));
}

double ConfigReader::require_double(std::string_view key) {
    const ConfigEntry* e = take(key);
    if (!e) throw ConfigError(std::string(key), "required key is missing");
    const double v = parse_double(key, e->value);
    record(key, format_double(v));
    return v;
}

int ConfigReader::require_int(std::string_view key) {
    const ConfigEntry* e = take(key);
    if (!e) throw ConfigError(std::string(key), "required key is missing");
    const int v = parse_int(key, e->value);
    record(key, std::to_string(v));
    return v;
}

std::string ConfigReader::require_string(std::string_view key) {
    const ConfigEntry* e = take(key);
    if (!e) throw ConfigError(std::string(key), "required key is missing");
    record(key, e->value);
    return e->value;
}

std::vector<double> ConfigReader::require_doubles(std::string_view key) {
    const ConfigEntry* e = take(key);
    if (!e) throw ConfigError(std::string(key), "required key is missing");
    std::vector<double> v = parse_doubles(key, e->value);
    record(key, format_doubles(v));
    return v;
}

double ConfigReader::get_double(std::string_view key, double fallback) {
    const ConfigEntry* e = take(key);
    const double v = e ? parse_double(key, e->value) : fallback;
    record(key, format_double(v));
    return v;
}

int ConfigReader::get_int(std::string_view key, int fallback) {
    const ConfigEntry* e = take(key);
    const int v = e ? parse_int(key, e->value) : fallback;
    record(key, std::to_string(v));
    return v;
}

std::string ConfigReader::get_string(std::string_view key, std::string_view fallback) {
    const ConfigEntry* e = take(key);
    std::string v = e ? e->value : std::string(fallback);
    record(key, v);
    return v;
}

bool ConfigReader::get_bool(std::string_view key, bool fallback) {
    const ConfigEntry* e = take(key);
    bool v = fallback;
    if (e) {
        if (e->value == "true" || e->value == "1")
            v = true;
        else if (e->value == "false" || e->value == "0")
            v = false;
        else
            throw ConfigError(std::string(key), "expected true or false, got '" + e->value + "'");
    }
    record(key, v ? "true" : "false");
    return v;
}

std::vector<double> ConfigReader::get_doubles(std::string_view key, std::vector<double> fallback) {
    const ConfigEntry* e = take(key);
    std::vector<double> v = e ? parse_doubles(key, e->value) : std::move(fallback);
    record(key, format_doubles(v));
    return v;
}

Vec3 ConfigReader::get_vec3(std::string_view key, Vec3 fallback) {
    const ConfigEntry* e = take(key);
    const Vec3 v = e ? parse_vec3(key, e->value) : fallback;
    record(key, format_vec3(v));
    return v;
}

std::vector<Vec3> ConfigReader::get_points(std::string_view key, std::vector<Vec3> fallback) {
    const ConfigEntry* e = take(key);
    std::vector<Vec3> v;
    if (e) {
        for (std::string_view part : split(e->value, ';'))
            if (!part.empty()) v.push_back(parse_vec3(key, part));
        if (v.empty()) throw ConfigError(std::string(key), "expected at least one point");
    } else {
        v = std::move(fallback);
    }
    std::string text;
    for (std::size_t i = 0; i < v.size(); ++i) text += (i ? "; " : "") + format_vec3(v[i]);
    record(key, text);
    return v;
}

std::optional<double> ConfigReader::find_double(std::string_view key) {
    const ConfigEntry* e = take(key);
    if (!e) return std::nullopt;
    const double v = parse_double(key, e->value);
    record(key, format_double(v));
    return v;
}

void ConfigReader::finish(std::string_view command) const {
    for (const auto& [key, entry] : entries_)
        if (std::find(consumed_.begin(), consumed_.end(), key) == consumed_.end())
            throw ConfigError(key, "line " + std::to_string(entry.line) + ": unknown key for command '" +
                                       std::string(command) + "'");
}

std::string ConfigReader::echo() const {
    std::string out;
    for (const auto& [key, value] : effective_)
        if (!value.empty()) out += key + " = " + value + "\n";
    return out;
}

}  // namespace qlab::cli
