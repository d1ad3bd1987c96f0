#include "ampsim/config.hpp"

#include <charconv>
#include <cstdlib>

#include "ampsim/csv.hpp"
#include "ampsim/errors.hpp"

namespace ampsim {
namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
    fail(Errc::UsageError, "config key '" + key + "': expected " + want + ", got '" + value + "'");
}

}  // namespace

FlatConfig FlatConfig::load(const std::filesystem::path& path) {
    return parse(csv::read_file(path), path.string());
}

FlatConfig FlatConfig::parse(std::string_view text, const std::string& context) {
    FlatConfig cfg;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const std::size_t nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
        ++line_no;
        line = trim(line);
        if (line.empty() || line.front() == '#') continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos) {
            fail(Errc::MalformedRow, context + ":" + std::to_string(line_no) +
                                         ": expected key=value, got '" + std::string(line) + "'");
        }
        const std::string key(trim(line.substr(0, eq)));
        if (key.empty()) {
            fail(Errc::MalformedRow,
                 context + ":" + std::to_string(line_no) + ": empty key");
        }
        cfg.kv_[key] = std::string(trim(line.substr(eq + 1)));
    }
    return cfg;
}

std::string FlatConfig::get_string(const std::string& key, const std::string& fallback) const {
    const auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
}

std::string FlatConfig::require_string(const std::string& key) const {
    const auto it = kv_.find(key);
    if (it == kv_.end() || it->second.empty()) {
        fail(Errc::UsageError, "missing required config key '" + key + "'");
    }
    return it->second;
}

double FlatConfig::get_double(const std::string& key, double fallback) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    const char* begin = it->second.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0') bad_value(key, it->second, "a number");
    return v;
}

int FlatConfig::get_int(const std::string& key, int fallback) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    int v = 0;
    const auto [p, ec] = std::from_chars(it->second.data(),
                                         it->second.data() + it->second.size(), v);
    if (ec != std::errc() || p != it->second.data() + it->second.size()) {
        bad_value(key, it->second, "an integer");
    }
    return v;
}

std::uint64_t FlatConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(it->second.data(),
                                         it->second.data() + it->second.size(), v);
    if (ec != std::errc() || p != it->second.data() + it->second.size()) {
        bad_value(key, it->second, "an unsigned integer");
    }
    return v;
}

bool FlatConfig::get_bool(const std::string& key, bool fallback) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    bad_value(key, v, "a boolean");
}

std::string FlatConfig::canonical_text() const {
    std::string out;
    for (const auto& [k, v] : kv_) {
        out += k;
        out += '=';
        out += v;
        out += '\n';
    }
    return out;
}

}  // namespace ampsim
