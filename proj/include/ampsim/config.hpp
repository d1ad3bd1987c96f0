#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace ampsim {

// Flat key=value run configuration. '#' starts a comment line, blank lines
// are skipped, later duplicates win, keys and values are trimmed. Command
// line flags override their keys by calling set() after load.
class FlatConfig {
  public:
    FlatConfig() = default;

    static FlatConfig load(const std::filesystem::path& path);
    static FlatConfig parse(std::string_view text, const std::string& context);

    bool has(const std::string& key) const { return kv_.count(key) != 0; }
    void set(const std::string& key, std::string value) { kv_[key] = std::move(value); }

    std::string get_string(const std::string& key, const std::string& fallback) const;
    // Missing required key -> UsageError naming the key.
    std::string require_string(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    const std::map<std::string, std::string>& entries() const { return kv_; }

    // Sorted "key=value\n" rendering; what run manifests digest.
    std::string canonical_text() const;

  private:
    std::map<std::string, std::string> kv_;
};

}  // namespace ampsim
