#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

namespace sskp {

// Flat key = value configuration: one pair per line, '#' comments, sections by
// dotted key prefixes (e.g. planner.n_samples = 512). Getters record which keys
// were consumed; check_all_consumed() then rejects unknown keys by name.
class Config {
  public:
    Config() = default;

    static Config parse_file(const std::string& path);
    static Config parse_string(const std::string& text);

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const;
    long long get_int(const std::string& key, long long fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    // Comma-separated integers, e.g. "64,64".
    std::vector<int> get_int_list(const std::string& key, std::vector<int> fallback) const;

    // Throws ConfigError naming every key that no getter ever read.
    void check_all_consumed() const;

  private:
    std::string raw(const std::string& key) const;

    std::map<std::string, std::string> values_;
    mutable std::set<std::string> consumed_;
};

}  // namespace sskp
