#include "sskp/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "sskp/errors.hpp"

namespace sskp {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

}  // namespace

Config Config::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_string(buffer.str());
}

Config Config::parse_string(const std::string& text) {
    Config config;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
        if (config.values_.count(key))
            throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" +
                              key + "'");
        config.values_[key] = value;
    }
    return config;
}

std::string Config::raw(const std::string& key) const {
    consumed_.insert(key);
    return values_.at(key);
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    consumed_.insert(key);
    return has(key) ? values_.at(key) : fallback;
}

long long Config::get_int(const std::string& key, long long fallback) const {
    consumed_.insert(key);
    if (!has(key)) return fallback;
    const std::string v = values_.at(key);
    try {
        std::size_t pos = 0;
        const long long out = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected integer, got '" + v + "'");
    }
}

double Config::get_double(const std::string& key, double fallback) const {
    consumed_.insert(key);
    if (!has(key)) return fallback;
    const std::string v = values_.at(key);
    try {
        std::size_t pos = 0;
        const double out = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected number, got '" + v + "'");
    }
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    consumed_.insert(key);
    if (!has(key)) return fallback;
    const std::string v = values_.at(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config key '" + key + "': expected boolean, got '" + v + "'");
}

std::vector<int> Config::get_int_list(const std::string& key, std::vector<int> fallback) const {
    consumed_.insert(key);
    if (!has(key)) return fallback;
    const std::string v = values_.at(key);
    std::vector<int> out;
    std::istringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        try {
            std::size_t pos = 0;
            out.push_back(std::stoi(item, &pos));
            if (pos != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("config key '" + key + "': expected integer list, got '" + v + "'");
        }
    }
    if (out.empty())
        throw ConfigError("config key '" + key + "': expected integer list, got '" + v + "'");
    return out;
}

void Config::check_all_consumed() const {
    std::string offenders;
    for (const auto& [key, value] : values_) {
        if (!consumed_.count(key)) {
            if (!offenders.empty()) offenders += ", ";
            offenders += key;
        }
    }
    if (!offenders.empty()) throw ConfigError("unknown config keys: " + offenders);
}

}  // namespace sskp
