#include "ruleforge/config.hpp"

#include <cstdlib>

#include "ruleforge/util.hpp"

namespace ruleforge {

KeyValueConfig KeyValueConfig::from_file(const std::string& path) {
    return from_string(util::read_file(path));
}

KeyValueConfig KeyValueConfig::from_string(const std::string& text) {
    KeyValueConfig cfg;
    std::size_t lineno = 0;
    for (const auto& raw : util::split(text, '\n')) {
        ++lineno;
        std::string line = raw;
        if (auto pos = line.find('#'); pos != std::string::npos) {
            line = line.substr(0, pos);
        }
        line = util::trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error("config line " + std::to_string(lineno) +
                        ": expected key = value");
        }
        std::string key = util::trim(line.substr(0, eq));
        std::string value = util::trim(line.substr(eq + 1));
        if (key.empty()) {
            throw Error("config line " + std::to_string(lineno) + ": empty key");
        }
        cfg.entries_[key] = value;
    }
    return cfg;
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
    entries_[key] = value;
}

bool KeyValueConfig::has(const std::string& key) const {
    return entries_.count(key) != 0;
}

std::optional<std::string> KeyValueConfig::get(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

std::string KeyValueConfig::get_or(const std::string& key,
                                   const std::string& fallback) const {
    auto v = get(key);
    return v ? *v : fallback;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    try {
        return std::stod(*v);
    } catch (...) {
        throw Error("config key '" + key + "' is not a number: " + *v);
    }
}

int KeyValueConfig::get_int(const std::string& key, int fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    try {
        return std::stoi(*v);
    } catch (...) {
        throw Error("config key '" + key + "' is not an integer: " + *v);
    }
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    std::string s = util::to_lower(*v);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw Error("config key '" + key + "' is not a boolean: " + *v);
}

std::vector<int> KeyValueConfig::get_int_list(
    const std::string& key, const std::vector<int>& fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    std::vector<int> out;
    for (auto& part : util::split(*v, ',')) {
        std::string p = util::trim(part);
        if (p.empty()) continue;
        try {
            out.push_back(std::stoi(p));
        } catch (...) {
            throw Error("config key '" + key + "' has a non-integer entry: " + p);
        }
    }
    return out;
}

std::vector<std::string> KeyValueConfig::keys_with_prefix(
    const std::string& prefix) const {
    std::vector<std::string> out;
    for (const auto& [k, _] : entries_) {
        if (util::starts_with(k, prefix)) out.push_back(k);
    }
    return out;
}

}  // namespace ruleforge
