#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ruleforge {

/// Flat view over a nested key-value config file. Keys are dotted paths
/// ("pipeline.theta"), values are raw strings; '#' starts a comment.
/// Later assignments and set() overrides win.
class KeyValueConfig {
public:
    KeyValueConfig() = default;

    static KeyValueConfig from_file(const std::string& path);
    static KeyValueConfig from_string(const std::string& text);

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const;

    std::optional<std::string> get(const std::string& key) const;
    std::string get_or(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<int> get_int_list(const std::string& key,
                                  const std::vector<int>& fallback) const;

    /// All keys under a dotted prefix, in insertion-stable (sorted) order.
    std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

    const std::map<std::string, std::string>& entries() const { return entries_; }

private:
    std::map<std::string, std::string> entries_;
};

}  // namespace ruleforge
