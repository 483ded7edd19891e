#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace csd {

/// Flat key=value config text: one pair per line, '#' comments, blank lines
/// ignored. Unknown keys are rejected at lookup site, not here.
class ConfigMap {
public:
    static ConfigMap parse(const std::string& text);
    static ConfigMap parse_file(const std::string& path);

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    std::string get_string(const std::string& key, const std::string& fallback) const;
    int64_t get_int(const std::string& key, int64_t fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

}  // namespace csd
