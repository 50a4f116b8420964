#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>

namespace semloc {

/// Flat `key = value` configuration with `#` comments and dotted keys for
/// namespacing, e.g. `solver.gate = 1.0`.
class Config {
public:
    Config() = default;

    static Config parse(std::istream& in);
    static Config parse_string(const std::string& text);
    static Config load(const std::string& path);

    bool has(const std::string& key) const { return entries_.count(key) > 0; }

    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;

    void set(const std::string& key, const std::string& value) { entries_[key] = value; }

    const std::map<std::string, std::string>& entries() const { return entries_; }

private:
    std::map<std::string, std::string> entries_;
};

}  // namespace semloc
