#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <boost/property_tree/ptree.hpp>

namespace brillouin {

// INI file: `[section]` headers with `key = value` lines, `;` or `#`
// comments. Relative paths resolve against the file's directory.
class Config {
public:
    static Config load(const std::filesystem::path& path);
    static Config parse(const std::string& text, const std::filesystem::path& base_dir = ".");

    bool has_section(const std::string& section) const;
    bool has(const std::string& section, const std::string& key) const;
    std::vector<std::string> sections() const;

    double number(const std::string& section, const std::string& key) const;
    double number(const std::string& section, const std::string& key, double fallback) const;
    std::optional<double> maybe_number(const std::string& section, const std::string& key) const;
    int integer(const std::string& section, const std::string& key, int fallback) const;
    bool flag(const std::string& section, const std::string& key, bool fallback) const;
    std::string text(const std::string& section, const std::string& key) const;
    std::string text(const std::string& section, const std::string& key, const std::string& fallback) const;
    // Comma-separated values, trimmed; empty entries dropped.
    std::vector<std::string> list(const std::string& section, const std::string& key) const;
    std::vector<double> numbers(const std::string& section, const std::string& key) const;
    std::filesystem::path path(const std::string& section, const std::string& key) const;

    // Rejects sections and keys absent from the schema. A schema section
    // name ending in '*' matches any section with that prefix.
    void check(const std::map<std::string, std::set<std::string>>& schema) const;

private:
    boost::property_tree::ptree tree_;
    std::filesystem::path base_dir_;
};

}  // namespace brillouin
