#include "brillouin/config.hpp"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <cmath>
#include <sstream>

#include "brillouin/errors.hpp"
#include "brillouin/io.hpp"

namespace brillouin {

namespace pt = boost::property_tree;

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string where(const std::string& section, const std::string& key) { return "[" + section + "] " + key; }

double to_number(const std::string& raw, const std::string& section, const std::string& key) {
    const std::string s = trim(raw);
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw ConfigError("config " + where(section, key) + ": '" + s + "' is not a number");
    }
    if (used != s.size()) throw ConfigError("config " + where(section, key) + ": '" + s + "' is not a number");
    if (!std::isfinite(v)) throw ConfigError("config " + where(section, key) + ": value must be finite");
    return v;
}

}  // namespace

Config Config::load(const std::filesystem::path& path) {
    return parse(read_text(path), path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
}

Config Config::parse(const std::string& text, const std::filesystem::path& base_dir) {
    // The INI reader only knows ';' comments.
    std::istringstream in(text);
    std::ostringstream cleaned;
    std::string line;
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (!t.empty() && t.front() == '#') continue;
        cleaned << line << '\n';
    }
    Config c;
    c.base_dir_ = base_dir;
    std::istringstream src(cleaned.str());
    try {
        pt::ini_parser::read_ini(src, c.tree_);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    for (const auto& [name, node] : c.tree_)
        if (node.empty()) throw ConfigError("config: key '" + name + "' outside any section");
    return c;
}

bool Config::has_section(const std::string& section) const { return tree_.find(section) != tree_.not_found(); }

bool Config::has(const std::string& section, const std::string& key) const {
    const auto s = tree_.find(section);
    if (s == tree_.not_found()) return false;
    return s->second.find(key) != s->second.not_found();
}

std::vector<std::string> Config::sections() const {
    std::vector<std::string> out;
    for (const auto& [name, node] : tree_) out.push_back(name);
    return out;
}

std::string Config::text(const std::string& section, const std::string& key) const {
    if (!has(section, key)) throw ConfigError("config: missing " + where(section, key));
    return trim(tree_.get_child(section).find(key)->second.data());
}

std::string Config::text(const std::string& section, const std::string& key, const std::string& fallback) const {
    return has(section, key) ? text(section, key) : fallback;
}

double Config::number(const std::string& section, const std::string& key) const {
    return to_number(text(section, key), section, key);
}

double Config::number(const std::string& section, const std::string& key, double fallback) const {
    return has(section, key) ? number(section, key) : fallback;
}

std::optional<double> Config::maybe_number(const std::string& section, const std::string& key) const {
    if (!has(section, key)) return std::nullopt;
    return number(section, key);
}

int Config::integer(const std::string& section, const std::string& key, int fallback) const {
    if (!has(section, key)) return fallback;
    const double v = number(section, key);
    if (v != std::floor(v) || std::abs(v) > 1e9)
        throw ConfigError("config " + where(section, key) + ": expected an integer");
    return static_cast<int>(v);
}

bool Config::flag(const std::string& section, const std::string& key, bool fallback) const {
    if (!has(section, key)) return fallback;
    std::string v = text(section, key);
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
    if (v == "false" || v == "no" || v == "0" || v == "off") return false;
    throw ConfigError("config " + where(section, key) + ": expected true or false");
}

std::vector<std::string> Config::list(const std::string& section, const std::string& key) const {
    std::vector<std::string> out;
    std::istringstream in(text(section, key));
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<double> Config::numbers(const std::string& section, const std::string& key) const {
    std::vector<double> out;
    for (const auto& s : list(section, key)) out.push_back(to_number(s, section, key));
    return out;
}

std::filesystem::path Config::path(const std::string& section, const std::string& key) const {
    std::filesystem::path p = text(section, key);
    return p.is_absolute() ? p : base_dir_ / p;
}

void Config::check(const std::map<std::string, std::set<std::string>>& schema) const {
    for (const auto& [name, node] : tree_) {
        const std::set<std::string>* keys = nullptr;
        for (const auto& [pattern, allowed] : schema) {
            const bool wildcard = !pattern.empty() && pattern.back() == '*';
            if (wildcard ? name.rfind(pattern.substr(0, pattern.size() - 1), 0) == 0 : name == pattern) {
                keys = &allowed;
                break;
            }
        }
        if (!keys) throw ConfigError("config: unknown section [" + name + "]");
        for (const auto& [key, value] : node)
            if (!keys->count(key)) throw ConfigError("config: unknown key " + where(name, key));
    }
}

}  // namespace brillouin
