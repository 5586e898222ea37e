#include "brillouin/io.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "brillouin/errors.hpp"
#include "json.hpp"

namespace brillouin {

namespace fs = std::filesystem;
using nlohmann::json;

bool CsvTable::has(const std::string& name) const {
    for (const auto& h : header)
        if (h == name) return true;
    return false;
}

const std::vector<double>& CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return columns[i];
    throw ConfigError("CSV is missing column '" + name + "'");
}

const std::vector<std::string>& CsvTable::label_column(const std::string& name) const {
    const auto it = labels.find(name);
    if (it == labels.end()) throw ConfigError("CSV is missing column '" + name + "'");
    return it->second;
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(line);
    while (std::getline(is, cur, sep)) out.push_back(trim(cur));
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

double parse_number(const std::string& s, std::size_t row) {
    if (s.empty()) throw ConfigError("empty CSV field at data row " + std::to_string(row));
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw ConfigError("non-numeric CSV field '" + s + "' at data row " + std::to_string(row));
    }
    if (pos != s.size()) {
        throw ConfigError("non-numeric CSV field '" + s + "' at data row " + std::to_string(row));
    }
    return v;
}

}  // namespace

CsvTable parse_csv(const std::string& text, const std::vector<std::string>& text_columns) {
    std::istringstream is(text);
    std::string line;
    CsvTable t;
    bool have_header = false;
    std::size_t row = 0;
    while (std::getline(is, line)) {
        const std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        if (!have_header) {
            t.header = split(s, ',');
            for (const auto& h : t.header)
                if (h.empty()) throw ConfigError("CSV header has an empty column name");
            t.columns.assign(t.header.size(), {});
            for (const auto& h : t.header)
                if (std::find(text_columns.begin(), text_columns.end(), h) != text_columns.end()) t.labels[h];
            have_header = true;
            continue;
        }
        const auto fields = split(s, ',');
        if (fields.size() != t.header.size()) {
            throw ConfigError("CSV data row " + std::to_string(row) + " has " +
                              std::to_string(fields.size()) + " fields, expected " +
                              std::to_string(t.header.size()));
        }
        for (std::size_t c = 0; c < fields.size(); ++c) {
            if (std::find(text_columns.begin(), text_columns.end(), t.header[c]) != text_columns.end()) {
                t.labels[t.header[c]].push_back(fields[c]);
                t.columns[c].push_back(std::numeric_limits<double>::quiet_NaN());
            } else {
                t.columns[c].push_back(parse_number(fields[c], row));
            }
        }
        ++row;
    }
    if (!have_header) throw ConfigError("CSV is empty");
    return t;
}

CsvTable read_csv(const fs::path& path, const std::vector<std::string>& text_columns) {
    return parse_csv(read_text(path), text_columns);
}

std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& columns) {
    if (header.size() != columns.size()) throw ConfigError("write_csv: header/column count mismatch");
    std::ostringstream os;
    for (std::size_t c = 0; c < header.size(); ++c) os << (c ? "," : "") << header[c];
    os << '\n';
    const std::size_t n = columns.empty() ? 0 : columns.front().size();
    for (const auto& col : columns)
        if (col.size() != n) throw ConfigError("write_csv: ragged columns");
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < columns.size(); ++c) os << (c ? "," : "") << format_double(columns[c][r]);
        os << '\n';
    }
    write_text(path, os.str());
}

fs::path sidecar_path(const fs::path& csv) {
    fs::path p = csv;
    p.replace_extension(".json");
    return p;
}

void write_trace(const fs::path& csv, const SpectrumTrace& trace) {
    write_csv(csv, {"freq_hz", "power_w", "sigma_w"}, {trace.freq, trace.power, trace.sigma});
    json j;
    j["rbw_hz"] = trace.meta.rbw_hz;
    j["pump_side"] = trace.meta.pump_side ? to_string(*trace.meta.pump_side) : std::string();
    j["n_averages"] = trace.meta.n_averages;
    j["timestamp_start"] = trace.meta.timestamp_start;
    j["timestamp_end"] = trace.meta.timestamp_end;
    j["kind"] = trace.meta.kind;
    j["warnings"] = trace.meta.warnings;
    write_text(sidecar_path(csv), j.dump(2) + "\n");
}

SpectrumTrace read_trace(const fs::path& csv) {
    const CsvTable t = read_csv(csv);
    SpectrumTrace tr;
    tr.freq = t.column("freq_hz");
    tr.power = t.column("power_w");
    tr.sigma = t.has("sigma_w") ? t.column("sigma_w") : std::vector<double>(tr.freq.size(), 0.0);
    if (tr.freq.empty()) throw ConfigError("trace '" + csv.string() + "' has no data rows");
    const fs::path side = sidecar_path(csv);
    if (fs::exists(side)) {
        json j;
        try {
            j = json::parse(read_text(side));
        } catch (const json::exception& e) {
            throw ConfigError("bad trace sidecar '" + side.string() + "': " + e.what());
        }
        tr.meta.rbw_hz = j.value("rbw_hz", 0.0);
        const std::string ps = j.value("pump_side", std::string());
        if (!ps.empty()) tr.meta.pump_side = pump_side_from_string(ps);
        tr.meta.n_averages = j.value("n_averages", 1);
        tr.meta.timestamp_start = j.value("timestamp_start", std::string());
        tr.meta.timestamp_end = j.value("timestamp_end", std::string());
        tr.meta.kind = j.value("kind", std::string());
        if (j.contains("warnings")) tr.meta.warnings = j["warnings"].get<std::vector<std::string>>();
    }
    tr.validate();
    return tr;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot write '" + path.string() + "'");
    os << text;
}

std::string read_text(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot read '" + path.string() + "'");
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace brillouin
