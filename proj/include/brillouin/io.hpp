#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "brillouin/spectra.hpp"

namespace brillouin {

// Numeric CSV with a single header row. Malformed input throws ConfigError.
// Columns named in `text_columns` are kept verbatim in `labels` (their
// numeric column holds NaN).
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;
    std::map<std::string, std::vector<std::string>> labels;

    std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }
    bool has(const std::string& name) const;
    const std::vector<double>& column(const std::string& name) const;
    const std::vector<std::string>& label_column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path, const std::vector<std::string>& text_columns = {});
CsvTable parse_csv(const std::string& text, const std::vector<std::string>& text_columns = {});
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& columns);
std::string format_double(double x);

// Trace CSV `freq_hz,power_w,sigma_w` plus a metadata sidecar next to it
// (same stem, .json extension).
std::filesystem::path sidecar_path(const std::filesystem::path& csv);
void write_trace(const std::filesystem::path& csv, const SpectrumTrace& trace);
SpectrumTrace read_trace(const std::filesystem::path& csv);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace brillouin
