#pragma once

#include <string>
#include <utility>

#include "brillouin/fit.hpp"
#include "brillouin/thermometry.hpp"

namespace brillouin {

// JSON text for results. Non-finite numbers are written as null.
std::string to_json(const FitResult& fit, int indent = 2);
std::string to_json(const OccupancyReport& report, int indent = 2);
std::string to_json(const CorrectionSet& corr, int indent = 2);

FitResult fit_result_from_json(const std::string& text);
CorrectionSet correction_set_from_json(const std::string& text);

// Corrections file with "red" and "blue" objects. Each field is either a
// number or {"value": v, "sigma": s}. Rates may be given in Hz with an
// "_hz" suffix (e.g. "gamma_eff_hz"); they are converted to rad/s.
std::pair<CorrectionSet, CorrectionSet> correction_pair_from_json(const std::string& text);

}  // namespace brillouin
