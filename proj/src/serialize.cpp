#include "brillouin/serialize.hpp"

#include <cmath>

#include "brillouin/constants.hpp"
#include "brillouin/errors.hpp"
#include "json.hpp"

namespace brillouin {

namespace {

using nlohmann::json;

json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json uncertain(const Uncertain& u) { return {{"value", num(u.value)}, {"sigma", num(u.sigma)}}; }

double as_double(const json& j) { return j.is_null() ? std::nan("") : j.get<double>(); }

json parse(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid JSON: ") + e.what());
    }
}

struct Field {
    const char* name;
    Uncertain CorrectionSet::*member;
    bool rate;  // angular; accepts an _hz variant
};

constexpr Field kFields[] = {
    {"pump_power", &CorrectionSet::pump_power, false},
    {"p_lo", &CorrectionSet::p_lo, false},
    {"kappa_signal", &CorrectionSet::kappa_signal, true},
    {"delta_detune", &CorrectionSet::delta_detune, true},
    {"gamma_eff", &CorrectionSet::gamma_eff, true},
    {"kappa_ratio_ext1", &CorrectionSet::kappa_ratio_ext1, false},
    {"kappa_ratio_ext2", &CorrectionSet::kappa_ratio_ext2, false},
    {"kappa_pump", &CorrectionSet::kappa_pump, true},
};

Uncertain read_uncertain(const json& j, const std::string& name) {
    try {
        if (j.is_number()) return {j.get<double>(), 0.0};
        if (j.is_object()) return {j.at("value").get<double>(), j.value("sigma", 0.0)};
    } catch (const json::exception& e) {
        throw ConfigError("field " + name + ": " + e.what());
    }
    throw ConfigError("field " + name + " must be a number or {value, sigma}");
}

json correction_json(const CorrectionSet& c) {
    json j;
    for (const auto& f : kFields) j[f.name] = uncertain(c.*(f.member));
    return j;
}

CorrectionSet correction_from(const json& j) {
    if (!j.is_object()) throw ConfigError("corrections must be a JSON object");
    CorrectionSet c;
    for (const auto& f : kFields) {
        const std::string hz = std::string(f.name) + "_hz";
        if (j.contains(f.name)) {
            c.*(f.member) = read_uncertain(j.at(f.name), f.name);
        } else if (f.rate && j.contains(hz)) {
            c.*(f.member) = read_uncertain(j.at(hz), hz) * kTwoPi;
        } else {
            throw ConfigError(std::string("corrections: missing field ") + f.name);
        }
    }
    c.validate();
    return c;
}

}  // namespace

std::string to_json(const FitResult& fit, int indent) {
    json j;
    json params = json::object();
    for (std::size_t i = 0; i < fit.names.size(); ++i)
        params[fit.names[i]] = {{"value", num(fit.values[i])}, {"sigma", num(fit.sigma(fit.names[i]))}};
    j["parameters"] = params;
    j["names"] = fit.names;
    json cov = json::array();
    for (Eigen::Index r = 0; r < fit.covariance.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < fit.covariance.cols(); ++c) row.push_back(num(fit.covariance(r, c)));
        cov.push_back(row);
    }
    j["covariance"] = cov;
    j["chi2_reduced"] = num(fit.chi2_reduced);
    j["converged"] = fit.converged;
    j["n_iter"] = fit.n_iter;
    j["n_points"] = fit.n_points;
    json derived = json::object();
    for (const auto& [k, v] : fit.derived) derived[k] = uncertain(v);
    j["derived"] = derived;
    j["warnings"] = fit.warnings;
    return j.dump(indent);
}

FitResult fit_result_from_json(const std::string& text) {
    const json j = parse(text);
    FitResult f;
    try {
        f.names = j.at("names").get<std::vector<std::string>>();
        const auto& params = j.at("parameters");
        for (const auto& n : f.names) f.values.push_back(as_double(params.at(n).at("value")));
        const auto& cov = j.at("covariance");
        const auto n = static_cast<Eigen::Index>(f.names.size());
        f.covariance = Eigen::MatrixXd::Zero(n, n);
        for (Eigen::Index r = 0; r < n; ++r)
            for (Eigen::Index c = 0; c < n; ++c) f.covariance(r, c) = as_double(cov.at(r).at(c));
        f.chi2_reduced = as_double(j.at("chi2_reduced"));
        f.converged = j.at("converged").get<bool>();
        f.n_iter = j.value("n_iter", 0);
        f.n_points = j.value("n_points", std::size_t{0});
        if (j.contains("derived"))
            for (const auto& [k, v] : j.at("derived").items())
                f.derived[k] = {as_double(v.at("value")), as_double(v.at("sigma"))};
        f.warnings = j.value("warnings", std::vector<std::string>{});
    } catch (const json::exception& e) {
        throw ConfigError(std::string("fit result JSON: ") + e.what());
    }
    return f;
}

std::string to_json(const CorrectionSet& corr, int indent) { return correction_json(corr).dump(indent); }

CorrectionSet correction_set_from_json(const std::string& text) { return correction_from(parse(text)); }

std::pair<CorrectionSet, CorrectionSet> correction_pair_from_json(const std::string& text) {
    const json j = parse(text);
    if (!j.contains("red") || !j.contains("blue"))
        throw ConfigError("corrections file needs \"red\" and \"blue\" objects");
    return {correction_from(j.at("red")), correction_from(j.at("blue"))};
}

std::string to_json(const OccupancyReport& r, int indent) {
    json j;
    j["method"] = to_string(r.method);
    j["physical"] = r.physical;
    j["n_th"] = num(r.n_th);
    j["bound_lo"] = num(r.bound_lo);
    j["bound_hi"] = num(r.bound_hi);
    j["asymmetry"] = uncertain(r.asymmetry);
    j["integral_r"] = uncertain(r.integral_r);
    j["integral_b"] = uncertain(r.integral_b);
    j["corrected_r"] = uncertain(r.corrected_r);
    j["corrected_b"] = uncertain(r.corrected_b);
    json prov;
    if (r.corrections_r) {
        prov["red"] = correction_json(*r.corrections_r);
        prov["red"]["prefactor"] = uncertain(correction_prefactor(*r.corrections_r, PumpSide::Red));
    }
    if (r.corrections_b) {
        prov["blue"] = correction_json(*r.corrections_b);
        prov["blue"]["prefactor"] = uncertain(correction_prefactor(*r.corrections_b, PumpSide::Blue));
    }
    prov["half_width_r_hz"] = num(r.half_width_r_hz);
    prov["half_width_b_hz"] = num(r.half_width_b_hz);
    prov["window_fraction_r"] = num(r.window_fraction_r);
    prov["window_fraction_b"] = num(r.window_fraction_b);
    prov["timestamp_r"] = r.timestamp_r;
    prov["timestamp_b"] = r.timestamp_b;
    j["provenance"] = prov;
    j["warnings"] = r.warnings;
    return j.dump(indent);
}

}  // namespace brillouin
