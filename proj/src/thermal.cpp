#include "brillouin/thermal.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "brillouin/errors.hpp"
#include "brillouin/io.hpp"
#include "brillouin/parallel.hpp"

namespace brillouin {

namespace {

double poly(const std::vector<double>& c, double x) {
    double acc = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x + *it;
    return acc;
}

double dpoly(const std::vector<double>& c, double x) {
    double acc = 0.0;
    for (std::size_t k = c.size(); k-- > 1;) acc = acc * x + static_cast<double>(k) * c[k];
    return acc;
}

// Size of the largest term at x, for deciding when f(x) is zero.
double term_scale(const std::vector<double>& c, double x) {
    double s = 0.0, p = 1.0;
    for (double ci : c) {
        s = std::max(s, std::abs(ci * p));
        p *= x;
    }
    return s;
}

double rms(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return a.empty() ? 0.0 : std::sqrt(s / static_cast<double>(a.size()));
}

}  // namespace

void ThermalParams::validate() const {
    for (double v : {r0, r1, r2, b_sc, b_mc})
        if (!(v >= 0.0) || std::isnan(v)) throw ConfigError("ThermalParams: coefficients must be >= 0");
    for (double v : {r1, r2, b_sc, b_mc})
        if (!std::isfinite(v)) throw ConfigError("ThermalParams: only r0 may be infinite");
    if (r0 + r1 + r2 <= 0.0 && !(b_sc > 0.0 && b_mc > 0.0))
        throw ConfigError("ThermalParams: need r0 + r1 + r2 > 0 or both blackbody coefficients > 0");
    if (std::isinf(r0) && b_sc + b_mc <= 0.0)
        throw ConfigError("ThermalParams: infinite resistance needs a blackbody coefficient > 0");
}

void WarmupSeries::validate() const {
    if (v_m.size() != times.size() || v_s.size() != times.size())
        throw ConfigError("WarmupSeries: column lengths differ");
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (i > 0 && !(times[i] > times[i - 1])) throw ConfigError("WarmupSeries: times must increase");
        if (!(v_m[i] > 0.0) || !(v_s[i] > 0.0)) throw ConfigError("WarmupSeries: temperatures must be > 0");
    }
}

double thermal_resistance(double v_m, const ThermalParams& p) {
    if (!(v_m > 0.0)) throw ConfigError("thermal_resistance: v_m must be > 0");
    return p.r0 + p.r1 / v_m + p.r2 / (v_m * v_m);
}

double blackbody_net_current(double b, double v_other, double v_c) {
    // b_{x-c} = b_{c-x}, so the two currents cancel exactly at equal temperature.
    const double in = b * std::pow(v_other, 4);
    const double out = b * std::pow(v_c, 4);
    return in - out;
}

std::vector<double> crystal_quartic(double v_m, double v_s, const ThermalParams& p) {
    const double r = thermal_resistance(v_m, p);
    const double src = p.b_sc * std::pow(v_s, 4) + p.b_mc * std::pow(v_m, 4);
    if (std::isinf(r)) return {-src, 0.0, 0.0, 0.0, p.b_sc + p.b_mc};
    return {-(v_m + r * src), 1.0, 0.0, 0.0, r * (p.b_sc + p.b_mc)};
}

std::vector<double> real_polynomial_roots(const std::vector<double>& coeffs) {
    std::vector<double> c = coeffs;
    while (!c.empty() && c.back() == 0.0) c.pop_back();
    std::vector<double> roots;
    if (c.size() < 2) return roots;
    const auto n = static_cast<Eigen::Index>(c.size() - 1);
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 1; i < n; ++i) comp(i, i - 1) = 1.0;
    for (Eigen::Index i = 0; i < n; ++i) comp(i, n - 1) = -c[static_cast<std::size_t>(i)] / c.back();
    const Eigen::VectorXcd ev = comp.eigenvalues();
    for (Eigen::Index i = 0; i < n; ++i)
        if (std::abs(ev(i).imag()) <= 1e-9 * (1.0 + std::abs(ev(i).real()))) roots.push_back(ev(i).real());
    std::sort(roots.begin(), roots.end());
    return roots;
}

double steady_state_crystal_temp(double v_m, double v_s, const ThermalParams& p) {
    if (!(v_m > 0.0) || !(v_s > 0.0)) throw ConfigError("steady_state_crystal_temp: temperatures must be > 0");
    p.validate();
    const std::vector<double> c = crystal_quartic(v_m, v_s, p);
    const double lo = std::min(v_m, v_s);
    const double hi = std::max(v_m, v_s);
    if (lo == hi) return lo;

    auto f = [&](double x) {
        const double v = poly(c, x);
        return std::abs(v) <= 1e-14 * term_scale(c, x) ? 0.0 : v;
    };
    constexpr int kSteps = 256;
    double x0 = lo, f0 = f(lo);
    for (int k = 1; k <= kSteps; ++k) {
        if (f0 == 0.0) return x0;
        const double x1 = k == kSteps ? hi : lo + (hi - lo) * k / kSteps;
        const double f1 = f(x1);
        if (f1 == 0.0) return x1;
        if ((f0 < 0.0) != (f1 < 0.0)) {
            double a = x0, b = x1, fa = f0;
            while (b - a > 1e-12 * b) {
                const double m = 0.5 * (a + b);
                const double fm = f(m);
                if (fm == 0.0) return m;
                if ((fm < 0.0) == (fa < 0.0)) {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                }
            }
            double x = 0.5 * (a + b);
            const double d = dpoly(c, x);
            if (d != 0.0) {
                const double xn = x - poly(c, x) / d;
                if (xn >= a && xn <= b) x = xn;
            }
            return x;
        }
        x0 = x1;
        f0 = f1;
    }
    throw NoAdmissibleRootError("no root of the crystal quartic between the mount and still temperatures",
                                real_polynomial_roots(c));
}

std::vector<double> warmup_sweep(const WarmupSeries& series, const ThermalParams& p, int jobs) {
    series.validate();
    p.validate();
    std::vector<double> out(series.size());
    parallel_for(series.size(), jobs,
                 [&](std::size_t i) { out[i] = steady_state_crystal_temp(series.v_m[i], series.v_s[i], p); });
    return out;
}

std::string to_string(Regime r) {
    switch (r) {
        case Regime::MountTracking: return "mount_tracking";
        case Regime::StillTracking: return "still_tracking";
        case Regime::Intermediate: return "intermediate";
    }
    return "intermediate";
}

bool matches_plateau(const WarmupSeries& series, const std::vector<double>& v_c, const PlateauCriterion& crit) {
    bool low_ok = true, high_ok = true, any_low = false, any_high = false;
    for (std::size_t i = 0; i < v_c.size(); ++i) {
        if (series.v_m[i] < crit.plateau_k) {
            any_low = true;
            low_ok = low_ok && std::abs(v_c[i] - crit.plateau_k) <= crit.plateau_tol * crit.plateau_k;
        } else {
            any_high = true;
            high_ok = high_ok && std::abs(v_c[i] - series.v_m[i]) <= crit.track_tol * series.v_m[i];
        }
    }
    return any_low && any_high && low_ok && high_ok;
}

RegimeReport scan_regimes(const WarmupSeries& series, const std::vector<ThermalParams>& grid,
                          const PlateauCriterion& crit, int jobs) {
    series.validate();
    RegimeReport rep;
    rep.points.resize(grid.size());
    const double sep = rms(series.v_m, series.v_s);
    parallel_for(grid.size(), jobs, [&](std::size_t g) {
        RegimePoint& pt = rep.points[g];
        pt.params = grid[g];
        const std::vector<double> vc = warmup_sweep(series, grid[g]);
        pt.rms_to_mount = rms(vc, series.v_m);
        pt.rms_to_still = rms(vc, series.v_s);
        if (pt.rms_to_mount <= 0.1 * sep)
            pt.regime = Regime::MountTracking;
        else if (pt.rms_to_still <= 0.1 * sep)
            pt.regime = Regime::StillTracking;
        else
            pt.regime = Regime::Intermediate;
        pt.reproduces_plateau = matches_plateau(series, vc, crit);
    });
    for (const auto& pt : rep.points) {
        if (pt.regime == Regime::MountTracking) ++rep.mount_tracking;
        if (pt.regime == Regime::StillTracking) ++rep.still_tracking;
        if (pt.regime == Regime::Intermediate) ++rep.intermediate;
        if (pt.reproduces_plateau) ++rep.plateau_matches;
    }
    return rep;
}

std::vector<double> log_axis(double lo, double hi, int n) {
    if (n <= 1) return {lo};
    if (!(lo > 0.0) || !(hi > 0.0)) throw ConfigError("log_axis: bounds must be > 0");
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1));
    return v;
}

std::vector<ThermalParams> thermal_grid(const std::vector<double>& r0, const std::vector<double>& r1,
                                        const std::vector<double>& r2, const std::vector<double>& b_sc,
                                        const std::vector<double>& b_mc) {
    std::vector<ThermalParams> out;
    for (double a : r0)
        for (double b : r1)
            for (double c : r2)
                for (double d : b_sc)
                    for (double e : b_mc) {
                        ThermalParams p{a, b, c, d, e};
                        try {
                            p.validate();
                        } catch (const ConfigError&) {
                            continue;
                        }
                        out.push_back(p);
                    }
    return out;
}

WarmupSeries read_warmup_series(const std::filesystem::path& csv) {
    const CsvTable t = read_csv(csv);
    WarmupSeries s{t.column("time_s"), t.column("v_mount_k"), t.column("v_still_k")};
    s.validate();
    return s;
}

void write_warmup_result(const std::filesystem::path& csv, const WarmupSeries& series,
                         const std::vector<double>& v_c) {
    write_csv(csv, {"time_s", "v_mount_k", "v_still_k", "v_crystal_k"}, {series.times, series.v_m, series.v_s, v_c});
}

}  // namespace brillouin
