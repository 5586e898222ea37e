#include "brillouin/fit.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <sstream>

#include "brillouin/errors.hpp"

namespace brillouin {

using cd = std::complex<double>;

std::size_t FitResult::index(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return i;
    throw ConfigError("fit result has no parameter '" + name + "'");
}

double FitResult::sigma(const std::string& name) const {
    const auto i = index(name);
    if (covariance.rows() <= static_cast<Eigen::Index>(i)) return 0.0;
    return std::sqrt(std::max(0.0, covariance(i, i)));
}

std::map<std::string, double> FitResult::as_map() const {
    std::map<std::string, double> m;
    for (std::size_t i = 0; i < names.size(); ++i) m[names[i]] = values[i];
    return m;
}

void add_variance(FitResult& fit, const std::string& name, double extra_variance) {
    const auto i = fit.index(name);
    fit.covariance(i, i) += extra_variance;
}

std::vector<double> numeric_gradient(const ModelFn& model, double x, const std::vector<double>& p) {
    std::vector<double> g(p.size());
    std::vector<double> q = p;
    for (std::size_t j = 0; j < p.size(); ++j) {
        const double h = 1e-6 * std::max(std::abs(p[j]), 1e-8);
        q[j] = p[j] + h;
        const double fp = model(x, q);
        q[j] = p[j] - h;
        const double fm = model(x, q);
        q[j] = p[j];
        g[j] = (fp - fm) / (2.0 * h);
    }
    return g;
}

FitResult nls_fit(const ModelFn& model, const std::vector<double>& x, const std::vector<double>& y,
                  const std::vector<double>& sigma, const std::vector<ParamSpec>& params,
                  const FitOptions& opt, const GradFn& grad) {
    const std::size_t n = x.size();
    if (y.size() != n || (!sigma.empty() && sigma.size() != n)) {
        throw ConfigError("nls_fit: data arrays differ in length");
    }
    std::vector<std::size_t> free;
    std::vector<double> p(params.size());
    for (std::size_t j = 0; j < params.size(); ++j) {
        const auto& s = params[j];
        if (!(s.init >= s.lower && s.init <= s.upper)) {
            throw ConfigError("nls_fit: initial value of '" + s.name + "' outside its bounds");
        }
        p[j] = s.init;
        if (!s.fixed) free.push_back(j);
    }
    const std::size_t k = free.size();
    if (n < std::max<std::size_t>(k, 1)) {
        throw InsufficientDataError("nls_fit: " + std::to_string(n) + " points for " + std::to_string(k) +
                                    " free parameters");
    }
    std::vector<double> w(n, 1.0);
    for (std::size_t i = 0; i < sigma.size(); ++i) {
        if (!(sigma[i] > 0.0)) throw ConfigError("nls_fit: sigma must be > 0 when supplied");
        w[i] = 1.0 / sigma[i];
    }

    auto residuals = [&](const std::vector<double>& q, Eigen::VectorXd& r) {
        r.resize(n);
        for (std::size_t i = 0; i < n; ++i) r(i) = (y[i] - model(x[i], q)) * w[i];
        return r.squaredNorm();
    };
    auto jacobian = [&](const std::vector<double>& q, Eigen::MatrixXd& J) {
        J.resize(n, k);
        std::vector<double> g(q.size());
        for (std::size_t i = 0; i < n; ++i) {
            if (grad) {
                grad(x[i], q, g);
            } else {
                g = numeric_gradient(model, x[i], q);
            }
            for (std::size_t c = 0; c < k; ++c) J(i, c) = g[free[c]] * w[i];
        }
    };
    auto project = [&](std::vector<double>& q) {
        for (std::size_t j = 0; j < q.size(); ++j) q[j] = std::clamp(q[j], params[j].lower, params[j].upper);
    };

    Eigen::VectorXd r;
    double cost = residuals(p, r);
    if (!std::isfinite(cost)) throw ConfigError("nls_fit: model is not finite at the initial point");
    double lambda = opt.lambda0;
    FitResult res;
    Eigen::MatrixXd J;
    bool converged = false;
    int iter = 0;
    for (; iter < opt.max_iter && !converged; ++iter) {
        jacobian(p, J);
        const Eigen::MatrixXd A = J.transpose() * J;
        const Eigen::VectorXd g = J.transpose() * r;
        if (cost == 0.0) {
            converged = true;
            break;
        }
        double gscaled = 0.0;
        const double rn = std::sqrt(cost);
        for (std::size_t c = 0; c < k; ++c) {
            const double cn = std::sqrt(A(c, c));
            if (cn > 0.0) gscaled = std::max(gscaled, std::abs(g(c)) / (cn * rn));
        }
        if (gscaled <= opt.gtol) {
            converged = true;
            break;
        }
        Eigen::VectorXd D = A.diagonal();
        for (std::size_t c = 0; c < k; ++c)
            if (!(D(c) > 0.0)) D(c) = 1.0;
        bool accepted = false;
        while (!accepted) {
            Eigen::MatrixXd M = A;
            M.diagonal() += lambda * D;
            const Eigen::VectorXd step = M.ldlt().solve(g);
            std::vector<double> q = p;
            for (std::size_t c = 0; c < k; ++c) q[free[c]] += step(c);
            project(q);
            Eigen::VectorXd rq;
            const double cq = residuals(q, rq);
            if (std::isfinite(cq) && cq < cost) {
                const double rel = (cost - cq) / cost;
                p = q;
                r = rq;
                cost = cq;
                lambda = std::max(lambda / opt.lambda_factor, 1e-15);
                accepted = true;
                if (rel < opt.ftol) converged = true;
            } else {
                lambda *= opt.lambda_factor;
                if (lambda > 1e16) {
                    // No descent direction left at working precision.
                    converged = true;
                    break;
                }
            }
        }
    }
    res.n_iter = iter;
    res.converged = converged;
    res.n_points = n;
    for (const auto& s : params) res.names.push_back(s.name);
    res.values = p;
    if (!converged && opt.throw_on_failure) {
        throw ConvergenceError("nls_fit: no convergence after " + std::to_string(opt.max_iter) + " iterations");
    }

    jacobian(p, J);
    const std::size_t dof = n > k ? n - k : 1;
    res.chi2_reduced = cost / static_cast<double>(dof);
    res.covariance = Eigen::MatrixXd::Zero(params.size(), params.size());
    if (k > 0) {
        Eigen::VectorXd cn(k);
        for (std::size_t c = 0; c < k; ++c) cn(c) = J.col(c).norm();
        for (std::size_t c = 0; c < k; ++c) {
            if (!(cn(c) > 0.0)) {
                throw SingularJacobianError("nls_fit: parameter '" + params[free[c]].name +
                                            "' has no effect on the model");
            }
        }
        const Eigen::MatrixXd Js = J * cn.cwiseInverse().asDiagonal();
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Js);
        // Finite-difference columns carry ~1e-10 relative noise; loosen accordingly.
        qr.setThreshold(grad ? opt.rank_tol : std::max(opt.rank_tol, 1e-8));
        if (qr.rank() < static_cast<Eigen::Index>(k)) {
            throw SingularJacobianError("nls_fit: Jacobian is rank deficient at the optimum");
        }
        const Eigen::MatrixXd As = Js.transpose() * Js;
        const Eigen::MatrixXd inv_s = As.ldlt().solve(Eigen::MatrixXd::Identity(k, k));
        const Eigen::MatrixXd cov = cn.cwiseInverse().asDiagonal() * inv_s * cn.cwiseInverse().asDiagonal();
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = 0; b < k; ++b) res.covariance(free[a], free[b]) = cov(a, b) * res.chi2_reduced;
    }
    return res;
}

Uncertain propagate(const std::function<double(const std::vector<double>&)>& f, const FitResult& fit) {
    const std::size_t m = fit.values.size();
    const double v = f(fit.values);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(m);
    std::vector<double> q = fit.values;
    for (std::size_t j = 0; j < m; ++j) {
        const double var = fit.covariance(j, j);
        if (!(var > 0.0)) continue;
        const double h = std::max(1e-4 * std::sqrt(var), 1e-9 * std::abs(fit.values[j]));
        q[j] = fit.values[j] + h;
        const double fp = f(q);
        q[j] = fit.values[j] - h;
        const double fm = f(q);
        q[j] = fit.values[j];
        g(j) = (fp - fm) / (2.0 * h);
    }
    const double var = g.dot(fit.covariance * g);
    return {v, std::sqrt(std::max(0.0, var))};
}

// ---------------------------------------------------------------------------

namespace {

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
        m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + mid));
    }
    return m;
}

double mad_sigma(const std::vector<double>& r) {
    const double med = median(r);
    std::vector<double> d(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) d[i] = std::abs(r[i] - med);
    return 1.4826 * median(d);
}

struct Prepared {
    std::vector<double> x;  // angular offset from ref
    std::vector<double> y;
    std::vector<double> s;  // empty when unweighted
    double ref = 0.0;
};

bool all_positive(const std::vector<double>& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](double v) { return v > 0.0; });
}

Prepared prepare(const SpectrumTrace& trace, const std::vector<std::pair<double, double>>& excl,
                 std::optional<std::pair<double, double>> keep = std::nullopt) {
    Prepared d;
    if (trace.size() == 0) throw InsufficientDataError("empty trace");
    d.ref = hz_to_angular(0.5 * (trace.freq.front() + trace.freq.back()));
    const bool weighted = all_positive(trace.sigma);
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const double f = trace.freq[i];
        if (keep && (f < keep->first || f > keep->second)) continue;
        bool skip = false;
        for (const auto& [lo, hi] : excl)
            if (f >= std::min(lo, hi) && f <= std::max(lo, hi)) skip = true;
        if (skip) continue;
        d.x.push_back(hz_to_angular(f) - d.ref);
        d.y.push_back(trace.power[i]);
        if (weighted) d.s.push_back(trace.sigma[i]);
    }
    return d;
}

// Half-maximum crossing width of |v| around index i.
double half_width_span(const std::vector<double>& x, const std::vector<double>& v, std::size_t i) {
    const double half = 0.5 * std::abs(v[i]);
    std::size_t l = i, r = i;
    while (l > 0 && std::abs(v[l]) > half && (v[l] > 0) == (v[i] > 0)) --l;
    while (r + 1 < v.size() && std::abs(v[r]) > half && (v[r] > 0) == (v[i] > 0)) ++r;
    const double w = x[r] - x[l];
    return w > 0.0 ? w : (x.size() > 1 ? std::abs(x[1] - x[0]) : 1.0);
}

}  // namespace

double optical_lorentzian(double omega, double delta_21, double kappa, double a0) {
    const double h = 0.5 * kappa, u = omega - delta_21;
    return a0 * a0 * h * h / (h * h + u * u);
}

void optical_lorentzian_grad(double omega, const std::vector<double>& p, std::vector<double>& g) {
    const double h = 0.5 * p[1], u = omega - p[0], a0 = p[2];
    const double den = h * h + u * u;
    g.resize(3);
    g[0] = a0 * a0 * h * h * 2.0 * u / (den * den);
    g[1] = a0 * a0 * h * u * u / (den * den);
    g[2] = 2.0 * a0 * h * h / den;
}

FitResult fit_optical_lorentzian(const SpectrumTrace& trace,
                                 const std::vector<std::pair<double, double>>& excl, const FitOptions& opt) {
    trace.validate();
    const Prepared d = prepare(trace, excl);
    if (d.x.size() < 4) throw InsufficientDataError("optical fit: fewer than 4 usable points");
    // Initial guess from the raw shape: peak position, sqrt of its height, FWHM.
    const auto imax = static_cast<std::size_t>(std::max_element(d.y.begin(), d.y.end()) - d.y.begin());
    const double ymax = d.y[imax];
    if (!(ymax > 0.0)) throw NoFeatureError("optical fit: no positive transmission");
    double lo = d.x.front(), hi = d.x.back();
    for (std::size_t i = imax; i-- > 0;)
        if (d.y[i] < 0.5 * ymax) {
            lo = d.x[i];
            break;
        }
    for (std::size_t i = imax; i < d.x.size(); ++i)
        if (d.y[i] < 0.5 * ymax) {
            hi = d.x[i];
            break;
        }
    const double kappa0 = std::max(hi - lo, 4.0 * std::abs(d.x[1] - d.x[0]));
    std::vector<ParamSpec> ps = {
        {"delta_21", d.x[imax], -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()},
        {"kappa", kappa0, 0.0, std::numeric_limits<double>::infinity()},
        {"a0", std::sqrt(ymax), 0.0, std::numeric_limits<double>::infinity()},
    };
    ModelFn f = [](double x, const std::vector<double>& p) { return optical_lorentzian(x, p[0], p[1], p[2]); };
    FitResult r = nls_fit(f, d.x, d.y, d.s, ps, opt, optical_lorentzian_grad);
    r.values[0] += d.ref;
    return r;
}

std::vector<Feature> detect_features(const SpectrumTrace& trace, const FitResult& optical, double threshold) {
    const double d21 = optical.value("delta_21"), kappa = optical.value("kappa"), a0 = optical.value("a0");
    std::vector<double> res(trace.size()), xs(trace.size());
    double ymax = 0.0;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        xs[i] = trace.freq[i];
        res[i] = trace.power[i] - optical_lorentzian(hz_to_angular(trace.freq[i]), d21, kappa, a0);
        ymax = std::max(ymax, std::abs(trace.power[i]));
    }
    const double thr = std::max(threshold * mad_sigma(res), 1e-9 * ymax);
    std::vector<std::size_t> cand;
    for (std::size_t i = 0; i < res.size(); ++i) {
        const double a = std::abs(res[i]);
        if (a <= thr) continue;
        const bool left = i == 0 || a >= std::abs(res[i - 1]);
        const bool right = i + 1 == res.size() || a >= std::abs(res[i + 1]);
        if (left && right) cand.push_back(i);
    }
    std::sort(cand.begin(), cand.end(), [&](auto a, auto b) { return std::abs(res[a]) > std::abs(res[b]); });
    std::vector<Feature> out;
    const double kappa_hz = angular_to_hz(kappa);
    for (std::size_t i : cand) {
        const double w = half_width_span(xs, res, i);
        if (w > 0.25 * kappa_hz) continue;  // broad residual structure, not a mechanical line
        bool merged = false;
        for (const auto& f : out) {
            // Same line, or a noise wiggle riding on the tail of a stronger one.
            const double dx = 2.0 * (xs[i] - f.center_hz) / f.width_hz;
            const double tail = std::abs(f.amplitude) / (1.0 + dx * dx);
            if (std::abs(f.center_hz - xs[i]) < 5.0 * std::max(f.width_hz, w) || tail > 0.3 * std::abs(res[i])) merged = true;
        }
        if (!merged) out.push_back({xs[i], w, res[i]});
    }
    std::sort(out.begin(), out.end(), [](const Feature& a, const Feature& b) { return a.center_hz < b.center_hz; });
    return out;
}

void transmission_grad(double omega, const std::vector<double>& p, PumpSide side, std::vector<double>& g) {
    const cd I(0.0, 1.0);
    const double s = side == PumpSide::Red ? 1.0 : -1.0;
    const double h = 0.5 * p[1], a0 = p[2];
    const std::size_t nm = (p.size() - 3) / 3;
    std::vector<cd> Mk(nm);
    cd Dn = h - I * (omega - p[0]);
    for (std::size_t m = 0; m < nm; ++m) {
        const double wm = p[3 + 3 * m], gm = p[4 + 3 * m], gg = p[5 + 3 * m];
        Mk[m] = 0.5 * gm - I * (omega - wm);
        Dn += s * gg * gg / Mk[m];
    }
    const cd A = a0 * h / Dn;
    const cd cA = std::conj(A);
    auto d = [&](cd dA) { return 2.0 * (cA * dA).real(); };
    g.assign(p.size(), 0.0);
    g[0] = d(-A * I / Dn);
    g[1] = d(a0 / (2.0 * Dn) * (1.0 - h / Dn));
    g[2] = d(h / Dn);
    for (std::size_t m = 0; m < nm; ++m) {
        const double gg = p[5 + 3 * m];
        const cd M2 = Mk[m] * Mk[m];
        g[3 + 3 * m] = d(-A / Dn * (-s * I * gg * gg / M2));
        g[4 + 3 * m] = d(-A / Dn * (-s * 0.5 * gg * gg / M2));
        g[5 + 3 * m] = d(-A / Dn * (s * 2.0 * gg / Mk[m]));
    }
}

namespace {

double transmission_packed(double omega, const std::vector<double>& p, PumpSide side) {
    std::vector<TransmissionTerm> t;
    for (std::size_t m = 3; m + 2 < p.size(); m += 3) t.push_back({p[m], p[m + 1], p[m + 2]});
    return transmission_model(omega, p[2], p[1], p[0], t, side);
}

// Combined covariance of (delta_21, kappa) from the optical fit and
// (omega_m, gamma_m, g) from the mechanical fit, in that order.
Uncertain derived_quantity(const FitResult& optical, const FitResult& mech,
                           const std::function<double(const std::vector<double>&)>& f) {
    FitResult joint;
    joint.names = {"delta_21", "kappa", "omega_m", "gamma_m", "g"};
    joint.values = {optical.value("delta_21"), optical.value("kappa"), mech.value("omega_m"),
                    mech.value("gamma_m"), mech.value("g")};
    joint.covariance = Eigen::MatrixXd::Zero(5, 5);
    const std::size_t oi[2] = {optical.index("delta_21"), optical.index("kappa")};
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) joint.covariance(a, b) = optical.covariance(oi[a], oi[b]);
    const std::size_t mi[3] = {mech.index("omega_m"), mech.index("gamma_m"), mech.index("g")};
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) joint.covariance(2 + a, 2 + b) = mech.covariance(mi[a], mi[b]);
    return propagate(f, joint);
}

}  // namespace

FitResult fit_mechanical_feature(const SpectrumTrace& trace, const FitResult& optical,
                                 std::pair<double, double> window_hz, PumpSide side, const FitOptions& opt,
                                 const std::vector<TransmissionTerm>& fixed_terms) {
    trace.validate();
    const double d21 = optical.value("delta_21"), kappa = optical.value("kappa"), a0 = optical.value("a0");
    // Noise reference from the whole trace.
    std::vector<double> res_all(trace.size());
    double ymax = 0.0;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        res_all[i] = trace.power[i] - optical_lorentzian(hz_to_angular(trace.freq[i]), d21, kappa, a0);
        ymax = std::max(ymax, std::abs(trace.power[i]));
    }
    const double thr = std::max(5.0 * mad_sigma(res_all), 1e-9 * ymax);

    const Prepared d = prepare(trace, {}, window_hz);
    if (d.x.size() < 6) throw InsufficientDataError("mechanical fit: fewer than 6 points in window");
    std::vector<double> res(d.x.size());
    std::size_t ipk = 0;
    for (std::size_t i = 0; i < d.x.size(); ++i) {
        res[i] = d.y[i] - optical_lorentzian(d.x[i] + d.ref, d21, kappa, a0);
        if (std::abs(res[i]) > std::abs(res[ipk])) ipk = i;
    }
    if (std::abs(res[ipk]) <= thr) {
        throw NoFeatureError("mechanical fit: window holds no feature above the noise");
    }
    const double s = side == PumpSide::Red ? 1.0 : -1.0;
    const double wm0 = d.x[ipk] + d.ref;
    const double width = std::max(half_width_span(d.x, res, ipk), 2.0 * std::abs(d.x[1] - d.x[0]));
    const double lor = optical_lorentzian(wm0, d21, kappa, a0);
    const double rho = std::max(d.y[ipk] / lor, 1e-6);
    const double d0 = std::hypot(0.5 * kappa, wm0 - d21);
    double X = s > 0 ? 1.0 / std::sqrt(rho) - 1.0 : 1.0 - 1.0 / std::sqrt(rho);
    X = std::max(X, 1e-6);
    const double denom = std::max(1.0 + s * X * kappa / (2.0 * d0), 0.05);
    const double gm0 = width / denom;
    const double g0 = std::sqrt(X * gm0 * d0 / 2.0);

    const double inf = std::numeric_limits<double>::infinity();
    const double wlo = hz_to_angular(window_hz.first) - d.ref, whi = hz_to_angular(window_hz.second) - d.ref;
    std::vector<ParamSpec> ps = {
        {"delta_21", d21 - d.ref, -inf, inf, true},
        {"kappa", kappa, 0.0, inf, true},
        {"a0", a0, 0.0, inf, true},
        {"omega_m", wm0 - d.ref, wlo, whi},
        {"gamma_m", gm0, 0.0, inf},
        {"g", g0, 0.0, inf},
    };
    for (std::size_t m = 0; m < fixed_terms.size(); ++m) {
        const std::string k = std::to_string(m);
        ps.push_back({"fixed_omega_m_" + k, fixed_terms[m].omega_m - d.ref, -inf, inf, true});
        ps.push_back({"fixed_gamma_m_" + k, fixed_terms[m].gamma_m, -inf, inf, true});
        ps.push_back({"fixed_g_" + k, fixed_terms[m].g, -inf, inf, true});
    }
    ModelFn f = [side](double x, const std::vector<double>& p) { return transmission_packed(x, p, side); };
    GradFn gr = [side](double x, const std::vector<double>& p, std::vector<double>& g) {
        transmission_grad(x, p, side, g);
    };
    FitResult full = nls_fit(f, d.x, d.y, d.s, ps, opt, gr);

    FitResult r;
    r.names = {"omega_m", "gamma_m", "g"};
    r.values = {full.values[3] + d.ref, full.values[4], full.values[5]};
    r.covariance = full.covariance.block(3, 3, 3, 3);
    r.chi2_reduced = full.chi2_reduced;
    r.converged = full.converged;
    r.n_iter = full.n_iter;
    r.n_points = full.n_points;
    r.derived["C"] = derived_quantity(optical, r, [](const std::vector<double>& v) {
        return cooperativity(v[4], v[1], v[3]);
    });
    r.derived["gamma_eff"] = derived_quantity(optical, r, [s](const std::vector<double>& v) {
        const double x = v[2] - v[0];
        return v[3] + s * v[4] * v[4] * v[1] / (x * x + 0.25 * v[1] * v[1]);
    });
    return r;
}

namespace {

// Running median; suppresses lines much narrower than the window.
SpectrumTrace median_filtered(const SpectrumTrace& t, std::size_t half) {
    SpectrumTrace out = t;
    std::vector<double> buf;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const std::size_t lo = i >= half ? i - half : 0;
        const std::size_t hi = std::min(t.size() - 1, i + half);
        buf.assign(t.power.begin() + lo, t.power.begin() + hi + 1);
        out.power[i] = median(buf);
    }
    return out;
}

void set_derived(FitResult& mech, const FitResult& joint, std::size_t m, PumpSide side) {
    const double s = side == PumpSide::Red ? 1.0 : -1.0;
    const std::size_t b = 3 + 3 * m;
    mech.derived["C"] = propagate([b](const std::vector<double>& v) { return cooperativity(v[b + 2], v[1], v[b + 1]); }, joint);
    mech.derived["gamma_eff"] = propagate(
        [b, s](const std::vector<double>& v) {
            const double x = v[b] - v[0];
            return v[b + 1] + s * v[b + 2] * v[b + 2] * v[1] / (x * x + 0.25 * v[1] * v[1]);
        },
        joint);
}

FitResult sub_result(const FitResult& joint, std::size_t first, const std::vector<std::string>& names) {
    FitResult r;
    r.names = names;
    r.values.assign(joint.values.begin() + first, joint.values.begin() + first + names.size());
    r.covariance = joint.covariance.block(first, first, names.size(), names.size());
    r.chi2_reduced = joint.chi2_reduced;
    r.converged = joint.converged;
    r.n_iter = joint.n_iter;
    r.n_points = joint.n_points;
    return r;
}

}  // namespace

StagedFit staged_fit(const SpectrumTrace& trace, PumpSide side, double window_factor, const FitOptions& opt) {
    trace.validate();
    StagedFit out;
    auto windows_for = [&](const std::vector<Feature>& fs) {
        std::vector<std::pair<double, double>> w;
        for (const auto& f : fs) w.push_back({f.center_hz - window_factor * f.width_hz, f.center_hz + window_factor * f.width_hz});
        return w;
    };
    // Stage 1: optical line from a median-filtered copy, then with exclusions.
    const FitResult rough = fit_optical_lorentzian(median_filtered(trace, std::max<std::size_t>(2, trace.size() / 60)), {}, opt);
    auto feats = detect_features(trace, rough);
    out.optical = feats.empty() ? fit_optical_lorentzian(trace, {}, opt) : fit_optical_lorentzian(trace, windows_for(feats), opt);
    out.features = detect_features(trace, out.optical);
    if (out.features.empty()) return out;
    out.optical = fit_optical_lorentzian(trace, windows_for(out.features), opt);

    // Stage 2: one mechanical line per window, optical parameters fixed.
    auto windows = windows_for(out.features);
    for (std::size_t i = 0; i < out.features.size();) {
        try {
            out.mechanical.push_back(fit_mechanical_feature(trace, out.optical, windows[i], side, opt));
            ++i;
        } catch (const FitError& e) {
            out.optical.warnings.push_back("dropped candidate line at " + std::to_string(out.features[i].center_hz) +
                                           " Hz: " + e.what());
            out.features.erase(out.features.begin() + static_cast<std::ptrdiff_t>(i));
            windows.erase(windows.begin() + static_cast<std::ptrdiff_t>(i));
        }
    }
    if (out.features.empty()) return out;
    if (out.features.size() > 1) {
        std::vector<TransmissionTerm> first_pass;
        for (const auto& m : out.mechanical) first_pass.push_back({m.value("omega_m"), m.value("gamma_m"), m.value("g")});
        for (std::size_t i = 0; i < out.features.size(); ++i) {
            std::vector<TransmissionTerm> others;
            for (std::size_t j = 0; j < first_pass.size(); ++j)
                if (j != i) others.push_back(first_pass[j]);
            try {
                out.mechanical[i] = fit_mechanical_feature(trace, out.optical, windows[i], side, opt, others);
            } catch (const FitError&) {
                // keep the first-pass estimate
            }
        }
    }

    // Stage 3: joint refinement of every parameter over the full trace.
    const Prepared d = prepare(trace, {});
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<ParamSpec> ps = {
        {"delta_21", out.optical.value("delta_21") - d.ref},
        {"kappa", out.optical.value("kappa"), 0.0, inf},
        {"a0", out.optical.value("a0"), 0.0, inf},
    };
    for (std::size_t m = 0; m < out.mechanical.size(); ++m) {
        const auto& r = out.mechanical[m];
        const std::string k = std::to_string(m);
        ps.push_back({"omega_m_" + k, r.value("omega_m") - d.ref, hz_to_angular(windows[m].first) - d.ref,
                      hz_to_angular(windows[m].second) - d.ref});
        ps.push_back({"gamma_m_" + k, r.value("gamma_m"), 0.0, inf});
        ps.push_back({"g_" + k, r.value("g"), 0.0, inf});
    }
    ModelFn f = [side](double x, const std::vector<double>& p) { return transmission_packed(x, p, side); };
    GradFn gr = [side](double x, const std::vector<double>& p, std::vector<double>& g) { transmission_grad(x, p, side, g); };
    FitResult joint;
    try {
        joint = nls_fit(f, d.x, d.y, d.s, ps, opt, gr);
    } catch (const FitError& e) {
        for (auto& m : out.mechanical) m.warnings.push_back(std::string("joint refinement skipped: ") + e.what());
        return out;
    }
    joint.values[0] += d.ref;
    for (std::size_t m = 0; m < out.mechanical.size(); ++m) joint.values[3 + 3 * m] += d.ref;
    const auto warnings = out.optical.warnings;
    out.optical = sub_result(joint, 0, {"delta_21", "kappa", "a0"});
    out.optical.warnings = warnings;
    for (std::size_t m = 0; m < out.mechanical.size(); ++m) {
        out.mechanical[m] = sub_result(joint, 3 + 3 * m, {"omega_m", "gamma_m", "g"});
        set_derived(out.mechanical[m], joint, m, side);
    }
    return out;
}

// ---------------------------------------------------------------------------

double fano_reflection(double omega, const FanoParams& p) {
    const cd I(0.0, 1.0);
    const cd F = 1.0 - p.s_prime_kappa_ext * std::exp(-I * p.phi) / (0.5 * p.kappa - I * (omega - p.omega0));
    return p.r_offres * std::norm(F);
}

namespace {

// p = {r_offres, s_prime_kappa_ext, phi, kappa, omega0}
double fano_packed(double x, const std::vector<double>& p) {
    return fano_reflection(x, {p[0], p[1], p[2], p[3], p[4]});
}

}  // namespace

void fano_reflection_grad(double x, const std::vector<double>& p, std::vector<double>& g) {
    const cd I(0.0, 1.0);
    const cd e = std::exp(-I * p[2]);
    const cd Q = 0.5 * p[3] - I * (x - p[4]);
    const cd F = 1.0 - p[1] * e / Q;
    const cd cF = std::conj(F);
    auto d = [&](cd dF) { return 2.0 * p[0] * (cF * dF).real(); };
    g.resize(5);
    g[0] = std::norm(F);
    g[1] = d(-e / Q);
    g[2] = d(I * p[1] * e / Q);
    g[3] = d(0.5 * p[1] * e / (Q * Q));
    g[4] = d(I * p[1] * e / (Q * Q));
}

namespace {

double wrap_phase(double phi) {
    phi = std::remainder(phi, kTwoPi);
    return phi <= -kPi ? phi + kTwoPi : phi;
}

}  // namespace

FitResult fit_fano_reflection(const SpectrumTrace& trace, const FitOptions& opt) {
    trace.validate();
    const Prepared d = prepare(trace, {});
    const std::size_t n = d.x.size();
    if (n < 10) throw InsufficientDataError("Fano fit: fewer than 10 points");
    const std::size_t edge = std::max<std::size_t>(n / 10, 1);
    std::vector<double> outer(d.y.begin(), d.y.begin() + edge);
    outer.insert(outer.end(), d.y.end() - edge, d.y.end());
    const double roff = median(outer);
    std::vector<double> dev(n);
    std::size_t ipk = 0;
    for (std::size_t i = 0; i < n; ++i) {
        dev[i] = d.y[i] - roff;
        if (std::abs(dev[i]) > std::abs(dev[ipk])) ipk = i;
    }
    if (!(std::abs(dev[ipk]) > 1e-9 * std::abs(roff))) throw NoFeatureError("Fano fit: flat reflection");
    const double kappa0 = half_width_span(d.x, dev, ipk);
    const double rho = std::max(d.y[ipk] / roff, 0.0);

    const double inf = std::numeric_limits<double>::infinity();
    FitResult best;
    double best_cost = inf;
    for (int k = -6; k < 6; ++k) {
        const double phi0 = k * kPi / 6.0;
        const double c = std::cos(phi0);
        const double disc = c * c - (1.0 - rho);
        double a = disc >= 0.0 ? 0.5 * (c - std::sqrt(disc)) : 0.5 * c;
        if (!(a > 0.02)) a = 0.1;
        std::vector<ParamSpec> ps = {
            {"r_offres", roff, 0.0, inf},
            {"s_prime_kappa_ext", a * kappa0, 0.0, inf},
            {"phi", phi0, -inf, inf},
            {"kappa", kappa0, 0.0, inf},
            {"omega0", d.x[ipk], -inf, inf},
        };
        try {
            FitOptions o = opt;
            o.throw_on_failure = true;
            FitResult r = nls_fit(fano_packed, d.x, d.y, d.s, ps, o, fano_reflection_grad);
            const double cost = r.chi2_reduced;
            if (cost < best_cost) {
                best_cost = cost;
                best = r;
            }
        } catch (const FitError&) {
        }
    }
    if (!std::isfinite(best_cost)) throw ConvergenceError("Fano fit: no start converged");

    // Move to the undercoupled twin if needed; both points give identical R.
    double sk = best.values[1], phi = best.values[2];
    const double kap = best.values[3];
    if (sk * std::cos(phi) > 0.5 * kap) {
        const double u = kap - sk * std::cos(phi), v = sk * std::sin(phi);
        sk = std::hypot(u, v);
        phi = std::atan2(v, u);
        std::vector<ParamSpec> ps = {
            {"r_offres", best.values[0], 0.0, inf},
            {"s_prime_kappa_ext", sk, 0.0, inf},
            {"phi", phi, -inf, inf},
            {"kappa", kap, 0.0, inf},
            {"omega0", best.values[4], -inf, inf},
        };
        best = nls_fit(fano_packed, d.x, d.y, d.s, ps, opt, fano_reflection_grad);
    }
    best.values[2] = wrap_phase(best.values[2]);
    best.values[4] += d.ref;
    const double span = d.x.back() - d.x.front();
    if (span < 10.0 * best.values[3]) {
        throw InsufficientDataError("Fano fit: trace spans less than 10 linewidths");
    }
    return best;
}

// ---------------------------------------------------------------------------

FitResult fit_power_scaling(const std::vector<ScalingPoint>& pts) {
    if (pts.size() < 3) throw InsufficientDataError("power scaling fit needs >= 3 points");
    const bool weighted = std::all_of(pts.begin(), pts.end(), [](const ScalingPoint& p) { return p.sigma > 0.0; });
    double S = 0, Sx = 0, Sy = 0, Sxx = 0, Sxy = 0;
    for (const auto& p : pts) {
        const double w = weighted ? 1.0 / (p.sigma * p.sigma) : 1.0;
        S += w;
        Sx += w * p.power_w;
        Sy += w * p.value;
        Sxx += w * p.power_w * p.power_w;
        Sxy += w * p.power_w * p.value;
    }
    const double det = S * Sxx - Sx * Sx;
    if (!(std::abs(det) > 1e-12 * S * Sxx)) throw SingularJacobianError("power scaling fit: degenerate abscissa");
    const double slope = (S * Sxy - Sx * Sy) / det;
    const double icpt = (Sxx * Sy - Sx * Sxy) / det;
    double chi2 = 0.0, ss_tot = 0.0;
    const double ymean = Sy / S;
    for (const auto& p : pts) {
        const double w = weighted ? 1.0 / (p.sigma * p.sigma) : 1.0;
        const double r = p.value - (slope * p.power_w + icpt);
        chi2 += w * r * r;
        ss_tot += w * (p.value - ymean) * (p.value - ymean);
    }
    FitResult res;
    res.names = {"slope", "intercept"};
    res.values = {slope, icpt};
    res.n_points = pts.size();
    res.chi2_reduced = chi2 / static_cast<double>(pts.size() - 2);
    res.converged = true;
    res.covariance.resize(2, 2);
    res.covariance << S / det, -Sx / det, -Sx / det, Sxx / det;
    res.covariance *= res.chi2_reduced;
    res.derived["r2"] = {ss_tot > 0.0 ? 1.0 - chi2 / ss_tot : 1.0, 0.0};
    return res;
}

}  // namespace brillouin
