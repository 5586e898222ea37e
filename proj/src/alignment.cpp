#include "brillouin/alignment.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "brillouin/errors.hpp"
#include "brillouin/io.hpp"

namespace brillouin {

namespace {

using cd = std::complex<double>;

bool is_input(AlignmentFitKind k) { return k == AlignmentFitKind::InputA || k == AlignmentFitKind::ColdOptimumInput; }
bool is_cold(AlignmentFitKind k) {
    return k == AlignmentFitKind::ColdOptimumInput || k == AlignmentFitKind::ColdOptimumTransmission;
}

double need(const std::optional<double>& v, const char* name) {
    if (!v) throw ConfigError(std::string("transmission_vs_tilts: parameter ") + name + " is not calibrated");
    return *v;
}

}  // namespace

TiltState TiltState::operator-(const TiltState& o) const {
    return {theta_in - o.theta_in, phi_in - o.phi_in, theta_bm - o.theta_bm,
            phi_bm - o.phi_bm,     theta_tr - o.theta_tr, phi_tr - o.phi_tr};
}

bool TiltState::finite() const {
    for (double v : {theta_in, phi_in, theta_bm, phi_bm, theta_tr, phi_tr})
        if (!std::isfinite(v)) return false;
    return true;
}

void AlignmentModel::validate() const {
    if (!(a > 0.0) || !(d > 0.0)) throw ConfigError("AlignmentModel: A and D must be > 0");
    if (!(theta0 > 0.0)) throw ConfigError("AlignmentModel: theta0 must be > 0");
    if (!(r_max >= 0.0) || !(t_max >= 0.0)) throw ConfigError("AlignmentModel: amplitudes must be >= 0");
    if (!optima.finite()) throw ConfigError("AlignmentModel: optima must be finite");
    for (const auto& v : {b, c, e})
        if (v && !std::isfinite(*v)) throw ConfigError("AlignmentModel: B, C, E must be finite");
}

ReflectionTransmission cavity_reflection_transmission(double delta, const CouplingRates& k, const PortScattering& p1,
                                                      const PortScattering& p2) {
    const cd denom(0.5 * k.kappa, -delta);
    const cd refl = p1.s12 * p1.s21 * (denom - k.kappa_ext1) / denom + p1.s11;
    const double lor = k.kappa_ext1 * k.kappa_ext2 / (0.25 * k.kappa * k.kappa + delta * delta);
    return {std::norm(refl), std::norm(p2.s12 * p1.s21) * lor};
}

FanoParams fano_params_from_scattering(const CouplingRates& k, const PortScattering& p1, double omega0) {
    const cd path = p1.s12 * p1.s21;
    const cd off = path + p1.s11;
    if (std::abs(off) == 0.0) throw ConfigError("fano_params_from_scattering: zero off-resonant reflection");
    const cd ratio = path / off;
    FanoParams f;
    f.r_offres = std::norm(off);
    f.s_prime_kappa_ext = std::abs(ratio) * k.kappa_ext1;
    f.phi = -std::arg(ratio);
    f.kappa = k.kappa;
    f.omega0 = omega0;
    return f;
}

double reflection_vs_input_tilt(const TiltState& tilts, const AlignmentModel& m) {
    const TiltState d = tilts - m.optima;
    const double q = d.theta_in * d.theta_in + d.phi_in * d.phi_in;
    return m.r_max * std::exp(-m.a * m.a * q / (2.0 * m.theta0 * m.theta0));
}

double transmission_vs_tilts(const TiltState& tilts, const AlignmentModel& m) {
    const TiltState d = tilts - m.optima;
    const bool in_off = d.theta_in != 0.0 || d.phi_in != 0.0;
    const bool bm_off = d.theta_bm != 0.0 || d.phi_bm != 0.0;
    const double b = in_off ? need(m.b, "B") : 0.0;
    const double c = bm_off ? need(m.c, "C") : 0.0;
    const double e = bm_off ? need(m.e, "E") : 0.0;
    const double x1 = b * d.theta_in - c * d.theta_bm;
    const double y1 = b * d.phi_in - c * d.phi_bm;
    const double x2 = m.d * d.theta_tr - e * d.theta_bm;
    const double y2 = m.d * d.phi_tr - e * d.phi_bm;
    return m.t_max * std::exp(-(x1 * x1 + y1 * y1 + x2 * x2 + y2 * y2) / (m.theta0 * m.theta0));
}

double transmission_vs_transmission_tilt(const TiltState& tilts, const AlignmentModel& m) {
    const TiltState d = tilts - m.optima;
    const double q = d.theta_tr * d.theta_tr + d.phi_tr * d.phi_tr;
    return m.t_max * std::exp(-m.d * m.d * q / (m.theta0 * m.theta0));
}

double gaussian_overlap_factor(double dx, double dy, double waist) {
    if (!(waist > 0.0)) throw ConfigError("gaussian_overlap_factor: waist must be > 0");
    return std::exp(-(dx * dx + dy * dy) / (2.0 * waist * waist));
}

std::string to_string(AlignmentFitKind k) {
    switch (k) {
        case AlignmentFitKind::InputA: return "input_a";
        case AlignmentFitKind::TransmissionD: return "transmission_d";
        case AlignmentFitKind::ColdOptimumInput: return "cold_input";
        case AlignmentFitKind::ColdOptimumTransmission: return "cold_transmission";
    }
    return "input_a";
}

AlignmentFitKind alignment_fit_kind_from_string(const std::string& s) {
    for (auto k : {AlignmentFitKind::InputA, AlignmentFitKind::TransmissionD, AlignmentFitKind::ColdOptimumInput,
                   AlignmentFitKind::ColdOptimumTransmission})
        if (to_string(k) == s) return k;
    throw ConfigError("unknown alignment fit kind '" + s + "'");
}

AlignmentFit fit_alignment_gaussian(const std::vector<AlignmentObservation>& all, AlignmentFitKind which,
                                    const AlignmentModel& model, const FitOptions& opt) {
    model.validate();
    const bool input = is_input(which);
    const bool cold = is_cold(which);
    std::vector<double> u, v, y;
    for (const auto& o : all) {
        if (o.which != which) continue;
        if (!o.tilts.finite() || !std::isfinite(o.value))
            throw ConfigError("fit_alignment_gaussian: non-finite observation");
        u.push_back(input ? o.tilts.theta_in : o.tilts.theta_tr);
        v.push_back(input ? o.tilts.phi_in : o.tilts.phi_tr);
        y.push_back(o.value);
    }
    const std::size_t n = y.size();
    const std::size_t n_min = cold ? 3 : 5;
    if (n < n_min)
        throw InsufficientDataError("fit_alignment_gaussian: " + to_string(which) + " needs at least " +
                                    std::to_string(n_min) + " observations, got " + std::to_string(n));

    // Collinear tilt settings cannot fix a 2D center.
    double mu = 0.0, mv = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mu += u[i] / static_cast<double>(n);
        mv += v[i] / static_cast<double>(n);
    }
    Eigen::MatrixXd xy(n, 2);
    for (std::size_t i = 0; i < n; ++i) xy.row(static_cast<Eigen::Index>(i)) << u[i] - mu, v[i] - mv;
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(xy);
    const auto sv = svd.singularValues();
    if (!(sv(0) > 0.0) || sv(1) <= 1e-9 * sv(0))
        throw InsufficientDataError("fit_alignment_gaussian: tilt settings are collinear");

    // y = amp exp(-k w^2 ((u - u0)^2 + (v - v0)^2) / theta0^2)
    const double k = input ? 0.5 : 1.0;
    const double th2 = model.theta0 * model.theta0;
    const double w_model = input ? model.a : model.d;

    double w0 = w_model, amp0 = *std::max_element(y.begin(), y.end()), u00 = mu, v00 = mv;
    {
        std::vector<std::size_t> pos;
        for (std::size_t i = 0; i < n; ++i)
            if (y[i] > 0.0) pos.push_back(i);
        const Eigen::Index cols = cold ? 3 : 4;
        if (pos.size() >= static_cast<std::size_t>(cols)) {
            Eigen::MatrixXd a(static_cast<Eigen::Index>(pos.size()), cols);
            Eigen::VectorXd rhs(static_cast<Eigen::Index>(pos.size()));
            const double c3_fixed = -k * w_model * w_model / th2;
            for (std::size_t r = 0; r < pos.size(); ++r) {
                const std::size_t i = pos[r];
                const double q = (u[i] - mu) * (u[i] - mu) + (v[i] - mv) * (v[i] - mv);
                const auto ri = static_cast<Eigen::Index>(r);
                a(ri, 0) = 1.0;
                a(ri, 1) = u[i] - mu;
                a(ri, 2) = v[i] - mv;
                rhs(ri) = std::log(y[i]);
                if (cold)
                    rhs(ri) -= c3_fixed * q;
                else
                    a(ri, 3) = q;
            }
            const Eigen::VectorXd c = a.colPivHouseholderQr().solve(rhs);
            const double c3 = cold ? c3_fixed : c(3);
            if (c3 < 0.0 && c.allFinite()) {
                const double du = -c(1) / (2.0 * c3), dv = -c(2) / (2.0 * c3);
                u00 = mu + du;
                v00 = mv + dv;
                amp0 = std::exp(c(0) - c3 * (du * du + dv * dv));
                w0 = std::sqrt(-c3 * th2 / k);
            }
        }
    }

    auto model_fn = [&](double x, const std::vector<double>& p) {
        const auto i = static_cast<std::size_t>(x);
        const double q = (u[i] - p[2]) * (u[i] - p[2]) + (v[i] - p[3]) * (v[i] - p[3]);
        return p[1] * std::exp(-k * p[0] * p[0] * q / th2);
    };
    auto grad_fn = [&](double x, const std::vector<double>& p, std::vector<double>& g) {
        const auto i = static_cast<std::size_t>(x);
        const double du = u[i] - p[2], dv = v[i] - p[3];
        const double q = du * du + dv * dv;
        const double e = std::exp(-k * p[0] * p[0] * q / th2);
        const double f = p[1] * e;
        g.assign(4, 0.0);
        g[0] = f * (-2.0 * k * p[0] * q / th2);
        g[1] = e;
        g[2] = f * (2.0 * k * p[0] * p[0] * du / th2);
        g[3] = f * (2.0 * k * p[0] * p[0] * dv / th2);
    };
    std::vector<double> xs(n);
    for (std::size_t i = 0; i < n; ++i) xs[i] = static_cast<double>(i);
    const std::string width_name = input ? "A" : "D";
    std::vector<ParamSpec> params{{width_name, cold ? w_model : w0, 1e-12, INFINITY, cold},
                                  {"amplitude", amp0, 0.0, INFINITY, false},
                                  {"theta_center", u00},
                                  {"phi_center", v00}};

    AlignmentFit out;
    out.fit = nls_fit(model_fn, xs, y, {}, params, opt, grad_fn);
    out.model = model;
    out.center_theta = out.fit.values[2];
    out.center_phi = out.fit.values[3];
    out.amplitude = out.fit.values[1];
    if (input) {
        out.model.a = out.fit.values[0];
        out.model.r_max = out.amplitude;
        out.shift_theta = out.center_theta - model.optima.theta_in;
        out.shift_phi = out.center_phi - model.optima.phi_in;
        out.model.optima.theta_in = out.center_theta;
        out.model.optima.phi_in = out.center_phi;
    } else {
        out.model.d = out.fit.values[0];
        out.model.t_max = out.amplitude;
        out.shift_theta = out.center_theta - model.optima.theta_tr;
        out.shift_phi = out.center_phi - model.optima.phi_tr;
        out.model.optima.theta_tr = out.center_theta;
        out.model.optima.phi_tr = out.center_phi;
    }
    return out;
}

std::vector<AlignmentObservation> read_alignment_observations(const std::filesystem::path& csv) {
    const CsvTable t = read_csv(csv, {"which"});
    const auto& which = t.label_column("which");
    const auto& th_in = t.column("theta_in_deg");
    const auto& ph_in = t.column("phi_in_deg");
    const auto& th_bm = t.column("theta_bm_deg");
    const auto& ph_bm = t.column("phi_bm_deg");
    const auto& th_tr = t.column("theta_tr_deg");
    const auto& ph_tr = t.column("phi_tr_deg");
    const auto& value = t.column("value");
    std::vector<AlignmentObservation> out;
    for (std::size_t i = 0; i < t.rows(); ++i)
        out.push_back({{th_in[i], ph_in[i], th_bm[i], ph_bm[i], th_tr[i], ph_tr[i]},
                       value[i],
                       alignment_fit_kind_from_string(which[i])});
    return out;
}

void write_alignment_observations(const std::filesystem::path& csv, const std::vector<AlignmentObservation>& obs) {
    std::ostringstream os;
    os << "theta_in_deg,phi_in_deg,theta_bm_deg,phi_bm_deg,theta_tr_deg,phi_tr_deg,value,which\n";
    for (const auto& o : obs) {
        for (double v : {o.tilts.theta_in, o.tilts.phi_in, o.tilts.theta_bm, o.tilts.phi_bm, o.tilts.theta_tr,
                         o.tilts.phi_tr, o.value})
            os << format_double(v) << ',';
        os << to_string(o.which) << '\n';
    }
    write_text(csv, os.str());
}

}  // namespace brillouin
