#include "brillouin/cavity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "brillouin/constants.hpp"
#include "brillouin/errors.hpp"
#include "brillouin/io.hpp"
#include "brillouin/parallel.hpp"

namespace brillouin {

namespace {

struct Mat2 {
    cplx a, b, c, d;  // [[a, b], [c, d]]
};

Mat2 mul(const Mat2& x, const Mat2& y) {
    return {x.a * y.a + x.b * y.c, x.a * y.b + x.b * y.d, x.c * y.a + x.d * y.c, x.c * y.b + x.d * y.d};
}

Mat2 interface_matrix(cplx r, cplx t, cplx rp, cplx tp) {
    const cplx inv = 1.0 / t;
    return {inv, -rp * inv, r * inv, (t * tp - r * rp) * inv};
}

cplx mirror_back_reflection(const Mirror& m) { return -std::conj(m.r) * m.t / std::conj(m.t); }

cplx medium_index(const LayerStack& s, std::size_t boundary_right_of) {
    // Medium to the right of boundary k is layer k, or n_out after the last.
    return boundary_right_of < s.layers.size() ? s.layers[boundary_right_of].index : s.n_out;
}

cplx medium_left_index(const LayerStack& s, std::size_t boundary) {
    return boundary == 0 ? s.n_in : s.layers[boundary - 1].index;
}

// Frequency-independent boundary matrices with per-layer phase factors.
class Evaluator {
public:
    explicit Evaluator(const LayerStack& s) {
        const std::size_t n = s.layers.size();
        boundaries_.resize(n + 1, Mat2{1.0, 0.0, 0.0, 1.0});
        std::vector<Mirror> mirrors = s.mirrors;
        std::stable_sort(mirrors.begin(), mirrors.end(),
                         [](const Mirror& a, const Mirror& b) { return a.position < b.position; });
        for (const Mirror& m : mirrors) {
            const cplx rp = mirror_back_reflection(m);
            boundaries_[m.position] = mul(boundaries_[m.position], interface_matrix(m.r, m.t, rp, m.t));
        }
        for (std::size_t k = 0; k <= n; ++k) {
            const cplx nl = medium_left_index(s, k);
            const cplx nr = medium_index(s, k);
            if (nl == nr) continue;
            const cplx r = (nl - nr) / (nl + nr);
            const cplx t = 2.0 * nl / (nl + nr);
            const cplx tp = 2.0 * nr / (nl + nr);
            boundaries_[k] = mul(boundaries_[k], interface_matrix(r, t, -r, tp));
        }
        for (const Layer& l : s.layers) wavenumber_.push_back(kTwoPi * l.index * l.thickness / kSpeedOfLight);
        power_factor_ = s.n_out.real() / s.n_in.real();
    }

    Mat2 matrix(double f) const {
        Mat2 m = boundaries_[0];
        for (std::size_t k = 0; k < wavenumber_.size(); ++k) {
            const cplx phase = std::exp(cplx(0.0, 1.0) * wavenumber_[k] * f);
            m = mul(m, Mat2{1.0 / phase, 0.0, 0.0, phase});
            m = mul(m, boundaries_[k + 1]);
        }
        return m;
    }

    double transmittance(double f) const { return power_factor_ * std::norm(1.0 / matrix(f).a); }
    double inverse_transmittance(double f) const { return std::norm(matrix(f).a) / power_factor_; }

private:
    std::vector<Mat2> boundaries_;
    std::vector<cplx> wavenumber_;
    double power_factor_ = 1.0;
};

// Linewidth guess from the mirror round-trip amplitude, ignoring index steps.
double linewidth_estimate(const LayerStack& s) {
    const double fsr = s.fsr_estimate();
    if (s.mirrors.size() < 2) return fsr / 20.0;
    double rho = 1.0;
    for (const Mirror& m : s.mirrors) rho *= std::abs(m.r);
    return std::max(fsr * (1.0 - rho) / kPi, fsr * 1e-7);
}

// Vertex abscissa of the parabola through three points.
double parabola_vertex(double x0, double y0, double x1, double y1, double x2, double y2) {
    const double d01 = (y1 - y0) / (x1 - x0);
    const double d12 = (y2 - y1) / (x2 - x1);
    const double curv = (d12 - d01) / (x2 - x0);
    if (curv == 0.0) return x1;
    return 0.5 * (x0 + x1) - d01 / (2.0 * curv);
}

double parabola_value(double x0, double y0, double x1, double y1, double x2, double y2, double x) {
    return y0 * (x - x1) * (x - x2) / ((x0 - x1) * (x0 - x2)) + y1 * (x - x0) * (x - x2) / ((x1 - x0) * (x1 - x2)) +
           y2 * (x - x0) * (x - x1) / ((x2 - x0) * (x2 - x1));
}

// Half-maximum crossing between f_in (above) and f_out (below) by bisection.
double crossing(const Evaluator& ev, double level, double f_in, double f_out) {
    for (int i = 0; i < 100 && std::abs(f_out - f_in) > 1e-9 * std::abs(f_out - f_in + 1.0); ++i) {
        const double m = 0.5 * (f_in + f_out);
        (ev.transmittance(m) >= level ? f_in : f_out) = m;
    }
    return 0.5 * (f_in + f_out);
}

Resonance refine_with(const Evaluator& ev, const Resonance& coarse, double step) {
    double f = coarse.f0;
    const double h = step;
    for (int it = 0; it < 60; ++it) {
        const double ym = ev.inverse_transmittance(f - h);
        const double y0 = ev.inverse_transmittance(f);
        const double yp = ev.inverse_transmittance(f + h);
        const double denom = ym - 2.0 * y0 + yp;
        double delta;
        if (denom <= 0.0)
            delta = ym < yp ? -h : h;
        else
            delta = std::clamp(0.5 * h * (ym - yp) / denom, -h, h);
        f += delta;
        if (std::abs(delta) <= 1e-10 * h) break;
    }
    Resonance out = coarse;
    out.f0 = f;
    const double peak = ev.transmittance(f);
    const double floor = peak - coarse.depth;
    const double level = floor + 0.5 * (peak - floor);
    double reach = std::max(coarse.linewidth, 2.0 * h);
    double lo = f - reach, hi = f + reach;
    for (int i = 0; i < 60 && ev.transmittance(lo) >= level; ++i) lo = f - (reach *= 2.0);
    reach = std::max(coarse.linewidth, 2.0 * h);
    for (int i = 0; i < 60 && ev.transmittance(hi) >= level; ++i) hi = f + (reach *= 2.0);
    out.linewidth = crossing(ev, level, f, hi) - crossing(ev, level, f, lo);
    out.depth = peak - floor;
    return out;
}

StackSpectrum scan(const Evaluator& ev, double f_lo, double f_hi, double step) {
    StackSpectrum sp;
    const auto n = static_cast<std::size_t>(std::ceil((f_hi - f_lo) / step)) + 1;
    sp.freqs.resize(n);
    sp.t.resize(n);
    sp.r.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        sp.freqs[i] = i + 1 == n ? f_hi : f_lo + step * static_cast<double>(i);
        const Mat2 m = ev.matrix(sp.freqs[i]);
        sp.t[i] = 1.0 / m.a;
        sp.r[i] = m.c / m.a;
    }
    return sp;
}

}  // namespace

void LayerStack::validate() const {
    if (!(wavelength_center > 0.0)) throw ConfigError("LayerStack: wavelength_center must be > 0");
    if (!(n_in.real() > 0.0) || !(n_out.real() > 0.0))
        throw ConfigError("LayerStack: outer media need a positive real index");
    for (const Layer& l : layers) {
        if (!(l.thickness >= 0.0) || !std::isfinite(l.thickness))
            throw ConfigError("LayerStack: layer thickness must be finite and >= 0");
        if (!(l.index.real() > 0.0) || l.index.imag() < 0.0)
            throw ConfigError("LayerStack: layer index needs Re > 0 and Im >= 0");
    }
    for (const Mirror& m : mirrors) {
        if (m.position > layers.size()) throw ConfigError("LayerStack: mirror position outside the stack");
        if (std::abs(m.t) == 0.0) throw ConfigError("LayerStack: mirror transmissivity must be nonzero");
        if (std::norm(m.r) + std::norm(m.t) > 1.0 + 1e-12)
            throw ConfigError("LayerStack: mirror needs |r|^2 + |t|^2 <= 1");
    }
}

double LayerStack::optical_length() const {
    double s = 0.0;
    for (const Layer& l : layers) s += l.index.real() * l.thickness;
    return s;
}

double LayerStack::fsr_estimate() const {
    const double l = optical_length();
    if (!(l > 0.0)) throw ConfigError("LayerStack: zero optical length");
    return kSpeedOfLight / (2.0 * l);
}

Mirror hard_mirror(std::size_t position, double reflectivity, bool inside_is_right) {
    if (!(reflectivity >= 0.0 && reflectivity < 1.0)) throw ConfigError("hard_mirror: reflectivity must be in [0, 1)");
    const double r = std::sqrt(reflectivity);
    return {position, inside_is_right ? r : -r, std::sqrt(1.0 - reflectivity)};
}

LayerStack mirror_crystal_stack(const CavityGeometry& g) {
    LayerStack s;
    s.wavelength_center = g.wavelength_center;
    s.layers = {{g.front_gap, 1.0}, {g.crystal, g.n_crystal}, {g.back_gap, 1.0}};
    s.mirrors = {hard_mirror(0, g.reflectivity, true), hard_mirror(3, g.reflectivity, false)};
    s.validate();
    return s;
}

LayerStack with_back_gap_offset(const LayerStack& stack, double delta_l) {
    if (stack.layers.empty()) throw ConfigError("with_back_gap_offset: stack has no layers");
    LayerStack s = stack;
    s.layers.back().thickness += delta_l;
    if (s.layers.back().thickness < 0.0) throw ConfigError("with_back_gap_offset: back gap would be negative");
    return s;
}

double StackSpectrum::transmittance(std::size_t i) const {
    return n_exit.real() / n_incident.real() * std::norm(t[i]);
}

StackSpectrum stack_spectrum(const LayerStack& stack, const std::vector<double>& freqs, Port port) {
    stack.validate();
    const Evaluator ev(stack);
    const bool front = port == Port::Front;
    StackSpectrum sp;
    sp.freqs = freqs;
    sp.n_incident = front ? stack.n_in : stack.n_out;
    sp.n_exit = front ? stack.n_out : stack.n_in;
    sp.r.resize(freqs.size());
    sp.t.resize(freqs.size());
    for (std::size_t i = 0; i < freqs.size(); ++i) {
        const Mat2 m = ev.matrix(freqs[i]);
        // From the back: t' = det M / M00, r' = -M01 / M00.
        sp.t[i] = front ? 1.0 / m.a : (m.a * m.d - m.b * m.c) / m.a;
        sp.r[i] = front ? m.c / m.a : -m.b / m.a;
    }
    return sp;
}

double stack_transmittance(const LayerStack& stack, double freq) { return Evaluator(stack).transmittance(freq); }

std::vector<Resonance> find_resonances(const StackSpectrum& sp, const ResonanceOptions& opt,
                                       std::vector<std::string>* warnings) {
    const std::size_t n = sp.freqs.size();
    std::vector<Resonance> found;
    if (n < 3) return found;
    std::vector<double> tr(n);
    for (std::size_t i = 0; i < n; ++i) tr[i] = sp.transmittance(i);

    std::vector<std::size_t> peaks;
    for (std::size_t i = 1; i + 1 < n; ++i)
        if (tr[i] > tr[i - 1] && tr[i] >= tr[i + 1]) peaks.push_back(i);

    bool under_resolved = false;
    for (std::size_t p = 0; p < peaks.size(); ++p) {
        const std::size_t i = peaks[p];
        const std::size_t left_end = p == 0 ? 0 : peaks[p - 1];
        const std::size_t right_end = p + 1 == peaks.size() ? n - 1 : peaks[p + 1];
        const double left_min = *std::min_element(tr.begin() + static_cast<std::ptrdiff_t>(left_end),
                                                  tr.begin() + static_cast<std::ptrdiff_t>(i));
        const double right_min = *std::min_element(tr.begin() + static_cast<std::ptrdiff_t>(i) + 1,
                                                   tr.begin() + static_cast<std::ptrdiff_t>(right_end) + 1);
        const double floor = std::max(left_min, right_min);

        const double x0 = sp.freqs[i - 1], x1 = sp.freqs[i], x2 = sp.freqs[i + 1];
        const double y0 = 1.0 / tr[i - 1], y1 = 1.0 / tr[i], y2 = 1.0 / tr[i + 1];
        double f0 = std::clamp(parabola_vertex(x0, y0, x1, y1, x2, y2), x0, x2);
        const double peak = std::max(tr[i], 1.0 / parabola_value(x0, y0, x1, y1, x2, y2, f0));
        if (!(peak > 0.0) || (peak - floor) / peak < opt.min_contrast) continue;

        const double half = floor + 0.5 * (peak - floor);
        auto edge = [&](std::size_t from, int dir, std::size_t stop) {
            std::size_t j = from;
            while (j != stop) {
                const std::size_t k = dir > 0 ? j + 1 : j - 1;
                if (tr[k] < half) {
                    const double w = (tr[j] - half) / (tr[j] - tr[k]);
                    return sp.freqs[j] + w * (sp.freqs[k] - sp.freqs[j]);
                }
                j = k;
            }
            return std::numeric_limits<double>::quiet_NaN();
        };
        const double fl = edge(i, -1, left_end);
        const double fr = edge(i, +1, right_end);
        double width = 0.0;
        if (std::isfinite(fl) && std::isfinite(fr))
            width = fr - fl;
        else if (std::isfinite(fl))
            width = 2.0 * (f0 - fl);
        else if (std::isfinite(fr))
            width = 2.0 * (fr - f0);
        const double step = 0.5 * (x2 - x0);
        if (width < opt.min_points_per_fwhm * step) under_resolved = true;
        found.push_back({f0, width, peak - floor});
    }

    double deepest = 0.0;
    for (const auto& r : found) deepest = std::max(deepest, r.depth);
    std::erase_if(found, [&](const Resonance& r) { return r.depth < opt.min_relative_depth * deepest; });
    if (under_resolved && warnings && !found.empty())
        warnings->push_back("find_resonances: fewer than " + format_double(opt.min_points_per_fwhm) +
                            " grid points per linewidth; resonances may be mislocated");
    return found;
}

std::vector<Resonance> locate_resonances(const LayerStack& stack, double f_lo, double f_hi,
                                         const ResonanceOptions& opt) {
    stack.validate();
    if (!(f_hi > f_lo)) throw ConfigError("locate_resonances: need f_hi > f_lo");
    const Evaluator ev(stack);
    const double step = std::max(linewidth_estimate(stack) / 10.0, (f_hi - f_lo) / 2e7);
    const StackSpectrum sp = scan(ev, f_lo, f_hi, step);
    std::vector<Resonance> out;
    for (const Resonance& r : find_resonances(sp, opt)) out.push_back(refine_with(ev, r, step));
    return out;
}

double refine_resonance(const LayerStack& stack, double f_guess, double step) {
    if (!(step > 0.0)) throw ConfigError("refine_resonance: step must be > 0");
    const Evaluator ev(stack);
    return refine_with(ev, {f_guess, 2.0 * step, 0.0}, step).f0;
}

std::vector<std::vector<double>> track_resonances(const LayerStack& stack, const std::vector<double>& grid,
                                                  int n_modes_in, int jobs) {
    stack.validate();
    if (n_modes_in < 1) throw ConfigError("track_resonances: n_modes must be >= 1");
    if (grid.empty()) throw ConfigError("track_resonances: empty delta_l grid");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1])) throw ConfigError("track_resonances: delta_l grid must increase");
    if (stack.mirrors.size() < 2) throw TrackingError("track_resonances: the stack has no cavity mirrors");

    const auto n_modes = static_cast<std::size_t>(n_modes_in);
    const double f_center = kSpeedOfLight / stack.wavelength_center;

    LayerStack s0 = with_back_gap_offset(stack, grid.front());
    const double fsr = s0.fsr_estimate();
    const double step_scan = linewidth_estimate(s0) / 4.0;
    const double step_refine = linewidth_estimate(s0) / 10.0;
    const double half_band = (0.5 * static_cast<double>(n_modes) + 2.0) * 1.5 * fsr;

    auto nearest = [](const std::vector<Resonance>& rs, double f) {
        const Resonance* best = nullptr;
        for (const auto& r : rs)
            if (!best || std::abs(r.f0 - f) < std::abs(best->f0 - f)) best = &r;
        return best;
    };

    std::vector<Resonance> initial = locate_resonances(s0, f_center - half_band, f_center + half_band);
    if (initial.size() < n_modes) throw TrackingError("track_resonances: too few resonances near the center");
    std::sort(initial.begin(), initial.end(), [&](const Resonance& a, const Resonance& b) {
        return std::abs(a.f0 - f_center) < std::abs(b.f0 - f_center);
    });
    initial.resize(n_modes);
    std::sort(initial.begin(), initial.end(), [](const Resonance& a, const Resonance& b) { return a.f0 < b.f0; });

    std::vector<std::vector<double>> f(grid.size(), std::vector<double>(n_modes));
    for (std::size_t k = 0; k < n_modes; ++k) f[0][k] = initial[k].f0;

    for (std::size_t i = 1; i < grid.size(); ++i) {
        const LayerStack s = with_back_gap_offset(stack, grid[i]);
        const Evaluator ev(s);
        std::vector<double> pred(n_modes);
        for (std::size_t k = 0; k < n_modes; ++k) {
            pred[k] = f[i - 1][k];
            if (i >= 2)
                pred[k] += (f[i - 1][k] - f[i - 2][k]) * (grid[i] - grid[i - 1]) / (grid[i - 1] - grid[i - 2]);
        }
        std::vector<char> lost(n_modes, 0);
        parallel_for(n_modes, jobs, [&](std::size_t k) {
            const StackSpectrum sp = scan(ev, pred[k] - 0.25 * fsr, pred[k] + 0.25 * fsr, step_scan);
            const auto rs = find_resonances(sp);
            const Resonance* r = nearest(rs, pred[k]);
            if (!r) {
                lost[k] = 1;
                return;
            }
            f[i][k] = refine_with(ev, *r, step_refine).f0;
        });
        if (std::find(lost.begin(), lost.end(), 1) != lost.end()) {
            const auto [lo, hi] = std::minmax_element(pred.begin(), pred.end());
            const auto rs = locate_resonances(s, *lo - fsr, *hi + fsr);
            for (std::size_t k = 0; k < n_modes; ++k) {
                if (!lost[k]) continue;
                const Resonance* r = nearest(rs, pred[k]);
                if (!r) throw TrackingError("track_resonances: mode lost at delta_l = " + format_double(grid[i]));
                f[i][k] = r->f0;
            }
        }
        for (std::size_t k = 1; k < n_modes; ++k)
            if (!(f[i][k] - f[i][k - 1] > 0.25 * fsr))
                throw TrackingError("track_resonances: modes merged at delta_l = " + format_double(grid[i]));
    }
    return f;
}

std::vector<ModeSpacingCurve> mode_spacing_vs_length(const LayerStack& stack, const std::vector<double>& grid,
                                                     int n_pairs, int jobs) {
    if (n_pairs < 1) throw ConfigError("mode_spacing_vs_length: n_pairs must be >= 1");
    const auto f = track_resonances(stack, grid, n_pairs + 1, jobs);
    std::vector<ModeSpacingCurve> curves(static_cast<std::size_t>(n_pairs));
    for (std::size_t k = 0; k < curves.size(); ++k) {
        curves[k].delta_l = grid;
        curves[k].spacing.resize(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) curves[k].spacing[i] = f[i][k + 1] - f[i][k];
    }
    return curves;
}

std::vector<double> spacing_gradient(const ModeSpacingCurve& c) {
    const std::size_t n = c.delta_l.size();
    if (c.spacing.size() != n) throw ConfigError("ModeSpacingCurve: arrays not aligned");
    std::vector<double> g(n, 0.0);
    if (n < 2) return g;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t a = i == 0 ? 0 : i - 1;
        const std::size_t b = i + 1 == n ? n - 1 : i + 1;
        g[i] = (c.spacing[b] - c.spacing[a]) / (c.delta_l[b] - c.delta_l[a]);
    }
    return g;
}

InsensitivePoint find_displacement_insensitive_point(const ModeSpacingCurve& c, double target_hz) {
    const std::vector<double> g = spacing_gradient(c);
    const auto& x = c.delta_l;
    const auto& y = c.spacing;
    InsensitivePoint best;
    for (double v : g) best.max_gradient = std::max(best.max_gradient, std::abs(v));
    bool any = false;
    // Skip the outermost samples so the residual uses central differences only.
    for (std::size_t i = 2; i + 2 < x.size(); ++i) {
        const bool is_max = y[i] > y[i - 1] && y[i] >= y[i + 1];
        const bool is_min = y[i] < y[i - 1] && y[i] <= y[i + 1];
        if (!is_max && !is_min) continue;
        const double xs = std::clamp(parabola_vertex(x[i - 1], y[i - 1], x[i], y[i], x[i + 1], y[i + 1]), x[i - 1], x[i + 1]);
        const double ys = parabola_value(x[i - 1], y[i - 1], x[i], y[i], x[i + 1], y[i + 1], xs);
        if (any && std::abs(ys - target_hz) >= std::abs(best.spacing_at_star - target_hz)) continue;
        any = true;
        best.delta_l_star = xs;
        best.spacing_at_star = ys;
        const std::size_t j = xs < x[i] ? i - 1 : i;
        const double w = (xs - x[j]) / (x[j + 1] - x[j]);
        best.gradient_residual = std::abs(g[j] + w * (g[j + 1] - g[j]));
    }
    if (!any) throw NoFeatureError("find_displacement_insensitive_point: no extremum inside the curve");
    return best;
}

LengthTuning tune_back_gap_to_target(const LayerStack& stack, double target_hz, int n_pairs, double tolerance_hz,
                                     double coarse_step, double max_offset, double window, int jobs) {
    if (!(coarse_step > 0.0) || !(window > 0.0)) throw ConfigError("tune_back_gap_to_target: steps must be > 0");
    std::vector<double> local;
    const double dl = window / 50.0;
    for (int i = -50; i <= 50; ++i) local.push_back(dl * i);

    LengthTuning best;
    bool have_best = false;
    int evaluations = 0;
    auto miss = [&](const InsensitivePoint& p) { return std::abs(p.spacing_at_star - target_hz); };
    auto evaluate = [&](double offset) {
        ++evaluations;
        const auto curves = mode_spacing_vs_length(with_back_gap_offset(stack, offset), local, n_pairs, jobs);
        InsensitivePoint nearest;
        bool any = false;
        for (const auto& c : curves) {
            try {
                const InsensitivePoint p = find_displacement_insensitive_point(c, target_hz);
                if (!any || miss(p) < miss(nearest)) nearest = p;
                any = true;
            } catch (const NoFeatureError&) {
            }
        }
        if (!any) throw TrackingError("tune_back_gap_to_target: no extremum within the window");
        if (!have_best || miss(nearest) < miss(best.point)) {
            best.point = nearest;
            best.window_offset = offset;
            best.back_gap_offset = offset + nearest.delta_l_star;
            have_best = true;
        }
        return nearest.spacing_at_star - target_hz;
    };
    auto done = [&] { return have_best && miss(best.point) <= tolerance_hz; };

    double a = 0.0;
    double ha = evaluate(a);
    // Spacings fall as the cavity lengthens.
    const double dir = ha > 0.0 ? 1.0 : -1.0;
    double b = a, hb = ha;
    while (!done() && hb * ha > 0.0) {
        a = b;
        ha = hb;
        b += dir * coarse_step;
        if (std::abs(b) > max_offset) throw TrackingError("tune_back_gap_to_target: target not reached within max_offset");
        hb = evaluate(b);
    }
    while (!done() && std::abs(b - a) > window) {
        const double m = 0.5 * (a + b);
        const double hm = evaluate(m);
        if (hm * ha > 0.0) {
            a = m;
            ha = hm;
        } else {
            b = m;
            hb = hm;
        }
    }
    const double mid = 0.5 * (a + b);
    for (int k = 1; !done() && k <= 40; ++k) evaluate(mid + (k % 2 ? 1.0 : -1.0) * ((k + 1) / 2) * 1.5 * window);
    best.evaluations = evaluations;
    return best;
}

void write_spacing_curve(const std::filesystem::path& csv, const ModeSpacingCurve& curve) {
    write_csv(csv, {"delta_l_m", "spacing_hz"}, {curve.delta_l, curve.spacing});
}

ModeSpacingCurve read_spacing_curve(const std::filesystem::path& csv) {
    const CsvTable t = read_csv(csv);
    return {t.column("delta_l_m"), t.column("spacing_hz")};
}

}  // namespace brillouin
