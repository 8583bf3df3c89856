// Chaos diagnostics for the mean-field flows: maximal Lyapunov exponent
// (tangent map and two-trajectory estimators), divergence series,
// Poincare sections and regular/chaotic classification on an energy shell.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "integrators.hpp"
#include "model.hpp"
#include "parallel.hpp"

namespace sqchaos {

struct LyapunovEstimate {
    std::vector<double> times;
    std::vector<double> running_lambda;
    double final = 0.0;
    double renorm_interval = 0.5;
    double dt = 0.0;
    std::optional<double> aborted;
};

namespace detail {

inline std::size_t renorm_steps(double renorm_interval, double dt) {
    if (!(renorm_interval > 0.0)) throw std::domain_error("renorm_interval must be > 0");
    const double ratio = renorm_interval / dt;
    const auto k = static_cast<std::size_t>(std::llround(ratio));
    if (k == 0 || std::abs(ratio - static_cast<double>(k)) > 1e-6 * ratio)
        throw std::domain_error("renorm_interval must be a multiple of dt");
    return k;
}

inline double norm(const Coords& v, std::size_t dim) {
    double s = 0.0;
    for (std::size_t i = 0; i < dim; ++i) s += v[i] * v[i];
    return std::sqrt(s);
}

inline double distance(const MeanFieldState& a, const MeanFieldState& b) {
    const auto ca = to_coords(a);
    const auto cb = to_coords(b);
    double s = 0.0;
    for (std::size_t i = 0; i < phase_dim(a.kind); ++i) s += (ca[i] - cb[i]) * (ca[i] - cb[i]);
    return std::sqrt(s);
}

inline void require_symplectic(Scheme s) {
    if (s == Scheme::RK4Generic) throw std::invalid_argument("Lyapunov estimators need a symplectic scheme");
}

} // namespace detail

/// Maximal Lyapunov exponent from the tangent map of the integrator,
/// renormalizing the tangent vector every renorm_interval.
inline LyapunovEstimate max_lyapunov(const MeanFieldState& s0, const ModelParams& p, const IntegratorSpec& spec,
                                     double renorm_interval = 0.5) {
    spec.validate();
    detail::require_symplectic(spec.scheme);
    validate_state(s0);
    const std::size_t per = detail::renorm_steps(renorm_interval, spec.dt);
    const std::size_t n = spec.steps();
    const std::size_t dim = phase_dim(s0.kind);

    LyapunovEstimate est;
    est.renorm_interval = renorm_interval;
    est.dt = spec.dt;

    MeanFieldState s = s0;
    Coords v{};
    for (std::size_t i = 0; i < dim; ++i) v[i] = 1.0 / std::sqrt(static_cast<double>(dim));
    double log_sum = 0.0;
    for (std::size_t k = 1; k <= n; ++k) {
        try {
            if (spec.scheme == Scheme::Leapfrog2)
                step_leapfrog_tangent(s, v, p, spec.dt);
            else
                step_composition4_tangent(s, v, p, spec.dt);
        } catch (const singularity_error&) {
            est.aborted = static_cast<double>(k) * spec.dt;
            break;
        }
        if (k % per == 0) {
            const double nv = detail::norm(v, dim);
            log_sum += std::log(nv);
            for (std::size_t i = 0; i < dim; ++i) v[i] /= nv;
            const double t = static_cast<double>(k) * spec.dt;
            est.times.push_back(t);
            est.running_lambda.push_back(log_sum / t);
        }
    }
    est.final = est.running_lambda.empty() ? 0.0 : est.running_lambda.back();
    return est;
}

/// Independent estimator: a companion trajectory displaced by d0 along the
/// given unit direction, pulled back to distance d0 every renorm_interval.
inline LyapunovEstimate two_trajectory_lyapunov(const MeanFieldState& s0, const ModelParams& p,
                                                const IntegratorSpec& spec, double renorm_interval = 0.5,
                                                double d0 = 1e-8) {
    spec.validate();
    detail::require_symplectic(spec.scheme);
    validate_state(s0);
    const std::size_t per = detail::renorm_steps(renorm_interval, spec.dt);
    const std::size_t n = spec.steps();
    const std::size_t dim = phase_dim(s0.kind);

    LyapunovEstimate est;
    est.renorm_interval = renorm_interval;
    est.dt = spec.dt;

    MeanFieldState a = s0;
    Coords cb = to_coords(s0);
    for (std::size_t i = 0; i < dim; ++i) cb[i] += d0 / std::sqrt(static_cast<double>(dim));
    MeanFieldState b = from_coords(cb, s0.kind);
    double log_sum = 0.0;
    for (std::size_t k = 1; k <= n; ++k) {
        try {
            a = step(a, p, spec.dt, spec.scheme);
            b = step(b, p, spec.dt, spec.scheme);
        } catch (const singularity_error&) {
            est.aborted = static_cast<double>(k) * spec.dt;
            break;
        }
        if (k % per == 0) {
            const double d = detail::distance(a, b);
            log_sum += std::log(d / d0);
            const auto ca = to_coords(a);
            auto c = to_coords(b);
            for (std::size_t i = 0; i < dim; ++i) c[i] = ca[i] + (c[i] - ca[i]) * (d0 / d);
            b = from_coords(c, s0.kind);
            const double t = static_cast<double>(k) * spec.dt;
            est.times.push_back(t);
            est.running_lambda.push_back(log_sum / t);
        }
    }
    est.final = est.running_lambda.empty() ? 0.0 : est.running_lambda.back();
    return est;
}

// ---------------------------------------------------------------------------
// Two-trajectory divergence

/// Coordinate that receives the initial offset. G and D offsets act on the
/// width itself (rho -> sqrt(rho^2 + delta)).
enum class OffsetComponent { A, pA, rhoG, pG, rhoD, pD, G, D };

inline MeanFieldState apply_offset(MeanFieldState s, OffsetComponent c, double delta) {
    switch (c) {
    case OffsetComponent::A: s.A += delta; break;
    case OffsetComponent::pA: s.pA += delta; break;
    case OffsetComponent::rhoG: s.rhoG += delta; break;
    case OffsetComponent::pG: s.pG += delta; break;
    case OffsetComponent::rhoD: s.rhoD += delta; break;
    case OffsetComponent::pD: s.pD += delta; break;
    case OffsetComponent::G: s.rhoG = std::sqrt(s.rhoG * s.rhoG + delta); break;
    case OffsetComponent::D: s.rhoD = std::sqrt(s.rhoD * s.rhoD + delta); break;
    }
    if (!s.has_d_sector()) {
        s.rhoD = 0.0;
        s.pD = 0.0;
    }
    return s;
}

struct DivergenceSeries {
    std::vector<double> times;
    std::vector<double> separations;
    OffsetComponent offset_component = OffsetComponent::G;
    double offset_size = 0.0;
    double initial_offset = 0.0; ///< phase-space distance at t = 0
    Trajectory reference;
    Trajectory perturbed;
    std::optional<double> aborted;

    /// First sample time where the separation reaches level.
    std::optional<double> crossing_time(double level) const {
        for (std::size_t i = 0; i < times.size(); ++i)
            if (separations[i] >= level) return times[i];
        return std::nullopt;
    }

    /// Least-squares slope of log(separation) over [t_lo, t_hi].
    double log_slope(double t_lo, double t_hi) const {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        std::size_t cnt = 0;
        for (std::size_t i = 0; i < times.size(); ++i) {
            if (times[i] < t_lo || times[i] > t_hi || !(separations[i] > 0.0)) continue;
            const double x = times[i];
            const double y = std::log(separations[i]);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
            ++cnt;
        }
        if (cnt < 2) throw std::domain_error("log_slope: fewer than two samples in window");
        const double c = static_cast<double>(cnt);
        return (c * sxy - sx * sy) / (c * sxx - sx * sx);
    }
};

inline DivergenceSeries two_trajectory_divergence(const MeanFieldState& s0, const ModelParams& p,
                                                  const IntegratorSpec& spec, OffsetComponent component,
                                                  double offset_size) {
    const MeanFieldState s1 = apply_offset(s0, component, offset_size);
    validate_state(s1);
    DivergenceSeries out;
    out.offset_component = component;
    out.offset_size = offset_size;
    out.initial_offset = detail::distance(s0, s1);
    out.reference = integrate(s0, p, spec);
    out.perturbed = integrate(s1, p, spec);
    const std::size_t n = std::min(out.reference.size(), out.perturbed.size());
    out.times.assign(out.reference.times.begin(), out.reference.times.begin() + static_cast<std::ptrdiff_t>(n));
    out.separations.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        out.separations[i] = detail::distance(out.reference.states[i], out.perturbed.states[i]);
    if (out.reference.aborted) out.aborted = out.reference.aborted;
    if (out.perturbed.aborted && (!out.aborted || *out.perturbed.aborted < *out.aborted))
        out.aborted = out.perturbed.aborted;
    return out;
}

// ---------------------------------------------------------------------------
// Poincare sections

enum class SectionPlane { A_pA, G_PiG, D_PiD };

inline const char* to_string(SectionPlane s) {
    switch (s) {
    case SectionPlane::A_pA: return "A_pA";
    case SectionPlane::G_PiG: return "G_PiG";
    case SectionPlane::D_PiD: return "D_PiD";
    }
    return "?";
}

/// Crossing condition coordinate(y) = level, approached with the sign of
/// direction (+1 upward, -1 downward). coordinate indexes Coords.
struct SectionSurface {
    std::size_t coordinate = 3;
    double level = 0.0;
    int direction = -1;
};

/// Default surfaces: p_G = 0 with p_G decreasing for the A-pA plane,
/// A = 0 with A increasing for the width planes.
inline SectionSurface default_surface(SectionPlane plane) {
    if (plane == SectionPlane::A_pA) return {3, 0.0, -1};
    return {0, 0.0, +1};
}

struct SectionPoint {
    std::size_t traj_id = 0;
    double t = 0.0;
    double u = 0.0;
    double v = 0.0;
    MeanFieldState state; ///< interpolated full state at the crossing
};

struct PoincareSection {
    SectionPlane plane = SectionPlane::A_pA;
    SectionSurface surface;
    std::vector<SectionPoint> points;
    std::size_t n_trajectories = 0;
    std::vector<std::string> warnings;
};

inline std::pair<double, double> plane_coordinates(const MeanFieldState& s, SectionPlane plane, double hbar) {
    switch (plane) {
    case SectionPlane::A_pA: return {s.A, s.pA};
    case SectionPlane::G_PiG: {
        const WidthView w = to_width_view(s, hbar);
        return {w.G, w.Pi_G};
    }
    case SectionPlane::D_PiD: {
        if (!s.has_d_sector()) throw std::invalid_argument("D_PiD plane needs a model with a D sector");
        const WidthView w = to_width_view(s, hbar);
        return {w.D, w.Pi_D};
    }
    }
    return {0.0, 0.0};
}

namespace detail {

// Cubic Hermite interpolant on [0, h] from values and derivatives at ends.
struct Hermite {
    double y0, y1, d0, d1, h;
    double operator()(double tau) const {
        const double s = tau / h;
        const double s2 = s * s, s3 = s2 * s;
        return (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * h * d0 + (-2 * s3 + 3 * s2) * y1
             + (s3 - s2) * h * d1;
    }
    double derivative(double tau) const {
        const double s = tau / h;
        const double s2 = s * s;
        return ((6 * s2 - 6 * s) * y0 + (3 * s2 - 4 * s + 1) * h * d0 + (-6 * s2 + 6 * s) * y1
                + (3 * s2 - 2 * s) * h * d1) / h;
    }
};

} // namespace detail

/// Streaming crossing detector: feed consecutive states of one trajectory.
class SectionCollector {
public:
    SectionCollector(const ModelParams& p, SectionPlane plane, SectionSurface surface)
        : params_(p), plane_(plane), surface_(surface) {}

    void begin(std::size_t traj_id) {
        traj_id_ = traj_id;
        have_prev_ = false;
    }

    void add(double t, const MeanFieldState& s) {
        const Coords c = to_coords(s);
        const Coords dc = to_coords(eom(s, params_));
        if (have_prev_) detect(t, c, dc);
        prev_t_ = t;
        prev_ = c;
        prev_d_ = dc;
        kind_ = s.kind;
        have_prev_ = true;
    }

    std::vector<SectionPoint>& points() { return points_; }

private:
    void detect(double t, const Coords& c, const Coords& dc) {
        const std::size_t k = surface_.coordinate;
        const double f0 = prev_[k] - surface_.level;
        const double f1 = c[k] - surface_.level;
        const bool up = f0 < 0.0 && f1 >= 0.0;
        const bool down = f0 > 0.0 && f1 <= 0.0;
        if (!((surface_.direction > 0 && up) || (surface_.direction < 0 && down))) return;

        const double h = t - prev_t_;
        const detail::Hermite hs{f0, f1, prev_d_[k], dc[k], h};
        // Bracketed Newton with bisection fallback.
        double lo = 0.0, hi = h;
        double tau = h * f0 / (f0 - f1);
        for (int it = 0; it < 100; ++it) {
            const double f = hs(tau);
            if (std::abs(f) < 1e-14) break;
            if ((f < 0.0) == (f0 < 0.0)) lo = tau; else hi = tau;
            const double df = hs.derivative(tau);
            double next = df != 0.0 ? tau - f / df : 0.5 * (lo + hi);
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            if (std::abs(next - tau) < 1e-16 * h) { tau = next; break; }
            tau = next;
        }
        Coords y{};
        for (std::size_t i = 0; i < 6; ++i) {
            const detail::Hermite hi_i{prev_[i], c[i], prev_d_[i], dc[i], h};
            y[i] = hi_i(tau);
        }
        SectionPoint pt;
        pt.traj_id = traj_id_;
        pt.t = prev_t_ + tau;
        pt.state = from_coords(y, kind_);
        std::tie(pt.u, pt.v) = plane_coordinates(pt.state, plane_, params_.hbar);
        points_.push_back(pt);
    }

    ModelParams params_;
    SectionPlane plane_;
    SectionSurface surface_;
    std::size_t traj_id_ = 0;
    bool have_prev_ = false;
    double prev_t_ = 0.0;
    Coords prev_{};
    Coords prev_d_{};
    ModelKind kind_ = ModelKind::LargeN;
    std::vector<SectionPoint> points_;
};

/// Section of stored trajectories. Points are ordered by trajectory index,
/// then time.
inline PoincareSection poincare_section(const std::vector<Trajectory>& trajectories, const ModelParams& p,
                                        SectionPlane plane, SectionSurface surface) {
    PoincareSection sec;
    sec.plane = plane;
    sec.surface = surface;
    sec.n_trajectories = trajectories.size();
    SectionCollector col(p, plane, surface);
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
        col.begin(i);
        for (std::size_t j = 0; j < trajectories[i].size(); ++j)
            col.add(trajectories[i].times[j], trajectories[i].states[j]);
    }
    sec.points = std::move(col.points());
    if (sec.points.empty()) sec.warnings.emplace_back("no surface crossings found; trajectories too short?");
    return sec;
}

/// Integrates and sections one trajectory without storing it.
inline std::vector<SectionPoint> section_of_orbit(const MeanFieldState& s0, const ModelParams& p,
                                                  const IntegratorSpec& spec, SectionPlane plane,
                                                  SectionSurface surface, std::size_t traj_id) {
    spec.validate();
    SectionCollector col(p, plane, surface);
    col.begin(traj_id);
    MeanFieldState s = s0;
    col.add(0.0, s);
    const std::size_t n = spec.steps();
    for (std::size_t k = 1; k <= n; ++k) {
        try {
            s = step(s, p, spec.dt, spec.scheme);
        } catch (const singularity_error&) {
            break;
        }
        col.add(static_cast<double>(k) * spec.dt, s);
    }
    return std::move(col.points());
}

// ---------------------------------------------------------------------------
// Energy-shell initial-condition families

/// Places the energy above the convention minimum into the A sector:
/// p_A^2/2 = dE cos^2(theta), potential e^2 term = dE sin^2(theta), and
/// optionally a fraction sin^2(phi) of dE into the G-width momentum.
inline MeanFieldState energy_shell_state(double E, const InitialConditionConvention& conv, const ModelParams& p,
                                         ModelKind kind, double theta, double phi = 0.0, int pg_sign = +1) {
    InitialConditionConvention base = conv;
    base.pA0 = 0.0;
    base.validate();
    MeanFieldState s = convention_base_state(base, p, kind);
    const double e_min = energy(s, p);
    if (E < e_min) {
        throw infeasible_energy_error("infeasible energy: E = " + std::to_string(E) +
                                      " is below the convention minimum " + std::to_string(e_min));
    }
    const double de = E - e_min;
    const double n = replica_weight(kind, p);
    const double c2 = std::cos(phi) * std::cos(phi);
    const double de_g = de * (1.0 - c2);
    const double de_a = de * c2;
    const double kin = de_a * std::cos(theta) * std::cos(theta);
    double pot = de_a - kin;
    double kin_a = kin;
    if (pot > 0.0 && p.e == 0.0) {
        kin_a += pot;
        pot = 0.0;
    }
    s.pA = std::sqrt(2.0 * kin_a);
    if (pot > 0.0) s.A = conv.branch * std::sqrt(2.0 * pot / (p.hbar * n * p.e * p.e * base.G0));
    if (de_g > 0.0) s.pG = pg_sign * std::sqrt(2.0 * p.hbar * de_g / n);
    return s;
}

/// theta_k = (pi/2) k / n_ic, k = 0..n_ic-1.
inline std::vector<MeanFieldState> energy_shell_family(double E, const InitialConditionConvention& conv,
                                                       const ModelParams& p, ModelKind kind, std::size_t n_ic) {
    if (n_ic < 1) throw std::domain_error("energy_shell_family: n_ic must be >= 1");
    std::vector<MeanFieldState> out;
    out.reserve(n_ic);
    for (std::size_t k = 0; k < n_ic; ++k) {
        const double theta = 0.5 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n_ic);
        out.push_back(energy_shell_state(E, conv, p, kind, theta));
    }
    return out;
}

enum class Regularity { Regular, Chaotic };

inline const char* to_string(Regularity r) { return r == Regularity::Chaotic ? "chaotic" : "regular"; }

struct RegularityReport {
    Regularity classification = Regularity::Regular;
    std::vector<double> lambdas;
    double lambda_max = 0.0;
    std::size_t n_chaotic = 0;
};

/// Chaotic if at least one energy-shell initial condition has a final
/// exponent above lambda_threshold.
inline RegularityReport classify_regularity(double E, const InitialConditionConvention& conv, const ModelParams& p,
                                            ModelKind kind, std::size_t n_ic, const IntegratorSpec& spec,
                                            double lambda_threshold = 0.02, double renorm_interval = 0.5,
                                            int workers = 1) {
    const auto ics = energy_shell_family(E, conv, p, kind, n_ic);
    RegularityReport rep;
    rep.lambdas = parallel_map<double>(ics.size(), workers, [&](std::size_t i) {
        return max_lyapunov(ics[i], p, spec, renorm_interval).final;
    });
    rep.lambda_max = rep.lambdas.front();
    for (double l : rep.lambdas) {
        rep.lambda_max = std::max(rep.lambda_max, l);
        if (l > lambda_threshold) ++rep.n_chaotic;
    }
    rep.classification = rep.n_chaotic > 0 ? Regularity::Chaotic : Regularity::Regular;
    return rep;
}

} // namespace sqchaos
