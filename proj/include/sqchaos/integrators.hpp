// Fixed-step integrators for the canonical mean-field flows.
//
// Leapfrog2 is kick-drift-kick on the separable Hamiltonian. Composition4 is
// the symmetric triple composition of leapfrog with weights (w, 1-2w, w),
// w = 1/(2 - 2^(1/3)). RK4Generic is the classical Runge-Kutta method for
// flows that do not split (variational-engine flows in non-canonical
// coordinates).
#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "model.hpp"

namespace sqchaos {

enum class Scheme { Leapfrog2, Composition4, RK4Generic };

inline const char* to_string(Scheme s) {
    switch (s) {
    case Scheme::Leapfrog2: return "leapfrog2";
    case Scheme::Composition4: return "composition4";
    case Scheme::RK4Generic: return "rk4";
    }
    return "?";
}

struct IntegratorSpec {
    Scheme scheme = Scheme::Composition4;
    double dt = 1e-3;
    double t_max = 100.0;
    int sample_every = 1;

    void validate() const {
        if (!(dt > 0.0) || !std::isfinite(dt)) throw std::domain_error("IntegratorSpec: dt must be > 0");
        if (!(t_max >= dt)) throw std::domain_error("IntegratorSpec: t_max must be >= dt");
        if (sample_every < 1) throw std::domain_error("IntegratorSpec: sample_every must be >= 1");
    }

    /// Number of steps covering [0, t_max].
    std::size_t steps() const { return static_cast<std::size_t>(std::llround(t_max / dt)); }
};

struct Trajectory {
    std::vector<double> times;
    std::vector<MeanFieldState> states;
    std::vector<double> energies;
    std::optional<double> aborted; ///< time of the singularity abort, if any
    std::string abort_reason;

    std::size_t size() const { return times.size(); }
};

namespace composition4 {
inline const double w_outer = 1.0 / (2.0 - std::cbrt(2.0));
inline const double w_inner = 1.0 - 2.0 * w_outer;
} // namespace composition4

namespace detail {

inline void kick(MeanFieldState& s, const ModelParams& p, double h) {
    const Forces f = forces(s, p);
    s.pA += h * f.A;
    s.pG += h * f.G;
    if (s.has_d_sector()) s.pD += h * f.D;
}

inline void drift(MeanFieldState& s, const ModelParams& p, double h) {
    s.A += h * s.pA;
    s.rhoG += h * s.pG / p.hbar;
    if (s.has_d_sector()) s.rhoD += h * s.pD / p.hbar;
}

// Tangent vector (dA, dpA, drhoG, dpG, drhoD, dpD) follows the exact
// linearization of the discrete kick and drift maps.
inline void kick_tangent(const MeanFieldState& s, Coords& v, const ModelParams& p, double h) {
    const Eigen::Matrix3d k = force_jacobian(s, p);
    const double dq[3] = {v[0], v[2], v[4]};
    v[1] += h * (k(0, 0) * dq[0] + k(0, 1) * dq[1] + k(0, 2) * dq[2]);
    v[3] += h * (k(1, 0) * dq[0] + k(1, 1) * dq[1] + k(1, 2) * dq[2]);
    if (s.has_d_sector()) v[5] += h * (k(2, 0) * dq[0] + k(2, 1) * dq[1] + k(2, 2) * dq[2]);
}

inline void drift_tangent(const MeanFieldState& s, Coords& v, const ModelParams& p, double h) {
    v[0] += h * v[1];
    v[2] += h * v[3] / p.hbar;
    if (s.has_d_sector()) v[4] += h * v[5] / p.hbar;
}

} // namespace detail

/// One kick-drift-kick step. Throws singularity_error if a width leaves the
/// admissible range.
inline MeanFieldState step_leapfrog(MeanFieldState s, const ModelParams& p, double dt) {
    detail::require_widths(s);
    detail::kick(s, p, 0.5 * dt);
    detail::drift(s, p, dt);
    detail::require_widths(s);
    detail::kick(s, p, 0.5 * dt);
    return s;
}

inline MeanFieldState step_composition4(MeanFieldState s, const ModelParams& p, double dt) {
    s = step_leapfrog(s, p, composition4::w_outer * dt);
    s = step_leapfrog(s, p, composition4::w_inner * dt);
    return step_leapfrog(s, p, composition4::w_outer * dt);
}

/// Leapfrog step that also propagates a tangent vector with the step's
/// Jacobian.
inline void step_leapfrog_tangent(MeanFieldState& s, Coords& v, const ModelParams& p, double dt) {
    detail::require_widths(s);
    detail::kick_tangent(s, v, p, 0.5 * dt);
    detail::kick(s, p, 0.5 * dt);
    detail::drift_tangent(s, v, p, dt);
    detail::drift(s, p, dt);
    detail::require_widths(s);
    detail::kick_tangent(s, v, p, 0.5 * dt);
    detail::kick(s, p, 0.5 * dt);
}

inline void step_composition4_tangent(MeanFieldState& s, Coords& v, const ModelParams& p, double dt) {
    step_leapfrog_tangent(s, v, p, composition4::w_outer * dt);
    step_leapfrog_tangent(s, v, p, composition4::w_inner * dt);
    step_leapfrog_tangent(s, v, p, composition4::w_outer * dt);
}

/// Classical RK4 step for a generic flow y' = f(y). Vec must support
/// addition and scalar multiplication (Eigen vectors do).
template <class Flow, class Vec>
Vec step_rk4_generic(Flow&& flow, const Vec& y, double dt) {
    const Vec k1 = flow(y);
    const Vec k2 = flow(Vec(y + (0.5 * dt) * k1));
    const Vec k3 = flow(Vec(y + (0.5 * dt) * k2));
    const Vec k4 = flow(Vec(y + dt * k3));
    return Vec(y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

/// One step of the chosen scheme on the mean-field flow.
inline MeanFieldState step(const MeanFieldState& s, const ModelParams& p, double dt, Scheme scheme) {
    switch (scheme) {
    case Scheme::Leapfrog2: return step_leapfrog(s, p, dt);
    case Scheme::Composition4: return step_composition4(s, p, dt);
    case Scheme::RK4Generic: {
        const auto flow = [&](const Eigen::VectorXd& y) {
            return to_vector(eom(from_vector(y, s.kind), p));
        };
        return from_vector(step_rk4_generic(flow, to_vector(s), dt), s.kind);
    }
    }
    return s;
}

/// Fixed-step march recording every sample_every-th state. A singularity
/// ends the march early and is reported through Trajectory::aborted.
inline Trajectory integrate(const MeanFieldState& s0, const ModelParams& p, const IntegratorSpec& spec) {
    spec.validate();
    p.validate();
    validate_state(s0);
    const std::size_t n = spec.steps();
    const auto stride = static_cast<std::size_t>(spec.sample_every);

    Trajectory traj;
    traj.times.reserve(n / stride + 1);
    traj.states.reserve(n / stride + 1);
    traj.energies.reserve(n / stride + 1);
    traj.times.push_back(0.0);
    traj.states.push_back(s0);
    traj.energies.push_back(energy(s0, p));

    MeanFieldState s = s0;
    for (std::size_t k = 1; k <= n; ++k) {
        try {
            s = step(s, p, spec.dt, spec.scheme);
            validate_state(s);
        } catch (const singularity_error& err) {
            traj.aborted = static_cast<double>(k) * spec.dt;
            traj.abort_reason = err.what();
            break;
        } catch (const std::domain_error& err) {
            traj.aborted = static_cast<double>(k) * spec.dt;
            traj.abort_reason = err.what();
            break;
        }
        if (k % stride == 0) {
            traj.times.push_back(static_cast<double>(k) * spec.dt);
            traj.states.push_back(s);
            traj.energies.push_back(energy(s, p));
        }
    }
    return traj;
}

} // namespace sqchaos
