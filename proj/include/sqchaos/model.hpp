// Gaussian mean-field models of two biquadratically coupled oscillators.
//
// The exact system is H = p_A^2/2 + p_x^2/2 + (m^2 + e^2 A^2) x^2 / 2.
// Three effective classical Hamiltonians are provided:
//
//   LargeN           : A treated classically, x a Gaussian of width G.
//   Hartree          : product Gaussian in A and x, widths D and G.
//   ReplicaFamily(N) : N identical x oscillators plus a Gaussian A.
//
// States are integrated in canonical width coordinates rho = sqrt(width)
// with per-replica momentum p = 2 hbar Pi rho. In these coordinates every
// model is separable (kinetic in the momenta, potential in the positions):
//
//   H = p_A^2/2 + N p_G^2/(2 hbar) + p_D^2/(2 hbar)
//     + (hbar/8) (N/rho_G^2 + 1/rho_D^2)
//     + (hbar N/2) [m^2 + e^2 (A^2 + hbar rho_D^2)] rho_G^2
//
// The LargeN model drops the D terms. Expressed through (G, Pi) the same
// function reproduces the width-phase form term by term.
#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "errors.hpp"

namespace sqchaos {

/// Smallest admissible width coordinate before the centrifugal barrier is
/// treated as a numerical failure.
inline constexpr double rho_min = 1e-8;

enum class ModelKind { LargeN, Hartree, ReplicaFamily };

inline const char* to_string(ModelKind k) {
    switch (k) {
    case ModelKind::LargeN: return "large_n";
    case ModelKind::Hartree: return "hartree";
    case ModelKind::ReplicaFamily: return "replica";
    }
    return "?";
}

/// Physical knobs. n_replicas is only read by ModelKind::ReplicaFamily.
struct ModelParams {
    double e = 1.0;
    double m = 1.0;
    double hbar = 1.0;
    int n_replicas = 1;

    void validate() const {
        if (!(m > 0.0) || !std::isfinite(m)) throw std::domain_error("ModelParams: m must be > 0");
        if (!(hbar > 0.0) || !std::isfinite(hbar)) throw std::domain_error("ModelParams: hbar must be > 0");
        if (!(e >= 0.0) || !std::isfinite(e)) throw std::domain_error("ModelParams: e must be >= 0");
        if (n_replicas < 1) throw std::domain_error("ModelParams: n_replicas must be >= 1");
    }
};

/// Number of canonical coordinates of a model (4 for LargeN, otherwise 6).
constexpr std::size_t phase_dim(ModelKind k) { return k == ModelKind::LargeN ? 4 : 6; }

/// Effective replica count entering the Hamiltonian.
inline double replica_weight(ModelKind k, const ModelParams& p) {
    return k == ModelKind::ReplicaFamily ? static_cast<double>(p.n_replicas) : 1.0;
}

/// Canonical phase-space point. For LargeN the D slots are unused and kept
/// at zero.
struct MeanFieldState {
    ModelKind kind = ModelKind::LargeN;
    double A = 0.0;
    double pA = 0.0;
    double rhoG = std::sqrt(0.5);
    double pG = 0.0;
    double rhoD = 0.0;
    double pD = 0.0;

    bool has_d_sector() const { return kind != ModelKind::LargeN; }
    double G() const { return rhoG * rhoG; }
    double D() const { return rhoD * rhoD; }
};

/// Flat coordinate vector in the order (A, pA, rhoG, pG, rhoD, pD); only the
/// first phase_dim(kind) entries are meaningful.
using Coords = std::array<double, 6>;

inline Coords to_coords(const MeanFieldState& s) {
    return {s.A, s.pA, s.rhoG, s.pG, s.has_d_sector() ? s.rhoD : 0.0, s.has_d_sector() ? s.pD : 0.0};
}

inline MeanFieldState from_coords(const Coords& c, ModelKind kind) {
    MeanFieldState s;
    s.kind = kind;
    s.A = c[0];
    s.pA = c[1];
    s.rhoG = c[2];
    s.pG = c[3];
    if (kind != ModelKind::LargeN) {
        s.rhoD = c[4];
        s.pD = c[5];
    }
    return s;
}

inline Eigen::VectorXd to_vector(const MeanFieldState& s) {
    const auto c = to_coords(s);
    Eigen::VectorXd v(phase_dim(s.kind));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = c[static_cast<std::size_t>(i)];
    return v;
}

inline MeanFieldState from_vector(const Eigen::VectorXd& v, ModelKind kind) {
    if (static_cast<std::size_t>(v.size()) != phase_dim(kind))
        throw std::invalid_argument("from_vector: dimension does not match model kind");
    Coords c{};
    for (Eigen::Index i = 0; i < v.size(); ++i) c[static_cast<std::size_t>(i)] = v(i);
    return from_coords(c, kind);
}

/// Width-phase view (G, Pi_G, D, Pi_D) of a state; A and pA are carried along
/// so the view is a complete description.
struct WidthView {
    double A = 0.0;
    double pA = 0.0;
    double G = 0.5;
    double Pi_G = 0.0;
    double D = 0.0;
    double Pi_D = 0.0;
};

namespace detail {

inline void require_finite(const MeanFieldState& s) {
    const auto c = to_coords(s);
    for (double v : c)
        if (!std::isfinite(v)) throw std::domain_error("mean-field state has non-finite coordinates");
}

inline void require_widths(const MeanFieldState& s) {
    if (!(s.rhoG > rho_min)) {
        std::ostringstream os;
        os << "width singularity: rho_G = " << s.rhoG << " <= " << rho_min;
        throw singularity_error(os.str());
    }
    if (s.has_d_sector() && !(s.rhoD > rho_min)) {
        std::ostringstream os;
        os << "width singularity: rho_D = " << s.rhoD << " <= " << rho_min;
        throw singularity_error(os.str());
    }
}

inline void require_kind(const MeanFieldState& s, ModelKind k, const char* who) {
    if (s.kind != k) throw std::invalid_argument(std::string(who) + ": state has the wrong model kind");
}

} // namespace detail

inline void validate_state(const MeanFieldState& s) {
    detail::require_finite(s);
    detail::require_widths(s);
}

// ---------------------------------------------------------------------------
// Energies

/// Kinetic part of the canonical Hamiltonian.
inline double kinetic_energy(const MeanFieldState& s, const ModelParams& p) {
    const double n = replica_weight(s.kind, p);
    double t = 0.5 * s.pA * s.pA + n * s.pG * s.pG / (2.0 * p.hbar);
    if (s.has_d_sector()) t += s.pD * s.pD / (2.0 * p.hbar);
    return t;
}

/// Potential part of the canonical Hamiltonian (depends on positions only).
inline double potential_energy(const MeanFieldState& s, const ModelParams& p) {
    const double h = p.hbar;
    const double n = replica_weight(s.kind, p);
    const double g = s.rhoG * s.rhoG;
    if (!s.has_d_sector())
        return h / (8.0 * g) + 0.5 * h * (p.m * p.m + p.e * p.e * s.A * s.A) * g;
    const double d = s.rhoD * s.rhoD;
    return (h / 8.0) * (n / g + 1.0 / d)
         + 0.5 * h * n * (p.m * p.m + p.e * p.e * (s.A * s.A + h * d)) * g;
}

inline double energy(const MeanFieldState& s, const ModelParams& p) {
    validate_state(s);
    return kinetic_energy(s, p) + potential_energy(s, p);
}

inline double energy_large_n(const MeanFieldState& s, const ModelParams& p) {
    detail::require_kind(s, ModelKind::LargeN, "energy_large_n");
    return energy(s, p);
}

inline double energy_hartree(const MeanFieldState& s, const ModelParams& p) {
    detail::require_kind(s, ModelKind::Hartree, "energy_hartree");
    return energy(s, p);
}

inline double energy_replica_family(const MeanFieldState& s, const ModelParams& p) {
    detail::require_kind(s, ModelKind::ReplicaFamily, "energy_replica_family");
    p.validate();
    return energy(s, p);
}

/// Energy evaluated from the width-phase form directly:
///   p_A^2/2 + 2 hbar (N Pi_G^2 G + Pi_D^2 D) + (hbar/8)(N/G + 1/D)
///   + (hbar N/2)[m^2 + e^2 (A^2 + hbar D)] G
inline double energy(const WidthView& w, ModelKind kind, const ModelParams& p) {
    const double h = p.hbar;
    const double n = replica_weight(kind, p);
    if (!(w.G > 0.0)) throw std::domain_error("width view: G must be > 0");
    if (kind == ModelKind::LargeN)
        return 0.5 * w.pA * w.pA + 2.0 * h * w.Pi_G * w.Pi_G * w.G + h / (8.0 * w.G)
             + 0.5 * h * (p.m * p.m + p.e * p.e * w.A * w.A) * w.G;
    if (!(w.D > 0.0)) throw std::domain_error("width view: D must be > 0");
    return 0.5 * w.pA * w.pA + 2.0 * h * (n * w.Pi_G * w.Pi_G * w.G + w.Pi_D * w.Pi_D * w.D)
         + (h / 8.0) * (n / w.G + 1.0 / w.D)
         + 0.5 * h * n * (p.m * p.m + p.e * p.e * (w.A * w.A + h * w.D)) * w.G;
}

// ---------------------------------------------------------------------------
// Width view conversion

inline WidthView to_width_view(const MeanFieldState& s, double hbar) {
    detail::require_finite(s);
    if (!(s.rhoG > 0.0)) throw std::domain_error("to_width_view: rho_G must be > 0");
    WidthView w;
    w.A = s.A;
    w.pA = s.pA;
    w.G = s.rhoG * s.rhoG;
    w.Pi_G = s.pG / (2.0 * hbar * s.rhoG);
    if (s.has_d_sector()) {
        if (!(s.rhoD > 0.0)) throw std::domain_error("to_width_view: rho_D must be > 0");
        w.D = s.rhoD * s.rhoD;
        w.Pi_D = s.pD / (2.0 * hbar * s.rhoD);
    }
    return w;
}

inline MeanFieldState from_width_view(const WidthView& w, ModelKind kind, double hbar) {
    if (!(w.G > 0.0)) throw std::domain_error("from_width_view: G must be > 0");
    MeanFieldState s;
    s.kind = kind;
    s.A = w.A;
    s.pA = w.pA;
    s.rhoG = std::sqrt(w.G);
    s.pG = 2.0 * hbar * w.Pi_G * s.rhoG;
    if (kind != ModelKind::LargeN) {
        if (!(w.D > 0.0)) throw std::domain_error("from_width_view: D must be > 0");
        s.rhoD = std::sqrt(w.D);
        s.pD = 2.0 * hbar * w.Pi_D * s.rhoD;
    }
    return s;
}

// ---------------------------------------------------------------------------
// Equations of motion

/// Generalized forces (time derivatives of pA, pG, pD) at a configuration.
struct Forces {
    double A = 0.0;
    double G = 0.0;
    double D = 0.0;
};

inline Forces forces(const MeanFieldState& s, const ModelParams& p) {
    const double h = p.hbar;
    const double e2 = p.e * p.e;
    const double n = replica_weight(s.kind, p);
    const double g = s.rhoG * s.rhoG;
    const double d = s.has_d_sector() ? s.rhoD * s.rhoD : 0.0;
    Forces f;
    f.A = -h * n * e2 * s.A * g;
    f.G = h / (4.0 * g * s.rhoG) - h * (p.m * p.m + e2 * (s.A * s.A + h * d)) * s.rhoG;
    if (s.has_d_sector()) f.D = h / (4.0 * d * s.rhoD) - h * h * n * e2 * s.rhoD * g;
    return f;
}

/// Derivatives of the force components with respect to (A, rhoG, rhoD):
/// row = force (A, G, D), column = position (A, rhoG, rhoD).
inline Eigen::Matrix3d force_jacobian(const MeanFieldState& s, const ModelParams& p) {
    const double h = p.hbar;
    const double e2 = p.e * p.e;
    const double n = replica_weight(s.kind, p);
    const double rg = s.rhoG;
    const double g = rg * rg;
    const double rd = s.has_d_sector() ? s.rhoD : 0.0;
    const double d = rd * rd;
    Eigen::Matrix3d k = Eigen::Matrix3d::Zero();
    k(0, 0) = -h * n * e2 * g;
    k(0, 1) = -2.0 * h * n * e2 * s.A * rg;
    k(1, 0) = -2.0 * h * e2 * s.A * rg;
    k(1, 1) = -3.0 * h / (4.0 * g * g) - h * (p.m * p.m + e2 * (s.A * s.A + h * d));
    if (s.has_d_sector()) {
        k(1, 2) = -2.0 * h * h * e2 * rd * rg;
        k(2, 1) = -2.0 * h * h * n * e2 * rd * rg;
        k(2, 2) = -3.0 * h / (4.0 * d * d) - h * h * n * e2 * g;
    }
    return k;
}

/// Time derivative of every canonical coordinate, returned as a state whose
/// fields hold the rates.
inline MeanFieldState eom(const MeanFieldState& s, const ModelParams& p) {
    validate_state(s);
    const Forces f = forces(s, p);
    MeanFieldState r;
    r.kind = s.kind;
    r.A = s.pA;
    r.pA = f.A;
    r.rhoG = s.pG / p.hbar;
    r.pG = f.G;
    if (s.has_d_sector()) {
        r.rhoD = s.pD / p.hbar;
        r.pD = f.D;
    } else {
        r.rhoD = 0.0;
        r.pD = 0.0;
    }
    return r;
}

/// Canonical momentum of each pair divided by the stored per-replica
/// momentum: N for the G pair of the replica family, 1 otherwise. With these
/// weights eom = diag(1/w) J grad H.
inline std::array<double, 3> canonical_momentum_scale(ModelKind kind, const ModelParams& p) {
    return {1.0, replica_weight(kind, p), 1.0};
}

/// Linearization d(eom_i)/d(y_j), 4x4 for LargeN and 6x6 otherwise.
inline Eigen::MatrixXd eom_jacobian(const MeanFieldState& s, const ModelParams& p) {
    validate_state(s);
    const std::size_t n = phase_dim(s.kind);
    const std::size_t pairs = n / 2;
    const Eigen::Matrix3d k = force_jacobian(s, p);
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    jac(0, 1) = 1.0;
    for (std::size_t i = 1; i < pairs; ++i) jac(2 * i, 2 * i + 1) = 1.0 / p.hbar;
    for (std::size_t i = 0; i < pairs; ++i)
        for (std::size_t j = 0; j < pairs; ++j)
            jac(2 * i + 1, 2 * j) = k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    return jac;
}

// ---------------------------------------------------------------------------
// Initial conditions

/// How a state is built from a target energy.
struct InitialConditionConvention {
    enum class Scheme { MinimumUncertainty, Explicit };
    /// Fixed uses D0 as given; Equilibrium places rho_D where its force
    /// vanishes at G0, hbar/(4 rho^3) = hbar^2 N e^2 rho G0 (falls back to D0
    /// when e = 0).
    enum class DWidth { Fixed, Equilibrium };
    Scheme scheme = Scheme::MinimumUncertainty;
    DWidth d_width = DWidth::Fixed;
    double G0 = 0.5;
    double D0 = 0.5;
    double pA0 = 0.0;
    int branch = +1;
    MeanFieldState explicit_state{};

    void validate() const {
        if (!(G0 > 0.0)) throw std::domain_error("convention: G0 must be > 0");
        if (!(D0 > 0.0)) throw std::domain_error("convention: D0 must be > 0");
        if (branch != 1 && branch != -1) throw std::domain_error("convention: branch must be +1 or -1");
    }
};

/// D width used by a convention for the given model.
inline double convention_d_width(const InitialConditionConvention& conv, const ModelParams& p, ModelKind kind) {
    if (conv.d_width == InitialConditionConvention::DWidth::Fixed || p.e == 0.0) return conv.D0;
    const double n = replica_weight(kind, p);
    return 1.0 / (2.0 * p.e * std::sqrt(p.hbar * n * conv.G0));
}

/// State of the convention with A = 0: the lowest energy it can reach.
inline MeanFieldState convention_base_state(const InitialConditionConvention& conv, const ModelParams& p,
                                            ModelKind kind) {
    MeanFieldState s;
    s.kind = kind;
    s.A = 0.0;
    s.pA = conv.pA0;
    s.rhoG = std::sqrt(conv.G0);
    s.pG = 0.0;
    if (kind != ModelKind::LargeN) {
        s.rhoD = std::sqrt(convention_d_width(conv, p, kind));
        s.pD = 0.0;
    }
    return s;
}

inline double minimum_energy(const InitialConditionConvention& conv, const ModelParams& p, ModelKind kind) {
    conv.validate();
    return energy(convention_base_state(conv, p, kind), p);
}

/// Builds the convention's state with energy E by solving for A(0).
inline MeanFieldState initial_condition_from_energy(double E, const InitialConditionConvention& conv,
                                                    const ModelParams& p, ModelKind kind) {
    p.validate();
    if (conv.scheme == InitialConditionConvention::Scheme::Explicit) {
        MeanFieldState s = conv.explicit_state;
        s.kind = kind;
        validate_state(s);
        return s;
    }
    conv.validate();
    if (!std::isfinite(E)) throw std::domain_error("initial_condition_from_energy: non-finite energy");
    MeanFieldState s = convention_base_state(conv, p, kind);
    const double e_min = energy(s, p);
    if (E < e_min) {
        std::ostringstream os;
        os << "infeasible energy: E = " << E << " is below the convention minimum " << e_min;
        throw infeasible_energy_error(os.str());
    }
    if (E == e_min) return s;
    if (p.e == 0.0)
        throw infeasible_energy_error("e = 0: energy cannot be placed in A(0); supply an explicit initial state");
    const double n = replica_weight(kind, p);
    const double a2 = 2.0 * (E - e_min) / (p.hbar * n * p.e * p.e * conv.G0);
    s.A = conv.branch * std::sqrt(a2);
    return s;
}

} // namespace sqchaos
