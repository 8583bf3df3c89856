// Dirac-variational machinery for an arbitrary trial-state family.
//
// An ansatz with parameters y and Lagrangian L = sum_i pi_i(y) dy_i/dt - h(y)
// has Euler-Lagrange equations M(y) dy/dt = grad h with the antisymmetric
// structure matrix
//
//     M_ij = d pi_j / d y_i - d pi_i / d y_j .
//
// When M is invertible the flow dy/dt = M^{-1} grad h is Hamiltonian with
// Poisson brackets {y_i, y_j} = (M^{-1})_ij, and M obeys the Bianchi
// identity because it is a curl.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "model.hpp"

namespace sqchaos {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct VariationalSystem {
    int dim = 2;
    std::function<Vector(const Vector&)> pi;
    std::function<double(const Vector&)> h;
    /// (i, j) entry is d pi_i / d y_j. Finite-differenced when empty.
    std::function<Matrix(const Vector&)> pi_jacobian;
    /// Finite-differenced when empty.
    std::function<Vector(const Vector&)> h_gradient;
};

struct PoissonStructure {
    Matrix m;
    std::optional<Matrix> m_inverse;
    Vector point;
    double condition = std::numeric_limits<double>::infinity();
};

inline constexpr double structure_condition_limit = 1e12;

namespace detail {

inline double fd_step(double yi) { return 1e-6 * std::max(1.0, std::abs(yi)); }

inline Matrix pi_jacobian(const VariationalSystem& sys, const Vector& y) {
    if (sys.pi_jacobian) return sys.pi_jacobian(y);
    const Eigen::Index n = y.size();
    Matrix jac(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double hs = fd_step(y(j));
        Vector yp = y, ym = y;
        yp(j) += hs;
        ym(j) -= hs;
        jac.col(j) = (sys.pi(yp) - sys.pi(ym)) / (yp(j) - ym(j));
    }
    return jac;
}

inline Matrix structure_matrix(const VariationalSystem& sys, const Vector& y) {
    const Matrix jac = pi_jacobian(sys, y);
    // M_ij = d pi_j/d y_i - d pi_i/d y_j = jac(j, i) - jac(i, j)
    return jac.transpose() - jac;
}

} // namespace detail

inline Vector h_gradient(const VariationalSystem& sys, const Vector& y) {
    if (sys.h_gradient) return sys.h_gradient(y);
    const Eigen::Index n = y.size();
    Vector g(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double hs = detail::fd_step(y(j));
        Vector yp = y, ym = y;
        yp(j) += hs;
        ym(j) -= hs;
        g(j) = (sys.h(yp) - sys.h(ym)) / (yp(j) - ym(j));
    }
    return g;
}

/// Structure matrix and its inverse at y. Throws degenerate_ansatz_error when
/// M is singular or its condition number exceeds structure_condition_limit.
inline PoissonStructure build_structure(const VariationalSystem& sys, const Vector& y) {
    if (sys.dim < 2 || y.size() != sys.dim) throw std::invalid_argument("build_structure: dimension mismatch");
    PoissonStructure ps;
    ps.point = y;
    ps.m = detail::structure_matrix(sys, y);
    const Eigen::JacobiSVD<Matrix> svd(ps.m);
    const auto& sv = svd.singularValues();
    const double smax = sv(0);
    const double smin = sv(sv.size() - 1);
    ps.condition = (smin > 0.0) ? smax / smin : std::numeric_limits<double>::infinity();
    if (!(smax > 0.0) || !(ps.condition <= structure_condition_limit)) {
        std::ostringstream os;
        os << "degenerate ansatz: structure matrix is singular (condition " << ps.condition << ") at y = ["
           << y.transpose() << "]";
        throw degenerate_ansatz_error(os.str());
    }
    ps.m_inverse = ps.m.fullPivLu().inverse();
    return ps;
}

/// dy/dt = M^{-1} grad h.
inline Vector flow_rhs(const VariationalSystem& sys, const Vector& y) {
    const PoissonStructure ps = build_structure(sys, y);
    return *ps.m_inverse * h_gradient(sys, y);
}

/// {a, b} = grad a^T M^{-1} grad b.
inline double poisson_bracket(const VariationalSystem& sys, const Vector& y, const Vector& a_gradient,
                              const Vector& b_gradient) {
    const PoissonStructure ps = build_structure(sys, y);
    return a_gradient.dot(*ps.m_inverse * b_gradient);
}

/// Largest |dM_ij/dy_k + dM_ki/dy_j + dM_jk/dy_i| over all index triples,
/// with central differences of width step.
inline double check_bianchi(const VariationalSystem& sys, const Vector& y, double step) {
    if (!(step > 0.0)) throw std::domain_error("check_bianchi: step must be > 0");
    const Eigen::Index n = y.size();
    std::vector<Matrix> dm(static_cast<std::size_t>(n));
    for (Eigen::Index k = 0; k < n; ++k) {
        Vector yp = y, ym = y;
        yp(k) += step;
        ym(k) -= step;
        dm[static_cast<std::size_t>(k)] =
            (detail::structure_matrix(sys, yp) - detail::structure_matrix(sys, ym)) / (2.0 * step);
    }
    double worst = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index k = 0; k < n; ++k) {
                const double r = dm[static_cast<std::size_t>(k)](i, j) + dm[static_cast<std::size_t>(j)](k, i)
                               + dm[static_cast<std::size_t>(i)](j, k);
                worst = std::max(worst, std::abs(r));
            }
    return worst;
}

// ---------------------------------------------------------------------------
// Stock ansaetze

/// Coherent-state pair y = (q, p), pi = (p/2, -q/2), h = (p^2 + q^2)/2.
inline VariationalSystem coherent_state_ansatz() {
    VariationalSystem sys;
    sys.dim = 2;
    sys.pi = [](const Vector& y) {
        Vector v(2);
        v << 0.5 * y(1), -0.5 * y(0);
        return v;
    };
    sys.h = [](const Vector& y) { return 0.5 * (y(0) * y(0) + y(1) * y(1)); };
    return sys;
}

/// Product-Gaussian (Hartree) ansatz in width coordinates
/// y = (A, p_A, G, Pi_G, D, Pi_D). The kinematic one-form of the normalized
/// trial state <psi| i hbar d/dy_i |psi> is (p_A, 0, 0, -hbar G, 0, -hbar D);
/// h is the Hartree effective energy in width-phase form.
inline VariationalSystem gaussian_hartree_ansatz(const ModelParams& p, bool analytic_derivatives = false) {
    VariationalSystem sys;
    sys.dim = 6;
    const double hbar = p.hbar;
    sys.pi = [hbar](const Vector& y) {
        Vector v = Vector::Zero(6);
        v(0) = y(1);
        v(3) = -hbar * y(2);
        v(5) = -hbar * y(4);
        return v;
    };
    sys.h = [p](const Vector& y) {
        WidthView w{y(0), y(1), y(2), y(3), y(4), y(5)};
        return energy(w, ModelKind::Hartree, p);
    };
    if (analytic_derivatives) {
        sys.pi_jacobian = [hbar](const Vector&) {
            Matrix j = Matrix::Zero(6, 6);
            j(0, 1) = 1.0;
            j(3, 2) = -hbar;
            j(5, 4) = -hbar;
            return j;
        };
        sys.h_gradient = [p](const Vector& y) {
            const double h = p.hbar, e2 = p.e * p.e, m2 = p.m * p.m;
            const double A = y(0), pA = y(1), G = y(2), PiG = y(3), D = y(4), PiD = y(5);
            Vector g(6);
            g(0) = h * e2 * A * G;
            g(1) = pA;
            g(2) = 2.0 * h * PiG * PiG - h / (8.0 * G * G) + 0.5 * h * (m2 + e2 * (A * A + h * D));
            g(3) = 4.0 * h * PiG * G;
            g(4) = 2.0 * h * PiD * PiD - h / (8.0 * D * D) + 0.5 * h * h * e2 * G;
            g(5) = 4.0 * h * PiD * D;
            return g;
        };
    }
    return sys;
}

/// Converts a width-coordinate rate (dA, dpA, dG, dPiG, dD, dPiD) at the width
/// point y into the canonical rate of MeanFieldState (Hartree).
inline MeanFieldState width_rate_to_canonical(const Vector& y, const Vector& rate, double hbar) {
    MeanFieldState r;
    r.kind = ModelKind::Hartree;
    const double rg = std::sqrt(y(2)), rd = std::sqrt(y(4));
    r.A = rate(0);
    r.pA = rate(1);
    r.rhoG = rate(2) / (2.0 * rg);
    r.pG = 2.0 * hbar * (rate(3) * rg + y(3) * r.rhoG);
    r.rhoD = rate(4) / (2.0 * rd);
    r.pD = 2.0 * hbar * (rate(5) * rd + y(5) * r.rhoD);
    return r;
}

} // namespace sqchaos
