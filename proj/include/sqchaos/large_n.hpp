// Convergence of the N-replica family to the large-N model.
//
// Under A -> sqrt(N) A~, p_A -> sqrt(N) p~_A, e -> e~/sqrt(N) the product
// e A is invariant and H_family / N equals the large-N Hamiltonian in the
// rescaled variables up to O(1/N) terms from the D sector.
#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "integrators.hpp"
#include "model.hpp"

namespace sqchaos {

/// Replica-family state equivalent to a large-N state after rescaling.
inline MeanFieldState rescale_to_replica(const MeanFieldState& large_n, int n, double D0) {
    MeanFieldState s = large_n;
    const double root = std::sqrt(static_cast<double>(n));
    s.kind = ModelKind::ReplicaFamily;
    s.A = root * large_n.A;
    s.pA = root * large_n.pA;
    s.rhoD = std::sqrt(D0);
    s.pD = 0.0;
    return s;
}

struct LargeNConvergenceRow {
    int n = 1;
    double deviation = 0.0;   ///< sup over samples of max(|A~_N - A|, |G_N - G|)
    double deviation_A = 0.0;
    double deviation_G = 0.0;
};

struct LargeNConvergenceReport {
    double e = 0.0;
    double energy = 0.0;
    double horizon = 0.0;
    std::vector<LargeNConvergenceRow> rows;

    bool monotone() const {
        for (std::size_t i = 1; i < rows.size(); ++i)
            if (!(rows[i].deviation < rows[i - 1].deviation)) return false;
        return true;
    }
};

/// Integrates the large-N model from the convention state at energy E and
/// each rescaled replica family, reporting the sup-norm deviation of (A~, G).
inline LargeNConvergenceReport large_n_limit_check(const std::vector<int>& n_list, double E, double e,
                                                   double horizon, const InitialConditionConvention& conv = {},
                                                   double dt = 1e-3, double m = 1.0, double hbar = 1.0) {
    if (n_list.empty()) throw std::invalid_argument("large_n_limit_check: empty N list");
    for (std::size_t i = 1; i < n_list.size(); ++i)
        if (n_list[i] <= n_list[i - 1]) throw std::invalid_argument("large_n_limit_check: N list must increase");

    ModelParams base;
    base.e = e;
    base.m = m;
    base.hbar = hbar;
    const MeanFieldState s0 = initial_condition_from_energy(E, conv, base, ModelKind::LargeN);

    IntegratorSpec spec;
    spec.scheme = Scheme::Composition4;
    spec.dt = dt;
    spec.t_max = horizon;
    spec.sample_every = std::max(1, static_cast<int>(std::lround(0.01 / dt)));
    const Trajectory ref = integrate(s0, base, spec);
    if (ref.aborted) throw singularity_error("large_n_limit_check: reference run aborted", *ref.aborted);

    LargeNConvergenceReport rep;
    rep.e = e;
    rep.energy = E;
    rep.horizon = horizon;
    for (int n : n_list) {
        ModelParams pn = base;
        pn.n_replicas = n;
        pn.e = e / std::sqrt(static_cast<double>(n));
        const Trajectory tr = integrate(rescale_to_replica(s0, n, conv.D0), pn, spec);
        if (tr.aborted) throw singularity_error("large_n_limit_check: replica run aborted", *tr.aborted);
        LargeNConvergenceRow row;
        row.n = n;
        const double root = std::sqrt(static_cast<double>(n));
        for (std::size_t i = 0; i < std::min(tr.size(), ref.size()); ++i) {
            row.deviation_A = std::max(row.deviation_A, std::abs(tr.states[i].A / root - ref.states[i].A));
            row.deviation_G = std::max(row.deviation_G, std::abs(tr.states[i].G() - ref.states[i].G()));
        }
        row.deviation = std::max(row.deviation_A, row.deviation_G);
        rep.rows.push_back(row);
    }
    return rep;
}

} // namespace sqchaos
