#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <sqchaos/model.hpp>

using namespace sqchaos;

namespace {

MeanFieldState make(ModelKind k, double A, double pA, double G, double PiG, double D = 0.5, double PiD = 0.0,
                    double hbar = 1.0) {
    WidthView w{A, pA, G, PiG, D, PiD};
    return from_width_view(w, k, hbar);
}

MeanFieldState random_state(std::mt19937_64& rng, ModelKind kind) {
    std::uniform_real_distribution<double> pos(-3.0, 3.0), width(0.2, 2.0), mom(-1.5, 1.5);
    MeanFieldState s;
    s.kind = kind;
    s.A = pos(rng);
    s.pA = mom(rng);
    s.rhoG = width(rng);
    s.pG = mom(rng);
    if (kind != ModelKind::LargeN) {
        s.rhoD = width(rng);
        s.pD = mom(rng);
    }
    return s;
}

ModelParams params(double e, double m = 1.0, double hbar = 1.0, int n = 1) {
    ModelParams p;
    p.e = e;
    p.m = m;
    p.hbar = hbar;
    p.n_replicas = n;
    return p;
}

} // namespace

TEST(Energy, LargeNGroundWidth) {
    for (double e : {0.0, 0.5, 1.0, 3.0})
        EXPECT_DOUBLE_EQ(energy_large_n(make(ModelKind::LargeN, 0, 0, 0.5, 0), params(e)), 0.5);
}

TEST(Energy, LargeNMomentumAdds) {
    EXPECT_DOUBLE_EQ(energy_large_n(make(ModelKind::LargeN, 0, 1, 0.5, 0), params(0.0)), 1.0);
}

TEST(Energy, LargeNClosedFormInversion) {
    const double A = std::sqrt(4.0 * (5.0 - 0.5)) / 1.0;
    EXPECT_NEAR(energy_large_n(make(ModelKind::LargeN, A, 0, 0.5, 0), params(1.0)), 5.0, 1e-13);
}

TEST(Energy, HartreeExamples) {
    EXPECT_DOUBLE_EQ(energy_hartree(make(ModelKind::Hartree, 0, 0, 0.5, 0), params(0.0)), 0.75);
    EXPECT_DOUBLE_EQ(energy_hartree(make(ModelKind::Hartree, 0, 0, 0.5, 0), params(1.0)), 0.875);
    const double A = std::sqrt((5.0 - 0.875) / 0.25);
    EXPECT_NEAR(energy_hartree(make(ModelKind::Hartree, A, 0, 0.5, 0), params(1.0)), 5.0, 1e-13);
}

TEST(Energy, ReplicaFamilyReducesToHartreeAtN1) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 100; ++i) {
        MeanFieldState s = random_state(rng, ModelKind::Hartree);
        MeanFieldState r = s;
        r.kind = ModelKind::ReplicaFamily;
        const ModelParams p = params(0.8, 1.3, 0.7, 1);
        EXPECT_EQ(energy_replica_family(r, p), energy_hartree(s, p));
    }
}

TEST(Energy, ReplicaFamilyN4) {
    EXPECT_DOUBLE_EQ(energy_replica_family(make(ModelKind::ReplicaFamily, 0, 0, 0.5, 0), params(0.0, 1, 1, 4)), 2.25);
}

TEST(Energy, WidthAndCanonicalViewsAgree) {
    std::mt19937_64 rng(3);
    for (ModelKind k : {ModelKind::LargeN, ModelKind::Hartree, ModelKind::ReplicaFamily}) {
        const ModelParams p = params(1.1, 0.9, 0.6, 3);
        for (int i = 0; i < 100; ++i) {
            const MeanFieldState s = random_state(rng, k);
            const double a = energy(s, p);
            const double b = energy(to_width_view(s, p.hbar), k, p);
            EXPECT_NEAR(a, b, 1e-13 * std::max(1.0, std::abs(a)));
        }
    }
}

TEST(Energy, RejectsNonFiniteAndWrongKind) {
    MeanFieldState s = make(ModelKind::LargeN, 0, 0, 0.5, 0);
    s.A = std::nan("");
    EXPECT_THROW(energy(s, params(1)), std::domain_error);
    EXPECT_THROW(energy_hartree(make(ModelKind::LargeN, 0, 0, 0.5, 0), params(1)), std::invalid_argument);
    ModelParams bad = params(1);
    bad.m = 0.0;
    EXPECT_THROW(bad.validate(), std::domain_error);
    bad = params(-1.0);
    EXPECT_THROW(bad.validate(), std::domain_error);
}

// Central differences of the energy give the canonical equations of motion.
TEST(EquationsOfMotion, MatchEnergyGradient) {
    std::mt19937_64 rng(5);
    for (ModelKind k : {ModelKind::LargeN, ModelKind::Hartree, ModelKind::ReplicaFamily}) {
        const ModelParams p = params(0.9, 1.2, 0.8, 3);
        const auto w = canonical_momentum_scale(k, p);
        for (int trial = 0; trial < 100; ++trial) {
            const MeanFieldState s = random_state(rng, k);
            const Coords c = to_coords(s);
            Coords grad{};
            for (std::size_t i = 0; i < phase_dim(k); ++i) {
                const double h = 1e-6 * std::max(1.0, std::abs(c[i]));
                Coords cp = c, cm = c;
                cp[i] += h;
                cm[i] -= h;
                grad[i] = (energy(from_coords(cp, k), p) - energy(from_coords(cm, k), p)) / (2.0 * h);
            }
            const Coords rate = to_coords(eom(s, p));
            for (std::size_t pair = 0; pair < phase_dim(k) / 2; ++pair) {
                const double q_dot = grad[2 * pair + 1] / w[pair];
                const double p_dot = -grad[2 * pair] / w[pair];
                EXPECT_NEAR(rate[2 * pair], q_dot, 1e-6 * std::max(1.0, std::abs(q_dot)));
                EXPECT_NEAR(rate[2 * pair + 1], p_dot, 1e-6 * std::max(1.0, std::abs(p_dot)));
            }
        }
    }
}

TEST(EquationsOfMotion, FixedPointAtZeroCoupling) {
    const MeanFieldState s = make(ModelKind::LargeN, 0, 0, 0.5, 0);
    const Coords r = to_coords(eom(s, params(0.0)));
    for (double v : r) EXPECT_NEAR(v, 0.0, 1e-15);
}

TEST(EquationsOfMotion, FreeSpreadingOfD) {
    for (double d : {0.1, 0.5, 2.0}) {
        const MeanFieldState s = make(ModelKind::Hartree, 0.3, 0.2, 0.5, 0, d);
        EXPECT_GT(eom(s, params(0.0)).pD, 0.0);
    }
}

TEST(EquationsOfMotion, WidthSingularity) {
    MeanFieldState s = make(ModelKind::Hartree, 0, 0, 0.5, 0);
    s.rhoD = 0.0;
    EXPECT_THROW(eom(s, params(1)), singularity_error);
    s = make(ModelKind::LargeN, 0, 0, 0.5, 0);
    s.rhoG = -0.1;
    EXPECT_THROW(eom(s, params(1)), singularity_error);
}

TEST(Jacobian, MatchesFiniteDifferences) {
    std::mt19937_64 rng(8);
    for (ModelKind k : {ModelKind::LargeN, ModelKind::Hartree, ModelKind::ReplicaFamily}) {
        const ModelParams p = params(1.3, 0.7, 1.1, 2);
        for (int trial = 0; trial < 50; ++trial) {
            const MeanFieldState s = random_state(rng, k);
            const Eigen::MatrixXd jac = eom_jacobian(s, p);
            const Coords c = to_coords(s);
            const std::size_t n = phase_dim(k);
            double scale = 1.0;
            for (Eigen::Index i = 0; i < jac.size(); ++i) scale = std::max(scale, std::abs(jac.data()[i]));
            for (std::size_t j = 0; j < n; ++j) {
                const double h = 1e-6 * std::max(1.0, std::abs(c[j]));
                Coords cp = c, cm = c;
                cp[j] += h;
                cm[j] -= h;
                const Coords fp = to_coords(eom(from_coords(cp, k), p));
                const Coords fm = to_coords(eom(from_coords(cm, k), p));
                for (std::size_t i = 0; i < n; ++i)
                    EXPECT_NEAR(jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)),
                                (fp[i] - fm[i]) / (2.0 * h), 1e-6 * scale);
            }
        }
    }
}

TEST(Jacobian, TraceFree) {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 100; ++trial) {
        const MeanFieldState s = random_state(rng, trial % 2 ? ModelKind::Hartree : ModelKind::LargeN);
        EXPECT_NEAR(eom_jacobian(s, params(1.0)).trace(), 0.0, 1e-14);
    }
}

TEST(Jacobian, StableCenterAtFixedPoint) {
    const MeanFieldState s = make(ModelKind::LargeN, 0, 0, 0.5, 0);
    const Eigen::EigenSolver<Eigen::MatrixXd> es(eom_jacobian(s, params(0.0)));
    for (Eigen::Index i = 0; i < 4; ++i) EXPECT_NEAR(es.eigenvalues()(i).real(), 0.0, 1e-12);
}

TEST(WidthView, Examples) {
    MeanFieldState s;
    s.kind = ModelKind::LargeN;
    s.rhoG = 1.0;
    s.pG = 0.0;
    WidthView w = to_width_view(s, 1.0);
    EXPECT_EQ(w.G, 1.0);
    EXPECT_EQ(w.Pi_G, 0.0);

    w = WidthView{0, 0, 0.25, 1.0, 0, 0};
    s = from_width_view(w, ModelKind::LargeN, 1.0);
    EXPECT_DOUBLE_EQ(s.rhoG, 0.5);
    EXPECT_DOUBLE_EQ(s.pG, 1.0);
}

TEST(WidthView, RoundTrip) {
    std::mt19937_64 rng(13);
    for (int i = 0; i < 100; ++i) {
        const ModelKind k = i % 2 ? ModelKind::Hartree : ModelKind::LargeN;
        const MeanFieldState s = random_state(rng, k);
        const MeanFieldState r = from_width_view(to_width_view(s, 0.7), k, 0.7);
        const Coords a = to_coords(s), b = to_coords(r);
        for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(a[j], b[j], 4e-16 * std::max(1.0, std::abs(a[j])));
    }
}

TEST(WidthView, RejectsNonpositiveWidths) {
    EXPECT_THROW(from_width_view(WidthView{0, 0, 0.0, 0, 0.5, 0}, ModelKind::Hartree, 1.0), std::domain_error);
    EXPECT_THROW(from_width_view(WidthView{0, 0, 0.5, 0, -1.0, 0}, ModelKind::Hartree, 1.0), std::domain_error);
}

TEST(InitialConditions, EnergyExamples) {
    InitialConditionConvention conv;
    const MeanFieldState ln = initial_condition_from_energy(5.0, conv, params(1.0), ModelKind::LargeN);
    EXPECT_NEAR(ln.A, std::sqrt(18.0), 1e-13);
    EXPECT_NEAR(energy(ln, params(1.0)), 5.0, 1e-12);
    const MeanFieldState ha = initial_condition_from_energy(5.0, conv, params(1.0), ModelKind::Hartree);
    EXPECT_NEAR(ha.A, std::sqrt(16.5), 1e-13);
    EXPECT_NEAR(energy(ha, params(1.0)), 5.0, 1e-12);
    EXPECT_EQ(initial_condition_from_energy(0.5, conv, params(1.0), ModelKind::LargeN).A, 0.0);
}

TEST(InitialConditions, HitsTargetEnergy) {
    InitialConditionConvention conv;
    conv.pA0 = 0.3;
    conv.branch = -1;
    for (ModelKind k : {ModelKind::LargeN, ModelKind::Hartree, ModelKind::ReplicaFamily})
        for (double E : {2.5, 5.0, 9.0}) {
            const ModelParams p = params(0.7, 1.1, 0.9, 3);
            const MeanFieldState s = initial_condition_from_energy(E, conv, p, k);
            EXPECT_NEAR(energy(s, p), E, 1e-12 * E);
            EXPECT_LT(s.A, 0.0);
            EXPECT_EQ(s.pA, 0.3);
        }
}

TEST(InitialConditions, Errors) {
    InitialConditionConvention conv;
    EXPECT_THROW(initial_condition_from_energy(0.4, conv, params(1.0), ModelKind::LargeN), infeasible_energy_error);
    EXPECT_THROW(initial_condition_from_energy(1.0, conv, params(0.0), ModelKind::LargeN), infeasible_energy_error);
    conv.G0 = -1.0;
    EXPECT_THROW(initial_condition_from_energy(1.0, conv, params(1.0), ModelKind::LargeN), std::domain_error);
}

TEST(InitialConditions, EquilibriumDWidth) {
    InitialConditionConvention conv;
    conv.d_width = InitialConditionConvention::DWidth::Equilibrium;
    const ModelParams p = params(0.7);
    const MeanFieldState s = convention_base_state(conv, p, ModelKind::Hartree);
    EXPECT_NEAR(forces(s, p).D, 0.0, 1e-14);
    EXPECT_LT(minimum_energy(conv, p, ModelKind::Hartree), 0.8);
}
