#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <sqchaos/integrators.hpp>

using namespace sqchaos;

namespace {

ModelParams coupling(double e) {
    ModelParams p;
    p.e = e;
    return p;
}

MeanFieldState shell(ModelKind k, double E, double e) {
    InitialConditionConvention conv;
    return initial_condition_from_energy(E, conv, coupling(e), k);
}

double max_abs_diff(const MeanFieldState& a, const MeanFieldState& b) {
    const Coords x = to_coords(a), y = to_coords(b);
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) d = std::max(d, std::abs(x[i] - y[i]));
    return d;
}

MeanFieldState march(MeanFieldState s, const ModelParams& p, double dt, std::size_t n, Scheme scheme) {
    for (std::size_t k = 0; k < n; ++k) s = step(s, p, dt, scheme);
    return s;
}

MeanFieldState flip_momenta(MeanFieldState s) {
    s.pA = -s.pA;
    s.pG = -s.pG;
    s.pD = -s.pD;
    return s;
}

double order_slope(Scheme scheme, ModelKind kind, const std::vector<double>& dts) {
    const ModelParams p = coupling(1.0);
    const MeanFieldState s0 = shell(kind, 5.0, 1.0);
    const double T = 2.0;
    const MeanFieldState ref = march(s0, p, 1e-4, 20000, Scheme::RK4Generic);
    std::vector<double> lx, ly;
    for (double dt : dts) {
        const auto n = static_cast<std::size_t>(std::llround(T / dt));
        lx.push_back(std::log(dt));
        ly.push_back(std::log(max_abs_diff(march(s0, p, dt, n, scheme), ref)));
    }
    const double c = static_cast<double>(lx.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sx += lx[i];
        sy += ly[i];
        sxx += lx[i] * lx[i];
        sxy += lx[i] * ly[i];
    }
    return (c * sxy - sx * sy) / (c * sxx - sx * sx);
}

double max_energy_error(ModelKind k, double dt) {
    const ModelParams p = coupling(1.0);
    IntegratorSpec spec{Scheme::Composition4, dt, 100.0, 1};
    const Trajectory tr = integrate(shell(k, 5.0, 1.0), p, spec);
    if (tr.aborted) ADD_FAILURE() << "aborted";
    double drift = 0.0;
    for (double E : tr.energies) drift = std::max(drift, std::abs(E - 5.0));
    return drift;
}

} // namespace

TEST(Symplectic, TimeReversible) {
    const ModelParams p = coupling(1.0);
    for (Scheme s : {Scheme::Leapfrog2, Scheme::Composition4})
        for (ModelKind k : {ModelKind::LargeN, ModelKind::Hartree}) {
            const MeanFieldState s0 = shell(k, 5.0, 1.0);
            const MeanFieldState back = flip_momenta(march(flip_momenta(march(s0, p, 0.01, 100, s)), p, 0.01, 100, s));
            EXPECT_LT(max_abs_diff(back, s0), 1e-12) << to_string(s) << " " << to_string(k);
        }
}

TEST(Symplectic, ConvergenceOrder) {
    const double lf = order_slope(Scheme::Leapfrog2, ModelKind::Hartree, {0.02, 0.01, 0.005, 0.0025});
    EXPECT_GE(lf, 1.9);
    EXPECT_LE(lf, 2.1);
    const double c4 = order_slope(Scheme::Composition4, ModelKind::Hartree, {0.04, 0.02, 0.01, 0.005});
    EXPECT_GE(c4, 3.8);
    EXPECT_LE(c4, 4.2);
    const double c4n = order_slope(Scheme::Composition4, ModelKind::LargeN, {0.04, 0.02, 0.01, 0.005});
    EXPECT_GE(c4n, 3.8);
    EXPECT_LE(c4n, 4.2);
}

TEST(Symplectic, OneStepJacobianDeterminant) {
    const ModelParams p = coupling(1.0);
    for (ModelKind k : {ModelKind::LargeN, ModelKind::Hartree}) {
        const MeanFieldState s0 = shell(k, 5.0, 1.0);
        const auto n = static_cast<Eigen::Index>(phase_dim(k));
        Eigen::MatrixXd tangent(n, n), fd(n, n);
        const Coords c = to_coords(s0);
        for (Eigen::Index j = 0; j < n; ++j) {
            MeanFieldState s = s0;
            Coords v{};
            v[static_cast<std::size_t>(j)] = 1.0;
            step_composition4_tangent(s, v, p, 0.05);
            for (Eigen::Index i = 0; i < n; ++i) tangent(i, j) = v[static_cast<std::size_t>(i)];

            const double h = 1e-6;
            Coords cp = c, cm = c;
            cp[static_cast<std::size_t>(j)] += h;
            cm[static_cast<std::size_t>(j)] -= h;
            const Coords fp = to_coords(step_composition4(from_coords(cp, k), p, 0.05));
            const Coords fm = to_coords(step_composition4(from_coords(cm, k), p, 0.05));
            for (Eigen::Index i = 0; i < n; ++i)
                fd(i, j) = (fp[static_cast<std::size_t>(i)] - fm[static_cast<std::size_t>(i)]) / (2.0 * h);
        }
        EXPECT_NEAR(tangent.determinant(), 1.0, 1e-12);
        EXPECT_NEAR(fd.determinant(), 1.0, 1e-8);
        EXPECT_LT((tangent - fd).cwiseAbs().maxCoeff(), 1e-7);
    }
}

// The energy error of the fourth-order scheme shrinks as dt^4 and is below
// 1e-8 over t=100 once dt <= 5e-4.
TEST(Symplectic, EnergyErrorFourthOrder) {
    for (ModelKind k : {ModelKind::LargeN, ModelKind::Hartree}) {
        const double e1 = max_energy_error(k, 1e-3), e2 = max_energy_error(k, 5e-4);
        EXPECT_NEAR(std::log2(e1 / e2), 4.0, 0.2) << to_string(k);
        EXPECT_LT(e2, 1e-8) << to_string(k);
    }
}

TEST(Symplectic, EnergyBoundedLongRun) {
    const ModelParams p = coupling(0.3);
    for (ModelKind k : {ModelKind::LargeN, ModelKind::Hartree}) {
        IntegratorSpec spec{Scheme::Composition4, 1e-2, 1e4, 1000};
        const Trajectory tr = integrate(shell(k, 1.0, 0.3), p, spec);
        ASSERT_FALSE(tr.aborted);
        double drift = 0.0;
        for (double E : tr.energies) drift = std::max(drift, std::abs(E - 1.0));
        EXPECT_LT(drift, 1e-6) << to_string(k);
    }
}

TEST(Integrate, SampleSpacingAndCount) {
    IntegratorSpec spec{Scheme::Leapfrog2, 0.01, 1.0, 10};
    const Trajectory tr = integrate(shell(ModelKind::LargeN, 2.0, 1.0), coupling(1.0), spec);
    ASSERT_EQ(tr.size(), 11u);
    for (std::size_t i = 0; i < tr.size(); ++i) EXPECT_NEAR(tr.times[i], 0.1 * static_cast<double>(i), 1e-12);
    EXPECT_EQ(tr.states.size(), tr.energies.size());
}

TEST(Integrate, RejectsBadSpecs) {
    const MeanFieldState s = shell(ModelKind::LargeN, 2.0, 1.0);
    EXPECT_THROW(integrate(s, coupling(1.0), IntegratorSpec{Scheme::Leapfrog2, 0.0, 1.0, 1}), std::domain_error);
    EXPECT_THROW(integrate(s, coupling(1.0), IntegratorSpec{Scheme::Leapfrog2, 0.1, 0.01, 1}), std::domain_error);
    EXPECT_THROW(integrate(s, coupling(1.0), IntegratorSpec{Scheme::Leapfrog2, 0.1, 1.0, 0}), std::domain_error);
}

TEST(Integrate, FreeSpreadingWidth) {
    ModelParams p = coupling(0.0);
    MeanFieldState s = from_width_view(WidthView{0.0, 0.3, 0.5, 0.0, 0.5, 0.0}, ModelKind::Hartree, 1.0);
    IntegratorSpec spec{Scheme::Composition4, 1e-2, 10.0, 10};
    const Trajectory tr = integrate(s, p, spec);
    double worst = 0.0;
    for (std::size_t i = 0; i < tr.size(); ++i) {
        const double t = tr.times[i];
        worst = std::max(worst, std::abs(tr.states[i].D() - (0.5 + t * t / 2.0)));
        EXPECT_NEAR(tr.states[i].G(), 0.5, 1e-10);
    }
    EXPECT_LT(worst, 1e-6);
}

TEST(Integrate, GroundWidthStationary) {
    MeanFieldState s = from_width_view(WidthView{0.0, 0.0, 0.5, 0.0, 0.5, 0.0}, ModelKind::LargeN, 1.0);
    IntegratorSpec spec{Scheme::Composition4, 1e-2, 100.0, 100};
    const Trajectory tr = integrate(s, coupling(0.0), spec);
    double worst = 0.0;
    for (const auto& st : tr.states) worst = std::max(worst, max_abs_diff(st, s));
    EXPECT_LT(worst, 1e-10);
}

TEST(Integrate, SingularityAbortsWithTime) {
    // Zero-width D with collapsing momentum is driven into rho_D <= 0.
    MeanFieldState s = from_width_view(WidthView{0.0, 0.0, 0.5, 0.0, 1e-3, 0.0}, ModelKind::Hartree, 1.0);
    s.pD = -50.0;
    IntegratorSpec spec{Scheme::Leapfrog2, 0.01, 1.0, 1};
    const Trajectory tr = integrate(s, coupling(1.0), spec);
    ASSERT_TRUE(tr.aborted.has_value());
    EXPECT_GT(*tr.aborted, 0.0);
    EXPECT_FALSE(tr.abort_reason.empty());
}

TEST(RK4, HarmonicPeriod) {
    const auto flow = [](const Eigen::VectorXd& y) {
        Eigen::VectorXd r(2);
        r << y(1), -y(0);
        return r;
    };
    Eigen::VectorXd y(2);
    y << 1.0, 0.0;
    const double T = 2.0 * std::numbers::pi;
    const int n = 1000;
    for (int k = 0; k < n; ++k) y = step_rk4_generic(flow, y, T / n);
    EXPECT_NEAR(y(0), 1.0, 1e-10);
    EXPECT_NEAR(y(1), 0.0, 1e-10);
}

TEST(RK4, AgreesWithComposition) {
    const ModelParams p = coupling(1.0);
    const MeanFieldState s0 = shell(ModelKind::Hartree, 5.0, 1.0);
    const MeanFieldState ref = march(s0, p, 1e-5, 100000, Scheme::RK4Generic);
    const MeanFieldState a = march(s0, p, 1e-3, 1000, Scheme::RK4Generic);
    const MeanFieldState b = march(s0, p, 1e-3, 1000, Scheme::Composition4);
    EXPECT_LT(max_abs_diff(a, ref), 3e-9);
    EXPECT_LT(max_abs_diff(b, ref), 3e-8);
    EXPECT_LT(max_abs_diff(a, b), 3e-8);
}

TEST(Composition, Weights) {
    EXPECT_NEAR(2.0 * composition4::w_outer + composition4::w_inner, 1.0, 1e-15);
    EXPECT_NEAR(2.0 * std::pow(composition4::w_outer, 3) + std::pow(composition4::w_inner, 3), 0.0, 1e-14);
}
