#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include <sqchaos/experiments.hpp>

using namespace sqchaos;

namespace {

std::vector<double> grid_times(double t_max, double dt) {
    std::vector<double> t;
    const auto n = static_cast<std::size_t>(std::llround(t_max / dt));
    for (std::size_t i = 0; i <= n; ++i) t.push_back(static_cast<double>(i) * dt);
    return t;
}

RunConfig small_scan_config(int workers) {
    RunConfig c;
    c.scan.e_values = {0.3, 1.0};
    c.scan.E_values = {0.5, 1.0, 5.0};
    c.scan.n_ic = 2;
    c.scan.t_max = 50.0;
    c.workers = workers;
    return c;
}

RunConfig small_exact_config() {
    RunConfig c;
    c.model = ModelSelection::Exact;
    c.params.e = 0.5;
    c.energy = 2.0;
    c.exact.n_A = 64;
    c.exact.n_x = 64;
    c.exact.L_A = 16.0;
    c.exact.dt = 1e-2;
    c.integrator.dt = 1e-2;
    c.integrator.sample_every = 10;
    c.density.times = {0.0, 0.5};
    return c;
}

} // namespace

TEST(BreakTime, RampAfterFive) {
    const auto t = grid_times(10.0, 0.01);
    std::vector<double> a, b;
    for (double s : t) {
        b.push_back(std::sin(s));
        a.push_back(std::sin(s) + std::max(0.0, s - 5.0));
    }
    const auto tb = break_time(t, a, t, b, 0.1);
    ASSERT_TRUE(tb.has_value());
    EXPECT_NEAR(*tb, 5.0 + 0.1 * rms(b), 0.011);
    EXPECT_NEAR(*tb, 5.07, 0.01);
}

TEST(BreakTime, IdenticalSeriesNeverBreak) {
    const auto t = grid_times(5.0, 0.1);
    std::vector<double> a;
    for (double s : t) a.push_back(std::cos(s));
    EXPECT_FALSE(break_time(t, a, t, a, 0.1).has_value());
    EXPECT_FALSE(break_time(t, a, t, a, 0.0).has_value());
}

TEST(BreakTime, ZeroThresholdFindsFirstDifference) {
    const auto t = grid_times(1.0, 0.1);
    std::vector<double> a(t.size(), 1.0), b(t.size(), 1.0);
    a[4] = 1.0 + 1e-12;
    a[7] = 3.0;
    EXPECT_DOUBLE_EQ(*break_time(t, a, t, b, 0.0), t[4]);
}

TEST(BreakTime, MonotoneInThreshold) {
    const auto t = grid_times(20.0, 0.05);
    std::vector<double> a, b;
    for (double s : t) {
        b.push_back(std::sin(s) + 0.5);
        a.push_back(std::sin(s * (1.0 + 0.01 * s)) + 0.5);
    }
    double prev = 0.0;
    for (double thr : {0.0, 0.01, 0.05, 0.1, 0.3}) {
        const auto tb = break_time(t, a, t, b, thr);
        ASSERT_TRUE(tb.has_value()) << thr;
        EXPECT_GE(*tb, prev);
        prev = *tb;
    }
}

TEST(BreakTime, RejectsMisalignedGrids) {
    const auto t = grid_times(1.0, 0.1);
    auto shifted = t;
    shifted[3] += 1e-3;
    const std::vector<double> v(t.size(), 0.0);
    EXPECT_THROW(break_time(t, v, shifted, v), std::invalid_argument);
    EXPECT_THROW(break_time(t, std::vector<double>(3, 0.0), t, v), std::invalid_argument);
    EXPECT_THROW(break_time(t, v, t, v, -1.0), std::domain_error);
}

TEST(Csv, DoublesRoundTrip) {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0, 1e-9, std::numbers::pi}) {
        const std::string s = format_double(v);
        EXPECT_EQ(parse_double(s), v) << s;
    }
    EXPECT_EQ(format_double(0.5), "0.5");
    EXPECT_TRUE(std::isnan(parse_double(format_double(std::nan("")))));
    EXPECT_THROW(parse_double("1.0x"), format_error);
}

TEST(Csv, WriterAndParserAgree) {
    CsvWriter w({"t", "x"});
    w.row({0.0, 1.25}).row({0.1, -3e-7});
    EXPECT_EQ(w.str(), "t,x\n0,1.25\n0.1,-3e-07\n");
    const CsvTable t = parse_csv(w.str());
    EXPECT_EQ(t.numbers("x"), (std::vector<double>{1.25, -3e-7}));
    EXPECT_THROW(t.column("y"), format_error);
    EXPECT_THROW(parse_csv("a,b\n1\n"), format_error);
    EXPECT_THROW(w.row(std::vector<double>{1.0}), std::invalid_argument);
}

TEST(Scan, CsvRoundTrip) {
    const ScanResult r = run_scan(small_scan_config(1), ModelKind::Hartree);
    ASSERT_EQ(r.cells.size(), 6u);
    const ScanResult back = parse_scan(scan_csv(r), scan_lambdas_csv(r), r.threshold);
    ASSERT_EQ(back.cells.size(), r.cells.size());
    for (std::size_t i = 0; i < r.cells.size(); ++i) {
        EXPECT_EQ(back.cells[i].e, r.cells[i].e);
        EXPECT_EQ(back.cells[i].E, r.cells[i].E);
        EXPECT_EQ(back.cells[i].infeasible, r.cells[i].infeasible);
        EXPECT_EQ(back.cells[i].classification, r.cells[i].classification);
        EXPECT_EQ(back.cells[i].lambdas, r.cells[i].lambdas);
        EXPECT_EQ(back.cells[i].n_chaotic, r.cells[i].n_chaotic);
    }
    EXPECT_EQ(scan_csv(back), scan_csv(r));
}

TEST(Scan, InfeasibleCellsAreMarked) {
    const ScanResult r = run_scan(small_scan_config(1), ModelKind::Hartree);
    // The Hartree minimum with the default convention lies above 0.5.
    EXPECT_TRUE(r.cells[0].infeasible);
    EXPECT_TRUE(std::isnan(r.cells[0].lambda_max));
    EXPECT_TRUE(r.cells[0].lambdas.empty());
    EXPECT_FALSE(r.cells[2].infeasible);
    EXPECT_EQ(r.cells[2].lambdas.size(), 2u);
}

TEST(Scan, WorkerCountDoesNotChangeBytes) {
    const ScanResult a = run_scan(small_scan_config(1), ModelKind::LargeN);
    const ScanResult b = run_scan(small_scan_config(4), ModelKind::LargeN);
    EXPECT_EQ(scan_csv(a), scan_csv(b));
    EXPECT_EQ(scan_lambdas_csv(a), scan_lambdas_csv(b));
    EXPECT_EQ(cmd_scan(small_scan_config(1)).files, cmd_scan(small_scan_config(4)).files);
}

TEST(Config, JsonRoundTrip) {
    RunConfig c;
    c.params.e = 0.7;
    c.scan.E_values = {1.0, 2.5};
    c.exact.L_A = 24.0;
    c.convention.d_width = InitialConditionConvention::DWidth::Equilibrium;
    const RunConfig back = config_from_json(config_to_json(c));
    EXPECT_EQ(config_to_json(back), config_to_json(c));
    EXPECT_EQ(config_to_json(config_from_json(json::object())), config_to_json(RunConfig{}));
}

TEST(Config, StrictKeysAndValues) {
    EXPECT_THROW(config_from_text(R"({"params": {"ee": 1}})"), config_error);
    EXPECT_THROW(config_from_text(R"({"bogus": 1})"), config_error);
    EXPECT_THROW(config_from_text(R"({"model": "quantum"})"), config_error);
    EXPECT_THROW(config_from_text(R"({"params": {"hbar": -1}})"), std::exception);
    EXPECT_THROW(config_from_text(R"({"workers": 0})"), config_error);
    EXPECT_THROW(config_from_text("{not json"), config_error);
    const RunConfig c = config_from_text(R"({"energy": null, "initial_state": {"A": 0.5, "pA": 0.1}})");
    ASSERT_TRUE(c.initial_state.has_value());
    EXPECT_EQ(c.initial_state->A, 0.5);
    EXPECT_THROW(config_from_text(R"({"initial_state": {"A": 0.5}})"), config_error);
}

TEST(Density, IntegratesToOneAndStartsGaussian) {
    const RunConfig c = small_exact_config();
    const ExactRun r = run_exact(c, exact_seed_state(c), 0.5, sample_interval(c), c.density.times);
    ASSERT_EQ(r.marginals.size(), 2u);
    const double hbar = c.params.hbar;
    for (const auto& [t, dens] : r.marginals) {
        double total = 0.0;
        for (double d : dens) total += d * r.grid.dA();
        EXPECT_NEAR(total, 1.0, 1e-8) << t;
    }
    const auto& d0 = r.marginals.front().second;
    const double var = hbar * r.init.D0;
    double worst = 0.0;
    for (std::size_t i = 0; i < d0.size(); ++i) {
        const double a = r.grid.A(i) - r.init.A0;
        const double g = std::exp(-a * a / (2.0 * var)) / std::sqrt(2.0 * std::numbers::pi * var);
        worst = std::max(worst, std::abs(d0[i] - g));
    }
    EXPECT_LT(worst, 1e-8);
}

TEST(Density, CommandWritesDumps) {
    const CommandOutput out = cmd_density(small_exact_config());
    EXPECT_EQ(out.code, ExitCode::Ok);
    ASSERT_TRUE(out.files.count("density_t0.csv"));
    ASSERT_TRUE(out.files.count("density_t0.5.csv"));
    const CsvTable t = parse_csv(out.files.at("density_t0.5.csv"));
    EXPECT_EQ(t.rows.size(), 64u);
    const json j = json::parse(out.files.at("density.json"));
    EXPECT_EQ(j["dumps"].size(), 2u);
    EXPECT_NEAR(j["dumps"][1]["integral"].get<double>(), 1.0, 1e-8);
    RunConfig bad = small_exact_config();
    bad.model = ModelSelection::Hartree;
    EXPECT_THROW(cmd_density(bad), config_error);
}

TEST(Compare, SeriesShareOneTimeGrid) {
    RunConfig c = small_exact_config();
    c.model = ModelSelection::All;
    c.compare.t_max = 2.0;
    c.exact.on_box_escape = EscapePolicy::Record;
    const CompareResult r = run_compare(c);
    ASSERT_EQ(r.series.size(), 3u);
    const std::size_t n = r.series.at("exact").records.size();
    EXPECT_EQ(n, 21u);
    for (const auto& [name, s] : r.series) {
        ASSERT_EQ(s.records.size(), n) << name;
        EXPECT_NEAR(s.records.back().t, 2.0, 1e-12);
    }
    // All three start from one Gaussian.
    EXPECT_NEAR(r.series.at("exact").records[0].mean_A, r.series.at("hartree").records[0].mean_A, 1e-10);
    EXPECT_NEAR(r.series.at("exact").records[0].var_x, r.series.at("large_n").records[0].var_x, 1e-10);
    ASSERT_EQ(r.reports.size(), 3u);
    EXPECT_EQ(r.reports[0].observable, "mean_A");
    EXPECT_FALSE(r.reports[2].t_break_exact.count("large_n"));
}

TEST(Sensitivity, ExactPairStartsApart) {
    RunConfig c = small_exact_config();
    c.sensitivity.offset = 1e-3;
    const ExactPair pair = run_exact_pair(c, 1.0);
    ASSERT_EQ(pair.times.size(), 11u);
    EXPECT_EQ(pair.ref.grid.L_A, pair.pert.grid.L_A);
    EXPECT_NEAR(pair.pert.init.G0 - pair.ref.init.G0, 1e-3, 1e-12);
    EXPECT_GT(pair.max_difference(), 0.0);
    c.sensitivity.component = OffsetComponent::pA;
    EXPECT_THROW(run_exact_pair(c, 1.0), config_error);
}
