// Experiment drivers behind the command-line tool. Every driver returns its
// output files in memory (name -> bytes) so callers decide where they go and
// tests can compare runs byte for byte.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "chaos.hpp"
#include "config.hpp"
#include "csv.hpp"
#include "integrators.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "schrodinger.hpp"

namespace sqchaos {

// ---------------------------------------------------------------------------
// Break times

/// Root mean square of a series.
inline double rms(const std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("rms: empty series");
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s / static_cast<double>(v.size()));
}

namespace detail {

inline void require_aligned(const std::vector<double>& ta, const std::vector<double>& tb, std::size_t na,
                            std::size_t nb) {
    if (ta.size() != na || tb.size() != nb) throw std::invalid_argument("break_time: times and values differ in length");
    const std::size_t n = std::min(ta.size(), tb.size());
    for (std::size_t i = 0; i < n; ++i)
        if (std::abs(ta[i] - tb[i]) > 1e-9 * std::max(1.0, std::abs(ta[i])))
            throw std::invalid_argument("break_time: time grids are not aligned");
}

} // namespace detail

/// First shared time where |a - b| exceeds tolerance. The comparison runs over
/// the common prefix of the two series.
inline std::optional<double> break_time_absolute(const std::vector<double>& times_a, const std::vector<double>& a,
                                                 const std::vector<double>& times_b, const std::vector<double>& b,
                                                 double tolerance) {
    detail::require_aligned(times_a, times_b, a.size(), b.size());
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i)
        if (std::abs(a[i] - b[i]) > tolerance) return times_b[i];
    return std::nullopt;
}

/// First time where |a - b| > threshold * RMS(b), with b the reference series.
inline std::optional<double> break_time(const std::vector<double>& times_a, const std::vector<double>& a,
                                        const std::vector<double>& times_b, const std::vector<double>& b,
                                        double threshold = 0.10) {
    if (!(threshold >= 0.0)) throw std::domain_error("break_time: threshold must be >= 0");
    detail::require_aligned(times_a, times_b, a.size(), b.size());
    return break_time_absolute(times_a, a, times_b, b, threshold * rms(b));
}

struct BreakReport {
    std::string observable;
    std::map<std::string, std::optional<double>> t_break_exact; ///< keyed by approximation
    std::optional<double> t_break_mutual;
    double threshold = 0.10;
    double rms_ref = 0.0;
};

// ---------------------------------------------------------------------------
// Series helpers

/// Expectation values implied by a mean-field trajectory, in the exact
/// solver's record layout (variances are hbar G and hbar D).
inline ObservableSeries mean_field_observables(const Trajectory& tr, const ModelParams& p) {
    ObservableSeries out;
    out.records.reserve(tr.size());
    for (std::size_t i = 0; i < tr.size(); ++i) {
        const MeanFieldState& s = tr.states[i];
        ObservableRecord r;
        r.t = tr.times[i];
        r.mean_A = s.A;
        r.mean_pA = s.pA;
        r.var_A = s.has_d_sector() ? p.hbar * s.D() : 0.0;
        r.mean_x = 0.0;
        r.var_x = p.hbar * s.G();
        r.norm = 1.0;
        r.energy = tr.energies[i];
        out.records.push_back(r);
    }
    if (tr.aborted) {
        out.aborted = tr.aborted;
        out.abort_reason = tr.abort_reason;
    }
    return out;
}

inline std::vector<double> column(const ObservableSeries& s, double ObservableRecord::*field) {
    std::vector<double> v;
    v.reserve(s.records.size());
    for (const auto& r : s.records) v.push_back(r.*field);
    return v;
}

inline std::string observables_csv(const ObservableSeries& s) {
    CsvWriter w({"t", "mean_A", "mean_pA", "var_A", "mean_x", "var_x", "norm", "energy"});
    for (const auto& r : s.records) w.row({r.t, r.mean_A, r.mean_pA, r.var_A, r.mean_x, r.var_x, r.norm, r.energy});
    return w.str();
}

inline std::string trajectory_csv(const Trajectory& tr, const ModelParams& p) {
    const bool d = !tr.states.empty() && tr.states.front().has_d_sector();
    std::vector<std::string> head{"t", "A", "pA", "rho_G", "p_G"};
    if (d) head.insert(head.end(), {"rho_D", "p_D"});
    head.insert(head.end(), {"G", "Pi_G"});
    if (d) head.insert(head.end(), {"D", "Pi_D"});
    head.push_back("energy");
    CsvWriter w(head);
    for (std::size_t i = 0; i < tr.size(); ++i) {
        const MeanFieldState& s = tr.states[i];
        const WidthView v = to_width_view(s, p.hbar);
        std::vector<double> row{tr.times[i], s.A, s.pA, s.rhoG, s.pG};
        if (d) row.insert(row.end(), {s.rhoD, s.pD});
        row.insert(row.end(), {v.G, v.Pi_G});
        if (d) row.insert(row.end(), {v.D, v.Pi_D});
        row.push_back(tr.energies[i]);
        w.row(row);
    }
    return w.str();
}

// ---------------------------------------------------------------------------
// Command plumbing

enum class ExitCode : int { Ok = 0, Usage = 1, Infeasible = 2, Singularity = 3, BoxEscape = 4 };

struct CommandOutput {
    std::map<std::string, std::string> files;
    ExitCode code = ExitCode::Ok;
    std::vector<std::string> messages;

    void flag(ExitCode c, const std::string& msg) {
        if (code == ExitCode::Ok || static_cast<int>(c) < static_cast<int>(code)) code = c;
        messages.push_back(msg);
    }
};

inline std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

inline std::vector<ModelKind> mean_field_models(const RunConfig& c) {
    switch (c.model) {
    case ModelSelection::LargeN: return {ModelKind::LargeN};
    case ModelSelection::Hartree: return {ModelKind::Hartree};
    case ModelSelection::Replica: return {ModelKind::ReplicaFamily};
    case ModelSelection::Exact: return {};
    case ModelSelection::All: return {ModelKind::LargeN, ModelKind::Hartree};
    }
    return {};
}

inline bool wants_exact(const RunConfig& c) {
    return c.model == ModelSelection::Exact || c.model == ModelSelection::All;
}

/// Configuration echo for metadata. Worker count and output directory are
/// left out so that metadata does not depend on them.
inline json config_echo(const RunConfig& c) {
    json j = config_to_json(c);
    j.erase("workers");
    j.erase("outputs");
    return j;
}

/// Initial state of a mean-field model under the run configuration.
inline MeanFieldState initial_state_for(const RunConfig& c, ModelKind kind) {
    if (c.initial_state) {
        MeanFieldState s = *c.initial_state;
        s.kind = kind;
        if (kind == ModelKind::LargeN) {
            s.rhoD = 0.0;
            s.pD = 0.0;
        }
        validate_state(s);
        return s;
    }
    return initial_condition_from_energy(*c.energy, c.convention, c.params, kind);
}

/// Large-N state carrying the same Gaussian means and G width as a Hartree
/// state, so both approximations start from one trial wave function.
inline MeanFieldState large_n_projection(const MeanFieldState& hartree) {
    MeanFieldState s = hartree;
    s.kind = ModelKind::LargeN;
    s.rhoD = 0.0;
    s.pD = 0.0;
    return s;
}

inline std::size_t sample_stride(double interval, double dt, const char* who) {
    const double ratio = interval / dt;
    const auto k = static_cast<std::size_t>(std::llround(ratio));
    if (k < 1 || std::abs(ratio - static_cast<double>(k)) > 1e-9 * ratio)
        throw config_error(std::string(who) + ": sample interval must be a whole number of exact steps");
    return k;
}

struct ExactRun {
    Grid2D grid;
    GaussianInitParams init;
    ObservableSeries series;
    std::vector<std::pair<double, std::vector<double>>> marginals;
    std::optional<WaveFunction2D> final_state;
};

/// Box for an exact run: L_A = max(16, 4 max|A|) over the matching Hartree
/// trajectory, L_x = 12 sqrt(hbar G0), unless set in the configuration.
inline Grid2D exact_grid(const RunConfig& c, const MeanFieldState& hartree0, double horizon) {
    Grid2D g;
    g.n_A = c.exact.n_A;
    g.n_x = c.exact.n_x;
    if (c.exact.L_A) {
        g.L_A = *c.exact.L_A;
    } else {
        IntegratorSpec sp{Scheme::Composition4, c.integrator.dt, std::max(horizon, c.integrator.dt), 1};
        const Trajectory tr = integrate(hartree0, c.params, sp);
        double amax = 0.0;
        for (const auto& s : tr.states) amax = std::max(amax, std::abs(s.A));
        g.L_A = std::max(16.0, 4.0 * amax);
    }
    g.L_x = c.exact.L_x ? *c.exact.L_x : 12.0 * std::sqrt(c.params.hbar * hartree0.G());
    return g;
}

/// Evolves the Gaussian matching hartree0 to the horizon, recording every
/// sample_interval and keeping A-marginals at the requested times.
inline ExactRun run_exact(const RunConfig& c, const MeanFieldState& hartree0, double horizon, double sample_interval,
                          const std::vector<double>& marginal_times = {}, const std::optional<Grid2D>& grid = {}) {
    ExactRun run;
    run.grid = grid ? *grid : exact_grid(c, hartree0, horizon);
    run.init = gaussian_from_state(hartree0, c.params.hbar);
    WaveFunction2D wf = gaussian_init(run.grid, run.init, c.params);
    SplitOperator op(run.grid, c.params);

    const std::size_t stride = sample_stride(sample_interval, c.exact.dt, "exact run");
    const auto total = static_cast<std::size_t>(std::llround(horizon / c.exact.dt));
    std::vector<std::size_t> marks;
    for (double t : marginal_times) marks.push_back(static_cast<std::size_t>(std::llround(t / c.exact.dt)));
    std::vector<std::size_t> stops = marks;
    for (std::size_t k = 0; k <= total; k += stride) stops.push_back(k);
    std::sort(stops.begin(), stops.end());
    stops.erase(std::unique(stops.begin(), stops.end()), stops.end());

    EvolveOptions opt;
    opt.edge_tolerance = c.exact.edge_tolerance;
    opt.on_escape = c.exact.on_box_escape;
    ObservableSeries& out = run.series;
    std::size_t k = 0;
    for (std::size_t stop : stops) {
        if (stop > std::max(total, marks.empty() ? 0 : *std::max_element(marks.begin(), marks.end()))) break;
        op.advance(wf, c.exact.dt, c.exact.scheme, stop - k);
        k = stop;
        wf.t = static_cast<double>(k) * c.exact.dt;
        const double pe = op.edge_probability(wf, opt.edge_cells);
        out.max_edge_probability = std::max(out.max_edge_probability, pe);
        if (pe > opt.edge_tolerance && !out.escape_time) {
            out.escape_time = wf.t;
            std::ostringstream os;
            os << "box escape: probability " << pe << " within " << opt.edge_cells
               << " cells of the boundary at t = " << wf.t;
            out.abort_reason = os.str();
        }
        if (out.escape_time && opt.on_escape == EscapePolicy::Abort) {
            out.aborted = out.escape_time;
            break;
        }
        if (k % stride == 0 && k <= total) out.records.push_back(op.observe(wf));
        if (std::find(marks.begin(), marks.end(), k) != marks.end()) run.marginals.emplace_back(wf.t, a_marginal(wf));
    }
    run.final_state = std::move(wf);
    return run;
}

inline json exact_run_json(const ExactRun& r) {
    json j;
    j["grid"] = {{"n_A", r.grid.n_A}, {"n_x", r.grid.n_x}, {"L_A", r.grid.L_A}, {"L_x", r.grid.L_x}};
    j["initial_gaussian"] = {{"A0", r.init.A0}, {"pA0", r.init.pA0}, {"D0", r.init.D0},
                             {"G0", r.init.G0}, {"PiD0", r.init.PiD0}, {"PiG0", r.init.PiG0}};
    j["samples"] = r.series.records.size();
    j["aborted"] = detail::optional_number(r.series.aborted);
    j["escape_time"] = detail::optional_number(r.series.escape_time);
    j["max_edge_probability"] = r.series.max_edge_probability;
    j["reason"] = r.series.abort_reason;
    return j;
}

inline void note_exact(CommandOutput& out, const ExactRun& r, const std::string& label) {
    if (r.series.aborted) out.flag(ExitCode::BoxEscape, label + ": " + r.series.abort_reason);
    else if (r.series.escape_time) out.messages.push_back(label + ": " + r.series.abort_reason + " (recorded)");
}

inline double sample_interval(const RunConfig& c) { return c.integrator.dt * c.integrator.sample_every; }

/// Hartree state used to seed exact runs.
inline MeanFieldState exact_seed_state(const RunConfig& c) { return initial_state_for(c, ModelKind::Hartree); }

// ---------------------------------------------------------------------------
// simulate

inline CommandOutput cmd_simulate(const RunConfig& c) {
    c.validate();
    CommandOutput out;
    json meta;
    meta["command"] = "simulate";
    meta["config"] = config_echo(c);
    meta["runs"] = json::array();
    for (ModelKind kind : mean_field_models(c)) {
        const MeanFieldState s0 = initial_state_for(c, kind);
        const Trajectory tr = integrate(s0, c.params, c.integrator);
        out.files[std::string("trajectory_") + to_string(kind) + ".csv"] = trajectory_csv(tr, c.params);
        meta["runs"].push_back({{"model", to_string(kind)},
                                {"initial_state", detail::state_to_json(s0)},
                                {"energy", energy(s0, c.params)},
                                {"samples", tr.size()},
                                {"aborted", detail::optional_number(tr.aborted)},
                                {"reason", tr.abort_reason}});
        if (tr.aborted) out.flag(ExitCode::Singularity, std::string(to_string(kind)) + ": " + tr.abort_reason);
    }
    if (wants_exact(c)) {
        const ExactRun r = run_exact(c, exact_seed_state(c), c.integrator.t_max, sample_interval(c));
        out.files["observables_exact.csv"] = observables_csv(r.series);
        json j = exact_run_json(r);
        j["model"] = "exact";
        meta["runs"].push_back(j);
        note_exact(out, r, "exact");
    }
    out.files["simulate.json"] = dump_json(meta);
    return out;
}

// ---------------------------------------------------------------------------
// lyapunov

inline CommandOutput cmd_lyapunov(const RunConfig& c) {
    c.validate();
    if (c.model == ModelSelection::Exact) throw config_error("lyapunov: the exact model has no mean-field flow");
    CommandOutput out;
    for (ModelKind kind : mean_field_models(c)) {
        const MeanFieldState s0 = initial_state_for(c, kind);
        const LyapunovEstimate est = max_lyapunov(s0, c.params, c.integrator, c.lyapunov.renorm_interval);
        CsvWriter w({"t", "lambda_running"});
        for (std::size_t i = 0; i < est.times.size(); ++i) w.row({est.times[i], est.running_lambda[i]});
        const std::string base = std::string("lyapunov_") + to_string(kind);
        out.files[base + ".csv"] = w.str();
        json j;
        j["model"] = to_string(kind);
        j["config"] = config_echo(c);
        j["initial_state"] = detail::state_to_json(s0);
        j["t"] = est.times.empty() ? json(nullptr) : json(est.times.back());
        j["lambda_running"] = est.final;
        j["final"] = est.final;
        j["renorm_interval"] = est.renorm_interval;
        j["dt"] = est.dt;
        j["aborted"] = detail::optional_number(est.aborted);
        out.files[base + ".json"] = dump_json(j);
        if (est.aborted) out.flag(ExitCode::Singularity, base + ": singularity abort");
    }
    return out;
}

// ---------------------------------------------------------------------------
// poincare

/// Uniform double in [0, 1) from the top 53 bits of a 64-bit draw; the same on
/// every platform, unlike std::uniform_real_distribution.
inline double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

struct ShellDraw {
    double theta = 0.0;
    double phi = 0.0;
    int pg_sign = 1;
};

inline std::vector<ShellDraw> shell_draws(std::uint64_t seed, std::size_t n) {
    std::mt19937_64 rng(seed);
    std::vector<ShellDraw> out(n);
    for (auto& d : out) {
        d.theta = 0.5 * std::numbers::pi * unit_draw(rng);
        d.phi = 0.5 * std::numbers::pi * unit_draw(rng);
        d.pg_sign = unit_draw(rng) < 0.5 ? -1 : 1;
    }
    return out;
}

inline CommandOutput cmd_poincare(const RunConfig& c) {
    c.validate();
    if (c.model == ModelSelection::Exact) throw config_error("poincare: the exact model has no mean-field flow");
    if (!c.energy) throw config_error("poincare: trajectories are drawn on an energy shell; set 'energy'");
    CommandOutput out;
    const auto draws = shell_draws(c.seed, c.poincare.n_traj);
    for (ModelKind kind : mean_field_models(c)) {
        const SectionSurface surface = default_surface(c.poincare.plane);
        const auto per_traj = parallel_map<std::vector<SectionPoint>>(draws.size(), c.workers, [&](std::size_t i) {
            const MeanFieldState s0 =
                energy_shell_state(*c.energy, c.convention, c.params, kind, draws[i].theta, draws[i].phi, draws[i].pg_sign);
            return section_of_orbit(s0, c.params, c.integrator, c.poincare.plane, surface, i);
        });
        CsvWriter w({"traj_id", "t", "u", "v"});
        std::size_t count = 0;
        for (const auto& pts : per_traj)
            for (const auto& pt : pts) {
                w.row({std::to_string(pt.traj_id), format_double(pt.t), format_double(pt.u), format_double(pt.v)});
                ++count;
            }
        const std::string base = std::string("poincare_") + to_string(kind);
        out.files[base + ".csv"] = w.str();
        json j;
        j["model"] = to_string(kind);
        j["config"] = config_echo(c);
        j["plane"] = to_string(c.poincare.plane);
        j["surface"] = {{"coordinate", surface.coordinate}, {"level", surface.level}, {"direction", surface.direction}};
        j["n_trajectories"] = draws.size();
        j["n_points"] = count;
        if (count == 0) out.messages.push_back(base + ": no surface crossings found");
        out.files[base + ".json"] = dump_json(j);
    }
    return out;
}

// ---------------------------------------------------------------------------
// scan

struct ScanCell {
    double e = 0.0;
    double E = 0.0;
    bool infeasible = false;
    Regularity classification = Regularity::Regular;
    double lambda_max = 0.0;
    std::size_t n_chaotic = 0;
    std::vector<double> lambdas;
};

struct ScanResult {
    ModelKind kind = ModelKind::LargeN;
    double threshold = 0.02;
    std::size_t n_ic = 10;
    std::vector<ScanCell> cells; ///< row-major: e outer, E inner

    /// Lowest scanned E classified chaotic at the given e, if any.
    std::optional<double> chaotic_threshold(double e) const {
        for (const auto& cell : cells)
            if (cell.e == e && !cell.infeasible && cell.classification == Regularity::Chaotic) return cell.E;
        return std::nullopt;
    }
};

inline ScanResult run_scan(const RunConfig& c, ModelKind kind) {
    ScanResult res;
    res.kind = kind;
    res.threshold = c.lyapunov.threshold;
    res.n_ic = c.scan.n_ic;
    IntegratorSpec spec{Scheme::Composition4, c.scan.dt, c.scan.t_max, 1};
    spec.validate();

    struct Task {
        std::size_t cell;
        MeanFieldState s0;
        ModelParams p;
    };
    std::vector<Task> tasks;
    for (double e : c.scan.e_values)
        for (double E : c.scan.E_values) {
            ScanCell cell;
            cell.e = e;
            cell.E = E;
            ModelParams p = c.params;
            p.e = e;
            try {
                for (const auto& s : energy_shell_family(E, c.convention, p, kind, c.scan.n_ic))
                    tasks.push_back({res.cells.size(), s, p});
            } catch (const infeasible_energy_error&) {
                cell.infeasible = true;
            }
            res.cells.push_back(cell);
        }
    const auto lambdas = parallel_map<double>(tasks.size(), c.workers, [&](std::size_t i) {
        return max_lyapunov(tasks[i].s0, tasks[i].p, spec, c.lyapunov.renorm_interval).final;
    });
    for (std::size_t i = 0; i < tasks.size(); ++i) res.cells[tasks[i].cell].lambdas.push_back(lambdas[i]);
    for (auto& cell : res.cells) {
        if (cell.infeasible) {
            cell.lambda_max = std::nan("");
            continue;
        }
        cell.lambda_max = cell.lambdas.front();
        for (double l : cell.lambdas) {
            cell.lambda_max = std::max(cell.lambda_max, l);
            if (l > res.threshold) ++cell.n_chaotic;
        }
        cell.classification = cell.n_chaotic > 0 ? Regularity::Chaotic : Regularity::Regular;
    }
    return res;
}

inline std::string scan_csv(const ScanResult& r) {
    CsvWriter w({"e", "E", "classification", "lambda_max", "n_chaotic_ic"});
    for (const auto& cell : r.cells)
        w.row({format_double(cell.e), format_double(cell.E), cell.infeasible ? "infeasible" : to_string(cell.classification),
               format_double(cell.lambda_max), std::to_string(cell.n_chaotic)});
    return w.str();
}

inline std::string scan_lambdas_csv(const ScanResult& r) {
    CsvWriter w({"e", "E", "ic", "lambda"});
    for (const auto& cell : r.cells)
        for (std::size_t i = 0; i < cell.lambdas.size(); ++i)
            w.row({format_double(cell.e), format_double(cell.E), std::to_string(i), format_double(cell.lambdas[i])});
    return w.str();
}

/// Rebuilds a scan from its two CSV files.
inline ScanResult parse_scan(const std::string& cells_csv, const std::string& lambdas_csv, double threshold) {
    ScanResult r;
    r.threshold = threshold;
    const CsvTable t = parse_csv(cells_csv);
    const std::size_t ce = t.column("e"), cE = t.column("E"), cc = t.column("classification"),
                      cl = t.column("lambda_max"), cn = t.column("n_chaotic_ic");
    for (const auto& row : t.rows) {
        ScanCell cell;
        cell.e = parse_double(row[ce]);
        cell.E = parse_double(row[cE]);
        cell.infeasible = row[cc] == "infeasible";
        if (!cell.infeasible && row[cc] != "chaotic" && row[cc] != "regular")
            throw format_error("scan csv: unknown classification '" + row[cc] + "'");
        cell.classification = row[cc] == "chaotic" ? Regularity::Chaotic : Regularity::Regular;
        cell.lambda_max = parse_double(row[cl]);
        cell.n_chaotic = static_cast<std::size_t>(std::stoul(row[cn]));
        r.cells.push_back(cell);
    }
    const CsvTable l = parse_csv(lambdas_csv);
    const std::size_t le = l.column("e"), lE = l.column("E"), ll = l.column("lambda");
    for (const auto& row : l.rows) {
        const double e = parse_double(row[le]), E = parse_double(row[lE]);
        auto it = std::find_if(r.cells.begin(), r.cells.end(), [&](const ScanCell& c) { return c.e == e && c.E == E; });
        if (it == r.cells.end()) throw format_error("scan csv: lambda row for unknown cell");
        it->lambdas.push_back(parse_double(row[ll]));
    }
    if (!r.cells.empty()) {
        for (const auto& cell : r.cells)
            if (!cell.infeasible) {
                r.n_ic = cell.lambdas.size();
                break;
            }
    }
    return r;
}

inline CommandOutput cmd_scan(const RunConfig& c) {
    c.validate();
    if (c.model == ModelSelection::Exact) throw config_error("scan: the exact model has no mean-field flow");
    CommandOutput out;
    for (ModelKind kind : mean_field_models(c)) {
        const ScanResult r = run_scan(c, kind);
        const std::string base = std::string("scan_") + to_string(kind);
        out.files[base + ".csv"] = scan_csv(r);
        out.files[base + "_lambdas.csv"] = scan_lambdas_csv(r);
        json j;
        j["model"] = to_string(kind);
        j["config"] = config_echo(c);
        j["threshold"] = r.threshold;
        j["n_ic"] = r.n_ic;
        json th = json::object();
        for (double e : c.scan.e_values) th[format_double(e)] = detail::optional_number(r.chaotic_threshold(e));
        j["chaotic_threshold_E"] = th;
        out.files[base + ".json"] = dump_json(j);
    }
    return out;
}

// ---------------------------------------------------------------------------
// compare

struct CompareResult {
    std::map<std::string, ObservableSeries> series; ///< large_n, hartree, exact
    std::vector<BreakReport> reports;
    std::optional<ExactRun> exact;
    bool partial = false;
};

/// Break reports for mean_A, G (var_x) and D (var_A) against the exact
/// series; the mutual break is between large_n and hartree on the same
/// absolute tolerance.
inline std::vector<BreakReport> break_reports(const std::map<std::string, ObservableSeries>& series, double threshold) {
    struct Obs {
        const char* name;
        double ObservableRecord::*field;
    };
    const Obs observables[] = {{"mean_A", &ObservableRecord::mean_A}, {"G", &ObservableRecord::var_x},
                               {"D", &ObservableRecord::var_A}};
    auto times = [](const ObservableSeries& s) { return column(s, &ObservableRecord::t); };
    std::vector<BreakReport> out;
    const auto ex = series.find("exact");
    for (const auto& o : observables) {
        BreakReport rep;
        rep.observable = o.name;
        rep.threshold = threshold;
        const ObservableSeries* ref = ex != series.end() && !ex->second.records.empty() ? &ex->second : nullptr;
        if (!ref) {
            const auto h = series.find("hartree");
            if (h != series.end()) ref = &h->second;
        }
        if (!ref || ref->records.empty()) continue;
        rep.rms_ref = rms(column(*ref, o.field));
        const double tol = threshold * rep.rms_ref;
        for (const char* name : {"large_n", "hartree"}) {
            const auto it = series.find(name);
            if (it == series.end()) continue;
            if (o.field == &ObservableRecord::var_A && std::string(name) == "large_n") continue;
            if (ex != series.end() && !ex->second.records.empty())
                rep.t_break_exact[name] = break_time_absolute(times(it->second), column(it->second, o.field),
                                                              times(ex->second), column(ex->second, o.field), tol);
        }
        const auto ln = series.find("large_n"), ha = series.find("hartree");
        if (ln != series.end() && ha != series.end() && o.field != &ObservableRecord::var_A)
            rep.t_break_mutual = break_time_absolute(times(ln->second), column(ln->second, o.field), times(ha->second),
                                                     column(ha->second, o.field), tol);
        out.push_back(rep);
    }
    return out;
}

inline json break_reports_json(const std::vector<BreakReport>& reps) {
    json arr = json::array();
    for (const auto& r : reps) {
        json te = json::object();
        for (const auto& [k, v] : r.t_break_exact) te[k] = detail::optional_number(v);
        arr.push_back({{"observable", r.observable},
                       {"threshold", r.threshold},
                       {"rms_ref", r.rms_ref},
                       {"t_break_exact", te},
                       {"t_break_mutual", detail::optional_number(r.t_break_mutual)}});
    }
    return arr;
}

/// Runs large_n, hartree and exact from one Gaussian (the Hartree state of
/// the configuration; large_n drops its D sector) on a shared time grid.
inline CompareResult run_compare(const RunConfig& c, const std::optional<Grid2D>& grid = {}) {
    CompareResult res;
    const MeanFieldState h0 = exact_seed_state(c);
    IntegratorSpec spec = c.integrator;
    spec.t_max = c.compare.t_max;
    spec.validate();
    const Trajectory th = integrate(h0, c.params, spec);
    const Trajectory tl = integrate(large_n_projection(h0), c.params, spec);
    res.series["hartree"] = mean_field_observables(th, c.params);
    res.series["large_n"] = mean_field_observables(tl, c.params);
    res.exact = run_exact(c, h0, c.compare.t_max, sample_interval(c), {}, grid);
    res.series["exact"] = res.exact->series;
    res.partial = res.exact->series.aborted.has_value() || th.aborted.has_value() || tl.aborted.has_value();
    res.reports = break_reports(res.series, c.compare.threshold);
    return res;
}

inline CommandOutput cmd_compare(const RunConfig& c) {
    c.validate();
    CommandOutput out;
    const CompareResult r = run_compare(c);
    for (const auto& [name, s] : r.series) {
        out.files["compare_" + name + ".csv"] = observables_csv(s);
        if (name != "exact" && s.aborted) out.flag(ExitCode::Singularity, name + ": " + s.abort_reason);
    }
    note_exact(out, *r.exact, "exact");
    json j;
    j["command"] = "compare";
    j["config"] = config_echo(c);
    j["partial"] = r.partial;
    j["exact"] = exact_run_json(*r.exact);
    j["reports"] = break_reports_json(r.reports);
    out.files["break_report.json"] = dump_json(j);
    return out;
}

// ---------------------------------------------------------------------------
// sensitivity

struct ExactPair {
    std::vector<double> times;
    std::vector<double> mean_A_ref;
    std::vector<double> mean_A_pert;
    ExactRun ref;
    ExactRun pert;

    double max_difference() const {
        double m = 0.0;
        for (std::size_t i = 0; i < times.size(); ++i) m = std::max(m, std::abs(mean_A_ref[i] - mean_A_pert[i]));
        return m;
    }
};

/// Two exact runs whose initial Gaussians differ by the offset on one width
/// (G or D). Both share the reference run's box.
inline ExactPair run_exact_pair(const RunConfig& c, double horizon, const std::optional<Grid2D>& grid = {}) {
    const OffsetComponent comp = c.sensitivity.component;
    if (comp != OffsetComponent::G && comp != OffsetComponent::D)
        throw config_error("sensitivity: exact pairs support offsets on G or D only");
    const MeanFieldState h0 = exact_seed_state(c);
    const MeanFieldState h1 = apply_offset(h0, comp, c.sensitivity.offset);
    ExactPair pair;
    pair.ref = run_exact(c, h0, horizon, sample_interval(c), {}, grid);
    pair.pert = run_exact(c, h1, horizon, sample_interval(c), {}, pair.ref.grid);
    const std::size_t n = std::min(pair.ref.series.records.size(), pair.pert.series.records.size());
    for (std::size_t i = 0; i < n; ++i) {
        pair.times.push_back(pair.ref.series.records[i].t);
        pair.mean_A_ref.push_back(pair.ref.series.records[i].mean_A);
        pair.mean_A_pert.push_back(pair.pert.series.records[i].mean_A);
    }
    return pair;
}

inline CommandOutput cmd_sensitivity(const RunConfig& c) {
    c.validate();
    CommandOutput out;
    json j;
    j["command"] = "sensitivity";
    j["config"] = config_echo(c);
    j["runs"] = json::array();
    IntegratorSpec spec = c.integrator;
    spec.t_max = c.sensitivity.t_max;
    spec.validate();
    for (ModelKind kind : mean_field_models(c)) {
        const MeanFieldState s0 = initial_state_for(c, kind);
        const DivergenceSeries d = two_trajectory_divergence(s0, c.params, spec, c.sensitivity.component, c.sensitivity.offset);
        CsvWriter w({"t", "separation"});
        for (std::size_t i = 0; i < d.times.size(); ++i) w.row({d.times[i], d.separations[i]});
        out.files[std::string("sensitivity_") + to_string(kind) + ".csv"] = w.str();
        j["runs"].push_back({{"model", to_string(kind)},
                             {"initial_offset", d.initial_offset},
                             {"max_separation", d.separations.empty() ? 0.0 : *std::max_element(d.separations.begin(), d.separations.end())},
                             {"t_order_unity", detail::optional_number(d.crossing_time(1.0))},
                             {"aborted", detail::optional_number(d.aborted)}});
        if (d.aborted) out.flag(ExitCode::Singularity, std::string(to_string(kind)) + ": singularity abort");
    }
    if (wants_exact(c) || c.sensitivity.include_exact) {
        const ExactPair pair = run_exact_pair(c, c.sensitivity.t_max);
        CsvWriter w({"t", "mean_A_ref", "mean_A_pert", "abs_diff"});
        for (std::size_t i = 0; i < pair.times.size(); ++i)
            w.row({pair.times[i], pair.mean_A_ref[i], pair.mean_A_pert[i], std::abs(pair.mean_A_ref[i] - pair.mean_A_pert[i])});
        out.files["sensitivity_exact.csv"] = w.str();
        j["runs"].push_back({{"model", "exact"},
                             {"initial_offset", c.sensitivity.offset},
                             {"max_mean_A_difference", pair.max_difference()},
                             {"reference", exact_run_json(pair.ref)},
                             {"perturbed", exact_run_json(pair.pert)}});
        note_exact(out, pair.ref, "exact reference");
        note_exact(out, pair.pert, "exact perturbed");
    }
    out.files["sensitivity.json"] = dump_json(j);
    return out;
}

// ---------------------------------------------------------------------------
// density

inline std::string density_csv(const std::vector<double>& density, const Grid2D& g) {
    CsvWriter w({"A", "prob_density"});
    for (std::size_t i = 0; i < density.size(); ++i) w.row({g.A(i), density[i]});
    return w.str();
}

inline CommandOutput cmd_density(const RunConfig& c) {
    c.validate();
    if (c.model != ModelSelection::Exact && c.model != ModelSelection::All)
        throw config_error("density: select the exact model (--model exact)");
    CommandOutput out;
    std::vector<double> times = c.density.times;
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    const double horizon = times.back();
    const ExactRun r = run_exact(c, exact_seed_state(c), std::max(horizon, c.exact.dt), sample_interval(c), times);
    json j;
    j["command"] = "density";
    j["config"] = config_echo(c);
    j["exact"] = exact_run_json(r);
    j["dumps"] = json::array();
    for (const auto& [t, dens] : r.marginals) {
        const MarginalShape ms = marginal_shape(dens, r.grid);
        const std::string name = "density_t" + format_double(t) + ".csv";
        out.files[name] = density_csv(dens, r.grid);
        j["dumps"].push_back({{"t", t},
                              {"file", name},
                              {"integral", ms.integral},
                              {"mean", ms.mean},
                              {"variance", ms.variance},
                              {"excess_kurtosis", ms.excess_kurtosis},
                              {"l1_from_gaussian", ms.l1_from_gaussian}});
    }
    note_exact(out, r, "exact");
    out.files["density.json"] = dump_json(j);
    return out;
}

} // namespace sqchaos
