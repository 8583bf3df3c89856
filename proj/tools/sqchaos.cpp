// Command-line front end for the sqchaos experiment drivers.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include <sqchaos/experiments.hpp>

namespace fs = std::filesystem;
using namespace sqchaos;

namespace {

struct CommonFlags {
    std::string config_path;
    std::optional<std::string> model;
    std::optional<double> e;
    std::optional<double> energy;
    std::optional<double> dt;
    std::optional<double> t_max;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::optional<std::string> out;
};

void add_common(CLI::App* sub, CommonFlags& f) {
    sub->add_option("--config", f.config_path, "JSON configuration file");
    sub->add_option("--model", f.model, "large_n | hartree | replica | exact | all");
    sub->add_option("--e", f.e, "coupling constant e");
    sub->add_option("--energy", f.energy, "target energy E (replaces any explicit initial state)");
    sub->add_option("--dt", f.dt, "time step for mean-field, exact and scan runs");
    sub->add_option("--t-max", f.t_max, "horizon for every run of the command");
    sub->add_option("--seed", f.seed, "seed for randomized initial-condition families");
    sub->add_option("--workers", f.workers, "worker threads for scans and multi-trajectory runs");
    sub->add_option("--out", f.out, "output directory");
}

RunConfig load_config(const CommonFlags& f) {
    json doc = json::object();
    if (!f.config_path.empty()) {
        std::ifstream in(f.config_path);
        if (!in) throw config_error("cannot open config file " + f.config_path);
        std::stringstream ss;
        ss << in.rdbuf();
        try {
            doc = json::parse(ss.str());
        } catch (const json::parse_error& e) {
            throw config_error(std::string("config: invalid JSON: ") + e.what());
        }
    }
    if (f.model) doc["model"] = *f.model;
    if (f.e) doc["params"]["e"] = *f.e;
    if (f.energy) {
        doc["energy"] = *f.energy;
        doc["initial_state"] = nullptr;
    }
    if (f.dt) {
        doc["integrator"]["dt"] = *f.dt;
        doc["exact"]["dt"] = *f.dt;
        doc["scan"]["dt"] = *f.dt;
    }
    if (f.t_max) {
        doc["integrator"]["t_max"] = *f.t_max;
        doc["scan"]["t_max"] = *f.t_max;
        doc["compare"]["t_max"] = *f.t_max;
        doc["sensitivity"]["t_max"] = *f.t_max;
    }
    if (f.seed) doc["seed"] = *f.seed;
    if (f.workers) doc["workers"] = *f.workers;
    if (f.out) doc["outputs"]["dir"] = *f.out;
    return config_from_json(doc);
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(parse_double(item));
    if (out.empty()) throw config_error("empty value list '" + s + "'");
    return out;
}

int write_outputs(const CommandOutput& out, const RunConfig& c) {
    fs::create_directories(c.out_dir);
    for (const auto& [name, bytes] : out.files) {
        const fs::path path = fs::path(c.out_dir) / name;
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot write " + path.string());
        f << bytes;
        std::cout << path.string() << "\n";
    }
    for (const auto& m : out.messages) std::cerr << "warning: " << m << "\n";
    return static_cast<int>(out.code);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"sqchaos: Gaussian mean-field approximations, chaos diagnostics and exact quantum dynamics"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string plane;
    std::optional<std::size_t> n_traj;
    std::string e_values, E_values;
    std::optional<std::size_t> n_ic;
    std::string times;
    std::optional<double> offset;
    bool include_exact = false;

    auto* sim = app.add_subcommand("simulate", "integrate one configuration and write its trajectory");
    add_common(sim, flags);
    auto* lyap = app.add_subcommand("lyapunov", "running maximal Lyapunov exponent");
    add_common(lyap, flags);
    auto* poin = app.add_subcommand("poincare", "Poincare section of an energy-shell family");
    add_common(poin, flags);
    poin->add_option("--plane", plane, "A_pA | G_PiG | D_PiD");
    poin->add_option("--n-traj", n_traj, "number of trajectories");
    auto* scan = app.add_subcommand("scan", "(e, E) integrability scan");
    add_common(scan, flags);
    scan->add_option("--e-values", e_values, "comma-separated coupling values");
    scan->add_option("--E-values", E_values, "comma-separated energies");
    scan->add_option("--n-ic", n_ic, "initial conditions per cell");
    auto* cmp = app.add_subcommand("compare", "approximations against the exact solver with break times");
    add_common(cmp, flags);
    auto* sens = app.add_subcommand("sensitivity", "divergence of runs with slightly different widths");
    add_common(sens, flags);
    sens->add_option("--offset", offset, "initial offset");
    sens->add_flag("--include-exact", include_exact, "also run the exact pair");
    auto* dens = app.add_subcommand("density", "A-marginal probability density dumps of the exact state");
    add_common(dens, flags);
    dens->add_option("--times", times, "comma-separated dump times");
    auto* cfg = app.add_subcommand("config", "configuration utilities");
    auto* show = cfg->add_subcommand("show-defaults", "print the default configuration");
    cfg->require_subcommand(1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (show->parsed()) {
            std::cout << config_to_json(RunConfig{}).dump(2) << "\n";
            return 0;
        }
        RunConfig c = load_config(flags);
        if (!plane.empty()) {
            json doc = config_to_json(c);
            doc["poincare"]["plane"] = plane;
            c = config_from_json(doc);
        }
        if (n_traj) c.poincare.n_traj = *n_traj;
        if (!e_values.empty()) c.scan.e_values = parse_list(e_values);
        if (!E_values.empty()) c.scan.E_values = parse_list(E_values);
        if (n_ic) c.scan.n_ic = *n_ic;
        if (offset) c.sensitivity.offset = *offset;
        if (include_exact) c.sensitivity.include_exact = true;
        if (!times.empty()) c.density.times = parse_list(times);
        c.validate();

        CommandOutput out;
        if (sim->parsed()) out = cmd_simulate(c);
        else if (lyap->parsed()) out = cmd_lyapunov(c);
        else if (poin->parsed()) out = cmd_poincare(c);
        else if (scan->parsed()) out = cmd_scan(c);
        else if (cmp->parsed()) out = cmd_compare(c);
        else if (sens->parsed()) out = cmd_sensitivity(c);
        else if (dens->parsed()) out = cmd_density(c);
        return write_outputs(out, c);
    } catch (const infeasible_energy_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::Infeasible);
    } catch (const config_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::Usage);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::Usage);
    }
}
