// Run configuration for the experiment drivers and its JSON form.
//
// A configuration document is merged key by key over the defaults; unknown
// keys are rejected so that every constant in a run is accounted for.
#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "chaos.hpp"
#include "integrators.hpp"
#include "model.hpp"
#include "schrodinger.hpp"

namespace sqchaos {

using json = nlohmann::json;

class config_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class ModelSelection { LargeN, Hartree, Replica, Exact, All };

inline const char* to_string(ModelSelection m) {
    switch (m) {
    case ModelSelection::LargeN: return "large_n";
    case ModelSelection::Hartree: return "hartree";
    case ModelSelection::Replica: return "replica";
    case ModelSelection::Exact: return "exact";
    case ModelSelection::All: return "all";
    }
    return "?";
}

struct ExactConfig {
    Scheme scheme = Scheme::Composition4;
    double dt = 1e-3;
    std::size_t n_A = 256;
    std::size_t n_x = 256;
    std::optional<double> L_A; ///< default: max(16, 4 max|A| of the matching Hartree run)
    std::optional<double> L_x; ///< default: 12 sqrt(hbar G0)
    double edge_tolerance = 1e-8;
    EscapePolicy on_box_escape = EscapePolicy::Abort;
};

struct LyapunovConfig {
    double renorm_interval = 0.5;
    double threshold = 0.02;
};

struct PoincareConfig {
    SectionPlane plane = SectionPlane::A_pA;
    std::size_t n_traj = 256;
};

struct ScanConfig {
    std::vector<double> e_values{0.3, 0.5, 0.7, 0.9, 1.1, 1.3, 1.5};
    std::vector<double> E_values{0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0};
    std::size_t n_ic = 10;
    double dt = 1e-2;
    double t_max = 1000.0;
};

struct CompareConfig {
    double threshold = 0.1;
    double t_max = 40.0;
};

struct SensitivityConfig {
    OffsetComponent component = OffsetComponent::G;
    double offset = 1e-4;
    double t_max = 40.0;
    bool include_exact = false;
};

struct DensityConfig {
    std::vector<double> times{0.0, 40.0};
};

struct RunConfig {
    ModelSelection model = ModelSelection::Hartree;
    ModelParams params;
    std::optional<double> energy = 5.0;
    std::optional<MeanFieldState> initial_state;
    InitialConditionConvention convention;
    IntegratorSpec integrator{Scheme::Composition4, 1e-3, 100.0, 10};
    ExactConfig exact;
    LyapunovConfig lyapunov;
    PoincareConfig poincare;
    ScanConfig scan;
    CompareConfig compare;
    SensitivityConfig sensitivity;
    DensityConfig density;
    std::string out_dir = "out";
    std::uint64_t seed = 1;
    int workers = 1;

    void validate() const {
        params.validate();
        convention.validate();
        integrator.validate();
        if (energy.has_value() == initial_state.has_value())
            throw config_error("config: exactly one of 'energy' and 'initial_state' must be set");
        if (energy && !std::isfinite(*energy)) throw config_error("config: energy must be finite");
        if (initial_state) validate_state(*initial_state);
        if (!(exact.dt > 0.0)) throw config_error("config: exact.dt must be > 0");
        if (!(exact.edge_tolerance >= 0.0)) throw config_error("config: exact.edge_tolerance must be >= 0");
        if (exact.L_A && !(*exact.L_A > 0.0)) throw config_error("config: exact.L_A must be > 0");
        if (exact.L_x && !(*exact.L_x > 0.0)) throw config_error("config: exact.L_x must be > 0");
        Grid2D g;
        g.n_A = exact.n_A;
        g.n_x = exact.n_x;
        try {
            g.validate();
        } catch (const std::domain_error& e) {
            throw config_error(std::string("config: exact grid: ") + e.what());
        }
        if (!(lyapunov.renorm_interval > 0.0)) throw config_error("config: lyapunov.renorm_interval must be > 0");
        if (!(lyapunov.threshold >= 0.0)) throw config_error("config: lyapunov.threshold must be >= 0");
        if (poincare.n_traj < 1) throw config_error("config: poincare.n_traj must be >= 1");
        if (scan.e_values.empty() || scan.E_values.empty()) throw config_error("config: scan ranges must be nonempty");
        if (scan.n_ic < 1) throw config_error("config: scan.n_ic must be >= 1");
        if (!(scan.dt > 0.0) || !(scan.t_max >= scan.dt)) throw config_error("config: scan.dt/t_max invalid");
        if (!(compare.threshold >= 0.0)) throw config_error("config: compare.threshold must be >= 0");
        if (!(compare.t_max > 0.0)) throw config_error("config: compare.t_max must be > 0");
        if (!(sensitivity.t_max > 0.0)) throw config_error("config: sensitivity.t_max must be > 0");
        if (density.times.empty()) throw config_error("config: density.times must be nonempty");
        for (double t : density.times)
            if (!(t >= 0.0)) throw config_error("config: density.times must be >= 0");
        if (workers < 1) throw config_error("config: workers must be >= 1");
    }
};

// ---------------------------------------------------------------------------
// Enum spellings

namespace detail {

template <class E>
struct EnumName {
    E value;
    const char* name;
};

inline constexpr EnumName<ModelSelection> model_names[] = {{ModelSelection::LargeN, "large_n"},
                                                           {ModelSelection::Hartree, "hartree"},
                                                           {ModelSelection::Replica, "replica"},
                                                           {ModelSelection::Exact, "exact"},
                                                           {ModelSelection::All, "all"}};
inline constexpr EnumName<Scheme> scheme_names[] = {
    {Scheme::Leapfrog2, "leapfrog2"}, {Scheme::Composition4, "composition4"}, {Scheme::RK4Generic, "rk4"}};
inline constexpr EnumName<SectionPlane> plane_names[] = {
    {SectionPlane::A_pA, "A_pA"}, {SectionPlane::G_PiG, "G_PiG"}, {SectionPlane::D_PiD, "D_PiD"}};
inline constexpr EnumName<OffsetComponent> offset_names[] = {
    {OffsetComponent::A, "A"},       {OffsetComponent::pA, "pA"},     {OffsetComponent::rhoG, "rho_G"},
    {OffsetComponent::pG, "p_G"},    {OffsetComponent::rhoD, "rho_D"}, {OffsetComponent::pD, "p_D"},
    {OffsetComponent::G, "G"},       {OffsetComponent::D, "D"}};
inline constexpr EnumName<EscapePolicy> escape_names[] = {{EscapePolicy::Abort, "abort"},
                                                          {EscapePolicy::Record, "record"}};
inline constexpr EnumName<InitialConditionConvention::DWidth> dwidth_names[] = {
    {InitialConditionConvention::DWidth::Fixed, "fixed"},
    {InitialConditionConvention::DWidth::Equilibrium, "equilibrium"}};

template <class E, std::size_t N>
const char* enum_name(const EnumName<E> (&table)[N], E v) {
    for (const auto& t : table)
        if (t.value == v) return t.name;
    return "?";
}

template <class E, std::size_t N>
E enum_parse(const EnumName<E> (&table)[N], const std::string& s, const char* what) {
    for (const auto& t : table)
        if (s == t.name) return t.value;
    std::string allowed;
    for (const auto& t : table) allowed += std::string(allowed.empty() ? "" : ", ") + t.name;
    throw config_error(std::string("config: unknown ") + what + " '" + s + "' (expected one of " + allowed + ")");
}

inline json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline json state_to_json(const MeanFieldState& s) {
    return json{{"A", s.A}, {"pA", s.pA}, {"rho_G", s.rhoG}, {"p_G", s.pG}, {"rho_D", s.rhoD}, {"p_D", s.pD}};
}

// Recursive overlay of user onto defaults; objects merge, everything else
// replaces. Keys absent from the defaults are errors.
inline void overlay(json& base, const json& user, const std::string& path) {
    for (auto it = user.begin(); it != user.end(); ++it) {
        const std::string key = path.empty() ? it.key() : path + "." + it.key();
        if (!base.contains(it.key())) throw config_error("config: unknown key '" + key + "'");
        json& slot = base[it.key()];
        if (slot.is_object() && it.value().is_object())
            overlay(slot, it.value(), key);
        else
            slot = it.value();
    }
}

template <class T>
T get_as(const json& j, const char* key, const char* path) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw config_error(std::string("config: bad value for '") + path + "." + key + "': " + e.what());
    }
}

} // namespace detail

inline json config_to_json(const RunConfig& c) {
    using namespace detail;
    json j;
    j["model"] = enum_name(model_names, c.model);
    j["params"] = {{"e", c.params.e}, {"m", c.params.m}, {"hbar", c.params.hbar}, {"n_replicas", c.params.n_replicas}};
    j["energy"] = optional_number(c.energy);
    j["initial_state"] = c.initial_state ? state_to_json(*c.initial_state) : json(nullptr);
    j["convention"] = {{"G0", c.convention.G0},
                       {"D0", c.convention.D0},
                       {"pA0", c.convention.pA0},
                       {"branch", c.convention.branch},
                       {"d_width", enum_name(dwidth_names, c.convention.d_width)}};
    j["integrator"] = {{"scheme", enum_name(scheme_names, c.integrator.scheme)},
                       {"dt", c.integrator.dt},
                       {"t_max", c.integrator.t_max},
                       {"sample_every", c.integrator.sample_every}};
    j["exact"] = {{"scheme", enum_name(scheme_names, c.exact.scheme)},
                  {"dt", c.exact.dt},
                  {"n_A", c.exact.n_A},
                  {"n_x", c.exact.n_x},
                  {"L_A", optional_number(c.exact.L_A)},
                  {"L_x", optional_number(c.exact.L_x)},
                  {"edge_tolerance", c.exact.edge_tolerance},
                  {"on_box_escape", enum_name(escape_names, c.exact.on_box_escape)}};
    j["lyapunov"] = {{"renorm_interval", c.lyapunov.renorm_interval}, {"threshold", c.lyapunov.threshold}};
    j["poincare"] = {{"plane", enum_name(plane_names, c.poincare.plane)}, {"n_traj", c.poincare.n_traj}};
    j["scan"] = {{"e_values", c.scan.e_values},
                 {"E_values", c.scan.E_values},
                 {"n_ic", c.scan.n_ic},
                 {"dt", c.scan.dt},
                 {"t_max", c.scan.t_max}};
    j["compare"] = {{"threshold", c.compare.threshold}, {"t_max", c.compare.t_max}};
    j["sensitivity"] = {{"component", enum_name(offset_names, c.sensitivity.component)},
                        {"offset", c.sensitivity.offset},
                        {"t_max", c.sensitivity.t_max},
                        {"include_exact", c.sensitivity.include_exact}};
    j["density"] = {{"times", c.density.times}};
    j["outputs"] = {{"dir", c.out_dir}};
    j["seed"] = c.seed;
    j["workers"] = c.workers;
    return j;
}

inline RunConfig config_from_json(const json& user) {
    using namespace detail;
    if (!user.is_object()) throw config_error("config: document must be a JSON object");
    json j = config_to_json(RunConfig{});
    overlay(j, user, "");

    RunConfig c;
    c.model = enum_parse(model_names, get_as<std::string>(j, "model", ""), "model");
    const json& pj = j["params"];
    c.params.e = get_as<double>(pj, "e", "params");
    c.params.m = get_as<double>(pj, "m", "params");
    c.params.hbar = get_as<double>(pj, "hbar", "params");
    c.params.n_replicas = get_as<int>(pj, "n_replicas", "params");

    if (!j["energy"].is_null()) c.energy = get_as<double>(j, "energy", "");
    else c.energy.reset();
    if (!j["initial_state"].is_null()) {
        const json& s = j["initial_state"];
        if (!s.is_object()) throw config_error("config: initial_state must be an object or null");
        for (auto it = s.begin(); it != s.end(); ++it) {
            static const char* keys[] = {"A", "pA", "rho_G", "p_G", "rho_D", "p_D"};
            bool ok = false;
            for (const char* k : keys) ok = ok || it.key() == k;
            if (!ok) throw config_error("config: unknown key 'initial_state." + it.key() + "'");
        }
        MeanFieldState st;
        st.kind = ModelKind::Hartree;
        st.A = s.value("A", 0.0);
        st.pA = s.value("pA", 0.0);
        st.rhoG = s.value("rho_G", std::sqrt(0.5));
        st.pG = s.value("p_G", 0.0);
        st.rhoD = s.value("rho_D", std::sqrt(0.5));
        st.pD = s.value("p_D", 0.0);
        c.initial_state = st;
    }

    const json& cj = j["convention"];
    c.convention.G0 = get_as<double>(cj, "G0", "convention");
    c.convention.D0 = get_as<double>(cj, "D0", "convention");
    c.convention.pA0 = get_as<double>(cj, "pA0", "convention");
    c.convention.branch = get_as<int>(cj, "branch", "convention");
    c.convention.d_width = enum_parse(dwidth_names, get_as<std::string>(cj, "d_width", "convention"), "d_width");

    const json& ij = j["integrator"];
    c.integrator.scheme = enum_parse(scheme_names, get_as<std::string>(ij, "scheme", "integrator"), "scheme");
    c.integrator.dt = get_as<double>(ij, "dt", "integrator");
    c.integrator.t_max = get_as<double>(ij, "t_max", "integrator");
    c.integrator.sample_every = get_as<int>(ij, "sample_every", "integrator");

    const json& ej = j["exact"];
    c.exact.scheme = enum_parse(scheme_names, get_as<std::string>(ej, "scheme", "exact"), "scheme");
    c.exact.dt = get_as<double>(ej, "dt", "exact");
    c.exact.n_A = get_as<std::size_t>(ej, "n_A", "exact");
    c.exact.n_x = get_as<std::size_t>(ej, "n_x", "exact");
    if (!ej["L_A"].is_null()) c.exact.L_A = get_as<double>(ej, "L_A", "exact");
    if (!ej["L_x"].is_null()) c.exact.L_x = get_as<double>(ej, "L_x", "exact");
    c.exact.edge_tolerance = get_as<double>(ej, "edge_tolerance", "exact");
    c.exact.on_box_escape =
        enum_parse(escape_names, get_as<std::string>(ej, "on_box_escape", "exact"), "on_box_escape");

    const json& lj = j["lyapunov"];
    c.lyapunov.renorm_interval = get_as<double>(lj, "renorm_interval", "lyapunov");
    c.lyapunov.threshold = get_as<double>(lj, "threshold", "lyapunov");

    const json& poj = j["poincare"];
    c.poincare.plane = enum_parse(plane_names, get_as<std::string>(poj, "plane", "poincare"), "plane");
    c.poincare.n_traj = get_as<std::size_t>(poj, "n_traj", "poincare");

    const json& sj = j["scan"];
    c.scan.e_values = get_as<std::vector<double>>(sj, "e_values", "scan");
    c.scan.E_values = get_as<std::vector<double>>(sj, "E_values", "scan");
    c.scan.n_ic = get_as<std::size_t>(sj, "n_ic", "scan");
    c.scan.dt = get_as<double>(sj, "dt", "scan");
    c.scan.t_max = get_as<double>(sj, "t_max", "scan");

    const json& coj = j["compare"];
    c.compare.threshold = get_as<double>(coj, "threshold", "compare");
    c.compare.t_max = get_as<double>(coj, "t_max", "compare");

    const json& sej = j["sensitivity"];
    c.sensitivity.component =
        enum_parse(offset_names, get_as<std::string>(sej, "component", "sensitivity"), "offset component");
    c.sensitivity.offset = get_as<double>(sej, "offset", "sensitivity");
    c.sensitivity.t_max = get_as<double>(sej, "t_max", "sensitivity");
    c.sensitivity.include_exact = get_as<bool>(sej, "include_exact", "sensitivity");

    c.density.times = get_as<std::vector<double>>(j["density"], "times", "density");
    c.out_dir = get_as<std::string>(j["outputs"], "dir", "outputs");
    c.seed = get_as<std::uint64_t>(j, "seed", "");
    c.workers = get_as<int>(j, "workers", "");
    c.validate();
    return c;
}

inline RunConfig config_from_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw config_error(std::string("config: invalid JSON: ") + e.what());
    }
    return config_from_json(j);
}

} // namespace sqchaos
