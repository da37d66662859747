#pragma once

// Config-driven front end: parse an experiment document, run one command and
// write its artifacts. Exit status: 0 ok, 2 validation failure, 3 solver or
// I/O error, 4 config error.

#include "rsctl/costs.hpp"
#include "rsctl/csv.hpp"
#include "rsctl/digest.hpp"
#include "rsctl/hjbgrid.hpp"
#include "rsctl/model_json.hpp"
#include "rsctl/robustness.hpp"
#include "rsctl/version.hpp"

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace rsctl {

enum class Command { Validate, Riccati, Simulate, Cost, Hjb, Ergodic, Robustness, EpsCheck };

inline const char* command_name(Command c) {
    switch (c) {
        case Command::Validate: return "validate";
        case Command::Riccati: return "riccati";
        case Command::Simulate: return "simulate";
        case Command::Cost: return "cost";
        case Command::Hjb: return "hjb";
        case Command::Ergodic: return "ergodic";
        case Command::Robustness: return "robustness";
        case Command::EpsCheck: return "eps-check";
    }
    return "?";
}

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitSolver = 3;
inline constexpr int kExitConfig = 4;

struct ValidateBlock {
    double radius = 3.0;
    int per_axis = 21;
    std::optional<LyapunovPair> lyapunov;
};

struct PolicyBlock {
    std::string kind = "constant";  // constant | lq-feedback | grid-optimal
    Vector action;
    int steps = 1000;
    Criterion criterion = Criterion::Discounted;
    GridSweepOptions grid;
};

struct SimulateBlock {
    Vector x0;
    int i0 = 0;
    double horizon = 1.0;
    double dt = 1e-3;
    long paths = 1;
    bool exit = false;
    double t_cap = 100.0;
    PolicyBlock policy;
};

struct CostBlock {
    Criterion criterion = Criterion::Discounted;
    Vector x0;
    int i0 = 0;
    double dt = 1e-2;
    long paths = 1000;
    double horizon = 1.0;
    double eps_tail = 1e-4;
    double t_long = 100.0;
    double burn_in = 20.0;
    double t_cap = 100.0;
    PolicyBlock policy;
};

struct SolveBlock {
    Criterion criterion = Criterion::Discounted;
    GridSweepOptions grid;
    PerturbationSchedule schedule;
    bool lq = false;
    Vector x0;
    int i0 = 0;
    int steps = 1000;
    double eps = 0.05;
};

struct ExperimentConfig {
    Command command = Command::Validate;
    ModelSpec model;
    std::optional<std::uint64_t> seed;
    std::string output;
    std::string canonical;  // canonical serialization used for the digest
    std::string digest;
    ValidateBlock validate;
    int riccati_steps = 1000;
    SimulateBlock simulate;
    CostBlock cost;
    SolveBlock solve;  // hjb, ergodic, robustness, eps-check
};

namespace cli_detail {

using json_io::Object;

inline Criterion criterion_from(const std::string& s, const std::string& path) {
    if (s == "discounted") return Criterion::Discounted;
    if (s == "finite-horizon") return Criterion::FiniteHorizon;
    if (s == "exit") return Criterion::Exit;
    if (s == "ergodic") return Criterion::Ergodic;
    throw Error(ErrorCode::Config, "unknown criterion '" + s + "' at `" + path + "`");
}

inline Grid1D read_grid(Object o) {
    const double lo = json_io::to_double(o.need("x_min"), o.path("x_min"));
    const double hi = json_io::to_double(o.need("x_max"), o.path("x_max"));
    const long n = json_io::to_int(o.need("n_x"), o.path("n_x"));
    o.finish();
    require(n >= 11 && hi > lo, ErrorCode::Config, "grid needs x_max > x_min and n_x >= 11 at `" + o.path("n_x") + "`");
    return Grid1D(lo, hi, static_cast<int>(n));
}

/// Grid and solver settings shared by the grid-based blocks. The exit
/// criterion defaults its grid to the model's exit interval.
inline void read_grid_options(Object& o, const ModelSpec& model, Criterion c, GridSweepOptions& g) {
    if (const Json* v = o.get("grid")) {
        g.grid = read_grid(Object(*v, o.path("grid")));
    } else {
        require(c == Criterion::Exit && model.costs.domain.kind == ExitDomain::Kind::Interval, ErrorCode::Config,
                "missing field `" + o.path("grid") + "`");
        g.grid = Grid1D(model.costs.domain.lower, model.costs.domain.upper, 101);
    }
    if (const Json* v = o.get("n_t")) g.n_t = static_cast<int>(json_io::to_int(*v, o.path("n_t")));
    if (const Json* v = o.get("tol")) g.params.tol = json_io::to_double(*v, o.path("tol"));
    if (const Json* v = o.get("max_iter")) g.params.max_iter = static_cast<int>(json_io::to_int(*v, o.path("max_iter")));
    if (const Json* v = o.get("ladder")) g.ladder = json_io::to_doubles(*v, o.path("ladder"));
    require(g.params.tol > 0.0, ErrorCode::Config, "`" + o.path("tol") + "` must be positive");
    require(g.params.max_iter >= 1, ErrorCode::Config, "`" + o.path("max_iter") + "` must be >= 1");
    require(g.n_t >= 1, ErrorCode::Config, "`" + o.path("n_t") + "` must be >= 1");
}

inline int read_regime(Object& o, const std::string& key, const ModelSpec& m) {
    const long i = json_io::to_int(o.need(key), o.path(key));
    require(i >= 1 && i <= m.regime_count(), ErrorCode::Config, "`" + o.path(key) + "` must lie in 1..N");
    return static_cast<int>(i - 1);
}

inline Vector read_state(Object& o, const std::string& key, const ModelSpec& m) {
    Vector x = json_io::to_vector(o.need(key), o.path(key));
    require(x.size() == m.dim, ErrorCode::Config, "`" + o.path(key) + "` must have dim entries");
    return x;
}

inline PolicyBlock read_policy(Object o, const ModelSpec& m) {
    PolicyBlock p;
    p.kind = json_io::to_string(o.need("kind"), o.path("kind"));
    if (p.kind == "constant") {
        p.action = json_io::to_vector(o.need("action"), o.path("action"));
        require(p.action.size() == m.action_dim(), ErrorCode::Config, "`" + o.path("action") + "` has wrong length");
    } else if (p.kind == "lq-feedback") {
        if (const Json* v = o.get("steps")) p.steps = static_cast<int>(json_io::to_int(*v, o.path("steps")));
    } else if (p.kind == "grid-optimal") {
        p.criterion = criterion_from(json_io::to_string(o.need("criterion"), o.path("criterion")), o.path("criterion"));
        read_grid_options(o, m, p.criterion, p.grid);
    } else {
        throw Error(ErrorCode::Config, "unknown policy kind '" + p.kind + "' at `" + o.path("kind") + "`");
    }
    o.finish();
    return p;
}

inline PerturbationSchedule read_schedule(Object o) {
    using namespace json_io;
    PerturbationSchedule s;
    const std::string mode = to_string(o.need("mode"), o.path("mode"));
    if (mode == "coefficient") s.mode = PerturbationMode::Coefficient;
    else if (mode == "rates") s.mode = PerturbationMode::Rates;
    else if (mode == "cost") s.mode = PerturbationMode::Cost;
    else if (mode == "noise-approx") s.mode = PerturbationMode::NoiseApprox;
    else if (mode == "combined") s.mode = PerturbationMode::Combined;
    else throw Error(ErrorCode::Config, "unknown perturbation mode '" + mode + "' at `" + o.path("mode") + "`");
    const Json* mags = o.get("magnitudes");
    const Json* nmax = o.get("n_max");
    require(!(mags && nmax), ErrorCode::Config, "give either `" + o.path("magnitudes") + "` or `" + o.path("n_max") + "`");
    if (mags) s.magnitudes = to_doubles(*mags, o.path("magnitudes"));
    else s.magnitudes = PerturbationSchedule::dyadic(nmax ? static_cast<int>(to_int(*nmax, o.path("n_max"))) : 10);
    if (const Json* v = o.get("dA")) s.dA = to_matrices(*v, o.path("dA"));
    if (const Json* v = o.get("dB")) s.dB = to_matrices(*v, o.path("dB"));
    if (const Json* v = o.get("dC")) s.dC = to_matrices(*v, o.path("dC"));
    if (const Json* v = o.get("d_offset")) s.d_offset = to_vectors(*v, o.path("d_offset"));
    if (const Json* v = o.get("d_rates")) s.d_rates = to_matrix(*v, o.path("d_rates"));
    if (const Json* v = o.get("d_cost_offset")) s.d_cost_offset = to_doubles(*v, o.path("d_cost_offset"));
    if (const Json* v = o.get("d_cost_Q")) s.d_cost_Q = to_matrices(*v, o.path("d_cost_Q"));
    if (const Json* v = o.get("d_cost_R")) s.d_cost_R = to_matrices(*v, o.path("d_cost_R"));
    if (const Json* v = o.get("noise_drift")) s.noise_drift = to_vectors(*v, o.path("noise_drift"));
    if (const Json* v = o.get("noise_scale")) s.noise_scale = to_matrices(*v, o.path("noise_scale"));
    o.finish();
    try {
        s.check_magnitudes();
    } catch (const Error& e) {
        throw Error(ErrorCode::Config, std::string(e.what()) + " at `" + o.path("magnitudes") + "`");
    }
    return s;
}

inline bool stochastic(Command c) { return c == Command::Simulate || c == Command::Cost; }

}  // namespace cli_detail

/// Strict parse of an experiment document. Throws E_CONFIG naming the field.
inline ExperimentConfig parse_config(std::string_view bytes) {
    using namespace cli_detail;
    using namespace json_io;
    Json doc;
    try {
        doc = Json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::Config, std::string("malformed JSON: ") + e.what());
    }
    ExperimentConfig cfg;
    cfg.canonical = doc.dump();
    cfg.digest = sha256_hex(cfg.canonical);

    Object root(doc, "");
    const std::string cmd = to_string(root.need("command"), "command");
    const Command all[] = {Command::Validate, Command::Riccati,    Command::Simulate, Command::Cost,
                           Command::Hjb,      Command::Ergodic,    Command::Robustness, Command::EpsCheck};
    bool known = false;
    for (Command c : all)
        if (cmd == command_name(c)) {
            cfg.command = c;
            known = true;
        }
    require(known, ErrorCode::Config, "unknown command '" + cmd + "' at `command`");
    try {
        cfg.model = model_from_json(root.need("model"), "model");
    } catch (const Error& e) {
        if (e.code() == ErrorCode::Config) throw;
        throw Error(ErrorCode::Config, std::string(e.what()) + " (in `model`)");
    }
    if (const Json* v = root.get("seed")) cfg.seed = to_uint64(*v, "seed");
    if (const Json* v = root.get("output")) cfg.output = to_string(*v, "output");
    if (stochastic(cfg.command)) require(cfg.seed.has_value(), ErrorCode::Config, "missing field `seed`");

    const std::string block = command_name(cfg.command);
    const ModelSpec& m = cfg.model;
    switch (cfg.command) {
        case Command::Validate: {
            if (const Json* v = root.get(block)) {
                Object o(*v, block);
                if (const Json* w = o.get("radius")) cfg.validate.radius = to_double(*w, o.path("radius"));
                if (const Json* w = o.get("per_axis")) cfg.validate.per_axis = static_cast<int>(to_int(*w, o.path("per_axis")));
                if (const Json* w = o.get("lyapunov")) {
                    Object l(*w, o.path("lyapunov"));
                    LyapunovPair pair = LyapunovPair::standard(m.regime_count(), 1.0, 0.0);
                    if (const Json* x = l.get("kappa")) pair.kappa = to_double(*x, l.path("kappa"));
                    if (const Json* x = l.get("c0")) pair.c0 = to_double(*x, l.path("c0"));
                    if (const Json* x = l.get("level")) pair.level = to_doubles(*x, l.path("level"));
                    if (const Json* x = l.get("weight")) pair.weight = to_doubles(*x, l.path("weight"));
                    l.finish();
                    require(pair.level.size() == static_cast<std::size_t>(m.regime_count()) &&
                                pair.weight.size() == static_cast<std::size_t>(m.regime_count()),
                            ErrorCode::Config, "`" + l.path("level") + "` and weight need one entry per regime");
                    cfg.validate.lyapunov = pair;
                }
                o.finish();
                require(cfg.validate.radius > 0.0 && cfg.validate.per_axis >= 2, ErrorCode::Config,
                        "`validate.radius` must be positive and `validate.per_axis` >= 2");
            }
            break;
        }
        case Command::Riccati: {
            if (const Json* v = root.get(block)) {
                Object o(*v, block);
                if (const Json* w = o.get("steps")) cfg.riccati_steps = static_cast<int>(to_int(*w, o.path("steps")));
                o.finish();
            }
            break;
        }
        case Command::Simulate: {
            Object o(root.need(block), block);
            auto& s = cfg.simulate;
            s.x0 = read_state(o, "x0", m);
            s.i0 = read_regime(o, "i0", m);
            s.dt = to_double(o.need("dt"), o.path("dt"));
            if (const Json* v = o.get("paths")) s.paths = to_int(*v, o.path("paths"));
            if (const Json* v = o.get("exit")) s.exit = to_bool(*v, o.path("exit"));
            if (s.exit) s.t_cap = to_double(o.need("t_cap"), o.path("t_cap"));
            else s.horizon = to_double(o.need("horizon"), o.path("horizon"));
            s.policy = read_policy(Object(o.need("policy"), o.path("policy")), m);
            o.finish();
            require(s.paths >= 1 && s.paths <= 1000, ErrorCode::Config, "`simulate.paths` must lie in 1..1000");
            break;
        }
        case Command::Cost: {
            Object o(root.need(block), block);
            auto& c = cfg.cost;
            c.criterion = criterion_from(to_string(o.need("criterion"), o.path("criterion")), o.path("criterion"));
            c.x0 = read_state(o, "x0", m);
            c.i0 = read_regime(o, "i0", m);
            c.dt = to_double(o.need("dt"), o.path("dt"));
            c.paths = to_int(o.need("paths"), o.path("paths"));
            require(c.paths >= 1, ErrorCode::Config, "`cost.paths` must be >= 1");
            c.horizon = m.costs.horizon;
            switch (c.criterion) {
                case Criterion::FiniteHorizon:
                    if (const Json* v = o.get("horizon")) c.horizon = to_double(*v, o.path("horizon"));
                    break;
                case Criterion::Discounted:
                    if (const Json* v = o.get("eps_tail")) c.eps_tail = to_double(*v, o.path("eps_tail"));
                    break;
                case Criterion::Ergodic:
                    c.t_long = to_double(o.need("t_long"), o.path("t_long"));
                    c.burn_in = 0.2 * c.t_long;
                    if (const Json* v = o.get("burn_in")) c.burn_in = to_double(*v, o.path("burn_in"));
                    require(c.burn_in >= 0.0 && c.burn_in < c.t_long, ErrorCode::Config,
                            "`cost.burn_in` must lie in [0, t_long)");
                    break;
                case Criterion::Exit:
                    c.t_cap = to_double(o.need("t_cap"), o.path("t_cap"));
                    break;
            }
            c.policy = read_policy(Object(o.need("policy"), o.path("policy")), m);
            o.finish();
            break;
        }
        case Command::Hjb:
        case Command::Ergodic:
        case Command::Robustness:
        case Command::EpsCheck: {
            Object o(root.need(block), block);
            auto& s = cfg.solve;
            if (cfg.command == Command::Ergodic) {
                s.criterion = Criterion::Ergodic;
            } else {
                const std::string crit = to_string(o.need("criterion"), o.path("criterion"));
                if (cfg.command == Command::Robustness && crit == "lq-finite-horizon") {
                    s.lq = true;
                    s.criterion = Criterion::FiniteHorizon;
                } else {
                    s.criterion = criterion_from(crit, o.path("criterion"));
                }
                if (cfg.command == Command::Hjb)
                    require(s.criterion != Criterion::Ergodic, ErrorCode::Config,
                            "use command `ergodic` for the ergodic criterion (`hjb.criterion`)");
                if (cfg.command == Command::EpsCheck)
                    require(s.criterion != Criterion::Ergodic, ErrorCode::Config,
                            "`eps-check.criterion` must be discounted, finite-horizon or exit");
            }
            if (cfg.command == Command::Robustness || cfg.command == Command::EpsCheck)
                s.schedule = read_schedule(Object(o.need("schedule"), o.path("schedule")));
            if (cfg.command == Command::EpsCheck) {
                s.eps = to_double(o.need("eps"), o.path("eps"));
                require(s.eps > 0.0, ErrorCode::Config, "`eps-check.eps` must be positive");
            }
            if (s.lq) {
                s.x0 = read_state(o, "x0", m);
                s.i0 = read_regime(o, "i0", m);
                if (const Json* v = o.get("steps")) s.steps = static_cast<int>(to_int(*v, o.path("steps")));
            } else {
                read_grid_options(o, m, s.criterion, s.grid);
            }
            o.finish();
            break;
        }
    }
    root.finish();
    return cfg;
}

struct RunResult {
    int status = kExitOk;
    std::vector<std::pair<std::string, std::string>> files;  // name, content
    std::vector<std::string> report;
    std::vector<std::string> errors;
};

namespace cli_detail {

inline std::string check_line(const std::string& name, bool ok, const std::string& detail) {
    return std::string(ok ? "PASS " : "FAIL ") + name + (detail.empty() ? "" : ": " + detail);
}

inline std::vector<SamplePoint> validation_sample(const ExperimentConfig& cfg) {
    double radius = cfg.validate.radius;
    if (cfg.command != Command::Validate && cfg.model.dim == 1 && !cfg.solve.lq &&
        (cfg.command == Command::Hjb || cfg.command == Command::Ergodic || cfg.command == Command::Robustness ||
         cfg.command == Command::EpsCheck))
        radius = std::max(std::abs(cfg.solve.grid.grid.x_min), std::abs(cfg.solve.grid.grid.x_max));
    return make_sample(cfg.model, radius, cfg.validate.per_axis);
}

/// Validation gate; grid solves also need (A3) and (A5).
inline bool gate(const ExperimentConfig& cfg, RunResult& out, bool grid) {
    const auto rep = validate_model(cfg.model, validation_sample(cfg));
    bool ok = true;
    for (const auto& f : rep.findings) {
        const bool required = f.structural || (grid && (f.id == "A3" || f.id == "A5"));
        if (!required) continue;
        out.report.push_back(check_line("validation " + f.id + " (" + f.description + ")", f.passed, f.detail));
        ok = ok && f.passed;
    }
    if (!ok) out.status = kExitValidation;
    return ok;
}

inline Policy build_policy(const PolicyBlock& p, const ModelSpec& m, RunResult& out) {
    if (p.kind == "constant") return Policy::constant(p.action);
    if (p.kind == "lq-feedback") {
        LQSpec lq = lq_from_model(m);
        for (const auto& w : lq.nudge_terminal()) out.report.push_back("warning: " + w);
        const auto k = solve_coupled_riccati(lq, p.steps);
        return Policy::lq_feedback(lq_feedback(k, lq));
    }
    GridPolicyTable table;
    switch (p.criterion) {
        case Criterion::Discounted: table = solve_discounted(m, p.grid.grid, m.costs.discount, p.grid.params).policy_table(); break;
        case Criterion::Exit: table = solve_exit(m, p.grid.grid, p.grid.params).policy_table(); break;
        case Criterion::FiniteHorizon:
            table = solve_finite_horizon(m, p.grid.grid, m.costs.horizon, p.grid.n_t, p.grid.params).policy_table();
            break;
        case Criterion::Ergodic:
            table = estimate_ergodic(m, p.grid.grid, p.grid.ladder, p.grid.params).policy_table();
            break;
    }
    return Policy::grid(std::move(table));
}

inline std::string fmt(double v) { return format_double(v); }

inline void run_validate(const ExperimentConfig& cfg, RunResult& out) {
    const auto sample = validation_sample(cfg);
    const auto rep = validate_model(cfg.model, sample);
    std::ostringstream csv;
    csv << "id,kind,passed,detail\n";
    for (const auto& f : rep.findings) {
        const char* kind = f.structural ? "structural" : (f.advisory ? "advisory" : "assumption");
        csv << f.id << ',' << kind << ',' << (f.passed ? 1 : 0) << ",\"" << f.detail << "\"\n";
        out.report.push_back(check_line(f.id + " [" + kind + "] " + f.description, f.passed, f.detail));
    }
    if (rep.riccati_only) out.report.push_back("note: unbounded running cost, model is riccati-only");
    bool ok = rep.structural_ok();
    if (cfg.validate.lyapunov) {
        const auto ly = check_lyapunov_sampled(cfg.model, *cfg.validate.lyapunov, sample);
        out.report.push_back(check_line("A7 sampled Lyapunov inequality", ly.passed, "max violation = " + fmt(ly.max_violation)));
        csv << "A7,assumption," << (ly.passed ? 1 : 0) << ",\"max violation = " << fmt(ly.max_violation) << "\"\n";
        ok = ok && ly.passed;
    }
    out.files.emplace_back("validation.csv", csv.str());
    if (!ok) out.status = kExitValidation;
}

inline void run_riccati(const ExperimentConfig& cfg, RunResult& out) {
    if (!gate(cfg, out, false)) return;
    LQSpec lq = lq_from_model(cfg.model);
    for (const auto& w : lq.nudge_terminal()) out.report.push_back("warning: " + w);
    const auto k = solve_coupled_riccati(lq, cfg.riccati_steps);
    const auto f = lq_feedback(k, lq);
    double min_eig = kInf, asym = 0.0, max_norm = 0.0;
    for (int s = 0; s < k.steps(); ++s)
        for (int i = 0; i < lq.regimes(); ++i) {
            min_eig = std::min(min_eig, min_eigenvalue(k.at(s, i)));
            asym = std::max(asym, max_abs_asymmetry(k.at(s, i)));
            max_norm = std::max(max_norm, spectral_norm(k.at(s, i)));
        }
    const double bound = riccati_norm_bound(lq);
    const double defect = riccati_defect(k, lq);
    out.report.push_back(check_line("K(t,i) symmetric", asym <= 1e-10, "max asymmetry = " + fmt(asym)));
    out.report.push_back(check_line("K(t,i) positive definite for t < T", min_eig > 0.0, "min eigenvalue = " + fmt(min_eig)));
    out.report.push_back(check_line("norm bound C0 e^{k0 T}(T+1)", max_norm <= bound, fmt(max_norm) + " <= " + fmt(bound)));
    out.report.push_back("info: central-difference defect = " + fmt(defect));
    out.files.emplace_back("K.csv", trajectory_csv(k));
    out.files.emplace_back("F.csv", trajectory_csv(f.gains));
    nlohmann::ordered_json j;
    j["steps"] = cfg.riccati_steps;
    j["horizon"] = lq.horizon;
    nlohmann::ordered_json k0 = nlohmann::ordered_json::array();
    for (int i = 0; i < lq.regimes(); ++i) k0.push_back(nlohmann::ordered_json::parse(json_io::from_matrix(k.at(0, i)).dump()));
    j["K0"] = k0;
    j["min_eigenvalue"] = min_eig;
    j["max_norm"] = max_norm;
    j["norm_bound"] = bound;
    j["time_lipschitz"] = time_lipschitz(k);
    j["defect"] = defect;
    out.files.emplace_back("riccati.json", j.dump(2) + "\n");
}

inline void run_simulate(const ExperimentConfig& cfg, RunResult& out) {
    if (!gate(cfg, out, false)) return;
    const auto& s = cfg.simulate;
    const Policy policy = build_policy(s.policy, cfg.model, out);
    std::ostringstream summary;
    summary << "path,termination,final_time,jumps,clamped_steps\n";
    for (long k = 0; k < s.paths; ++k) {
        RngStream stream(*cfg.seed, static_cast<std::uint64_t>(k));
        const PathSample p = s.exit ? simulate_exit_path(cfg.model, policy, s.x0, s.i0, cfg.model.costs.domain, s.dt,
                                                         s.t_cap, stream)
                                    : simulate_path(cfg.model, policy, s.x0, s.i0, s.horizon, s.dt, stream);
        std::ostringstream name;
        name << "path_" << k << ".csv";
        out.files.emplace_back(name.str(), path_csv(p));
        summary << k << ',' << termination_name(p.termination) << ',' << fmt(p.times.back()) << ',' << p.jumps.size()
                << ',' << p.clamped_steps << '\n';
        if (p.clamped_steps > 0)
            out.report.push_back("note: path " + std::to_string(k) + " clamped the policy action on " +
                                 std::to_string(p.clamped_steps) + " steps");
    }
    out.files.emplace_back("paths.csv", summary.str());
    out.report.push_back("info: simulated " + std::to_string(s.paths) + " path(s)");
}

inline void run_cost(const ExperimentConfig& cfg, RunResult& out, const ExecOptions& exec) {
    if (!gate(cfg, out, false)) return;
    const auto& c = cfg.cost;
    const Policy policy = build_policy(c.policy, cfg.model, out);
    McOptions opt{c.paths, *cfg.seed, exec};
    McEstimate e;
    switch (c.criterion) {
        case Criterion::FiniteHorizon: e = mc_finite_horizon(cfg.model, policy, c.x0, c.i0, c.horizon, c.dt, opt); break;
        case Criterion::Discounted:
            e = mc_discounted(cfg.model, policy, c.x0, c.i0, cfg.model.costs.discount, c.dt, c.eps_tail, opt);
            break;
        case Criterion::Ergodic: e = mc_ergodic(cfg.model, policy, c.x0, c.i0, c.t_long, c.burn_in, c.dt, opt); break;
        case Criterion::Exit: e = mc_exit(cfg.model, policy, c.x0, c.i0, c.dt, c.t_cap, opt); break;
    }
    out.files.emplace_back("estimates.csv", estimates_csv({{criterion_name(c.criterion), c.x0, c.i0, e}}));
    out.report.push_back("info: " + std::string(criterion_name(c.criterion)) + " estimate " + fmt(e.value) + " +- " +
                         fmt(e.std_error) + " over " + std::to_string(e.paths) + " paths");
    out.report.push_back(check_line("standard error nonnegative", e.std_error >= 0.0, ""));
    if (c.criterion == Criterion::Discounted) {
        const double mc = cfg.model.costs.running_bound();
        const double cap = mc / cfg.model.costs.discount + 3.0 * e.std_error + c.eps_tail;
        out.report.push_back(check_line("discounted value <= M_c/alpha", e.value <= cap, fmt(e.value) + " <= " + fmt(cap)));
        out.report.push_back("info: truncation horizon " + fmt(e.horizon) + ", tail bound " + fmt(e.truncation_bias_bound));
    }
    if (c.criterion == Criterion::Ergodic)
        out.report.push_back("note: fixed-(x0,i0) time average after burn-in " + fmt(c.burn_in) +
                             "; independence of the start relies on ergodicity");
    if (c.criterion == Criterion::Exit)
        out.report.push_back(check_line("capped exit paths <= 1% (E_CAPFRAC)", !e.cap_warning,
                                         "capped fraction = " + fmt(e.capped_fraction)));
}

inline void report_grid_invariants(const ModelSpec& m, const GridSolution& sol, RunResult& out) {
    const double mc = m.costs.running_bound();
    double lo = kInf, hi = -kInf;
    for (const auto& row : sol.values)
        for (double v : row) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    if (sol.criterion == Criterion::Discounted)
        out.report.push_back(check_line("discrete maximum principle 0 <= V <= M_c/alpha",
                                        lo >= -1e-9 && hi <= mc / sol.alpha + 1e-9,
                                        "range [" + fmt(lo) + ", " + fmt(hi) + "]"));
    if (sol.criterion == Criterion::Exit) {
        bool pinned = true;
        Vector x(1);
        for (int i = 0; i < m.regime_count(); ++i) {
            x(0) = sol.grid.x_min;
            pinned = pinned && sol.values[static_cast<std::size_t>(i)].front() == m.costs.exit.evaluate(x, i);
            x(0) = sol.grid.x_max;
            pinned = pinned && sol.values[static_cast<std::size_t>(i)].back() == m.costs.exit.evaluate(x, i);
        }
        out.report.push_back(check_line("boundary nodes equal h", pinned, ""));
    }
    if (sol.criterion == Criterion::FiniteHorizon) {
        bool exact = true;
        Vector x(1);
        for (int i = 0; i < m.regime_count(); ++i)
            for (int k = 0; k < sol.grid.n_x; ++k) {
                x(0) = sol.grid.node(k);
                exact = exact && sol.time_values.back()[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] ==
                                     m.costs.terminal.evaluate(x, i);
            }
        out.report.push_back(check_line("terminal slice equals c_T", exact, ""));
    }
    if (!sol.residual_history.empty())
        out.report.push_back(check_line("scaled HJB residual <= 10 tol", sol.residual <= 10.0 * sol.tol, fmt(sol.residual)));
    out.report.push_back(check_line("solver converged (E_MAXITER otherwise)", sol.converged,
                                    std::to_string(sol.iterations) + " iteration(s)"));
    if (!sol.converged) out.status = kExitSolver;
}

inline void run_hjb(const ExperimentConfig& cfg, RunResult& out) {
    if (!gate(cfg, out, true)) return;
    const auto& s = cfg.solve;
    const ModelSpec& m = cfg.model;
    GridSolution sol;
    switch (s.criterion) {
        case Criterion::Discounted: sol = solve_discounted(m, s.grid.grid, m.costs.discount, s.grid.params); break;
        case Criterion::Exit: sol = solve_exit(m, s.grid.grid, s.grid.params); break;
        case Criterion::FiniteHorizon:
            sol = solve_finite_horizon(m, s.grid.grid, m.costs.horizon, s.grid.n_t, s.grid.params);
            break;
        case Criterion::Ergodic: break;
    }
    out.files.emplace_back("solution.csv", grid_solution_csv(sol));
    out.files.emplace_back("solution.json", grid_solution_json(sol).dump(2) + "\n");
    report_grid_invariants(m, sol, out);
}

inline void run_ergodic(const ExperimentConfig& cfg, RunResult& out) {
    if (!gate(cfg, out, true)) return;
    const auto& s = cfg.solve;
    const auto est = estimate_ergodic(cfg.model, s.grid.grid, s.grid.ladder, s.grid.params);
    out.files.emplace_back("ergodic.csv", ergodic_csv(est));
    out.files.emplace_back("ergodic.json", ergodic_json(est).dump(2) + "\n");
    const double mc = cfg.model.costs.running_bound();
    out.report.push_back("info: rho = " + fmt(est.rho));
    out.report.push_back(check_line("|rho| <= M_c", std::abs(est.rho) <= mc + 1e-9, fmt(est.rho)));
    out.report.push_back("note: the vanishing-discount limit assumes an inf-compact cost; constant-cost runs check the solver algebra only");
    out.report.push_back(check_line("ladder solves converged (E_MAXITER otherwise)", est.converged, ""));
    if (!est.converged) out.status = kExitSolver;
}

inline void report_sweep(const SweepReport& rep, RunResult& out) {
    const double tol = rep.tol > 0.0 ? rep.tol : 1e-9;
    bool finite = true, nonneg = true, triangle = true;
    for (const auto& r : rep.rows) {
        finite = finite && std::isfinite(r.value_gap) && std::isfinite(r.policy_loss) && std::isfinite(r.aux);
        nonneg = nonneg && r.policy_loss >= -10.0 * tol;
        if (rep.criterion != "lq-finite-horizon")
            triangle = triangle && std::abs(r.policy_loss) <= r.value_gap + r.aux + 10.0 * tol;
    }
    out.report.push_back(check_line("all columns finite", finite, ""));
    out.report.push_back(check_line("policy_loss >= -tolerance", nonneg, ""));
    if (rep.criterion != "lq-finite-horizon")
        out.report.push_back(check_line("|policy_loss| <= value_gap + cross-model gap + 10 tol", triangle, ""));
    if (const auto* c = rep.control_row())
        out.report.push_back(check_line("delta = 0 row vanishes", c->value_gap <= 10.0 * tol && std::abs(c->policy_loss) <= 10.0 * tol,
                                        "value_gap " + fmt(c->value_gap) + ", policy_loss " + fmt(c->policy_loss)));
    const auto rows = rep.schedule_rows();
    if (rows.size() >= 2)
        out.report.push_back(check_line("last-row gap <= first-row gap / 10",
                                        rows.back().value_gap <= rows.front().value_gap / 10.0 + 10.0 * tol,
                                        fmt(rows.back().value_gap) + " vs " + fmt(rows.front().value_gap)));
    for (const auto& n : rep.notes) out.report.push_back("note: " + n);
    out.report.push_back(check_line("solves converged", rep.converged, ""));
    if (!rep.converged) out.status = kExitSolver;
}

inline void run_robustness(const ExperimentConfig& cfg, RunResult& out, const ExecOptions& exec) {
    const auto& s = cfg.solve;
    if (!gate(cfg, out, !s.lq)) return;
    SweepReport rep;
    if (s.lq) {
        LQSpec lq = lq_from_model(cfg.model);
        for (const auto& w : lq.nudge_terminal()) out.report.push_back("warning: " + w);
        rep = sweep_lq_finite_horizon(lq, s.schedule, s.x0, s.i0, s.steps, exec);
        rep.tol = 1e-9;
    } else {
        rep = sweep_grid(cfg.model, s.schedule, s.criterion, s.grid, exec);
    }
    out.files.emplace_back("sweep.csv", sweep_csv(rep));
    out.files.emplace_back("sweep.json", sweep_json(rep, cfg.digest).dump(2) + "\n");
    report_sweep(rep, out);
}

inline void run_eps(const ExperimentConfig& cfg, RunResult& out, const ExecOptions& exec) {
    if (!gate(cfg, out, true)) return;
    const auto& s = cfg.solve;
    const auto rep = check_eps_optimality(cfg.model, s.schedule, s.criterion, s.eps, s.grid, exec);
    out.files.emplace_back("eps.csv", eps_csv(rep));
    nlohmann::ordered_json j;
    j["criterion"] = rep.criterion;
    j["eps"] = rep.eps;
    j["hamiltonian_slack"] = rep.threshold;
    j["config_sha256"] = cfg.digest;
    if (rep.first_n) j["N"] = *rep.first_n;
    j["verdict"] = rep.verdict();
    out.files.emplace_back("eps.json", j.dump(2) + "\n");
    out.report.push_back(check_line("gap <= 3 eps for all n >= N", rep.first_n.has_value(), rep.verdict()));
}

}  // namespace cli_detail

/// Runs one parsed command. Library errors are mapped to exit statuses.
inline RunResult run_command(const ExperimentConfig& cfg, const ExecOptions& exec = {}) {
    using namespace cli_detail;
    RunResult out;
    try {
        switch (cfg.command) {
            case Command::Validate: run_validate(cfg, out); break;
            case Command::Riccati: run_riccati(cfg, out); break;
            case Command::Simulate: run_simulate(cfg, out); break;
            case Command::Cost: run_cost(cfg, out, exec); break;
            case Command::Hjb: run_hjb(cfg, out); break;
            case Command::Ergodic: run_ergodic(cfg, out); break;
            case Command::Robustness: run_robustness(cfg, out, exec); break;
            case Command::EpsCheck: run_eps(cfg, out, exec); break;
        }
    } catch (const Error& e) {
        out.errors.push_back(e.what());
        out.status = e.code() == ErrorCode::Config ? kExitConfig : kExitSolver;
    }
    return out;
}

inline std::string report_text(const ExperimentConfig& cfg, const RunResult& res) {
    std::ostringstream os;
    os << "rsctl " << kVersion << "\n";
    os << "command: " << command_name(cfg.command) << "\n";
    os << "config sha256: " << cfg.digest << "\n";
    os << "exit status: " << res.status << "\n\n";
    for (const auto& line : res.report) os << line << '\n';
    for (const auto& e : res.errors) os << "error: " << e << '\n';
    return os.str();
}

/// Writes every artifact plus report.txt and manifest.json into out_dir.
inline void write_outputs(const ExperimentConfig& cfg, const RunResult& res, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    require(!ec, ErrorCode::Io, "cannot create " + out_dir.string() + ": " + ec.message());
    nlohmann::ordered_json manifest;
    manifest["tool"] = "rsctl";
    manifest["version"] = kVersion;
    manifest["command"] = command_name(cfg.command);
    manifest["config_sha256"] = cfg.digest;
    manifest["exit_status"] = res.status;
    nlohmann::ordered_json files = nlohmann::ordered_json::array();
    for (const auto& [name, content] : res.files) {
        write_file_atomic(out_dir / name, content);
        files.push_back(name);
    }
    write_file_atomic(out_dir / "report.txt", report_text(cfg, res));
    files.push_back("report.txt");
    manifest["files"] = files;
    write_file_atomic(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorCode::Io, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace rsctl
