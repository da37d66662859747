// Acceptance criteria 1-12: one PASS/FAIL line each.
// Usage: acceptance [configs_dir]

#include "fixtures.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

using namespace rsctl;
using namespace fixtures;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

// Discounted bound 0 <= V <= M_c / alpha, checked on every discounted solve below.
bool discounted_bound(const ModelSpec& m, const GridSolution& sol) {
    const double cap = m.costs.running_bound() / sol.alpha + 1e-9;
    for (const auto& row : sol.values)
        for (double v : row)
            if (v < -1e-9 || v > cap) return false;
    return true;
}

Outcome riccati_closed_form() {
    const auto t0 = Clock::now();
    const auto k = solve_coupled_riccati(tanh_lq(), 1000);
    const double secs = seconds_since(t0);
    const double err = std::abs(k.at(0, 0)(0, 0) - tanh1());
    return {err <= 1e-6 && secs < 0.1, "K(0) = " + format_double(k.at(0, 0)(0, 0)) + ", |err| = " + num(err) +
                                           ", " + num(secs) + " s"};
}

Outcome riccati_invariants() {
    const auto t0 = Clock::now();
    const LQSpec lq = two_regime_lq();
    const double bound = riccati_norm_bound(lq);
    double min_eig = kInf, max_norm = 0.0;
    std::vector<double> lips;
    for (int steps : {1000, 2000, 4000}) {
        const auto k = solve_coupled_riccati(lq, steps);
        for (int s = 1; s < k.steps(); ++s)
            for (int i = 0; i < 2; ++i) min_eig = std::min(min_eig, min_eigenvalue(k.at(s, i)));
        for (int s = 0; s <= k.steps(); ++s)
            for (int i = 0; i < 2; ++i) max_norm = std::max(max_norm, spectral_norm(k.at(s, i)));
        lips.push_back(time_lipschitz(k));
    }
    const double secs = seconds_since(t0);
    const double r1 = lips[1] / lips[0], r2 = lips[2] / lips[1];
    const bool ok = min_eig > 0.0 && max_norm <= bound && r1 <= 1.1 && r2 <= 1.1 && secs < 1.0;
    return {ok, "min eig " + num(min_eig) + ", max norm " + num(max_norm) + " <= " + num(bound) +
                    ", Lipschitz ratios " + num(r1) + ", " + num(r2) + ", " + num(secs) + " s"};
}

Outcome suboptimal_feedback() {
    const LQSpec lq = tanh_lq();
    const auto m = fixed_feedback_cost(lq, constant_feedback({m1(1.0)}, 1.0), 1000);
    const double v = m.at(0, 0)(0, 0);
    const double exact = 1.0 - std::exp(-2.0);
    return {std::abs(v - exact) <= 1e-6 && v > tanh1(), "M(0) = " + format_double(v) + ", |err| = " + num(std::abs(v - exact))};
}

Outcome lq_sweep() {
    const auto t0 = Clock::now();
    PerturbationSchedule sched = coefficient_schedule(2, 1.0);
    const Vector x0 = v1(1.0);
    const auto rep = sweep_lq_finite_horizon(two_regime_lq(), sched, x0, 0, 1000);
    const double secs = seconds_since(t0);
    const auto rows = rep.schedule_rows();
    bool mono = true;
    for (std::size_t n = 1; n < rows.size(); ++n)
        mono = mono && rows[n].value_gap <= rows[n - 1].value_gap + 1e-9 &&
               rows[n].policy_loss <= rows[n - 1].policy_loss + 1e-9;
    const double final_loss = rows.back().policy_loss;
    const auto* c = rep.control_row();
    const bool zero = c && c->value_gap <= 1e-9 && std::abs(c->policy_loss) <= 1e-9;
    const bool ok = mono && final_loss <= 1e-3 * x0.squaredNorm() && zero && secs < 5.0;
    return {ok, std::string(mono ? "monotone" : "NOT monotone") + ", final policy_loss " + num(final_loss) +
                    ", delta=0 gaps " + (c ? num(c->value_gap) + "/" + num(c->policy_loss) : "missing") + ", " +
                    num(secs) + " s"};
}

Outcome discounted_exactness() {
    ModelSpec m = constant_model({0.3, -0.2}, {1.0, 0.7}, {1.0, 1.0}, rates2(1.0, 2.0));
    m.costs.discount = 0.5;
    const auto sol = solve_discounted(m, Grid1D(-4, 4, 201), 0.5);
    double err = 0.0;
    for (const auto& row : sol.values)
        for (double v : row) err = std::max(err, std::abs(v - 2.0));
    // bound on the other discounted solves of this binary
    const ModelSpec chain = chain_model();
    const ModelSpec sat = saturated_model();
    const bool bounds = discounted_bound(m, sol) &&
                        discounted_bound(chain, solve_discounted(chain, Grid1D(-4, 4, 201), 1.0)) &&
                        discounted_bound(sat, solve_discounted(sat, Grid1D(-4, 4, 201), 0.5));
    return {err <= 1e-8 && bounds && sol.converged,
            "max |V - 2| = " + num(err) + (bounds ? ", 0 <= V <= M_c/alpha on all solves" : ", bound violated")};
}

// Stated oracle for the chain benchmark.
constexpr double kChainV1 = 1.25;
constexpr double kChainV2 = 1.75;

Outcome chain_coupling() {
    const auto t0 = Clock::now();
    const ModelSpec m = chain_model();
    const auto sol = solve_discounted(m, Grid1D(-4, 4, 201), 1.0);
    double e1 = 0.0, e2 = 0.0;
    for (double v : sol.values[0]) e1 = std::max(e1, std::abs(v - kChainV1));
    for (double v : sol.values[1]) e2 = std::max(e2, std::abs(v - kChainV2));
    const Policy pol = Policy::constant(v1(0.0));
    McOptions opt{100000, 6, {}};
    const auto mc1 = mc_discounted(m, pol, v1(0.0), 0, 1.0, 0.01, 1e-4, opt);
    const auto mc2 = mc_discounted(m, pol, v1(0.0), 1, 1.0, 0.01, 1e-4, opt);
    const double secs = seconds_since(t0);
    const bool mc_ok = std::abs(mc1.value - kChainV1) <= 3 * mc1.std_error + 1e-3 &&
                       std::abs(mc2.value - kChainV2) <= 3 * mc2.std_error + 1e-3;
    const bool ok = e1 <= 1e-6 && e2 <= 1e-6 && mc_ok && secs < 30.0;
    return {ok, "grid V = (" + num(sol.values[0][100]) + ", " + num(sol.values[1][100]) + "), MC = (" +
                    num(mc1.value) + " +- " + num(mc1.std_error) + ", " + num(mc2.value) + " +- " +
                    num(mc2.std_error) + "), stated (1.25, 1.75), " + num(secs) + " s"};
}

Outcome exit_order() {
    const ModelSpec m = brownian_exit_model();
    SolverParams p;
    p.tol = 1e-12;
    std::vector<double> errs;
    bool bounded = true;
    double center = 0.0;
    for (int n : {101, 201}) {
        const Grid1D g(-1, 1, n);
        const auto sol = solve_exit(m, g, p);
        double e = 0.0;
        for (int k = 0; k < n; ++k) {
            const double x = g.node(k);
            e = std::max(e, std::abs(sol.values[0][static_cast<std::size_t>(k)] - 0.5 * (1 - x * x)));
        }
        bounded = bounded && e <= 2 * g.dx() * g.dx();
        errs.push_back(e);
        center = sol.value(0, 0.0);
    }
    const double ratio = errs[0] / errs[1];
    // Diagnostic: c = x^2 gives phi = (1 - x^4) / 12, which the scheme does not reproduce exactly.
    ModelSpec quartic = m;
    quartic.costs.running.kind = RunningCostKind::ClampedQuadratic;
    quartic.costs.running.offset = {0.0};
    quartic.costs.running.Q = {m1(1.0)};
    quartic.costs.running.cap = 1.0;
    std::vector<double> qerr;
    for (int n : {101, 201}) {
        const Grid1D g(-1, 1, n);
        const auto sol = solve_exit(quartic, g, p);
        double e = 0.0;
        for (int k = 0; k < n; ++k) {
            const double x = g.node(k);
            e = std::max(e, std::abs(sol.values[0][static_cast<std::size_t>(k)] - (1 - x * x * x * x) / 12));
        }
        qerr.push_back(e);
    }
    return {bounded && ratio >= 3.0, "phi(0) = " + format_double(center) + ", errors " + num(errs[0]) + ", " +
                                         num(errs[1]) + ", ratio " + num(ratio) + "; c = x^2 check: errors " +
                                         num(qerr[0]) + ", " + num(qerr[1]) + ", ratio " + num(qerr[0] / qerr[1])};
}

Outcome ergodic_chain() {
    const ModelSpec m = chain_model();
    const auto est = estimate_ergodic(m, Grid1D(-4, 4, 201));
    const double rho = 4.0 / 3.0;
    const double rel = std::abs(est.rho - rho) / rho;
    McOptions opt{10000, 8, {}};
    const auto mc = mc_ergodic(m, Policy::constant(v1(0.0)), v1(0.0), 0, 200.0, 40.0, 0.05, opt);
    const bool ok = rel <= 0.02 && std::abs(mc.value - est.rho) <= 3 * mc.std_error + 0.02;
    return {ok, "rho = " + num(est.rho) + " (rel err " + num(rel) + "), MC " + num(mc.value) + " +- " +
                    num(mc.std_error)};
}

GridSweepOptions sweep_options(Criterion c) {
    GridSweepOptions o;
    o.grid = c == Criterion::Exit ? Grid1D(-2, 2, 101) : Grid1D(-4, 4, 201);
    o.params.tol = 1e-8;
    o.n_t = 50;
    return o;
}

Outcome grid_sweeps() {
    const auto t0 = Clock::now();
    const ModelSpec m = saturated_model();
    const auto sched = coefficient_schedule(2, 1.0);
    bool ok = true;
    std::string detail;
    for (Criterion c : {Criterion::Discounted, Criterion::FiniteHorizon, Criterion::Exit, Criterion::Ergodic}) {
        const auto opt = sweep_options(c);
        const auto rep = sweep_grid(m, sched, c, opt);
        const double tol = opt.params.tol;
        const auto rows = rep.schedule_rows();
        const auto& first = rows.front();
        const auto& last = rows.back();
        bool nonneg = true;
        for (const auto& r : rep.rows) nonneg = nonneg && r.policy_loss >= -tol;
        const auto* z = rep.control_row();
        const bool zero = z && z->value_gap <= 10 * tol && std::abs(z->policy_loss) <= 10 * tol;
        const bool shrink = last.value_gap <= first.value_gap / 10 + 10 * tol &&
                            last.policy_loss <= first.policy_loss / 10 + 10 * tol;
        const bool good = nonneg && zero && shrink && rep.converged;
        ok = ok && good;
        detail += std::string(criterion_name(c)) + (good ? " ok" : " FAILED") + " [gap " + num(first.value_gap) +
                  "->" + num(last.value_gap) + ", loss " + num(first.policy_loss) + "->" + num(last.policy_loss) +
                  (nonneg ? "" : ", negative loss") + (zero ? "" : ", delta=0 row nonzero") + "]; ";
    }
    const double secs = seconds_since(t0);
    ok = ok && secs < 120.0;
    return {ok, detail + num(secs) + " s"};
}

Outcome eps_optimality() {
    const ModelSpec m = saturated_model();
    const auto rep = check_eps_optimality(m, coefficient_schedule(2, 1.0), Criterion::Discounted, 0.05,
                                          sweep_options(Criterion::Discounted));
    double worst = 0.0;
    for (const auto& r : rep.rows) worst = std::max(worst, r.gap);
    return {rep.first_n.has_value() && *rep.first_n <= 10, rep.verdict() + ", max gap " + num(worst) + " vs 3 eps = 0.15"};
}

Outcome simulation_laws() {
    const auto t0 = Clock::now();
    const Policy zero = Policy::constant(v1(0.0));
    // Brownian X_T variance
    const ModelSpec bm = constant_model({0.0}, {1.0}, {0.0}, m1(0.0));
    std::vector<double> xt(10000);
    for (std::size_t k = 0; k < xt.size(); ++k) {
        RngStream s(21, k);
        xt[k] = simulate_path(bm, zero, v1(0.0), 0, 1.0, 1e-3, s).states.back()(0);
    }
    double mean = 0.0, var = 0.0;
    for (double x : xt) mean += x;
    mean /= static_cast<double>(xt.size());
    for (double x : xt) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xt.size() - 1);
    const double se_var = std::sqrt(2.0 / 1e4);
    const bool var_ok = std::abs(var - 1.0) <= 3 * se_var;
    // symmetric chain occupation
    const ModelSpec sym = constant_model({0.0, 0.0}, {1.0, 1.0}, {1.0, 0.0}, rates2(1.0, 1.0));
    const auto occ = mc_ergodic(sym, zero, v1(0.0), 0, 200.0, 0.0, 0.05, McOptions{10000, 22, {}});
    const bool occ_ok = std::abs(occ.value - 0.5) <= 0.02;
    // mean exit time
    const auto tau = mc_exit(brownian_exit_model(), zero, v1(0.0), 0, 1e-4, 50.0, McOptions{10000, 23, {}});
    const bool tau_ok = std::abs(tau.value - 0.5) <= 3 * tau.std_error + 0.02;
    const double secs = seconds_since(t0);
    return {var_ok && occ_ok && tau_ok && secs < 60.0,
            "Var X_T = " + num(var) + " (se " + num(se_var) + "), occupation " + num(occ.value) + ", E tau = " +
                num(tau.value) + " +- " + num(tau.std_error) + ", " + num(secs) + " s"};
}

std::map<std::string, std::string> run_config_set(const std::filesystem::path& dir, int threads) {
    std::map<std::string, std::string> out;
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        const auto cfg = parse_config(read_file(f));
        ExecOptions exec;
        exec.threads = threads;
        const auto res = run_command(cfg, exec);
        for (const auto& [name, content] : res.files)
            if (name.size() > 4 && name.substr(name.size() - 4) == ".csv") out[f.stem().string() + "/" + name] = content;
        out[f.stem().string() + "/status"] = std::to_string(res.status);
    }
    return out;
}

Outcome determinism(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) return {false, "config directory " + dir.string() + " not found"};
    const auto a = run_config_set(dir, 1);
    const auto b = run_config_set(dir, 2);
    std::size_t csvs = 0;
    for (const auto& [k, v] : a) csvs += k.find(".csv") != std::string::npos;
    return {a == b && csvs > 0, std::to_string(csvs) + " CSV files compared across two runs (1 and 2 threads)"};
}

}  // namespace

int main(int argc, char** argv) {
    std::filesystem::path configs = argc > 1 ? argv[1] : "configs";
    if (const char* env = std::getenv("RSCTL_CONFIGS"); env && argc <= 1) configs = env;

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"Riccati closed form (tanh)", riccati_closed_form},
        {"Riccati invariants (two-regime)", riccati_invariants},
        {"suboptimal constant feedback", suboptimal_feedback},
        {"LQ robustness sweep", lq_sweep},
        {"discounted solver exactness", discounted_exactness},
        {"regime-coupling exactness (chain)", chain_coupling},
        {"exit solver order (Brownian)", exit_order},
        {"vanishing-discount ergodic (chain)", ergodic_chain},
        {"grid robustness sweeps", grid_sweeps},
        {"3 eps optimality", eps_optimality},
        {"simulation laws", simulation_laws},
        {"determinism", [&] { return determinism(configs); }},
    };
    // Criteria that cannot hold for a correct implementation; see README.
    const std::map<std::size_t, std::string> documented = {
        {6, "stated V2 = 1.75 contradicts (alpha I - M)^-1 c = (1.25, 1.5)"},
        {7, "the scheme is exact on quadratic solutions, so both errors are round-off"},
    };
    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        Outcome o;
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const auto doc = documented.find(k + 1);
        if (!o.pass && doc == documented.end()) ++failed;
        std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first.c_str(), o.detail.c_str());
        if (!o.pass && doc != documented.end()) std::printf("          documented failure: %s\n", doc->second.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
