#pragma once

// Robustness sweeps: solve each approximating model, replay its optimal policy
// in the true model and record value gaps and performance losses.

#include "rsctl/hjbgrid.hpp"
#include "rsctl/parallel.hpp"
#include "rsctl/perturbation.hpp"
#include "rsctl/riccati.hpp"

#include "json.hpp"

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace rsctl {

struct SweepRow {
    int n = 0;
    double delta = 0.0;
    double value_gap = 0.0;
    double policy_loss = 0.0;
    double aux = 0.0;
    long solver_iters = 0;
    double std_error = 0.0;
    bool control = false;  // appended delta = 0 row
};

struct SweepReport {
    std::string criterion;
    std::string mode;
    std::vector<SweepRow> rows;
    double tol = 0.0;
    bool converged = true;
    std::vector<std::string> notes;

    const SweepRow* control_row() const {
        for (const auto& r : rows)
            if (r.delta == 0.0) return &r;
        return nullptr;
    }
    /// Rows of the schedule proper (the appended control row excluded).
    std::vector<SweepRow> schedule_rows() const {
        std::vector<SweepRow> out;
        for (const auto& r : rows)
            if (!r.control) out.push_back(r);
        return out;
    }
};

/// Delta sequence with a trailing 0 appended when the schedule does not reach it.
inline std::vector<double> sweep_magnitudes(const PerturbationSchedule& sched) {
    sched.check_magnitudes();
    std::vector<double> d = sched.magnitudes;
    if (d.back() != 0.0) d.push_back(0.0);
    return d;
}

/// LQ data moved by delta along the schedule directions (A, B, C, rates, Q, R).
inline LQSpec perturb_lq(const LQSpec& base, const PerturbationSchedule& sched, double delta) {
    LQSpec lq = base;
    if (delta == 0.0) return lq;
    if (sched.uses_coefficients()) {
        detail::add_scaled(lq.A, sched.dA, delta, "dA");
        detail::add_scaled(lq.B, sched.dB, delta, "dB");
        detail::add_scaled(lq.C, sched.dC, delta, "dC");
    }
    if (sched.uses_rates() && sched.d_rates.size() > 0) {
        detail::perturb_rates(lq.generator, sched.d_rates, delta, true);
        detail::check_rates(lq.generator, true, delta);
    }
    if (sched.uses_cost()) {
        detail::add_scaled(lq.Q, sched.d_cost_Q, delta, "d_cost_Q");
        detail::add_scaled(lq.R, sched.d_cost_R, delta, "d_cost_R");
    }
    return lq;
}

/// value_gap = max_t,i ||K_n - K||, policy_loss = x0'(M_n(0,i0) - K(0,i0))x0
/// with M_n the exact cost of F_n in the true model, aux = max_t,i ||F_n - F||.
inline SweepReport sweep_lq_finite_horizon(const LQSpec& true_lq, const PerturbationSchedule& sched, const Vector& x0,
                                           int i0, int steps, const ExecOptions& exec = {}) {
    true_lq.check();
    require(x0.size() == true_lq.dim(), ErrorCode::Shape, "x0 has wrong dimension");
    require(i0 >= 0 && i0 < true_lq.regimes(), ErrorCode::Shape, "i0 out of range");
    const auto deltas = sweep_magnitudes(sched);
    const RiccatiTrajectory k_true = solve_coupled_riccati(true_lq, steps);
    const FeedbackTrajectory f_true = lq_feedback(k_true, true_lq);
    const double v_true = x0.dot(k_true.at(0, i0) * x0);

    SweepReport rep;
    rep.criterion = "lq-finite-horizon";
    rep.mode = mode_name(sched.mode);
    rep.rows.resize(deltas.size());
    parallel_for(deltas.size(), exec, [&](std::size_t n) {
        const LQSpec lq = perturb_lq(true_lq, sched, deltas[n]);
        const RiccatiTrajectory k = solve_coupled_riccati(lq, steps);
        const FeedbackTrajectory f = lq_feedback(k, lq);
        const MatrixTrajectory m = fixed_feedback_cost(true_lq, f, steps);
        SweepRow& r = rep.rows[n];
        r.n = static_cast<int>(n);
        r.delta = deltas[n];
        r.control = n >= sched.magnitudes.size();
        r.value_gap = max_trajectory_gap(k, k_true);
        r.policy_loss = x0.dot(m.at(0, i0) * x0) - v_true;
        r.aux = max_trajectory_gap(f.gains, f_true.gains);
        r.solver_iters = steps;
    });
    rep.notes.push_back("policy_loss is exact (fixed-feedback matrix ODE), no Monte Carlo");
    return rep;
}

struct GridSweepOptions {
    Grid1D grid;
    SolverParams params;
    int n_t = 20;                         // finite-horizon time levels
    std::vector<double> ladder = default_ladder();
};

namespace detail {

/// Signed entry of (a - b) with the largest magnitude.
inline double signed_sup(const NodeValues& a, const NodeValues& b) {
    double best = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t k = 0; k < a[i].size(); ++k) {
            const double d = a[i][k] - b[i][k];
            if (std::abs(d) > std::abs(best)) best = d;
        }
    return best;
}

inline double sup_gap(const NodeValues& a, const NodeValues& b) { return std::abs(signed_sup(a, b)); }

struct CriterionRun {
    NodeValues values;  // V (t = 0 for finite-horizon); rho in [0][0] for ergodic
    NodeActions policy;
    std::vector<NodeActions> levels;
    long iterations = 0;
    bool converged = true;
};

inline CriterionRun solve_criterion(const ModelSpec& spec, Criterion c, const GridSweepOptions& o) {
    CriterionRun run;
    switch (c) {
        case Criterion::Discounted: {
            auto s = solve_discounted(spec, o.grid, spec.costs.discount, o.params);
            run.values = std::move(s.values);
            run.policy = std::move(s.policy);
            run.iterations = s.iterations;
            run.converged = s.converged;
            break;
        }
        case Criterion::Exit: {
            auto s = solve_exit(spec, o.grid, o.params);
            run.values = std::move(s.values);
            run.policy = std::move(s.policy);
            run.iterations = s.iterations;
            run.converged = s.converged;
            break;
        }
        case Criterion::FiniteHorizon: {
            auto s = solve_finite_horizon(spec, o.grid, spec.costs.horizon, o.n_t, o.params);
            run.values = std::move(s.values);
            run.policy = s.policy;
            run.levels = std::move(s.time_policy);
            run.iterations = s.iterations;
            run.converged = s.converged;
            break;
        }
        case Criterion::Ergodic: {
            auto e = estimate_ergodic(spec, o.grid, o.ladder, o.params);
            run.values = {{e.rho}};
            run.policy = std::move(e.policy);
            for (int it : e.iterations) run.iterations += it;
            run.converged = e.converged;
            break;
        }
    }
    return run;
}

/// Value of a fixed policy (per-level for finite-horizon) in `spec`.
inline CriterionRun replay(const ModelSpec& spec, Criterion c, const NodeActions& policy,
                           const std::vector<NodeActions>& levels, const GridSweepOptions& o) {
    CriterionRun run;
    switch (c) {
        case Criterion::Discounted: {
            auto s = evaluate_policy_value(spec, o.grid, policy, spec.costs.discount, o.params);
            run.values = std::move(s.values);
            run.converged = s.converged;
            break;
        }
        case Criterion::Exit: {
            auto s = evaluate_exit_policy(spec, o.grid, policy, o.params);
            run.values = std::move(s.values);
            run.converged = s.converged;
            break;
        }
        case Criterion::FiniteHorizon: {
            auto s = evaluate_finite_horizon_policy(spec, o.grid, levels, spec.costs.horizon, o.params);
            run.values = std::move(s.values);
            run.converged = s.converged;
            break;
        }
        case Criterion::Ergodic: {
            auto e = evaluate_ergodic_policy(spec, o.grid, policy, o.ladder, o.params);
            run.values = {{e.rho}};
            run.converged = e.converged;
            break;
        }
    }
    run.policy = policy;
    run.levels = levels;
    return run;
}

}  // namespace detail

/// Grid sweep for one criterion. For the ergodic criterion the gaps are
/// |rho_n - rho| and the loss is rho(pi_n) - rho(pi) in the true model, both
/// policy values taken through the same discount ladder.
inline SweepReport sweep_grid(const ModelSpec& true_spec, const PerturbationSchedule& sched, Criterion criterion,
                              const GridSweepOptions& opt, const ExecOptions& exec = {}) {
    const auto deltas = sweep_magnitudes(sched);
    const auto truth = detail::solve_criterion(true_spec, criterion, opt);
    NodeValues reference = truth.values;
    if (criterion == Criterion::Ergodic)
        reference = detail::replay(true_spec, criterion, truth.policy, truth.levels, opt).values;

    SweepReport rep;
    rep.criterion = criterion_name(criterion);
    rep.mode = mode_name(sched.mode);
    rep.tol = opt.params.tol;
    rep.converged = truth.converged;
    rep.rows.resize(deltas.size());
    std::vector<char> ok(deltas.size(), 1);
    parallel_for(deltas.size(), exec, [&](std::size_t n) {
        const ModelSpec model = perturb_model(true_spec, sched, deltas[n]);
        const auto sol = detail::solve_criterion(model, criterion, opt);
        const auto played = detail::replay(true_spec, criterion, sol.policy, sol.levels, opt);
        SweepRow& r = rep.rows[n];
        r.n = static_cast<int>(n);
        r.delta = deltas[n];
        r.control = n >= sched.magnitudes.size();
        r.value_gap = detail::sup_gap(sol.values, truth.values);
        r.policy_loss = detail::signed_sup(played.values, reference);
        r.aux = detail::sup_gap(played.values, sol.values);
        r.solver_iters = sol.iterations;
        ok[n] = sol.converged && played.converged;
    });
    for (char c : ok) rep.converged = rep.converged && c;
    if (criterion == Criterion::Ergodic)
        rep.notes.push_back("ergodic values measured at the reference node (x nearest 0, regime 1)");
    return rep;
}

struct EpsRow {
    int n = 0;
    double delta = 0.0;
    double gap = 0.0;
    bool pass = false;
};

struct EpsReport {
    std::string criterion;
    double eps = 0.0;
    double threshold = 0.0;  // Hamiltonian slack used for the degradation
    std::vector<EpsRow> rows;
    std::optional<int> first_n;  // smallest N with pass for all n >= N

    std::string verdict() const {
        return first_n ? "N = " + std::to_string(*first_n) : std::string("not reached within n_max");
    }
};

namespace detail {

/// Worst action whose Hamiltonian is within `slack` of the minimum.
inline std::vector<int> degrade_policy(const GridCoefficients& g, const ShiftSpec& s, const std::vector<double>& v,
                                       double slack) {
    std::vector<int> pol(static_cast<std::size_t>(g.N) * g.n, 0);
    std::vector<double> h(static_cast<std::size_t>(g.A));
    for (int i = 0; i < g.N; ++i)
        for (int k = 0; k < g.n; ++k) {
            if (s.pinned(g, k)) continue;
            double lo = kInf;
            for (int a = 0; a < g.A; ++a) {
                h[static_cast<std::size_t>(a)] = hamiltonian(g, s, v, i, k, a);
                lo = std::min(lo, h[static_cast<std::size_t>(a)]);
            }
            int worst = 0;
            double worst_h = -kInf;
            for (int a = 0; a < g.A; ++a) {
                const double ha = h[static_cast<std::size_t>(a)];
                if (ha <= lo + slack && ha > worst_h) {
                    worst_h = ha;
                    worst = a;
                }
            }
            pol[static_cast<std::size_t>(i) * g.n + k] = worst;
        }
    return pol;
}

inline std::vector<double> flat(const NodeValues& v) {
    std::vector<double> out;
    for (const auto& row : v) out.insert(out.end(), row.begin(), row.end());
    return out;
}

}  // namespace detail

/// Builds an eps-optimal policy for each model n by picking, at every node, the
/// worst action within a Hamiltonian slack that keeps the policy eps-optimal
/// in value (alpha eps discounted, eps / T finite-horizon, beta_min eps exit),
/// replays it in the true model and checks the gap against 3 eps.
inline EpsReport check_eps_optimality(const ModelSpec& true_spec, const PerturbationSchedule& sched,
                                      Criterion criterion, double eps, const GridSweepOptions& opt,
                                      const ExecOptions& exec = {}) {
    require(eps > 0.0, ErrorCode::Config, "eps must be positive");
    require(criterion != Criterion::Ergodic, ErrorCode::Config, "eps-check supports discounted, finite-horizon and exit");
    const auto deltas = sched.magnitudes;
    sched.check_magnitudes();
    const auto truth = detail::solve_criterion(true_spec, criterion, opt);

    EpsReport rep;
    rep.criterion = criterion_name(criterion);
    rep.eps = eps;
    switch (criterion) {
        case Criterion::Discounted: rep.threshold = true_spec.costs.discount * eps; break;
        case Criterion::FiniteHorizon: rep.threshold = eps / true_spec.costs.horizon; break;
        case Criterion::Exit: {
            const auto g = detail::grid_coefficients(true_spec, opt.grid);
            const double beta_min = *std::min_element(g.beta.begin(), g.beta.end());
            require(beta_min > 0.0, ErrorCode::Config, "exit eps-check needs a strictly positive discount beta");
            rep.threshold = beta_min * eps;
            break;
        }
        case Criterion::Ergodic: break;
    }
    rep.rows.resize(deltas.size());
    parallel_for(deltas.size(), exec, [&](std::size_t n) {
        const ModelSpec model = perturb_model(true_spec, sched, deltas[n]);
        const auto g = detail::grid_coefficients(model, opt.grid);
        NodeActions policy;
        std::vector<NodeActions> levels;
        if (criterion == Criterion::FiniteHorizon) {
            const auto sol = solve_finite_horizon(model, opt.grid, model.costs.horizon, opt.n_t, opt.params);
            detail::ShiftSpec none;
            none.kind = detail::Shift::None;
            for (int m = 0; m < opt.n_t; ++m)
                levels.push_back(detail::unflatten(
                    detail::degrade_policy(g, none, detail::flat(sol.time_values[static_cast<std::size_t>(m) + 1]),
                                           rep.threshold),
                    g.N, g.n));
            policy = levels.front();
        } else {
            detail::ShiftSpec s;
            GridSolution sol;
            if (criterion == Criterion::Discounted) {
                sol = solve_discounted(model, opt.grid, model.costs.discount, opt.params);
                s.kind = detail::Shift::Discount;
                s.alpha = model.costs.discount;
            } else {
                sol = solve_exit(model, opt.grid, opt.params);
                s = detail::exit_shift(model, opt.grid);
            }
            policy = detail::unflatten(detail::degrade_policy(g, s, detail::flat(sol.values), rep.threshold), g.N, g.n);
        }
        const auto played = detail::replay(true_spec, criterion, policy, levels, opt);
        EpsRow& r = rep.rows[n];
        r.n = static_cast<int>(n);
        r.delta = deltas[n];
        r.gap = detail::sup_gap(played.values, truth.values);
        r.pass = r.gap <= 3.0 * eps;
    });
    for (int n = static_cast<int>(rep.rows.size()) - 1; n >= 0 && rep.rows[static_cast<std::size_t>(n)].pass; --n)
        rep.first_n = n;
    return rep;
}

inline std::string sweep_csv(const SweepReport& rep) {
    std::ostringstream os;
    os << "n,delta,value_gap,policy_loss,aux,solver_iters,stderr\n";
    for (const auto& r : rep.rows)
        os << r.n << ',' << format_double(r.delta) << ',' << format_double(r.value_gap) << ','
           << format_double(r.policy_loss) << ',' << format_double(r.aux) << ',' << r.solver_iters << ','
           << format_double(r.std_error) << '\n';
    return os.str();
}

inline nlohmann::ordered_json sweep_json(const SweepReport& rep, const std::string& digest) {
    nlohmann::ordered_json j;
    j["criterion"] = rep.criterion;
    j["mode"] = rep.mode;
    j["config_sha256"] = digest;
    j["tol"] = rep.tol;
    j["converged"] = rep.converged;
    j["rows"] = rep.rows.size();
    if (const auto* c = rep.control_row()) j["control_row"] = c->n;
    j["notes"] = rep.notes;
    return j;
}

inline std::string eps_csv(const EpsReport& rep) {
    std::ostringstream os;
    os << "n,delta,gap,bound,pass\n";
    for (const auto& r : rep.rows)
        os << r.n << ',' << format_double(r.delta) << ',' << format_double(r.gap) << ',' << format_double(3.0 * rep.eps)
           << ',' << (r.pass ? 1 : 0) << '\n';
    return os.str();
}

}  // namespace rsctl
