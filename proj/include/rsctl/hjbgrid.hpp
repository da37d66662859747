#pragma once

// Upwind finite differences for the weakly coupled HJB systems in d = 1.
//
// Row (i, k) of the generator for action a:
//   (L_a V)_i,k = lo (V_i,k-1 - V_i,k) + up (V_i,k+1 - V_i,k) + sum_j m_ij V_j,k
// with lo = a/dx^2 + max(-b, 0)/dx and up = a/dx^2 + max(b, 0)/dx. The end
// nodes reflect (the missing neighbour weight is dropped), so constants are
// preserved exactly. Exit problems pin the end nodes to h instead.

#include "rsctl/csv.hpp"
#include "rsctl/error.hpp"
#include "rsctl/model.hpp"
#include "rsctl/policy.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

namespace rsctl {

struct Grid1D {
    double x_min = -1.0;
    double x_max = 1.0;
    int n_x = 11;

    Grid1D() = default;
    Grid1D(double lo, double hi, int n) : x_min(lo), x_max(hi), n_x(n) {
        require(n >= 11, ErrorCode::Shape, "grid needs at least 11 nodes");
        require(std::isfinite(lo) && std::isfinite(hi) && hi > lo, ErrorCode::Shape, "grid interval must be non-empty");
    }

    double dx() const { return (x_max - x_min) / (n_x - 1); }
    double node(int k) const { return k == n_x - 1 ? x_max : x_min + k * dx(); }
    int nearest(double x) const {
        const long k = std::lround((x - x_min) / dx());
        return static_cast<int>(std::clamp(k, 0L, static_cast<long>(n_x - 1)));
    }
};

enum class Criterion { Discounted, FiniteHorizon, Exit, Ergodic };

inline const char* criterion_name(Criterion c) {
    switch (c) {
        case Criterion::Discounted: return "discounted";
        case Criterion::FiniteHorizon: return "finite-horizon";
        case Criterion::Exit: return "exit";
        case Criterion::Ergodic: return "ergodic";
    }
    return "?";
}

struct SolverParams {
    double tol = 1e-8;
    int max_iter = 200;         // policy-iteration steps
    int max_sweeps = 200000;    // Gauss-Seidel sweeps per linear solve
};

using NodeValues = std::vector<std::vector<double>>;  // [regime][node]
using NodeActions = std::vector<std::vector<int>>;    // [regime][node]

struct GridSolution {
    Criterion criterion = Criterion::Discounted;
    Grid1D grid;
    NodeValues values;   // at t = 0 for finite-horizon
    NodeActions policy;  // at t = 0 for finite-horizon
    double alpha = 0.0;
    double horizon = 0.0;
    std::vector<double> times;            // finite-horizon levels t_0..t_{n_t}
    std::vector<NodeValues> time_values;  // [level]
    std::vector<NodeActions> time_policy; // [level], n_t entries
    int iterations = 0;
    long sweeps = 0;
    double residual = 0.0;
    std::vector<double> residual_history;
    double tol = 0.0;
    bool converged = true;

    double value(int i, double x) const { return values[static_cast<std::size_t>(i)][static_cast<std::size_t>(grid.nearest(x))]; }

    GridPolicyTable policy_table() const {
        GridPolicyTable t;
        t.x_min = grid.x_min;
        t.x_max = grid.x_max;
        t.n_x = grid.n_x;
        if (!time_policy.empty()) {
            t.levels = time_policy;
            t.level_step = horizon / static_cast<double>(time_policy.size());
        } else {
            t.levels = {policy};
        }
        return t;
    }
};

struct ErgodicEstimate {
    double rho = 0.0;
    NodeValues relative_values;
    NodeActions policy;
    Grid1D grid;
    std::vector<double> ladder;
    std::vector<double> scaled_values;  // alpha * V_alpha at the reference node
    int reference_node = 0;
    std::vector<int> iterations;
    bool converged = true;
    double tol = 0.0;

    GridPolicyTable policy_table() const {
        GridPolicyTable t;
        t.x_min = grid.x_min;
        t.x_max = grid.x_max;
        t.n_x = grid.n_x;
        t.levels = {policy};
        return t;
    }
};

inline const std::vector<double>& default_ladder() {
    static const std::vector<double> ladder = {0.2, 0.1, 0.05, 0.025};
    return ladder;
}

namespace detail {

/// Per-(regime, node, action) coefficients on the grid.
struct GridCoefficients {
    int N = 0;
    int n = 0;
    int A = 0;
    double dx = 0.0;
    std::vector<double> diffusion;  // [i*n + k]
    std::vector<double> drift;      // [(i*n + k)*A + a]
    std::vector<double> cost;
    std::vector<double> beta;
    bool constant_rates = true;
    Matrix rates0;
    std::vector<double> rates;  // [((k*A + a)*N + i)*N + j]

    std::size_t at(int i, int k, int a) const {
        return (static_cast<std::size_t>(i) * n + k) * A + a;
    }
    double rate(int i, int j, int k, int a) const {
        if (constant_rates) return rates0(i, j);
        return rates[((static_cast<std::size_t>(k) * A + a) * N + i) * N + j];
    }
    double lower(int i, int k, int a) const {
        if (k == 0) return 0.0;
        return diffusion[static_cast<std::size_t>(i) * n + k] / (dx * dx) + std::max(-drift[at(i, k, a)], 0.0) / dx;
    }
    double upper(int i, int k, int a) const {
        if (k == n - 1) return 0.0;
        return diffusion[static_cast<std::size_t>(i) * n + k] / (dx * dx) + std::max(drift[at(i, k, a)], 0.0) / dx;
    }
};

inline GridCoefficients grid_coefficients(const ModelSpec& spec, const Grid1D& grid) {
    require(spec.dim == 1, ErrorCode::Shape, "grid solvers require dim = 1");
    spec.check_shapes();
    GridCoefficients g;
    g.N = spec.regime_count();
    g.n = grid.n_x;
    g.A = spec.actions.size();
    g.dx = grid.dx();
    const auto cells = static_cast<std::size_t>(g.N) * g.n;
    g.diffusion.resize(cells);
    g.drift.resize(cells * g.A);
    g.cost.resize(cells * g.A);
    g.beta.resize(cells * g.A);
    g.constant_rates = spec.generator.is_constant();
    if (g.constant_rates) g.rates0 = spec.generator.rates;
    else g.rates.resize(static_cast<std::size_t>(g.n) * g.A * g.N * g.N);

    ModelEvaluator ev(spec);
    Vector x(1);
    double a_min = kInf;
    for (int k = 0; k < g.n; ++k) {
        x(0) = grid.node(k);
        for (int i = 0; i < g.N; ++i) {
            const Matrix& s = ev.diffusion(x, i);
            const double a = 0.5 * s.squaredNorm();
            a_min = std::min(a_min, a);
            g.diffusion[static_cast<std::size_t>(i) * g.n + k] = a;
            for (int act = 0; act < g.A; ++act) {
                const Vector& u = spec.actions[act];
                const auto idx = g.at(i, k, act);
                g.drift[idx] = ev.drift(x, i, u)(0);
                g.cost[idx] = spec.costs.running.evaluate(x, i, u);
                g.beta[idx] = spec.costs.exit_discount.evaluate(x, i, u);
                require(std::isfinite(g.drift[idx]) && std::isfinite(g.cost[idx]), ErrorCode::NonFinite,
                        "non-finite coefficient on the grid");
            }
        }
        if (!g.constant_rates) {
            for (int act = 0; act < g.A; ++act) {
                const Matrix m = spec.generator.evaluate(x, spec.actions[act]);
                for (int i = 0; i < g.N; ++i)
                    for (int j = 0; j < g.N; ++j) g.rates[((static_cast<std::size_t>(k) * g.A + act) * g.N + i) * g.N + j] = m(i, j);
            }
        }
    }
    require(a_min > 0.0, ErrorCode::Degenerate, "diffusion degenerates on the grid (min a = " + format_double(a_min) + ")");
    return g;
}

enum class Shift { Discount, Exit, TimeStep, None };

struct ShiftSpec {
    Shift kind = Shift::Discount;
    double alpha = 0.0;   // Discount
    double inv_dt = 0.0;  // TimeStep
    bool dirichlet = false;
    std::vector<double> boundary;  // [i*2 + side] for Dirichlet rows
    const std::vector<double>* previous = nullptr;  // TimeStep: later level

    double shift(const GridCoefficients& g, int i, int k, int a) const {
        switch (kind) {
            case Shift::Discount: return alpha;
            case Shift::Exit: return g.beta[g.at(i, k, a)];
            case Shift::TimeStep: return inv_dt;
            case Shift::None: return 0.0;
        }
        return 0.0;
    }
    bool pinned(const GridCoefficients& g, int k) const { return dirichlet && (k == 0 || k == g.n - 1); }
};

/// (shift - L_pi) V = rhs, stored per regime as a tridiagonal band plus
/// same-node coupling to the other regimes.
struct LinearSystem {
    int N = 0;
    int n = 0;
    std::vector<double> lo, up, diag, rhs;  // [i*n + k]; matrix entries are -lo, diag, -up
    std::vector<double> coupling;           // [(i*n + k)*N + j], matrix entry -coupling
    bool coupled = false;
};

inline LinearSystem assemble(const GridCoefficients& g, const std::vector<int>& pol, const ShiftSpec& s,
                             const std::vector<double>* previous) {
    LinearSystem sys;
    sys.N = g.N;
    sys.n = g.n;
    const auto cells = static_cast<std::size_t>(g.N) * g.n;
    sys.lo.assign(cells, 0.0);
    sys.up.assign(cells, 0.0);
    sys.diag.assign(cells, 0.0);
    sys.rhs.assign(cells, 0.0);
    sys.coupling.assign(cells * g.N, 0.0);
    for (int i = 0; i < g.N; ++i) {
        for (int k = 0; k < g.n; ++k) {
            const auto r = static_cast<std::size_t>(i) * g.n + k;
            if (s.pinned(g, k)) {
                sys.diag[r] = 1.0;
                sys.rhs[r] = s.boundary[static_cast<std::size_t>(i) * 2 + (k == 0 ? 0 : 1)];
                continue;
            }
            const int a = pol[r];
            const double lo = g.lower(i, k, a);
            const double up = g.upper(i, k, a);
            double off = 0.0;
            for (int j = 0; j < g.N; ++j) {
                if (j == i) continue;
                const double m = g.rate(i, j, k, a);
                sys.coupling[r * g.N + j] = m;
                off += m;
                if (m != 0.0) sys.coupled = true;
            }
            sys.lo[r] = lo;
            sys.up[r] = up;
            sys.diag[r] = s.shift(g, i, k, a) + lo + up - g.rate(i, i, k, a);
            sys.rhs[r] = g.cost[g.at(i, k, a)];
            if (s.kind == Shift::TimeStep) sys.rhs[r] += s.inv_dt * (*previous)[r];

            // M-matrix structure: nonnegative neighbour weights and weak diagonal dominance.
            const double neighbours = lo + up + off;
            bool ok = lo >= 0.0 && up >= 0.0 && sys.diag[r] > 0.0 &&
                      sys.diag[r] >= neighbours - 1e-12 * std::max(1.0, neighbours);
            for (int j = 0; j < g.N && ok; ++j)
                if (j != i && sys.coupling[r * g.N + j] < 0.0) ok = false;
            if (!ok)
                throw Error(ErrorCode::Rates, "assembled operator is not an M-matrix at regime " +
                                                  std::to_string(i + 1) + ", node " + std::to_string(k));
        }
    }
    return sys;
}

struct SolveStats {
    long sweeps = 0;
    bool converged = true;
};

/// Gauss-Seidel over regimes 1..N with a Thomas solve per regime. Stops once
/// the geometric estimate of the remaining error drops below
/// rel_tol * max|V|, or when an iterate repeats.
inline SolveStats solve_system(const LinearSystem& sys, std::vector<double>& v, double rel_tol, long max_sweeps) {
    const int n = sys.n;
    std::vector<double> rhs(static_cast<std::size_t>(n));
    std::vector<double> cp(static_cast<std::size_t>(n));
    std::vector<double> dp(static_cast<std::size_t>(n));
    SolveStats st;
    double prev_change = 0.0;
    for (long s = 1; s <= max_sweeps; ++s) {
        double change = 0.0;
        double scale = 0.0;
        for (int i = 0; i < sys.N; ++i) {
            const auto base = static_cast<std::size_t>(i) * n;
            for (int k = 0; k < n; ++k) {
                double r = sys.rhs[base + k];
                if (sys.coupled) {
                    const auto row = (base + k) * sys.N;
                    for (int j = 0; j < sys.N; ++j)
                        if (j != i) r += sys.coupling[row + j] * v[static_cast<std::size_t>(j) * n + k];
                }
                rhs[static_cast<std::size_t>(k)] = r;
            }
            // Thomas: -lo_k V_k-1 + diag_k V_k - up_k V_k+1 = rhs_k.
            cp[0] = -sys.up[base] / sys.diag[base];
            dp[0] = rhs[0] / sys.diag[base];
            for (int k = 1; k < n; ++k) {
                const double m = sys.diag[base + k] + sys.lo[base + k] * cp[static_cast<std::size_t>(k - 1)];
                cp[static_cast<std::size_t>(k)] = -sys.up[base + k] / m;
                dp[static_cast<std::size_t>(k)] = (rhs[static_cast<std::size_t>(k)] + sys.lo[base + k] * dp[static_cast<std::size_t>(k - 1)]) / m;
            }
            double next = dp[static_cast<std::size_t>(n - 1)];
            for (int k = n - 1; k >= 0; --k) {
                if (k < n - 1) next = dp[static_cast<std::size_t>(k)] - cp[static_cast<std::size_t>(k)] * next;
                double& slot = v[base + k];
                change = std::max(change, std::abs(next - slot));
                slot = next;
                scale = std::max(scale, std::abs(next));
            }
        }
        st.sweeps = s;
        if (!sys.coupled || sys.N == 1 || change == 0.0) return st;
        if (change <= 1e-15 * scale) return st;
        if (s >= 2 && prev_change > 0.0) {
            const double q = change / prev_change;
            if (q < 1.0 && change * q / (1.0 - q) <= rel_tol * scale) return st;
        }
        prev_change = change;
    }
    st.converged = false;
    return st;
}

/// Hamiltonian H_a(V)(i,k) = L_a V + c_a - shift_a V_i,k.
inline double hamiltonian(const GridCoefficients& g, const ShiftSpec& s, const std::vector<double>& v, int i, int k,
                          int a) {
    const auto r = static_cast<std::size_t>(i) * g.n + k;
    const double vk = v[r];
    double h = g.cost[g.at(i, k, a)] - s.shift(g, i, k, a) * vk;
    if (s.kind == Shift::TimeStep && s.previous) h += s.inv_dt * (*s.previous)[r];
    if (k > 0) h += g.lower(i, k, a) * (v[r - 1] - vk);
    if (k < g.n - 1) h += g.upper(i, k, a) * (v[r + 1] - vk);
    for (int j = 0; j < g.N; ++j) h += g.rate(i, j, k, a) * v[static_cast<std::size_t>(j) * g.n + k];
    return h;
}

/// Pointwise argmin with lowest-index tie-break. Also returns the scaled
/// residual max |min_a H_a| / diag of the minimizing row.
inline std::vector<int> improve_policy(const GridCoefficients& g, const ShiftSpec& s, const std::vector<double>& v,
                                       double* residual) {
    std::vector<int> pol(static_cast<std::size_t>(g.N) * g.n, 0);
    double res = 0.0;
    for (int i = 0; i < g.N; ++i) {
        for (int k = 0; k < g.n; ++k) {
            if (s.pinned(g, k)) continue;
            int best = 0;
            double best_h = hamiltonian(g, s, v, i, k, 0);
            for (int a = 1; a < g.A; ++a) {
                const double h = hamiltonian(g, s, v, i, k, a);
                if (h < best_h) {
                    best_h = h;
                    best = a;
                }
            }
            pol[static_cast<std::size_t>(i) * g.n + k] = best;
            if (residual) {
                const double d = s.shift(g, i, k, best) + g.lower(i, k, best) + g.upper(i, k, best) - g.rate(i, i, k, best);
                res = std::max(res, std::abs(best_h) / std::max(d, 1e-300));
            }
        }
    }
    if (residual) *residual = res;
    return pol;
}

inline NodeValues unflatten(const std::vector<double>& v, int N, int n) {
    NodeValues out(static_cast<std::size_t>(N));
    for (int i = 0; i < N; ++i)
        out[static_cast<std::size_t>(i)].assign(v.begin() + static_cast<long>(i) * n, v.begin() + static_cast<long>(i + 1) * n);
    return out;
}

inline NodeActions unflatten(const std::vector<int>& p, int N, int n) {
    NodeActions out(static_cast<std::size_t>(N));
    for (int i = 0; i < N; ++i)
        out[static_cast<std::size_t>(i)].assign(p.begin() + static_cast<long>(i) * n, p.begin() + static_cast<long>(i + 1) * n);
    return out;
}

inline std::vector<int> flatten(const NodeActions& p, int N, int n, int A) {
    require(static_cast<int>(p.size()) == N, ErrorCode::Shape, "policy table: one row per regime required");
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(N) * n);
    for (const auto& row : p) {
        require(static_cast<int>(row.size()) == n, ErrorCode::Shape, "policy table: one entry per node required");
        for (int a : row) {
            require(a >= 0 && a < A, ErrorCode::Shape, "policy table: action index out of range");
            out.push_back(a);
        }
    }
    return out;
}

inline double inner_tol(const SolverParams& p) { return p.tol * 1e-3; }

/// Policy iteration for the stationary problems (discounted, exit).
inline GridSolution policy_iteration(const GridCoefficients& g, const ShiftSpec& s, const SolverParams& p) {
    GridSolution sol;
    sol.tol = p.tol;
    const auto cells = static_cast<std::size_t>(g.N) * g.n;
    std::vector<double> v(cells, 0.0);
    if (s.dirichlet)
        for (int i = 0; i < g.N; ++i) {
            v[static_cast<std::size_t>(i) * g.n] = s.boundary[static_cast<std::size_t>(i) * 2];
            v[static_cast<std::size_t>(i) * g.n + g.n - 1] = s.boundary[static_cast<std::size_t>(i) * 2 + 1];
        }
    std::vector<int> pol = improve_policy(g, s, v, nullptr);
    sol.converged = false;
    for (int it = 1; it <= p.max_iter; ++it) {
        const LinearSystem sys = assemble(g, pol, s, nullptr);
        const std::vector<double> old = v;
        const SolveStats st = solve_system(sys, v, inner_tol(p), p.max_sweeps);
        sol.sweeps += st.sweeps;
        double change = 0.0;
        double scale = 0.0;
        for (std::size_t r = 0; r < cells; ++r) {
            change = std::max(change, std::abs(v[r] - old[r]));
            scale = std::max(scale, std::abs(v[r]));
        }
        double res = 0.0;
        std::vector<int> next = improve_policy(g, s, v, &res);
        sol.residual = res;
        sol.residual_history.push_back(res);
        sol.iterations = it;
        if (!st.converged) break;
        const bool stable = next == pol;
        pol = std::move(next);
        if (stable || (it > 1 && change <= 1e-13 * scale)) {
            sol.converged = true;
            break;
        }
    }
    sol.values = unflatten(v, g.N, g.n);
    sol.policy = unflatten(pol, g.N, g.n);
    return sol;
}

inline ShiftSpec exit_shift(const ModelSpec& spec, const Grid1D& grid) {
    ShiftSpec s;
    s.kind = Shift::Exit;
    s.dirichlet = true;
    Vector x(1);
    for (int i = 0; i < spec.regime_count(); ++i) {
        x(0) = grid.x_min;
        s.boundary.push_back(spec.costs.exit.evaluate(x, i));
        x(0) = grid.x_max;
        s.boundary.push_back(spec.costs.exit.evaluate(x, i));
    }
    return s;
}

inline void require_bounded(const ModelSpec& spec) {
    require(std::isfinite(spec.costs.running_bound()), ErrorCode::Unbounded,
            "grid solvers need a bounded running cost; use the Riccati path for LQ models");
}

}  // namespace detail

/// min_a [L_a V + c_a] = alpha V by policy iteration.
inline GridSolution solve_discounted(const ModelSpec& spec, const Grid1D& grid, double alpha,
                                     const SolverParams& params = {}) {
    detail::require_bounded(spec);
    require(alpha > 0.0, ErrorCode::Config, "discount rate must be positive");
    const auto g = detail::grid_coefficients(spec, grid);
    detail::ShiftSpec s;
    s.kind = detail::Shift::Discount;
    s.alpha = alpha;
    GridSolution sol = detail::policy_iteration(g, s, params);
    sol.criterion = Criterion::Discounted;
    sol.grid = grid;
    sol.alpha = alpha;
    return sol;
}

/// min_a [L_a phi - beta_a phi + c_a] = 0 on the open grid interval, phi = h at both ends.
inline GridSolution solve_exit(const ModelSpec& spec, const Grid1D& grid, const SolverParams& params = {}) {
    detail::require_bounded(spec);
    const auto g = detail::grid_coefficients(spec, grid);
    GridSolution sol = detail::policy_iteration(g, detail::exit_shift(spec, grid), params);
    sol.criterion = Criterion::Exit;
    sol.grid = grid;
    return sol;
}

namespace detail {

/// Backward stepping over n_t levels. With `fixed` set, the given per-level
/// policy is used instead of the argmin.
inline GridSolution finite_horizon(const ModelSpec& spec, const Grid1D& grid, double horizon, int n_t,
                                   const SolverParams& p, const std::vector<NodeActions>* fixed) {
    require_bounded(spec);
    require(horizon > 0.0 && std::isfinite(horizon), ErrorCode::Config, "horizon must be positive");
    require(n_t >= 1, ErrorCode::Config, "need at least one time level");
    const double dt = horizon / n_t;
    require(dt <= 0.1 + 1e-12, ErrorCode::Step, "time step " + format_double(dt) + " exceeds 0.1");
    const auto g = grid_coefficients(spec, grid);
    const auto cells = static_cast<std::size_t>(g.N) * g.n;

    GridSolution sol;
    sol.criterion = Criterion::FiniteHorizon;
    sol.grid = grid;
    sol.horizon = horizon;
    sol.tol = p.tol;
    sol.times.resize(static_cast<std::size_t>(n_t) + 1);
    for (int m = 0; m <= n_t; ++m) sol.times[static_cast<std::size_t>(m)] = m == n_t ? horizon : m * dt;
    sol.time_values.resize(static_cast<std::size_t>(n_t) + 1);
    sol.time_policy.resize(static_cast<std::size_t>(n_t));
    if (fixed) require(static_cast<int>(fixed->size()) == n_t, ErrorCode::Shape, "policy table: one level per time step");

    std::vector<double> psi(cells);
    Vector x(1);
    for (int i = 0; i < g.N; ++i)
        for (int k = 0; k < g.n; ++k) {
            x(0) = grid.node(k);
            psi[static_cast<std::size_t>(i) * g.n + k] = spec.costs.terminal.evaluate(x, i);
        }
    sol.time_values.back() = unflatten(psi, g.N, g.n);

    ShiftSpec explicit_h;
    explicit_h.kind = Shift::None;
    ShiftSpec step;
    step.kind = Shift::TimeStep;
    step.inv_dt = 1.0 / dt;
    sol.iterations = 0;
    double worst_residual = 0.0;
    for (int m = n_t - 1; m >= 0; --m) {
        step.previous = &psi;
        std::vector<int> pol = fixed ? flatten((*fixed)[static_cast<std::size_t>(m)], g.N, g.n, g.A)
                                     : improve_policy(g, explicit_h, psi, nullptr);
        std::vector<double> next = psi;
        // The semi-implicit step is the first iterate; policy iteration on
        // the implicit level equation follows until the policy is stable.
        bool stable = fixed != nullptr;
        for (int it = 1; it <= p.max_iter; ++it) {
            const LinearSystem sys = assemble(g, pol, step, &psi);
            const SolveStats st = solve_system(sys, next, inner_tol(p), p.max_sweeps);
            sol.sweeps += st.sweeps;
            ++sol.iterations;
            if (!st.converged) sol.converged = false;
            if (fixed) break;
            double res = 0.0;
            std::vector<int> better = improve_policy(g, step, next, &res);
            if (better == pol) {
                worst_residual = std::max(worst_residual, res);
                stable = true;
                break;
            }
            pol = std::move(better);
        }
        if (!stable) sol.converged = false;
        psi = std::move(next);
        sol.time_values[static_cast<std::size_t>(m)] = unflatten(psi, g.N, g.n);
        sol.time_policy[static_cast<std::size_t>(m)] = unflatten(pol, g.N, g.n);
    }
    sol.residual = worst_residual;
    sol.values = sol.time_values.front();
    sol.policy = sol.time_policy.front();
    return sol;
}

}  // namespace detail

/// Backward stepping: each level starts from the argmin of the Hamiltonian at
/// the later level and is then solved implicitly with policy iteration.
inline GridSolution solve_finite_horizon(const ModelSpec& spec, const Grid1D& grid, double horizon, int n_t,
                                         const SolverParams& params = {}) {
    return detail::finite_horizon(spec, grid, horizon, n_t, params, nullptr);
}

/// Discounted value of a fixed stationary policy table (one linear solve).
inline GridSolution evaluate_policy_value(const ModelSpec& spec, const Grid1D& grid, const NodeActions& table,
                                          double alpha, const SolverParams& params = {}) {
    detail::require_bounded(spec);
    require(alpha > 0.0, ErrorCode::Config, "discount rate must be positive");
    const auto g = detail::grid_coefficients(spec, grid);
    const auto pol = detail::flatten(table, g.N, g.n, g.A);
    detail::ShiftSpec s;
    s.kind = detail::Shift::Discount;
    s.alpha = alpha;
    std::vector<double> v(pol.size(), 0.0);
    const auto st = detail::solve_system(detail::assemble(g, pol, s, nullptr), v, detail::inner_tol(params), params.max_sweeps);
    GridSolution sol;
    sol.criterion = Criterion::Discounted;
    sol.grid = grid;
    sol.alpha = alpha;
    sol.tol = params.tol;
    sol.iterations = 1;
    sol.sweeps = st.sweeps;
    sol.converged = st.converged;
    sol.values = detail::unflatten(v, g.N, g.n);
    sol.policy = table;
    return sol;
}

/// Exit cost of a fixed policy table; boundary rows are pinned to h.
inline GridSolution evaluate_exit_policy(const ModelSpec& spec, const Grid1D& grid, const NodeActions& table,
                                         const SolverParams& params = {}) {
    detail::require_bounded(spec);
    const auto g = detail::grid_coefficients(spec, grid);
    const auto pol = detail::flatten(table, g.N, g.n, g.A);
    const auto s = detail::exit_shift(spec, grid);
    std::vector<double> v(pol.size(), 0.0);
    const auto st = detail::solve_system(detail::assemble(g, pol, s, nullptr), v, detail::inner_tol(params), params.max_sweeps);
    GridSolution sol;
    sol.criterion = Criterion::Exit;
    sol.grid = grid;
    sol.tol = params.tol;
    sol.iterations = 1;
    sol.sweeps = st.sweeps;
    sol.converged = st.converged;
    sol.values = detail::unflatten(v, g.N, g.n);
    sol.policy = table;
    return sol;
}

/// Finite-horizon cost of a fixed time-indexed policy (levels 0..n_t-1).
inline GridSolution evaluate_finite_horizon_policy(const ModelSpec& spec, const Grid1D& grid,
                                                   const std::vector<NodeActions>& levels, double horizon,
                                                   const SolverParams& params = {}) {
    return detail::finite_horizon(spec, grid, horizon, static_cast<int>(levels.size()), params, &levels);
}

namespace detail {

inline double richardson(const std::vector<double>& ladder, const std::vector<double>& scaled) {
    std::vector<std::size_t> order(ladder.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ladder[a] < ladder[b]; });
    if (order.size() == 1) return scaled[order[0]];
    const double a1 = ladder[order[0]], a2 = ladder[order[1]];
    const double f1 = scaled[order[0]], f2 = scaled[order[1]];
    return f1 - a1 * (f2 - f1) / (a2 - a1);
}

inline void check_ladder(const std::vector<double>& ladder) {
    require(!ladder.empty(), ErrorCode::Config, "discount ladder is empty");
    for (double a : ladder) require(a > 0.0 && std::isfinite(a), ErrorCode::Config, "ladder entries must be positive");
    for (std::size_t k = 0; k < ladder.size(); ++k)
        for (std::size_t j = k + 1; j < ladder.size(); ++j)
            require(ladder[k] != ladder[j], ErrorCode::Config, "ladder entries must be distinct");
}

template <class Solve>
ErgodicEstimate vanishing_discount(const Grid1D& grid, const std::vector<double>& ladder, const SolverParams& p,
                                   Solve&& solve) {
    check_ladder(ladder);
    ErgodicEstimate est;
    est.grid = grid;
    est.ladder = ladder;
    est.tol = p.tol;
    est.reference_node = grid.nearest(0.0);
    const auto ref = static_cast<std::size_t>(est.reference_node);
    std::size_t smallest = 0;
    GridSolution best;
    for (std::size_t k = 0; k < ladder.size(); ++k) {
        GridSolution s = solve(ladder[k]);
        est.scaled_values.push_back(ladder[k] * s.values[0][ref]);
        est.iterations.push_back(s.iterations);
        if (!s.converged) est.converged = false;
        if (k == 0 || ladder[k] < ladder[smallest]) {
            smallest = k;
            best = std::move(s);
        }
    }
    est.rho = richardson(ladder, est.scaled_values);
    const double pin = best.values[0][ref];
    est.relative_values = best.values;
    for (auto& row : est.relative_values)
        for (double& v : row) v -= pin;
    est.policy = best.policy;
    return est;
}

}  // namespace detail

/// Vanishing discount: rho from a linear extrapolation to alpha = 0 of
/// alpha V_alpha(reference) through the two smallest ladder entries.
inline ErgodicEstimate estimate_ergodic(const ModelSpec& spec, const Grid1D& grid,
                                        const std::vector<double>& ladder = default_ladder(),
                                        const SolverParams& params = {}) {
    return detail::vanishing_discount(grid, ladder, params,
                                      [&](double a) { return solve_discounted(spec, grid, a, params); });
}

/// Long-run average cost of a fixed stationary policy, same extrapolation.
inline ErgodicEstimate evaluate_ergodic_policy(const ModelSpec& spec, const Grid1D& grid, const NodeActions& table,
                                               const std::vector<double>& ladder = default_ladder(),
                                               const SolverParams& params = {}) {
    return detail::vanishing_discount(grid, ladder, params,
                                      [&](double a) { return evaluate_policy_value(spec, grid, table, a, params); });
}

/// CSV with header criterion,regime,x,value,action_index[,t]; regimes 1-based.
/// Finite-horizon solutions list every time level (the final level has no action, -1).
inline std::string grid_solution_csv(const GridSolution& sol) {
    std::ostringstream os;
    const bool timed = !sol.time_values.empty();
    os << "criterion,regime,x,value,action_index" << (timed ? ",t" : "") << '\n';
    const auto emit = [&](const NodeValues& v, const NodeActions* p, const double* t) {
        for (std::size_t i = 0; i < v.size(); ++i)
            for (std::size_t k = 0; k < v[i].size(); ++k) {
                os << criterion_name(sol.criterion) << ',' << i + 1 << ',' << format_double(sol.grid.node(static_cast<int>(k)))
                   << ',' << format_double(v[i][k]) << ',' << (p ? (*p)[i][k] : -1);
                if (t) os << ',' << format_double(*t);
                os << '\n';
            }
    };
    if (!timed) {
        emit(sol.values, &sol.policy, nullptr);
    } else {
        for (std::size_t m = 0; m < sol.time_values.size(); ++m)
            emit(sol.time_values[m], m < sol.time_policy.size() ? &sol.time_policy[m] : nullptr, &sol.times[m]);
    }
    return os.str();
}

inline std::string ergodic_csv(const ErgodicEstimate& est) {
    std::ostringstream os;
    os << "criterion,regime,x,value,action_index\n";
    for (std::size_t i = 0; i < est.relative_values.size(); ++i)
        for (std::size_t k = 0; k < est.relative_values[i].size(); ++k)
            os << "ergodic," << i + 1 << ',' << format_double(est.grid.node(static_cast<int>(k))) << ','
               << format_double(est.relative_values[i][k]) << ',' << est.policy[i][k] << '\n';
    return os.str();
}

inline nlohmann::ordered_json grid_solution_json(const GridSolution& sol) {
    nlohmann::ordered_json j;
    j["criterion"] = criterion_name(sol.criterion);
    j["x_min"] = sol.grid.x_min;
    j["x_max"] = sol.grid.x_max;
    j["n_x"] = sol.grid.n_x;
    if (sol.criterion == Criterion::Discounted) j["alpha"] = sol.alpha;
    if (sol.criterion == Criterion::FiniteHorizon) {
        j["horizon"] = sol.horizon;
        j["n_t"] = sol.time_policy.size();
    }
    j["iterations"] = sol.iterations;
    j["sweeps"] = sol.sweeps;
    j["residual"] = sol.residual;
    j["residual_history"] = sol.residual_history;
    j["tol"] = sol.tol;
    j["converged"] = sol.converged;
    if (!sol.converged) j["error"] = "E_MAXITER";
    return j;
}

inline nlohmann::ordered_json ergodic_json(const ErgodicEstimate& est) {
    nlohmann::ordered_json j;
    j["criterion"] = "ergodic";
    j["rho"] = est.rho;
    j["ladder"] = est.ladder;
    j["scaled_values"] = est.scaled_values;
    j["reference_node"] = est.reference_node;
    j["reference_x"] = est.grid.node(est.reference_node);
    j["iterations"] = est.iterations;
    j["tol"] = est.tol;
    j["converged"] = est.converged;
    if (!est.converged) j["error"] = "E_MAXITER";
    j["note"] = "time-average estimate; constant-cost benchmarks check the solver algebra only";
    return j;
}

}  // namespace rsctl
