#pragma once

// Monte Carlo estimators for the finite-horizon, discounted, ergodic and exit
// criteria. Path k always uses RngStream(seed, k); per-path values are reduced
// by fixed-topology pairwise summation, so results do not depend on threads.

#include "rsctl/parallel.hpp"
#include "rsctl/simulate.hpp"

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

namespace rsctl {

struct McEstimate {
    double value = 0.0;
    double std_error = 0.0;
    long paths = 0;
    double truncation_bias_bound = 0.0;  // discounted only
    double capped_fraction = 0.0;        // exit only
    bool cap_warning = false;            // more than 1% of exit paths capped
    double horizon = 0.0;                // simulated horizon (T, T_alpha, T_long or t_cap)
};

struct McOptions {
    long paths = 10000;
    std::uint64_t seed = 0;
    ExecOptions exec;
};

inline constexpr double kCapWarnFraction = 0.01;

namespace detail {

inline McEstimate summarize(const std::vector<double>& values) {
    McEstimate e;
    e.paths = static_cast<long>(values.size());
    const double n = static_cast<double>(values.size());
    e.value = pairwise_sum(values) / n;
    if (values.size() > 1) {
        std::vector<double> sq(values.size());
        for (std::size_t k = 0; k < values.size(); ++k) sq[k] = (values[k] - e.value) * (values[k] - e.value);
        e.std_error = std::sqrt(pairwise_sum(sq) / (n - 1.0) / n);
    }
    return e;
}

/// Runs `per_path(k, stream)` for every path and stores the returned value.
template <class PerPath>
std::vector<double> run_paths(const McOptions& opt, PerPath&& per_path) {
    require(opt.paths >= 1, ErrorCode::Config, "at least one path required");
    std::vector<double> values(static_cast<std::size_t>(opt.paths));
    parallel_for(values.size(), opt.exec, [&](std::size_t k) {
        RngStream stream(opt.seed, k);
        values[k] = per_path(stream);
    });
    return values;
}

struct NoJumpLog {
    void jump(double, int, int) {}
};

}  // namespace detail

/// E[ sum_k c(X_k, S_k, U_k) dt + c_T(X_T, S_T) ].
inline McEstimate mc_finite_horizon(const ModelSpec& spec, const Policy& policy, const Vector& x0, int i0,
                                    double horizon, double dt, const McOptions& opt) {
    const StepGrid grid = make_step_grid(horizon, dt);
    check_thinning(spec, grid.dt);
    const auto values = detail::run_paths(opt, [&](RngStream& stream) {
        struct V : detail::NoJumpLog {
            const ModelSpec* spec;
            double dt;
            double acc = 0.0;
            bool node(long, double, const Vector& x, int i, const Vector& u, bool last) {
                acc += last ? spec->costs.terminal.evaluate(x, i) : spec->costs.running.evaluate(x, i, u) * dt;
                return true;
            }
        } vis;
        vis.spec = &spec;
        vis.dt = grid.dt;
        ModelEvaluator ev(spec);
        std::size_t clamped = 0;
        detail::run_path(spec, ev, policy, x0, i0, grid, nullptr, stream, vis, clamped);
        return vis.acc;
    });
    McEstimate e = detail::summarize(values);
    e.horizon = horizon;
    return e;
}

/// Truncation horizon T_alpha = ln(M_c / (alpha eps)) / alpha, clipped at 0.
inline double discount_horizon(double bound, double alpha, double eps_tail) {
    require(alpha > 0.0, ErrorCode::Config, "discount rate must be positive");
    require(eps_tail > 0.0, ErrorCode::Config, "tail tolerance must be positive");
    require(std::isfinite(bound), ErrorCode::Unbounded, "discounted estimator needs a bounded running cost");
    if (bound <= 0.0) return 0.0;
    return std::max(0.0, std::log(bound / (alpha * eps_tail)) / alpha);
}

/// E[ int_0^{T_alpha} e^{-alpha t} c dt ]. Step k carries the weight
/// e^{-alpha t_k} (1 - e^{-alpha dt}) / alpha, the exact integral of the
/// discount factor over [t_k, t_k + dt].
inline McEstimate mc_discounted(const ModelSpec& spec, const Policy& policy, const Vector& x0, int i0, double alpha,
                                double dt, double eps_tail, const McOptions& opt) {
    const double t_alpha = discount_horizon(spec.costs.running_bound(), alpha, eps_tail);
    const StepGrid grid = make_step_grid(t_alpha, dt);
    check_thinning(spec, grid.dt);
    const double step_weight = -std::expm1(-alpha * grid.dt) / alpha;
    const auto values = detail::run_paths(opt, [&](RngStream& stream) {
        struct V : detail::NoJumpLog {
            const ModelSpec* spec;
            double alpha;
            double weight;
            double acc = 0.0;
            bool node(long, double t, const Vector& x, int i, const Vector& u, bool last) {
                if (!last) acc += std::exp(-alpha * t) * weight * spec->costs.running.evaluate(x, i, u);
                return true;
            }
        } vis;
        vis.spec = &spec;
        vis.alpha = alpha;
        vis.weight = step_weight;
        ModelEvaluator ev(spec);
        std::size_t clamped = 0;
        detail::run_path(spec, ev, policy, x0, i0, grid, nullptr, stream, vis, clamped);
        return vis.acc;
    });
    McEstimate e = detail::summarize(values);
    e.truncation_bias_bound = eps_tail;
    e.horizon = t_alpha;
    return e;
}

/// Time average of c over grid times t_k >= burn_in (k < K).
inline McEstimate mc_ergodic(const ModelSpec& spec, const Policy& policy, const Vector& x0, int i0, double t_long,
                             double burn_in, double dt, const McOptions& opt) {
    require(burn_in >= 0.0 && burn_in < t_long, ErrorCode::Config, "burn-in must lie in [0, T_long)");
    const StepGrid grid = make_step_grid(t_long, dt);
    check_thinning(spec, grid.dt);
    const auto values = detail::run_paths(opt, [&](RngStream& stream) {
        struct V : detail::NoJumpLog {
            const ModelSpec* spec;
            double burn_in;
            double sum = 0.0;
            long counted = 0;
            bool node(long, double t, const Vector& x, int i, const Vector& u, bool last) {
                if (!last && t >= burn_in - 1e-12) {
                    sum += spec->costs.running.evaluate(x, i, u);
                    ++counted;
                }
                return true;
            }
        } vis;
        vis.spec = &spec;
        vis.burn_in = burn_in;
        ModelEvaluator ev(spec);
        std::size_t clamped = 0;
        detail::run_path(spec, ev, policy, x0, i0, grid, nullptr, stream, vis, clamped);
        return vis.counted ? vis.sum / static_cast<double>(vis.counted) : 0.0;
    });
    McEstimate e = detail::summarize(values);
    e.horizon = t_long;
    return e;
}

/// E[ int_0^tau e^{-int beta} c dt + e^{-int beta} h(X_tau, S_tau) ] with
/// O, beta and h taken from spec.costs. Capped paths keep their accrued
/// running cost and are counted in capped_fraction.
inline McEstimate mc_exit(const ModelSpec& spec, const Policy& policy, const Vector& x0, int i0, double dt,
                          double t_cap, const McOptions& opt) {
    require(spec.costs.domain.in_closure(x0), ErrorCode::Shape, "initial state must lie in the closure of the domain");
    require(std::isfinite(t_cap) && t_cap > 0.0, ErrorCode::Config, "exit estimator needs a finite positive cap");
    const StepGrid grid = make_step_grid(t_cap, dt);
    check_thinning(spec, grid.dt);
    std::vector<char> capped(static_cast<std::size_t>(std::max(0L, opt.paths)), 0);
    std::vector<double> values(capped.size());
    require(opt.paths >= 1, ErrorCode::Config, "at least one path required");
    parallel_for(values.size(), opt.exec, [&](std::size_t k) {
        struct V : detail::NoJumpLog {
            const ModelSpec* spec;
            double dt;
            double discount = 1.0;
            double acc = 0.0;
            bool node(long, double, const Vector& x, int i, const Vector& u, bool last) {
                const auto& c = spec->costs;
                if (!c.domain.contains(x)) {
                    acc += discount * c.exit.evaluate(x, i);
                } else if (!last) {
                    acc += discount * c.running.evaluate(x, i, u) * dt;
                    discount *= std::exp(-c.exit_discount.evaluate(x, i, u) * dt);
                }
                return true;
            }
        } vis;
        vis.spec = &spec;
        vis.dt = grid.dt;
        RngStream stream(opt.seed, k);
        ModelEvaluator ev(spec);
        std::size_t clamped = 0;
        const Termination term =
            detail::run_path(spec, ev, policy, x0, i0, grid, &spec.costs.domain, stream, vis, clamped);
        values[k] = vis.acc;
        capped[k] = term == Termination::Cap;
    });
    McEstimate e = detail::summarize(values);
    long n_capped = 0;
    for (char c : capped) n_capped += c;
    e.capped_fraction = static_cast<double>(n_capped) / static_cast<double>(opt.paths);
    e.cap_warning = e.capped_fraction > kCapWarnFraction;
    e.horizon = t_cap;
    return e;
}

struct EstimateRow {
    std::string criterion;
    Vector x0;
    int i0 = 0;
    McEstimate estimate;
};

/// CSV export; x0 components joined by ';', regimes 1-based.
inline std::string estimates_csv(const std::vector<EstimateRow>& rows) {
    std::ostringstream os;
    os << "criterion,x0,i0,value,stderr,paths,bias_bound,capped_fraction\n";
    for (const auto& r : rows) {
        os << r.criterion << ',';
        for (Eigen::Index k = 0; k < r.x0.size(); ++k) os << (k ? ";" : "") << format_double(r.x0(k));
        const auto& e = r.estimate;
        os << ',' << r.i0 + 1 << ',' << format_double(e.value) << ',' << format_double(e.std_error) << ',' << e.paths
           << ',' << format_double(e.truncation_bias_bound) << ',' << format_double(e.capped_fraction) << '\n';
    }
    return os.str();
}

}  // namespace rsctl
