#pragma once

// Euler-Maruyama for the continuous state, per-step thinning for regime jumps.

#include "rsctl/csv.hpp"
#include "rsctl/error.hpp"
#include "rsctl/model.hpp"
#include "rsctl/policy.hpp"
#include "rsctl/rng.hpp"

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

namespace rsctl {

enum class Termination { Horizon, Exit, Cap };

inline const char* termination_name(Termination t) {
    switch (t) {
        case Termination::Horizon: return "horizon";
        case Termination::Exit: return "exit";
        case Termination::Cap: return "cap";
    }
    return "?";
}

struct JumpEvent {
    double t = 0.0;
    int from = 0;
    int to = 0;
};

/// Nodes k = 0..K at t_k = k * dt. actions[k] is the control applied at node k
/// (evaluated at the final node too, for the record).
struct PathSample {
    double dt = 0.0;
    std::vector<double> times;
    std::vector<Vector> states;
    std::vector<int> regimes;
    std::vector<Vector> actions;
    std::vector<JumpEvent> jumps;
    Termination termination = Termination::Horizon;
    std::size_t clamped_steps = 0;
};

struct StepGrid {
    long steps = 0;
    double dt = 0.0;
};

/// Uniform grid over [0, T] with step at most `dt`.
inline StepGrid make_step_grid(double horizon, double dt) {
    require(dt > 0.0 && std::isfinite(dt), ErrorCode::Step, "time step must be positive");
    require(horizon >= 0.0 && std::isfinite(horizon), ErrorCode::Step, "horizon must be finite and >= 0");
    require(horizon / dt <= 1e8, ErrorCode::Step, "more than 1e8 steps requested");
    if (horizon == 0.0) return {0, dt};
    const auto k = static_cast<long>(std::ceil(horizon / dt - 1e-9));
    return {std::max(1L, k), horizon / static_cast<double>(std::max(1L, k))};
}

/// Thinning dominance: dt <= 1 / (4 N M).
inline void check_thinning(const ModelSpec& spec, double dt) {
    const int n = spec.regime_count();
    const double m = spec.generator.bound;
    if (n <= 1 || m <= 0.0) return;
    require(dt <= 1.0 / (4.0 * n * m) * (1.0 + 1e-12), ErrorCode::Step,
            "time step " + format_double(dt) + " exceeds 1/(4 N M) = " + format_double(1.0 / (4.0 * n * m)));
}

namespace detail {

/// Drives one path. Visitor needs
///   bool node(long k, double t, const Vector& x, int i, const Vector& u, bool last)
///   void jump(double t, int from, int to)
/// node() may return false to stop early (treated as a cap).
template <class Visitor>
Termination run_path(const ModelSpec& spec, ModelEvaluator& ev, const Policy& policy, const Vector& x0, int i0,
                     const StepGrid& grid, const ExitDomain* domain, RngStream& stream, Visitor& vis,
                     std::size_t& clamped) {
    const int n = spec.regime_count();
    require(x0.size() == spec.dim, ErrorCode::Shape, "initial state has wrong dimension");
    require(i0 >= 0 && i0 < n, ErrorCode::Shape, "initial regime out of range");
    const bool noisy = !spec.diffusion.identically_zero();
    const int m = spec.noise_dim();
    const double sqdt = std::sqrt(grid.dt);

    Vector x = x0;
    Vector xn(spec.dim);
    Vector u(spec.action_dim());
    Vector xi(m);
    int i = i0;
    for (long k = 0;; ++k) {
        const double t = static_cast<double>(k) * grid.dt;
        if (policy.act(t, x, i, spec.actions, u)) ++clamped;
        const bool outside = domain && !domain->contains(x);
        const bool last = outside || k == grid.steps;
        if (!vis.node(k, t, x, i, u, last)) return Termination::Cap;
        if (outside) return Termination::Exit;
        if (k == grid.steps) return domain ? Termination::Cap : Termination::Horizon;

        xn = x;
        xn.noalias() += grid.dt * ev.drift(x, i, u);
        if (noisy) {
            for (int r = 0; r < m; ++r) xi(r) = stream.gaussian();
            xn.noalias() += sqdt * (ev.diffusion(x, i) * xi);
        }
        if (n > 1) {
            const double v = stream.uniform();
            double acc = 0.0;
            for (int j = 0; j < n; ++j) {
                if (j == i) continue;
                acc += spec.generator.rate(i, j, x, u) * grid.dt;
                if (v < acc) {
                    vis.jump(t + grid.dt, i, j);
                    i = j;
                    break;
                }
            }
        }
        if (!xn.allFinite())
            throw Error(ErrorCode::NonFinite, "state became non-finite at t = " + format_double(t + grid.dt));
        x.swap(xn);
    }
}

struct RecordingVisitor {
    PathSample* out;
    bool node(long, double t, const Vector& x, int i, const Vector& u, bool) {
        out->times.push_back(t);
        out->states.push_back(x);
        out->regimes.push_back(i);
        out->actions.push_back(u);
        return true;
    }
    void jump(double t, int from, int to) { out->jumps.push_back({t, from, to}); }
};

}  // namespace detail

/// Simulates (X, S) on [0, T]. Regimes are 0-based.
inline PathSample simulate_path(const ModelSpec& spec, const Policy& policy, const Vector& x0, int i0, double horizon,
                                double dt, RngStream& stream) {
    const StepGrid grid = make_step_grid(horizon, dt);
    check_thinning(spec, grid.dt);
    PathSample path;
    path.dt = grid.dt;
    ModelEvaluator ev(spec);
    detail::RecordingVisitor vis{&path};
    path.termination = detail::run_path(spec, ev, policy, x0, i0, grid, nullptr, stream, vis, path.clamped_steps);
    return path;
}

/// Simulates until the first grid time outside `domain`, or until t_cap.
inline PathSample simulate_exit_path(const ModelSpec& spec, const Policy& policy, const Vector& x0, int i0,
                                     const ExitDomain& domain, double dt, double t_cap, RngStream& stream) {
    require(std::isfinite(t_cap), ErrorCode::Step, "exit simulation needs a finite cap");
    const StepGrid grid = make_step_grid(t_cap, dt);
    check_thinning(spec, grid.dt);
    PathSample path;
    path.dt = grid.dt;
    ModelEvaluator ev(spec);
    detail::RecordingVisitor vis{&path};
    path.termination = detail::run_path(spec, ev, policy, x0, i0, grid, &domain, stream, vis, path.clamped_steps);
    return path;
}

/// CSV dump of one path; regimes are written 1-based.
inline std::string path_csv(const PathSample& path) {
    std::ostringstream os;
    const auto d = path.states.empty() ? 0 : path.states.front().size();
    const auto l = path.actions.empty() ? 0 : path.actions.front().size();
    os << "t,regime";
    for (Eigen::Index k = 0; k < d; ++k) os << ",x_" << k + 1;
    for (Eigen::Index k = 0; k < l; ++k) os << ",u_" << k + 1;
    os << '\n';
    for (std::size_t n = 0; n < path.times.size(); ++n) {
        os << format_double(path.times[n]) << ',' << path.regimes[n] + 1;
        for (Eigen::Index k = 0; k < d; ++k) os << ',' << format_double(path.states[n](k));
        for (Eigen::Index k = 0; k < l; ++k) os << ',' << format_double(path.actions[n](k));
        os << '\n';
    }
    for (const auto& j : path.jumps) os << "#jump," << format_double(j.t) << ',' << j.from + 1 << ',' << j.to + 1 << '\n';
    return os.str();
}

}  // namespace rsctl
