#pragma once

#include "rsctl/model.hpp"
#include "rsctl/riccati.hpp"

#include <cmath>
#include <functional>
#include <memory>
#include <variant>
#include <vector>

namespace rsctl {

/// Action indices on a uniform 1-D grid, per regime; optionally one table per
/// time level (level m covers [m * level_step, (m + 1) * level_step)).
struct GridPolicyTable {
    double x_min = 0.0;
    double x_max = 1.0;
    int n_x = 0;
    std::vector<std::vector<std::vector<int>>> levels;  // [level][regime][node]
    double level_step = 0.0;                            // 0 for stationary tables

    int nearest(double x) const {
        const double h = (x_max - x_min) / (n_x - 1);
        const long k = std::lround((x - x_min) / h);
        return static_cast<int>(std::clamp(k, 0L, static_cast<long>(n_x - 1)));
    }

    int action_index(double t, double x, int i) const {
        std::size_t level = 0;
        if (levels.size() > 1 && level_step > 0.0) {
            const auto m = static_cast<long>(std::floor(t / level_step));
            level = static_cast<std::size_t>(std::clamp(m, 0L, static_cast<long>(levels.size()) - 1));
        }
        return levels[level][static_cast<std::size_t>(i)][static_cast<std::size_t>(nearest(x))];
    }
};

using PolicyFunction = std::function<void(double t, const Vector& x, int regime, Vector& action)>;

/// Markov (possibly time-dependent) control. act() returns an action inside the
/// action-grid bounds.
class Policy {
public:
    enum class Kind { ConstantAction, LqFeedback, Grid, Callable };

    static Policy constant(Vector action) { return Policy(std::move(action)); }
    static Policy lq_feedback(FeedbackTrajectory f) { return Policy(std::make_shared<FeedbackTrajectory>(std::move(f))); }
    static Policy grid(GridPolicyTable table) { return Policy(std::make_shared<GridPolicyTable>(std::move(table))); }
    static Policy callable(PolicyFunction fn) { return Policy(std::move(fn)); }

    Kind kind() const { return static_cast<Kind>(impl_.index()); }

    /// Writes the action into `u` (already sized to the action dimension).
    /// Returns true when the raw action had to be clamped.
    bool act(double t, const Vector& x, int i, const ActionGrid& actions, Vector& u) const {
        switch (impl_.index()) {
            case 0:
                u = std::get<0>(impl_);
                break;
            case 1: {
                const auto& g = std::get<1>(impl_)->gains;
                const double h = g.step();
                int k = 0;
                double w = 0.0;
                if (t >= g.times.back()) {
                    k = g.steps() - 1;
                    w = 1.0;
                } else if (t > 0.0) {
                    k = std::min(static_cast<int>(std::floor(t / h)), g.steps() - 1);
                    w = (t - g.times[static_cast<std::size_t>(k)]) / h;
                }
                u.noalias() = g.at(k, i) * x;
                u *= -(1.0 - w);
                if (w != 0.0) u.noalias() -= w * (g.at(k + 1, i) * x);
                break;
            }
            case 2: {
                const auto& table = *std::get<2>(impl_);
                u = actions[table.action_index(t, x(0), i)];
                break;
            }
            case 3:
                std::get<3>(impl_)(t, x, i, u);
                break;
        }
        return actions.clamp(u);
    }

private:
    explicit Policy(Vector v) : impl_(std::move(v)) {}
    explicit Policy(std::shared_ptr<FeedbackTrajectory> f) : impl_(std::move(f)) {}
    explicit Policy(std::shared_ptr<GridPolicyTable> g) : impl_(std::move(g)) {}
    explicit Policy(PolicyFunction fn) : impl_(std::move(fn)) {}

    std::variant<Vector, std::shared_ptr<FeedbackTrajectory>, std::shared_ptr<GridPolicyTable>, PolicyFunction> impl_;
};

}  // namespace rsctl
