#pragma once

// Benchmark models shared by the unit tests and the acceptance binary.

#include "rsctl/cli.hpp"

#include <cmath>
#include <vector>

namespace fixtures {

using namespace rsctl;

inline Matrix m1(double v) { return Matrix::Constant(1, 1, v); }
inline Vector v1(double v) { return Vector::Constant(1, v); }
inline RegimeMatrices per_regime(int n, const Matrix& m) { return RegimeMatrices(static_cast<std::size_t>(n), m); }

inline Matrix rates2(double m12, double m21) {
    Matrix g(2, 2);
    g << -m12, m12, m21, -m21;
    return g;
}

/// Scalar LQ problem with a single regime.
inline LQSpec scalar_lq(double a, double b, double c, double q, double r, double p, double horizon) {
    LQSpec lq;
    lq.A = {m1(a)};
    lq.B = {m1(b)};
    lq.C = {m1(c)};
    lq.Q = {m1(q)};
    lq.R = {m1(r)};
    lq.P = {m1(p)};
    lq.generator = m1(0.0);
    lq.horizon = horizon;
    return lq;
}

/// -K' = 1 - K^2, K(1) = 0+: K(0) = tanh(1).
inline LQSpec tanh_lq() { return scalar_lq(0.0, 1.0, 0.0, 1.0, 1.0, 1e-12, 1.0); }

/// Two-regime reference: A = 0 / -1, B = 1, C = 0.2, Q = R = P = 1, m12 = m21 = 1, T = 1.
inline LQSpec two_regime_lq() {
    LQSpec lq;
    lq.A = {m1(0.0), m1(-1.0)};
    lq.B = per_regime(2, m1(1.0));
    lq.C = per_regime(2, m1(0.2));
    lq.Q = per_regime(2, m1(1.0));
    lq.R = per_regime(2, m1(1.0));
    lq.P = per_regime(2, m1(1.0));
    lq.generator = rates2(1.0, 1.0);
    lq.horizon = 1.0;
    return lq;
}

/// ModelSpec view of an LQ problem (used by simulation).
inline ModelSpec lq_model(const LQSpec& lq, std::vector<Vector> actions = {v1(-50.0), v1(50.0)}) {
    ModelSpec m;
    m.dim = lq.dim();
    m.regimes.count = lq.regimes();
    m.actions = ActionGrid(std::move(actions));
    m.drift.kind = FamilyKind::Lq;
    m.drift.A = lq.A;
    m.drift.B = lq.B;
    m.diffusion.kind = FamilyKind::Lq;
    m.diffusion.C = lq.C;
    m.generator.rates = lq.generator;
    m.generator.bound = 0.0;
    for (Eigen::Index i = 0; i < lq.generator.rows(); ++i)
        for (Eigen::Index j = 0; j < lq.generator.cols(); ++j)
            if (i != j) m.generator.bound = std::max(m.generator.bound, lq.generator(i, j));
    m.costs.running.kind = RunningCostKind::Quadratic;
    m.costs.running.Q = lq.Q;
    m.costs.running.R = lq.R;
    m.costs.terminal.kind = TerminalKind::Quadratic;
    m.costs.terminal.P = lq.P;
    m.costs.horizon = lq.horizon;
    return m;
}

/// d = 1 model with constant drift b_i, constant diffusion sigma_i, running
/// cost c_i and the given generator. Actions {0}.
inline ModelSpec constant_model(const std::vector<double>& drift, const std::vector<double>& sigma,
                                const std::vector<double>& cost, const Matrix& rates) {
    const int n = static_cast<int>(drift.size());
    ModelSpec m;
    m.dim = 1;
    m.regimes.count = n;
    m.actions = ActionGrid({v1(0.0)});
    m.drift.kind = FamilyKind::Constant;
    for (double b : drift) m.drift.offset.push_back(v1(b));
    m.diffusion.kind = FamilyKind::Constant;
    for (double s : sigma) m.diffusion.C.push_back(m1(s));
    m.generator.rates = rates;
    for (Eigen::Index i = 0; i < rates.rows(); ++i)
        for (Eigen::Index j = 0; j < rates.cols(); ++j)
            if (i != j) m.generator.bound = std::max(m.generator.bound, std::abs(rates(i, j)));
    m.costs.running.kind = RunningCostKind::Constant;
    m.costs.running.offset = cost;
    return m;
}

/// Chain benchmark: m12 = 1, m21 = 2, c_i = i, alpha = 1, zero drift, sigma = 1.
inline ModelSpec chain_model() {
    ModelSpec m = constant_model({0.0, 0.0}, {1.0, 1.0}, {1.0, 2.0}, rates2(1.0, 2.0));
    m.costs.discount = 1.0;
    return m;
}

/// Brownian motion with a = 1 (sigma = sqrt 2) on O = (-1, 1), c = 1, beta = 0, h = 0.
inline ModelSpec brownian_exit_model() {
    ModelSpec m = constant_model({0.0}, {std::sqrt(2.0)}, {1.0}, m1(0.0));
    m.costs.domain.lower = -1.0;
    m.costs.domain.upper = 1.0;
    return m;
}

/// Saturated-drift benchmark: N = 2, m12 = 1, m21 = 2, actions {-1, 0, 1},
/// b = 2 tanh(A_i x / 2) + u with A = (-1, -0.5), sigma = (1, 0.8),
/// c = min(x^2 + 0.3 u^2, 4), alpha = 0.5, exit on (-2, 2) with beta = 0.5, h = 1,
/// horizon 1 with a bump terminal cost.
inline ModelSpec saturated_model() {
    ModelSpec m;
    m.dim = 1;
    m.regimes.count = 2;
    m.actions = ActionGrid({v1(-1.0), v1(0.0), v1(1.0)});
    m.drift.kind = FamilyKind::SaturatedAffine;
    m.drift.A = {m1(-1.0), m1(-0.5)};
    m.drift.B = per_regime(2, m1(1.0));
    m.drift.scale = 2.0;
    m.diffusion.kind = FamilyKind::Constant;
    m.diffusion.C = {m1(1.0), m1(0.8)};
    m.generator.rates = rates2(1.0, 2.0);
    m.generator.bound = 2.0;
    m.costs.running.kind = RunningCostKind::ClampedQuadratic;
    m.costs.running.Q = per_regime(2, m1(1.0));
    m.costs.running.R = per_regime(2, m1(0.3));
    m.costs.running.cap = 4.0;
    m.costs.discount = 0.5;
    m.costs.horizon = 1.0;
    m.costs.terminal.kind = TerminalKind::Bump;
    m.costs.terminal.height = 1.0;
    m.costs.terminal.width = 1.0;
    m.costs.exit.kind = TerminalKind::Constant;
    m.costs.exit.offset = {1.0, 1.0};
    m.costs.exit_discount.offset = {0.5, 0.5};
    m.costs.domain.lower = -2.0;
    m.costs.domain.upper = 2.0;
    return m;
}

inline PerturbationSchedule coefficient_schedule(int regimes, double da, int n_max = 10) {
    PerturbationSchedule s;
    s.mode = PerturbationMode::Coefficient;
    s.magnitudes = PerturbationSchedule::dyadic(n_max);
    s.dA = per_regime(regimes, m1(da));
    return s;
}

inline double tanh1() { return std::tanh(1.0); }

}  // namespace fixtures
