#pragma once

// Weakly coupled backward Riccati system of the regime-switching LQ problem
//
//   -dK_i/dt = C_i' K_i C_i + A_i' K_i + K_i A_i - K_i B_i R_i^-1 B_i' K_i + Q_i + sum_j m_ij K_j,
//    K_i(T)  = P_i,
//
// the optimal feedback u = -R_i^-1 B_i' K_i(t) x, and the exact quadratic cost
// of any fixed linear feedback.

#include "rsctl/csv.hpp"
#include "rsctl/error.hpp"
#include "rsctl/linalg.hpp"
#include "rsctl/model.hpp"

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

namespace rsctl {

inline constexpr double kTerminalFloor = 1e-12;
inline constexpr double kBlowupNorm = 1e12;

struct LQSpec {
    RegimeMatrices A;
    RegimeMatrices B;
    RegimeMatrices C;
    RegimeMatrices Q;
    RegimeMatrices R;
    RegimeMatrices P;
    Matrix generator;
    double horizon = 1.0;

    int dim() const { return A.empty() ? 0 : static_cast<int>(A.front().rows()); }
    int control_dim() const { return B.empty() ? 0 : static_cast<int>(B.front().cols()); }
    int regimes() const { return static_cast<int>(A.size()); }

    /// Shapes, definiteness (eigenvalue floor 1e-12) and generator structure.
    void check() const {
        const auto n = A.size();
        require(n >= 1, ErrorCode::Shape, "LQ spec needs at least one regime");
        const Eigen::Index d = dim();
        const Eigen::Index l = control_dim();
        require(B.size() == n && C.size() == n && Q.size() == n && R.size() == n && P.size() == n, ErrorCode::Shape,
                "LQ spec: one matrix of each kind per regime");
        for (std::size_t i = 0; i < n; ++i) {
            require(A[i].rows() == d && A[i].cols() == d, ErrorCode::Shape, "A(i) must be d x d");
            require(B[i].rows() == d && B[i].cols() == l, ErrorCode::Shape, "B(i) must be d x l");
            require(C[i].rows() == d && C[i].cols() == d, ErrorCode::Shape, "C(i) must be d x d");
            require(Q[i].rows() == d && Q[i].cols() == d, ErrorCode::Shape, "Q(i) must be d x d");
            require(R[i].rows() == l && R[i].cols() == l, ErrorCode::Shape, "R(i) must be l x l");
            require(P[i].rows() == d && P[i].cols() == d, ErrorCode::Shape, "P(i) must be d x d");
            require(max_abs_asymmetry(Q[i]) <= 1e-12 && max_abs_asymmetry(R[i]) <= 1e-12 &&
                        max_abs_asymmetry(P[i]) <= 1e-12,
                    ErrorCode::Eig, "Q, R, P must be symmetric");
            require(min_eigenvalue(Q[i]) >= -kTerminalFloor, ErrorCode::Eig, "Q(i) must be positive semidefinite");
            require(min_eigenvalue(R[i]) >= kTerminalFloor, ErrorCode::Eig, "R(i) must be positive definite");
            require(min_eigenvalue(P[i]) >= kTerminalFloor * (1.0 - 1e-9), ErrorCode::Eig,
                    "P(i) must be positive definite");
        }
        require(generator.rows() == static_cast<Eigen::Index>(n) && generator.cols() == static_cast<Eigen::Index>(n),
                ErrorCode::Shape, "generator must be N x N");
        for (Eigen::Index i = 0; i < generator.rows(); ++i) {
            require(std::abs(generator.row(i).sum()) <= 1e-12, ErrorCode::Rates, "generator rows must sum to zero");
            for (Eigen::Index j = 0; j < generator.cols(); ++j)
                if (i != j) require(generator(i, j) >= 0.0, ErrorCode::Rates, "off-diagonal rates must be >= 0");
        }
        require(horizon > 0.0, ErrorCode::Shape, "horizon must be positive");
    }

    /// Replaces a terminal P(i) with min eigenvalue below 1e-12 by P(i) + 1e-12 I.
    /// Returns one warning per nudged regime.
    std::vector<std::string> nudge_terminal() {
        std::vector<std::string> warnings;
        for (std::size_t i = 0; i < P.size(); ++i) {
            if (min_eigenvalue(P[i]) < kTerminalFloor) {
                P[i] = symmetrized(P[i]) + kTerminalFloor * Matrix::Identity(P[i].rows(), P[i].cols());
                warnings.push_back("terminal P(" + std::to_string(i + 1) + ") is not positive definite; using P + 1e-12 I");
            }
        }
        return warnings;
    }
};

/// Builds the LQ data from a model with lq drift/diffusion, quadratic running
/// and terminal costs and a constant generator.
inline LQSpec lq_from_model(const ModelSpec& spec) {
    spec.check_shapes();
    require(spec.drift.kind == FamilyKind::Lq && spec.diffusion.kind == FamilyKind::Lq, ErrorCode::Shape,
            "Riccati solve needs lq drift and diffusion families");
    require(spec.costs.running.kind == RunningCostKind::Quadratic, ErrorCode::Shape,
            "Riccati solve needs a quadratic running cost");
    require(spec.costs.terminal.kind == TerminalKind::Quadratic, ErrorCode::Shape,
            "Riccati solve needs a quadratic terminal cost");
    require(spec.generator.is_constant(), ErrorCode::Shape, "Riccati solve needs a constant generator");
    require(!spec.noise.has_value(), ErrorCode::Shape, "Riccati solve does not support a noise overlay");
    const auto n = static_cast<std::size_t>(spec.regime_count());
    const Eigen::Index d = spec.dim;
    const Eigen::Index l = spec.action_dim();
    LQSpec lq;
    lq.A = spec.drift.A;
    lq.B = spec.drift.B.empty() ? RegimeMatrices(n, Matrix::Zero(d, l)) : spec.drift.B;
    lq.C = spec.diffusion.C;
    lq.Q = spec.costs.running.Q.empty() ? RegimeMatrices(n, Matrix::Zero(d, d)) : spec.costs.running.Q;
    lq.R = spec.costs.running.R;
    require(lq.R.size() == n, ErrorCode::Shape, "Riccati solve needs action weights R(i)");
    lq.P = spec.costs.terminal.P;
    lq.generator = spec.generator.rates;
    lq.horizon = spec.costs.horizon;
    return lq;
}

/// Per-regime matrices on a uniform time grid 0 = t_0 < ... < t_K = T.
struct MatrixTrajectory {
    std::vector<double> times;
    std::vector<RegimeMatrices> values;  // values[k][i]

    int steps() const { return static_cast<int>(times.size()) - 1; }
    double step() const { return times.back() / steps(); }
    const Matrix& at(int k, int i) const {
        return values[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
    }

    /// Linear interpolation in t, clamped to [0, T].
    Matrix interpolate(double t, int i) const {
        const double h = step();
        if (t <= 0.0) return at(0, i);
        if (t >= times.back()) return at(steps(), i);
        int k = static_cast<int>(std::floor(t / h));
        k = std::min(k, steps() - 1);
        const double w = (t - times[static_cast<std::size_t>(k)]) / h;
        return (1.0 - w) * at(k, i) + w * at(k + 1, i);
    }
};

using RiccatiTrajectory = MatrixTrajectory;

/// Gains F(t, i) with u = -F(t, i) x.
struct FeedbackTrajectory {
    MatrixTrajectory gains;

    Matrix gain(double t, int i) const { return gains.interpolate(t, i); }
};

namespace detail {

inline std::vector<double> uniform_times(double horizon, int steps) {
    std::vector<double> t(static_cast<std::size_t>(steps) + 1);
    for (int k = 0; k <= steps; ++k) t[static_cast<std::size_t>(k)] = horizon * k / steps;
    t.back() = horizon;
    return t;
}

/// R^-1 via Cholesky; E_EIG when the factorisation fails or cond(R) > 1e12.
inline Matrix inverse_spd(const Matrix& r) {
    Eigen::LLT<Matrix> llt(r);
    require(llt.info() == Eigen::Success, ErrorCode::Eig, "R is not positive definite");
    Eigen::SelfAdjointEigenSolver<Matrix> es(r, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    require(lo > 0.0 && hi / lo <= 1e12, ErrorCode::Eig, "R is ill-conditioned (condition number > 1e12)");
    return llt.solve(Matrix::Identity(r.rows(), r.cols()));
}

inline void check_blowup(const RegimeMatrices& ks, double t) {
    for (const auto& k : ks) {
        if (!k.allFinite()) throw Error(ErrorCode::Blowup, "non-finite matrix at t = " + std::to_string(t));
        // Frobenius norm bounds the spectral norm; the SVD runs only near the limit.
        if (k.norm() > kBlowupNorm && spectral_norm(k) > kBlowupNorm)
            throw Error(ErrorCode::Blowup, "matrix norm exceeds 1e12 at t = " + std::to_string(t));
    }
}

/// Classical RK4 backward in time for dY/d(-t) = f(t, Y), with symmetrisation after each step.
template <class Rhs>
MatrixTrajectory integrate_backward(const RegimeMatrices& terminal, double horizon, int steps, Rhs&& rhs) {
    MatrixTrajectory traj;
    traj.times = uniform_times(horizon, steps);
    traj.values.assign(static_cast<std::size_t>(steps) + 1, RegimeMatrices{});
    traj.values.back() = terminal;
    const double h = horizon / steps;
    const auto n = terminal.size();
    auto axpy = [n](const RegimeMatrices& y, const RegimeMatrices& k, double a) {
        RegimeMatrices out(n);
        for (std::size_t i = 0; i < n; ++i) out[i] = y[i] + a * k[i];
        return out;
    };
    for (int k = steps; k > 0; --k) {
        const double t = traj.times[static_cast<std::size_t>(k)];
        const RegimeMatrices& y = traj.values[static_cast<std::size_t>(k)];
        const RegimeMatrices k1 = rhs(t, y);
        const RegimeMatrices k2 = rhs(t - 0.5 * h, axpy(y, k1, 0.5 * h));
        const RegimeMatrices k3 = rhs(t - 0.5 * h, axpy(y, k2, 0.5 * h));
        const RegimeMatrices k4 = rhs(t - h, axpy(y, k3, h));
        RegimeMatrices next(n);
        for (std::size_t i = 0; i < n; ++i)
            next[i] = symmetrized(y[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
        check_blowup(next, t - h);
        traj.values[static_cast<std::size_t>(k) - 1] = std::move(next);
    }
    return traj;
}

struct RiccatiCoefficients {
    RegimeMatrices gain_weight;  // B R^-1 B'
    RegimeMatrices r_inv_bt;     // R^-1 B'
};

inline RiccatiCoefficients riccati_coefficients(const LQSpec& lq) {
    RiccatiCoefficients rc;
    for (std::size_t i = 0; i < lq.A.size(); ++i) {
        const Matrix r_inv = inverse_spd(lq.R[i]);
        rc.r_inv_bt.push_back(r_inv * lq.B[i].transpose());
        rc.gain_weight.push_back(lq.B[i] * rc.r_inv_bt.back());
    }
    return rc;
}

inline RegimeMatrices riccati_rhs(const LQSpec& lq, const RiccatiCoefficients& rc, const RegimeMatrices& k) {
    const auto n = k.size();
    RegimeMatrices out(n);
    for (std::size_t i = 0; i < n; ++i) {
        Matrix f = lq.C[i].transpose() * k[i] * lq.C[i] + lq.A[i].transpose() * k[i] + k[i] * lq.A[i] -
                   k[i] * rc.gain_weight[i] * k[i] + lq.Q[i];
        for (std::size_t j = 0; j < n; ++j)
            f += lq.generator(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * k[j];
        out[i] = std::move(f);
    }
    return out;
}

}  // namespace detail

inline RiccatiTrajectory solve_coupled_riccati(const LQSpec& lq, int steps) {
    lq.check();
    require(steps >= 8, ErrorCode::Shape, "Riccati solve needs at least 8 steps");
    const auto rc = detail::riccati_coefficients(lq);
    return detail::integrate_backward(lq.P, lq.horizon, steps, [&](double, const RegimeMatrices& k) {
        return detail::riccati_rhs(lq, rc, k);
    });
}

/// F(t, i) = R(i)^-1 B(i)' K(t, i) at every node of the Riccati grid.
inline FeedbackTrajectory lq_feedback(const RiccatiTrajectory& k, const LQSpec& lq) {
    require(!k.values.empty() && k.values.front().size() == lq.A.size(), ErrorCode::Shape,
            "trajectory and LQ spec have different regime counts");
    FeedbackTrajectory f;
    f.gains.times = k.times;
    const auto rc = detail::riccati_coefficients(lq);
    for (const auto& slice : k.values) {
        RegimeMatrices g;
        for (std::size_t i = 0; i < slice.size(); ++i) {
            require(slice[i].rows() == lq.A[i].rows(), ErrorCode::Shape, "trajectory dimension mismatch");
            g.push_back(rc.r_inv_bt[i] * slice[i]);
        }
        f.gains.values.push_back(std::move(g));
    }
    return f;
}

/// Constant gain on [0, T], stored on a two-node grid.
inline FeedbackTrajectory constant_feedback(const RegimeMatrices& gain, double horizon) {
    FeedbackTrajectory f;
    f.gains.times = {0.0, horizon};
    f.gains.values = {gain, gain};
    return f;
}

/// Exact cost matrices of the linear feedback u = -F x in the given model:
///   -dM_i/dt = (A_i - B_i F)' M_i + M_i (A_i - B_i F) + C_i' M_i C_i + Q_i + F' R_i F + sum_j m_ij M_j,
///    M_i(T)  = P_i.
/// The control is unconstrained here; gains are interpolated linearly in t.
inline MatrixTrajectory fixed_feedback_cost(const LQSpec& lq, const FeedbackTrajectory& f, int steps) {
    lq.check();
    require(steps >= 8, ErrorCode::Shape, "feedback cost needs at least 8 steps");
    require(!f.gains.values.empty() && f.gains.values.front().size() == lq.A.size(), ErrorCode::Shape,
            "feedback and LQ spec have different regime counts");
    require(std::abs(f.gains.times.back() - lq.horizon) <= 1e-12 * std::max(1.0, lq.horizon), ErrorCode::Shape,
            "feedback horizon differs from the LQ horizon");
    const auto n = lq.A.size();
    return detail::integrate_backward(lq.P, lq.horizon, steps, [&](double t, const RegimeMatrices& m) {
        RegimeMatrices out(n);
        for (std::size_t i = 0; i < n; ++i) {
            const Matrix gain = f.gain(t, static_cast<int>(i));
            require(gain.rows() == lq.B[i].cols() && gain.cols() == lq.A[i].rows(), ErrorCode::Shape,
                    "gain must be l x d");
            const Matrix closed = lq.A[i] - lq.B[i] * gain;
            Matrix g = closed.transpose() * m[i] + m[i] * closed + lq.C[i].transpose() * m[i] * lq.C[i] + lq.Q[i] +
                       gain.transpose() * lq.R[i] * gain;
            for (std::size_t j = 0; j < n; ++j)
                g += lq.generator(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * m[j];
            out[i] = std::move(g);
        }
        return out;
    });
}

/// max over interior nodes and regimes of || (K_{k+1} - K_{k-1}) / (2 dt) + RHS(K_k) ||_2.
inline double riccati_defect(const RiccatiTrajectory& k, const LQSpec& lq) {
    require(k.times.size() >= 3, ErrorCode::Shape, "defect needs at least three time nodes");
    const auto rc = detail::riccati_coefficients(lq);
    const double h = k.step();
    double worst = 0.0;
    for (int m = 1; m < k.steps(); ++m) {
        const auto rhs = detail::riccati_rhs(lq, rc, k.values[static_cast<std::size_t>(m)]);
        for (std::size_t i = 0; i < rhs.size(); ++i) {
            const Matrix r = (k.values[static_cast<std::size_t>(m) + 1][i] - k.values[static_cast<std::size_t>(m) - 1][i]) /
                                 (2.0 * h) +
                             rhs[i];
            worst = std::max(worst, spectral_norm(r));
        }
    }
    return worst;
}

/// C0 e^{k0 T} (T + 1) with C0 = max_i(|Q_i| + |P_i|), k0 = max_i(2|A_i| + |C_i|^2).
inline double riccati_norm_bound(const LQSpec& lq) {
    double c0 = 0.0, k0 = 0.0;
    for (std::size_t i = 0; i < lq.A.size(); ++i) {
        c0 = std::max(c0, spectral_norm(lq.Q[i]) + spectral_norm(lq.P[i]));
        const double cn = spectral_norm(lq.C[i]);
        k0 = std::max(k0, 2.0 * spectral_norm(lq.A[i]) + cn * cn);
    }
    return c0 * std::exp(k0 * lq.horizon) * (lq.horizon + 1.0);
}

/// max_k,i ||K(t_{k+1}, i) - K(t_k, i)||_2 / dt.
inline double time_lipschitz(const MatrixTrajectory& k) {
    const double h = k.step();
    double worst = 0.0;
    for (int m = 0; m < k.steps(); ++m)
        for (std::size_t i = 0; i < k.values[static_cast<std::size_t>(m)].size(); ++i)
            worst = std::max(worst, spectral_norm(k.values[static_cast<std::size_t>(m) + 1][i] -
                                                  k.values[static_cast<std::size_t>(m)][i]) /
                                        h);
    return worst;
}

/// max over nodes and regimes of ||a - b||_2; the grids must coincide.
inline double max_trajectory_gap(const MatrixTrajectory& a, const MatrixTrajectory& b) {
    require(a.times.size() == b.times.size(), ErrorCode::Shape, "trajectories use different grids");
    double worst = 0.0;
    for (std::size_t k = 0; k < a.values.size(); ++k)
        for (std::size_t i = 0; i < a.values[k].size(); ++i)
            worst = std::max(worst, spectral_norm(a.values[k][i] - b.values[k][i]));
    return worst;
}

/// CSV with header `t,regime,row,col,value`; regime, row and col are 1-based.
inline std::string trajectory_csv(const MatrixTrajectory& traj) {
    std::ostringstream out;
    out << "t,regime,row,col,value\n";
    for (std::size_t k = 0; k < traj.values.size(); ++k) {
        const std::string t = format_double(traj.times[k]);
        for (std::size_t i = 0; i < traj.values[k].size(); ++i) {
            const Matrix& m = traj.values[k][i];
            for (Eigen::Index r = 0; r < m.rows(); ++r)
                for (Eigen::Index c = 0; c < m.cols(); ++c)
                    out << t << ',' << (i + 1) << ',' << r + 1 << ',' << c + 1 << ',' << format_double(m(r, c)) << '\n';
        }
    }
    return out.str();
}

}  // namespace rsctl
