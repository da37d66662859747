#pragma once

// Approximating model sequences: element n has every perturbed parameter
// equal to target + delta_n * direction.

#include "rsctl/model.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace rsctl {

enum class PerturbationMode { Coefficient, Rates, Cost, NoiseApprox, Combined };

inline const char* mode_name(PerturbationMode m) {
    switch (m) {
        case PerturbationMode::Coefficient: return "coefficient";
        case PerturbationMode::Rates: return "rates";
        case PerturbationMode::Cost: return "cost";
        case PerturbationMode::NoiseApprox: return "noise-approx";
        case PerturbationMode::Combined: return "combined";
    }
    return "?";
}

struct PerturbationSchedule {
    PerturbationMode mode = PerturbationMode::Coefficient;
    std::vector<double> magnitudes;  // delta_0 > delta_1 > ... >= 0

    // coefficient directions
    RegimeMatrices dA;
    RegimeMatrices dB;
    RegimeMatrices dC;
    RegimeVectors d_offset;
    // rate direction; only off-diagonal entries are used
    Matrix d_rates;
    // cost directions
    std::vector<double> d_cost_offset;
    RegimeMatrices d_cost_Q;
    RegimeMatrices d_cost_R;
    // noise approximation: bhat_n = delta_n * noise_drift, sighat_n = I + delta_n * noise_scale
    RegimeVectors noise_drift;
    RegimeMatrices noise_scale;

    /// delta_n = 2^-n for n = 0..n_max.
    static std::vector<double> dyadic(int n_max) {
        std::vector<double> d;
        for (int n = 0; n <= n_max; ++n) d.push_back(std::ldexp(1.0, -n));
        return d;
    }

    int n_max() const { return static_cast<int>(magnitudes.size()) - 1; }

    bool uses_coefficients() const {
        return mode == PerturbationMode::Coefficient || mode == PerturbationMode::Combined;
    }
    bool uses_rates() const { return mode == PerturbationMode::Rates || mode == PerturbationMode::Combined; }
    bool uses_cost() const { return mode == PerturbationMode::Cost || mode == PerturbationMode::Combined; }
    bool uses_noise() const { return mode == PerturbationMode::NoiseApprox || mode == PerturbationMode::Combined; }

    void check_magnitudes() const {
        require(!magnitudes.empty(), ErrorCode::Config, "schedule has no magnitudes");
        for (std::size_t n = 0; n < magnitudes.size(); ++n) {
            require(std::isfinite(magnitudes[n]) && magnitudes[n] >= 0.0, ErrorCode::Config,
                    "schedule magnitudes must be finite and nonnegative");
            if (n > 0)
                require(magnitudes[n] < magnitudes[n - 1], ErrorCode::Config,
                        "schedule magnitudes must be strictly decreasing");
        }
    }
};

namespace detail {

inline void add_scaled(RegimeMatrices& target, const RegimeMatrices& dir, double delta, const std::string& what) {
    if (dir.empty()) return;
    require(!target.empty(), ErrorCode::Shape, what + ": direction given but the model has no such parameter");
    require(dir.size() == target.size(), ErrorCode::Shape, what + ": one direction per regime");
    for (std::size_t i = 0; i < dir.size(); ++i) {
        require(dir[i].rows() == target[i].rows() && dir[i].cols() == target[i].cols(), ErrorCode::Shape,
                what + ": direction shape mismatch");
        target[i] += delta * dir[i];
    }
}

inline void add_scaled(RegimeVectors& target, const RegimeVectors& dir, double delta, const std::string& what) {
    if (dir.empty()) return;
    require(dir.size() == target.size(), ErrorCode::Shape, what + ": one direction per regime");
    for (std::size_t i = 0; i < dir.size(); ++i) {
        require(dir[i].size() == target[i].size(), ErrorCode::Shape, what + ": direction shape mismatch");
        target[i] += delta * dir[i];
    }
}

inline void perturb_rates(Matrix& rates, const Matrix& dir, double delta, bool fix_diagonal) {
    require(dir.rows() == rates.rows() && dir.cols() == rates.cols(), ErrorCode::Shape,
            "rate direction: expected an N x N matrix");
    for (Eigen::Index i = 0; i < rates.rows(); ++i) {
        for (Eigen::Index j = 0; j < rates.cols(); ++j)
            if (i != j) rates(i, j) += delta * dir(i, j);
        if (fix_diagonal) {
            rates(i, i) = 0.0;
            rates(i, i) = -rates.row(i).sum();
        }
    }
}

inline void check_rates(const Matrix& rates, bool check_rows, double delta) {
    for (Eigen::Index i = 0; i < rates.rows(); ++i) {
        for (Eigen::Index j = 0; j < rates.cols(); ++j)
            if (i != j)
                require(rates(i, j) >= 0.0, ErrorCode::Rates,
                        "perturbed rate m_" + std::to_string(i + 1) + std::to_string(j + 1) + " is negative at delta = " +
                            std::to_string(delta));
        if (check_rows)
            require(std::abs(rates.row(i).sum()) <= 1e-12, ErrorCode::Rates,
                    "perturbed generator row " + std::to_string(i + 1) + " does not sum to zero");
    }
}

}  // namespace detail

/// Model with every scheduled parameter moved by delta along its direction.
/// delta == 0 returns an exact copy of `base`.
inline ModelSpec perturb_model(const ModelSpec& base, const PerturbationSchedule& sched, double delta) {
    ModelSpec m = base;
    if (delta == 0.0) return m;
    const auto n = static_cast<std::size_t>(base.regime_count());

    if (sched.uses_coefficients()) {
        detail::add_scaled(m.drift.A, sched.dA, delta, "dA");
        detail::add_scaled(m.drift.B, sched.dB, delta, "dB");
        detail::add_scaled(m.diffusion.C, sched.dC, delta, "dC");
        if (!sched.d_offset.empty()) {
            require(m.drift.kind == FamilyKind::Constant, ErrorCode::Shape, "d_offset needs a constant drift");
            detail::add_scaled(m.drift.offset, sched.d_offset, delta, "d_offset");
        }
    }
    if (sched.uses_rates() && sched.d_rates.size() > 0) {
        auto& g = m.generator;
        if (g.kind == GeneratorKind::Constant) {
            detail::perturb_rates(g.rates, sched.d_rates, delta, true);
            detail::check_rates(g.rates, true, delta);
            for (Eigen::Index i = 0; i < g.rates.rows(); ++i)
                for (Eigen::Index j = 0; j < g.rates.cols(); ++j)
                    if (i != j) g.bound = std::max(g.bound, g.rates(i, j));
        } else {
            detail::perturb_rates(g.low, sched.d_rates, delta, false);
            detail::perturb_rates(g.high, sched.d_rates, delta, false);
            detail::check_rates(g.low, false, delta);
            detail::check_rates(g.high, false, delta);
            for (Eigen::Index i = 0; i < g.high.rows(); ++i)
                for (Eigen::Index j = 0; j < g.high.cols(); ++j)
                    if (i != j) g.bound = std::max({g.bound, g.high(i, j), g.low(i, j)});
        }
    }
    if (sched.uses_cost()) {
        auto& rc = m.costs.running;
        if (!sched.d_cost_offset.empty()) {
            require(sched.d_cost_offset.size() == n, ErrorCode::Shape, "d_cost_offset: one entry per regime");
            if (rc.offset.empty()) rc.offset.assign(n, 0.0);
            for (std::size_t i = 0; i < n; ++i) rc.offset[i] += delta * sched.d_cost_offset[i];
        }
        detail::add_scaled(rc.Q, sched.d_cost_Q, delta, "d_cost_Q");
        detail::add_scaled(rc.R, sched.d_cost_R, delta, "d_cost_R");
    }
    if (sched.uses_noise() && (!sched.noise_drift.empty() || !sched.noise_scale.empty())) {
        const auto dim_m = static_cast<Eigen::Index>(base.noise_dim());
        NoiseOverlay ov;
        for (std::size_t i = 0; i < n; ++i) {
            Vector shift = Vector::Zero(dim_m);
            Matrix factor = Matrix::Identity(dim_m, dim_m);
            if (!sched.noise_drift.empty()) {
                require(sched.noise_drift.size() == n && sched.noise_drift[i].size() == dim_m, ErrorCode::Shape,
                        "noise_drift: one length-m vector per regime");
                shift = delta * sched.noise_drift[i];
            }
            if (!sched.noise_scale.empty()) {
                require(sched.noise_scale.size() == n && sched.noise_scale[i].rows() == dim_m &&
                            sched.noise_scale[i].cols() == dim_m,
                        ErrorCode::Shape, "noise_scale: one m x m matrix per regime");
                factor += delta * sched.noise_scale[i];
            }
            ov.drift_shift.push_back(std::move(shift));
            ov.diffusion_factor.push_back(std::move(factor));
        }
        m.noise = std::move(ov);
    }
    m.check_shapes();
    return m;
}

/// Element n is perturb_model(true_spec, sched, delta_n), n = 0..n_max.
inline std::vector<ModelSpec> make_perturbation_sequence(const ModelSpec& true_spec, const PerturbationSchedule& sched) {
    sched.check_magnitudes();
    true_spec.check_shapes();
    std::vector<ModelSpec> out;
    out.reserve(sched.magnitudes.size());
    for (double delta : sched.magnitudes) out.push_back(perturb_model(true_spec, sched, delta));
    return out;
}

}  // namespace rsctl
