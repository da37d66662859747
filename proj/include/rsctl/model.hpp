#pragma once

// Controlled regime-switching diffusion: coefficient families, generator,
// costs and structural validation.
//
//   dX = b(X, S, U) dt + sigma(X, S) dW,   S jumps i -> j at rate m_ij(X, U).
//
// Regimes are 0-based internally; configs and CSV outputs use 1..N labels.

#include "rsctl/error.hpp"
#include "rsctl/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace rsctl {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct RegimeSet {
    int count = 1;
};

/// Finite ordered list of actions. The order is used for tie-breaking;
/// bounds are the coordinate-wise hull of the list.
class ActionGrid {
public:
    ActionGrid() = default;

    explicit ActionGrid(std::vector<Vector> actions) : actions_(std::move(actions)) {
        require(!actions_.empty(), ErrorCode::Shape, "action grid is empty");
        const auto l = actions_.front().size();
        lower_ = actions_.front();
        upper_ = actions_.front();
        for (const auto& a : actions_) {
            require(a.size() == l, ErrorCode::Shape, "actions have inconsistent dimension");
            lower_ = lower_.cwiseMin(a);
            upper_ = upper_.cwiseMax(a);
        }
    }

    int size() const { return static_cast<int>(actions_.size()); }
    int dim() const { return actions_.empty() ? 0 : static_cast<int>(actions_.front().size()); }
    const Vector& operator[](int k) const { return actions_[static_cast<std::size_t>(k)]; }
    const std::vector<Vector>& actions() const { return actions_; }
    const Vector& lower() const { return lower_; }
    const Vector& upper() const { return upper_; }

    /// Clamps in place; returns true if any coordinate moved.
    bool clamp(Vector& u) const {
        bool moved = false;
        for (Eigen::Index k = 0; k < u.size(); ++k) {
            const double c = std::clamp(u(k), lower_(k), upper_(k));
            if (c != u(k)) {
                u(k) = c;
                moved = true;
            }
        }
        return moved;
    }

private:
    std::vector<Vector> actions_;
    Vector lower_;
    Vector upper_;
};

enum class FamilyKind { Lq, SaturatedAffine, Constant, Tabulated };

inline const char* family_name(FamilyKind k) {
    switch (k) {
        case FamilyKind::Lq: return "lq";
        case FamilyKind::SaturatedAffine: return "saturated-affine";
        case FamilyKind::Constant: return "constant";
        case FamilyKind::Tabulated: return "tabulated";
    }
    return "?";
}

namespace detail {

// Piecewise-linear interpolation with constant extrapolation.
inline double interpolate(const std::vector<double>& nodes, const std::vector<double>& values, double x) {
    if (x <= nodes.front()) return values.front();
    if (x >= nodes.back()) return values.back();
    const auto it = std::upper_bound(nodes.begin(), nodes.end(), x);
    const auto k = static_cast<std::size_t>(it - nodes.begin());
    const double w = (x - nodes[k - 1]) / (nodes[k] - nodes[k - 1]);
    return (1.0 - w) * values[k - 1] + w * values[k];
}

}  // namespace detail

/// Drift b(x, i, u). Every kind adds the control term B(i) u.
///   lq:               A x + B u
///   saturated-affine: s tanh(A x / s) + B u   (elementwise tanh)
///   constant:         offset + B u
///   tabulated:        interp(table_i, x) + B u   (d = 1)
struct DriftFamily {
    FamilyKind kind = FamilyKind::Constant;
    RegimeMatrices A;
    RegimeMatrices B;
    RegimeVectors offset;
    double scale = 1.0;
    std::vector<double> nodes;
    std::vector<std::vector<double>> table;

    void evaluate(const Vector& x, int i, const Vector& u, Vector& out) const {
        const auto r = static_cast<std::size_t>(i);
        switch (kind) {
            case FamilyKind::Lq:
                out.noalias() = A[r] * x;
                break;
            case FamilyKind::SaturatedAffine:
                out.noalias() = A[r] * x;
                for (Eigen::Index k = 0; k < out.size(); ++k) out(k) = scale * std::tanh(out(k) / scale);
                break;
            case FamilyKind::Constant:
                out = offset[r];
                break;
            case FamilyKind::Tabulated:
                out(0) = detail::interpolate(nodes, table[r], x(0));
                break;
        }
        if (!B.empty() && u.size() > 0) out.noalias() += B[r] * u;
    }
};

/// Diffusion sigma(x, i), a d x m matrix.
///   lq:               C x            (m = 1)
///   constant:         C              (m = cols of C)
///   saturated-affine: S + diag(s tanh(C x / s))   (m = d)
///   tabulated:        interp(table_i, x)          (d = m = 1)
struct DiffusionFamily {
    FamilyKind kind = FamilyKind::Constant;
    RegimeMatrices C;
    RegimeMatrices S;
    double scale = 1.0;
    std::vector<double> nodes;
    std::vector<std::vector<double>> table;

    int noise_dim(int d) const {
        switch (kind) {
            case FamilyKind::Lq: return 1;
            case FamilyKind::Constant: return C.empty() ? d : static_cast<int>(C.front().cols());
            case FamilyKind::SaturatedAffine: return d;
            case FamilyKind::Tabulated: return 1;
        }
        return d;
    }

    bool identically_zero() const {
        if (kind != FamilyKind::Constant) return false;
        return std::all_of(C.begin(), C.end(), [](const Matrix& c) { return c.isZero(0.0); });
    }

    void evaluate(const Vector& x, int i, Matrix& out) const {
        const auto r = static_cast<std::size_t>(i);
        switch (kind) {
            case FamilyKind::Lq:
                out.col(0).noalias() = C[r] * x;
                break;
            case FamilyKind::Constant:
                out = C[r];
                break;
            case FamilyKind::SaturatedAffine: {
                out = S[r];
                const Vector cx = C[r] * x;
                for (Eigen::Index k = 0; k < cx.size(); ++k) out(k, k) += scale * std::tanh(cx(k) / scale);
                break;
            }
            case FamilyKind::Tabulated:
                out(0, 0) = detail::interpolate(nodes, table[r], x(0));
                break;
        }
    }
};

enum class GeneratorKind { Constant, StateActionDependent };

/// Switching rates. Constant kind stores the full matrix as given (the
/// diagonal included, so inconsistent rows are caught by validation).
/// State-action-dependent kind interpolates off-diagonals:
///   m_ij(x, u) = low_ij + (high_ij - low_ij) * (1 + tanh(w.x + v.u)) / 2
/// with the diagonal set to minus the off-diagonal row sum.
struct GeneratorSpec {
    GeneratorKind kind = GeneratorKind::Constant;
    Matrix rates;
    Matrix low;
    Matrix high;
    Vector state_weight;
    Vector action_weight;
    double bound = 0.0;

    int regimes() const { return static_cast<int>(kind == GeneratorKind::Constant ? rates.rows() : low.rows()); }

    double switch_weight(const Vector& x, const Vector& u) const {
        double z = state_weight.size() ? state_weight.dot(x) : 0.0;
        if (action_weight.size() && u.size()) z += action_weight.dot(u);
        return 0.5 * (1.0 + std::tanh(z));
    }

    /// Off-diagonal rate i -> j (i != j), or the diagonal entry when i == j.
    double rate(int i, int j, const Vector& x, const Vector& u) const {
        if (kind == GeneratorKind::Constant) return rates(i, j);
        if (i != j) {
            const double w = switch_weight(x, u);
            return low(i, j) + (high(i, j) - low(i, j)) * w;
        }
        double total = 0.0;
        for (int k = 0; k < regimes(); ++k)
            if (k != i) total += rate(i, k, x, u);
        return -total;
    }

    Matrix evaluate(const Vector& x, const Vector& u) const {
        if (kind == GeneratorKind::Constant) return rates;
        const int n = regimes();
        const double w = switch_weight(x, u);
        Matrix m = low + (high - low) * w;
        for (int i = 0; i < n; ++i) {
            m(i, i) = 0.0;
            m(i, i) = -m.row(i).sum();
        }
        return m;
    }

    bool is_constant() const { return kind == GeneratorKind::Constant; }
};

enum class RunningCostKind { Constant, Quadratic, ClampedQuadratic };
enum class TerminalKind { Constant, Quadratic, Bump };

/// c(x, i, u) = offset_i + x'Q_i x + u'R_i u, optionally clamped at `cap`.
struct RunningCost {
    RunningCostKind kind = RunningCostKind::Constant;
    std::vector<double> offset;
    RegimeMatrices Q;
    RegimeMatrices R;
    double cap = kInf;

    double evaluate(const Vector& x, int i, const Vector& u) const {
        const auto r = static_cast<std::size_t>(i);
        double c = offset.empty() ? 0.0 : offset[r];
        if (kind == RunningCostKind::Constant) return c;
        if (!Q.empty()) c += x.dot(Q[r] * x);
        if (!R.empty() && u.size()) c += u.dot(R[r] * u);
        if (kind == RunningCostKind::ClampedQuadratic) c = std::min(c, cap);
        return c;
    }

    /// Declared bound M_c; infinite for unclamped quadratic costs.
    double bound() const {
        const double off = offset.empty() ? 0.0 : *std::max_element(offset.begin(), offset.end());
        switch (kind) {
            case RunningCostKind::Constant: return std::max(off, 0.0);
            case RunningCostKind::ClampedQuadratic: return cap;
            case RunningCostKind::Quadratic: {
                const bool flat = std::all_of(Q.begin(), Q.end(), [](const Matrix& q) { return q.isZero(0.0); }) &&
                                  std::all_of(R.begin(), R.end(), [](const Matrix& q) { return q.isZero(0.0); });
                return flat ? std::max(off, 0.0) : kInf;
            }
        }
        return kInf;
    }

    /// Multiplies the cost pointwise by lambda >= 0.
    void scale_by(double lambda) {
        for (auto& o : offset) o *= lambda;
        for (auto& q : Q) q *= lambda;
        for (auto& q : R) q *= lambda;
        if (std::isfinite(cap)) cap *= lambda;
    }
};

/// Terminal-type cost g(x, i) used for c_T and the exit payoff h.
///   constant: offset_i
///   quadratic: offset_i + x'P_i x
///   bump: offset_i + height * exp(-|x - center|^2 / width^2)
struct TerminalCost {
    TerminalKind kind = TerminalKind::Constant;
    std::vector<double> offset;
    RegimeMatrices P;
    double height = 0.0;
    double width = 1.0;
    Vector center;

    double evaluate(const Vector& x, int i) const {
        const auto r = static_cast<std::size_t>(i);
        double g = offset.empty() ? 0.0 : offset[r];
        switch (kind) {
            case TerminalKind::Constant: break;
            case TerminalKind::Quadratic: g += x.dot(P[r] * x); break;
            case TerminalKind::Bump: {
                const double d2 = center.size() ? (x - center).squaredNorm() : x.squaredNorm();
                g += height * std::exp(-d2 / (width * width));
                break;
            }
        }
        return g;
    }

    void scale_by(double lambda) {
        for (auto& o : offset) o *= lambda;
        for (auto& p : P) p *= lambda;
        height *= lambda;
    }
};

/// beta(x, i, u) = offset_i + action_weight_i * |u|^2.
struct ExitDiscount {
    std::vector<double> offset;
    std::vector<double> action_weight;

    double evaluate(const Vector& /*x*/, int i, const Vector& u) const {
        const auto r = static_cast<std::size_t>(i);
        double b = offset.empty() ? 0.0 : offset[r];
        if (!action_weight.empty() && u.size()) b += action_weight[r] * u.squaredNorm();
        return b;
    }
};

/// Exit domain: open interval (d = 1) or open ball centred at 0.
struct ExitDomain {
    enum class Kind { Interval, Ball };
    Kind kind = Kind::Interval;
    double lower = -1.0;
    double upper = 1.0;
    double radius = 1.0;

    bool contains(const Vector& x) const {
        if (kind == Kind::Interval) return x(0) > lower && x(0) < upper;
        return x.norm() < radius;
    }
    bool in_closure(const Vector& x) const {
        if (kind == Kind::Interval) return x(0) >= lower && x(0) <= upper;
        return x.norm() <= radius;
    }
};

struct CostSpec {
    RunningCost running;
    TerminalCost terminal;
    TerminalCost exit;
    ExitDiscount exit_discount;
    double discount = 1.0;  // alpha
    double horizon = 1.0;   // T
    ExitDomain domain;

    double running_bound() const { return running.bound(); }
};

/// Noise-approximation overlay: the driving noise is dY = bhat dt + sighat dW,
/// so the effective drift is b + sigma * bhat and the diffusion sigma * sighat.
struct NoiseOverlay {
    RegimeVectors drift_shift;        // bhat_i, length m
    RegimeMatrices diffusion_factor;  // sighat_i, m x m
};

struct ModelSpec {
    int dim = 1;
    RegimeSet regimes;
    ActionGrid actions;
    DriftFamily drift;
    DiffusionFamily diffusion;
    GeneratorSpec generator;
    CostSpec costs;
    std::optional<NoiseOverlay> noise;

    int regime_count() const { return regimes.count; }
    int action_dim() const { return actions.dim(); }
    int noise_dim() const { return diffusion.noise_dim(dim); }

    bool is_lq() const {
        return drift.kind == FamilyKind::Lq && diffusion.kind == FamilyKind::Lq &&
               costs.running.kind == RunningCostKind::Quadratic;
    }

    /// Throws E_SHAPE on any inconsistent dimension.
    void check_shapes() const;
};

namespace detail {

inline void check_matrices(const RegimeMatrices& ms, std::size_t n, Eigen::Index rows, Eigen::Index cols,
                           const std::string& what) {
    require(ms.size() == n, ErrorCode::Shape, what + ": expected one matrix per regime");
    for (const auto& m : ms) {
        require(m.rows() == rows && (cols < 0 || m.cols() == cols), ErrorCode::Shape,
                what + ": expected " + std::to_string(rows) + "x" + (cols < 0 ? std::string("*") : std::to_string(cols)) +
                    ", got " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
}

inline void check_table(const std::vector<double>& nodes, const std::vector<std::vector<double>>& table,
                        std::size_t n, const std::string& what) {
    require(nodes.size() >= 2, ErrorCode::Shape, what + ": tabulated family needs at least two nodes");
    require(std::is_sorted(nodes.begin(), nodes.end()) &&
                std::adjacent_find(nodes.begin(), nodes.end()) == nodes.end(),
            ErrorCode::Shape, what + ": nodes must be strictly increasing");
    require(table.size() == n, ErrorCode::Shape, what + ": expected one table per regime");
    for (const auto& t : table) require(t.size() == nodes.size(), ErrorCode::Shape, what + ": table length mismatch");
}

}  // namespace detail

inline void ModelSpec::check_shapes() const {
    require(dim >= 1, ErrorCode::Shape, "dim must be >= 1");
    require(regimes.count >= 1, ErrorCode::Shape, "regime count must be >= 1");
    require(actions.size() >= 1, ErrorCode::Shape, "action grid is empty");
    const auto n = static_cast<std::size_t>(regimes.count);
    const Eigen::Index d = dim;
    const Eigen::Index l = action_dim();

    switch (drift.kind) {
        case FamilyKind::Lq:
        case FamilyKind::SaturatedAffine:
            detail::check_matrices(drift.A, n, d, d, "drift.A");
            break;
        case FamilyKind::Constant:
            require(drift.offset.size() == n, ErrorCode::Shape, "drift.offset: expected one vector per regime");
            for (const auto& o : drift.offset) require(o.size() == d, ErrorCode::Shape, "drift.offset: wrong length");
            break;
        case FamilyKind::Tabulated:
            require(d == 1, ErrorCode::Shape, "tabulated drift requires dim = 1");
            detail::check_table(drift.nodes, drift.table, n, "drift");
            break;
    }
    if (drift.kind == FamilyKind::SaturatedAffine)
        require(drift.scale > 0.0, ErrorCode::Shape, "drift.scale must be positive");
    if (!drift.B.empty()) detail::check_matrices(drift.B, n, d, l, "drift.B");

    switch (diffusion.kind) {
        case FamilyKind::Lq: detail::check_matrices(diffusion.C, n, d, d, "diffusion.C"); break;
        case FamilyKind::Constant: detail::check_matrices(diffusion.C, n, d, -1, "diffusion.C"); break;
        case FamilyKind::SaturatedAffine:
            detail::check_matrices(diffusion.C, n, d, d, "diffusion.C");
            detail::check_matrices(diffusion.S, n, d, d, "diffusion.S");
            require(diffusion.scale > 0.0, ErrorCode::Shape, "diffusion.scale must be positive");
            break;
        case FamilyKind::Tabulated:
            require(d == 1, ErrorCode::Shape, "tabulated diffusion requires dim = 1");
            detail::check_table(diffusion.nodes, diffusion.table, n, "diffusion");
            break;
    }
    if (diffusion.kind == FamilyKind::Constant && n > 1) {
        for (const auto& c : diffusion.C)
            require(c.cols() == diffusion.C.front().cols(), ErrorCode::Shape, "diffusion.C: inconsistent noise dimension");
    }

    const auto& g = generator;
    const Matrix& base = g.kind == GeneratorKind::Constant ? g.rates : g.low;
    require(base.rows() == regimes.count && base.cols() == regimes.count, ErrorCode::Shape,
            "generator: expected an N x N matrix");
    if (g.kind == GeneratorKind::StateActionDependent) {
        require(g.high.rows() == regimes.count && g.high.cols() == regimes.count, ErrorCode::Shape,
                "generator.high: expected an N x N matrix");
        require(g.state_weight.size() == 0 || g.state_weight.size() == d, ErrorCode::Shape,
                "generator.state_weight: wrong length");
        require(g.action_weight.size() == 0 || g.action_weight.size() == l, ErrorCode::Shape,
                "generator.action_weight: wrong length");
    }

    const auto& rc = costs.running;
    if (rc.kind != RunningCostKind::Constant) {
        if (!rc.Q.empty()) detail::check_matrices(rc.Q, n, d, d, "costs.running.Q");
        if (!rc.R.empty()) detail::check_matrices(rc.R, n, l, l, "costs.running.R");
    }
    require(rc.offset.empty() || rc.offset.size() == n, ErrorCode::Shape, "costs.running.offset: one entry per regime");
    for (const TerminalCost* t : {&costs.terminal, &costs.exit}) {
        require(t->offset.empty() || t->offset.size() == n, ErrorCode::Shape, "terminal offset: one entry per regime");
        if (t->kind == TerminalKind::Quadratic) detail::check_matrices(t->P, n, d, d, "terminal P");
        if (t->kind == TerminalKind::Bump)
            require(t->center.size() == 0 || t->center.size() == d, ErrorCode::Shape, "bump center: wrong length");
    }
    const auto& b = costs.exit_discount;
    require(b.offset.empty() || b.offset.size() == n, ErrorCode::Shape, "exit_discount.offset: one entry per regime");
    require(b.action_weight.empty() || b.action_weight.size() == n, ErrorCode::Shape,
            "exit_discount.action_weight: one entry per regime");

    if (noise) {
        const Eigen::Index m = noise_dim();
        require(noise->drift_shift.size() == n && noise->diffusion_factor.size() == n, ErrorCode::Shape,
                "noise overlay: one entry per regime");
        for (const auto& s : noise->drift_shift) require(s.size() == m, ErrorCode::Shape, "noise drift shift: wrong length");
        detail::check_matrices(noise->diffusion_factor, n, m, m, "noise diffusion factor");
    }
}

/// Per-thread evaluator with scratch buffers; evaluations do not allocate.
class ModelEvaluator {
public:
    explicit ModelEvaluator(const ModelSpec& spec)
        : spec_(&spec),
          drift_(spec.dim),
          sigma_raw_(spec.dim, spec.noise_dim()),
          sigma_(spec.dim, spec.noise_dim()) {}

    const ModelSpec& spec() const { return *spec_; }

    const Vector& drift(const Vector& x, int i, const Vector& u) {
        spec_->drift.evaluate(x, i, u, drift_);
        if (spec_->noise) {
            spec_->diffusion.evaluate(x, i, sigma_raw_);
            drift_.noalias() += sigma_raw_ * spec_->noise->drift_shift[static_cast<std::size_t>(i)];
        }
        return drift_;
    }

    const Matrix& diffusion(const Vector& x, int i) {
        if (!spec_->noise) {
            spec_->diffusion.evaluate(x, i, sigma_);
            return sigma_;
        }
        spec_->diffusion.evaluate(x, i, sigma_raw_);
        sigma_.noalias() = sigma_raw_ * spec_->noise->diffusion_factor[static_cast<std::size_t>(i)];
        return sigma_;
    }

private:
    const ModelSpec* spec_;
    Vector drift_;
    Matrix sigma_raw_;
    Matrix sigma_;
};

inline Vector drift_at(const ModelSpec& spec, const Vector& x, int i, const Vector& u) {
    ModelEvaluator ev(spec);
    return ev.drift(x, i, u);
}

inline Matrix diffusion_at(const ModelSpec& spec, const Vector& x, int i) {
    ModelEvaluator ev(spec);
    return ev.diffusion(x, i);
}

// ---------------------------------------------------------------------------
// Validation

struct SamplePoint {
    Vector x;
    int regime = 0;
    Vector action;
};

/// Lattice on [-radius, radius] along each coordinate axis (plus the
/// diagonal when d > 1), crossed with every regime and every grid action.
inline std::vector<SamplePoint> make_sample(const ModelSpec& spec, double radius, int per_axis = 21) {
    std::vector<Vector> xs;
    const int d = spec.dim;
    for (int k = 0; k < per_axis; ++k) {
        const double s = per_axis == 1 ? 0.0 : -radius + 2.0 * radius * k / (per_axis - 1);
        for (int axis = 0; axis < d; ++axis) {
            Vector x = Vector::Zero(d);
            x(axis) = s;
            xs.push_back(x);
        }
        if (d > 1) xs.push_back(Vector::Constant(d, s / std::sqrt(static_cast<double>(d))));
    }
    std::vector<SamplePoint> out;
    for (int i = 0; i < spec.regime_count(); ++i)
        for (const auto& u : spec.actions.actions())
            for (const auto& x : xs) out.push_back({x, i, u});
    return out;
}

struct Finding {
    std::string id;
    std::string description;
    bool structural = false;
    bool advisory = false;
    bool passed = true;
    std::string detail;
};

struct ValidationReport {
    std::vector<Finding> findings;
    bool riccati_only = false;

    const Finding* find(const std::string& id) const {
        for (const auto& f : findings)
            if (f.id == id) return &f;
        return nullptr;
    }
    bool structural_ok() const {
        return std::all_of(findings.begin(), findings.end(), [](const Finding& f) { return !f.structural || f.passed; });
    }
    /// All non-advisory findings pass.
    bool all_ok() const {
        return std::all_of(findings.begin(), findings.end(), [](const Finding& f) { return f.advisory || f.passed; });
    }
};

inline ValidationReport validate_model(const ModelSpec& spec, const std::vector<SamplePoint>& sample) {
    require(!sample.empty(), ErrorCode::Shape, "validation sample is empty");
    spec.check_shapes();
    for (const auto& p : sample) {
        require(p.x.size() == spec.dim && p.action.size() == spec.action_dim(), ErrorCode::Shape,
                "sample point has wrong dimension");
        require(p.regime >= 0 && p.regime < spec.regime_count(), ErrorCode::Shape, "sample regime out of range");
    }

    const int n = spec.regime_count();
    ModelEvaluator ev(spec);
    double worst_row = 0.0, worst_sign = 0.0, worst_rate = 0.0, worst_beta = 0.0;
    double min_cost = kInf, max_cost = -kInf;
    double min_eig = kInf;
    double growth = 0.0;
    for (const auto& p : sample) {
        const Matrix m = spec.generator.evaluate(p.x, p.action);
        for (int i = 0; i < n; ++i) {
            worst_row = std::max(worst_row, std::abs(m.row(i).sum()));
            for (int j = 0; j < n; ++j) {
                if (i == j) continue;
                worst_sign = std::min(worst_sign, m(i, j));
                worst_rate = std::max(worst_rate, m(i, j));
            }
        }
        const double c = spec.costs.running.evaluate(p.x, p.regime, p.action);
        min_cost = std::min(min_cost, c);
        max_cost = std::max(max_cost, c);
        worst_beta = std::min(worst_beta, spec.costs.exit_discount.evaluate(p.x, p.regime, p.action));

        const Matrix& sigma = ev.diffusion(p.x, p.regime);
        const Matrix a = 0.5 * sigma * sigma.transpose();
        min_eig = std::min(min_eig, min_eigenvalue(a));
        const Vector& b = ev.drift(p.x, p.regime, p.action);
        const double inner = std::max(0.0, b.dot(p.x));
        growth = std::max(growth, (inner + sigma.squaredNorm()) / (1.0 + p.x.squaredNorm()));
    }

    // Lipschitz ratios on consecutive sample pairs sharing regime and action.
    double lipschitz = 0.0;
    for (std::size_t k = 1; k < sample.size(); ++k) {
        const auto& p = sample[k - 1];
        const auto& q = sample[k];
        if (p.regime != q.regime || p.action != q.action) continue;
        const double dx2 = (p.x - q.x).squaredNorm();
        if (dx2 == 0.0) continue;
        const Vector bp = ev.drift(p.x, p.regime, p.action);
        const Matrix sp = ev.diffusion(p.x, p.regime);
        const Vector& bq = ev.drift(q.x, q.regime, q.action);
        const Matrix& sq = ev.diffusion(q.x, q.regime);
        const Matrix mp = spec.generator.evaluate(p.x, p.action);
        const Matrix mq = spec.generator.evaluate(q.x, q.action);
        const double num = (bp - bq).squaredNorm() + (sp - sq).squaredNorm() + (mp - mq).squaredNorm();
        lipschitz = std::max(lipschitz, num / dx2);
    }

    const double bound_m = spec.generator.bound;
    const double mc = spec.costs.running_bound();

    ValidationReport report;
    auto add = [&](std::string id, std::string desc, bool structural, bool advisory, bool ok, std::string detail) {
        report.findings.push_back({std::move(id), std::move(desc), structural, advisory, ok, std::move(detail)});
    };
    add("generator-rows", "generator rows sum to zero", true, false, worst_row <= 1e-12,
        "max |row sum| = " + std::to_string(worst_row));
    add("generator-signs", "off-diagonal rates are nonnegative", true, false, worst_sign >= 0.0,
        "min off-diagonal = " + std::to_string(worst_sign));
    add("generator-bound", "off-diagonal rates do not exceed the bound M", true, false,
        bound_m > 0.0 ? worst_rate <= bound_m : worst_rate == 0.0,
        "max rate = " + std::to_string(worst_rate) + ", M = " + std::to_string(bound_m));
    add("exit-discount", "exit discount beta is nonnegative", true, false, worst_beta >= 0.0,
        "min beta = " + std::to_string(worst_beta));

    const bool unbounded = !std::isfinite(mc);
    report.riccati_only = unbounded;
    add("A5", "running cost satisfies 0 <= c <= M_c", false, false,
        !unbounded && min_cost >= 0.0 && max_cost <= mc,
        unbounded ? std::string("unbounded running cost (riccati-only)")
                  : "range [" + std::to_string(min_cost) + ", " + std::to_string(max_cost) +
                        "], M_c = " + std::to_string(mc));
    add("A3", "diffusion is nondegenerate (min eig of sigma sigma^T / 2 > 0)", false, false, min_eig > 0.0,
        "min eigenvalue = " + std::to_string(min_eig));
    add("A1", "finite-difference Lipschitz ratios bounded on sample pairs", false, true, std::isfinite(lipschitz),
        "max ratio = " + std::to_string(lipschitz));
    add("A2", "affine growth ratio bounded on samples", false, true, std::isfinite(growth),
        "max (<b,x>^+ + |sigma|^2)/(1+|x|^2) = " + std::to_string(growth));
    return report;
}

// ---------------------------------------------------------------------------
// Lyapunov condition

/// V(x, i) = level_i + weight_i |x|^2 and hhat(x, i, u) = kappa |x|^2.
struct LyapunovPair {
    std::vector<double> level;
    std::vector<double> weight;
    double kappa = 1.0;
    double c0 = 0.0;

    static LyapunovPair standard(int regimes, double kappa, double c0) {
        return {std::vector<double>(static_cast<std::size_t>(regimes), 1.0),
                std::vector<double>(static_cast<std::size_t>(regimes), 1.0), kappa, c0};
    }

    double value(const Vector& x, int i) const {
        const auto r = static_cast<std::size_t>(i);
        return level[r] + weight[r] * x.squaredNorm();
    }
};

struct LyapunovReport {
    double max_violation = -kInf;
    bool passed = true;
};

/// max over the sample of L_u V + hhat - C0, where
/// L_u V = tr(a Hess V) + b . grad V + sum_j m_ij V(x, j).
inline LyapunovReport check_lyapunov_sampled(const ModelSpec& spec, const LyapunovPair& pair,
                                             const std::vector<SamplePoint>& sample) {
    spec.check_shapes();
    const int n = spec.regime_count();
    require(pair.level.size() == static_cast<std::size_t>(n) && pair.weight.size() == static_cast<std::size_t>(n),
            ErrorCode::Shape, "Lyapunov pair: one level and weight per regime");
    ModelEvaluator ev(spec);
    LyapunovReport rep;
    for (const auto& p : sample) {
        const auto r = static_cast<std::size_t>(p.regime);
        const Matrix& sigma = ev.diffusion(p.x, p.regime);
        // tr(a * 2w I) = w |sigma|_F^2
        double lv = pair.weight[r] * sigma.squaredNorm();
        lv += ev.drift(p.x, p.regime, p.action).dot(2.0 * pair.weight[r] * p.x);
        for (int j = 0; j < n; ++j) lv += spec.generator.rate(p.regime, j, p.x, p.action) * pair.value(p.x, j);
        const double violation = lv + pair.kappa * p.x.squaredNorm() - pair.c0;
        rep.max_violation = std::max(rep.max_violation, violation);
    }
    rep.passed = rep.max_violation <= 1e-9;
    return rep;
}

}  // namespace rsctl
