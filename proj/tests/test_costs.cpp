#include "fixtures.hpp"

#include <catch_amalgamated.hpp>

using namespace rsctl;
using namespace fixtures;

namespace {

const Policy kZero = Policy::constant(v1(0.0));

McOptions opts(long paths, std::uint64_t seed, int threads = 1) {
    McOptions o;
    o.paths = paths;
    o.seed = seed;
    o.exec.threads = threads;
    return o;
}

// OU dynamics dX = -X dt + dW with c = min(x^2, 10); invariant law N(0, 1/2).
ModelSpec ou_clamped() {
    ModelSpec m = lq_model(scalar_lq(-1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0), {v1(0.0)});
    m.diffusion.kind = FamilyKind::Constant;
    m.diffusion.C = {m1(1.0)};
    m.costs.running.kind = RunningCostKind::ClampedQuadratic;
    m.costs.running.cap = 10.0;
    return m;
}

// E[min(X^2, 10)] for X ~ N(0, 1/2), composite Simpson on [-12, 12].
double ou_clamped_mean() {
    const int n = 24000;
    const double lo = -12.0, h = 24.0 / n;
    double s = 0.0;
    for (int k = 0; k <= n; ++k) {
        const double x = lo + k * h;
        const double f = std::min(x * x, 10.0) * std::exp(-x * x) / std::sqrt(std::numbers::pi);
        s += f * (k == 0 || k == n ? 1.0 : (k % 2 ? 4.0 : 2.0));
    }
    return s * h / 3.0;
}

}  // namespace

TEST_CASE("finite horizon: c = 1 over T = 2 costs exactly 2") {
    const ModelSpec m = constant_model({0.0}, {1.0}, {1.0}, m1(0.0));
    const auto e = mc_finite_horizon(m, kZero, v1(0.0), 0, 2.0, 0.01, opts(200, 1));
    CHECK(e.value == Catch::Approx(2.0).epsilon(1e-12));
    CHECK(e.std_error == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("finite horizon: tanh benchmark under optimal feedback") {
    const LQSpec lq = tanh_lq();
    const auto k = solve_coupled_riccati(lq, 1000);
    const Policy pol = Policy::lq_feedback(lq_feedback(k, lq));
    const auto e = mc_finite_horizon(lq_model(lq), pol, v1(1.0), 0, 1.0, 1e-3, opts(1000, 21));
    // noiseless dynamics: every path is the same
    CHECK(e.std_error <= 1e-12);
    CHECK(std::abs(e.value - tanh1()) <= 3.0 * e.std_error + 0.02);
}

TEST_CASE("finite horizon: c = 0 and no terminal cost gives 0") {
    const ModelSpec m = constant_model({0.0}, {1.0}, {0.0}, m1(0.0));
    const auto e = mc_finite_horizon(m, kZero, v1(0.0), 0, 1.0, 0.01, opts(20, 22));
    CHECK(e.value == 0.0);
    CHECK(e.std_error == 0.0);
}

TEST_CASE("finite horizon: optimal LQ feedback reproduces x'K(0)x") {
    const LQSpec lq = two_regime_lq();
    const auto k = solve_coupled_riccati(lq, 1000);
    const Policy pol = Policy::lq_feedback(lq_feedback(k, lq));
    const ModelSpec m = lq_model(lq);
    for (int i0 : {0, 1}) {
        const auto e = mc_finite_horizon(m, pol, v1(1.0), i0, 1.0, 1e-3, opts(20000, 2));
        CHECK(std::abs(e.value - k.at(0, i0)(0, 0)) <= 3.0 * e.std_error + 0.02);
    }
}

TEST_CASE("discounted: c = 1, alpha = 0.5 gives 2 up to the tail tolerance") {
    const ModelSpec m = constant_model({0.0}, {1.0}, {1.0}, m1(0.0));
    const double eps = 1e-4;
    const auto e = mc_discounted(m, kZero, v1(0.0), 0, 0.5, 0.01, eps, opts(50, 3));
    CHECK(std::abs(e.value - 2.0) <= eps + 1e-12);
    CHECK(e.value <= 2.0);
    CHECK(e.truncation_bias_bound == eps);
    CHECK(e.horizon == Catch::Approx(std::log(1.0 / (0.5 * eps)) / 0.5));
}

TEST_CASE("discounted: chain (alpha I - M)^-1 c = (1.25, 1.5)") {
    const ModelSpec m = chain_model();
    const double expected[] = {1.25, 1.5};
    for (int i0 : {0, 1}) {
        const auto e = mc_discounted(m, kZero, v1(0.0), i0, 1.0, 0.01, 1e-4, opts(50000, 4));
        CHECK(std::abs(e.value - expected[i0]) <= 3.0 * e.std_error + 1e-3);
    }
}

TEST_CASE("discounted: zero cost gives zero") {
    const ModelSpec m = constant_model({0.0}, {1.0}, {0.0}, m1(0.0));
    const auto e = mc_discounted(m, kZero, v1(0.0), 0, 1.0, 0.01, 1e-4, opts(10, 5));
    CHECK(e.value == 0.0);
    CHECK(e.std_error == 0.0);
}

TEST_CASE("discounted estimates respect |V| <= M_c / alpha") {
    const ModelSpec m = saturated_model();
    for (double x0 : {-1.5, 0.0, 2.5}) {
        const auto e = mc_discounted(m, Policy::constant(v1(1.0)), v1(x0), 0, 0.5, 0.02, 1e-3, opts(200, 6));
        CHECK(e.value >= 0.0);
        CHECK(e.value <= 4.0 / 0.5 + 3.0 * e.std_error + 1e-3);
    }
}

TEST_CASE("discounted estimator rejects unbounded costs") {
    const ModelSpec m = lq_model(tanh_lq());
    try {
        mc_discounted(m, kZero, v1(0.0), 0, 1.0, 0.01, 1e-4, opts(10, 7));
        FAIL("expected E_UNBOUNDED");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Unbounded);
    }
}

TEST_CASE("ergodic: constant cost 3 gives exactly 3") {
    const ModelSpec m = constant_model({0.0}, {1.0}, {3.0}, m1(0.0));
    const auto e = mc_ergodic(m, kZero, v1(0.0), 0, 50.0, 10.0, 0.01, opts(20, 8));
    CHECK(e.value == Catch::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("ergodic: chain time average tends to pi . c = 4/3") {
    const ModelSpec m = chain_model();
    const auto e = mc_ergodic(m, kZero, v1(0.0), 0, 200.0, 40.0, 0.01, opts(200, 9));
    CHECK(std::abs(e.value - 4.0 / 3.0) <= 3.0 * e.std_error + 0.02);
}

TEST_CASE("ergodic: OU with clamped cost agrees with the grid solver and the invariant law") {
    const ModelSpec m = ou_clamped();
    const double exact = ou_clamped_mean();
    const auto e = mc_ergodic(m, kZero, v1(0.0), 0, 200.0, 40.0, 0.01, opts(200, 10));
    const auto grid = estimate_ergodic(m, Grid1D(-4.0, 4.0, 201));
    CHECK(std::abs(grid.rho - exact) <= 0.02);
    CHECK(std::abs(e.value - grid.rho) <= 3.0 * e.std_error + 0.05);
}

TEST_CASE("exit: c = 0, beta = 0, h = 5 gives exactly 5") {
    ModelSpec m = brownian_exit_model();
    m.costs.running.offset = {0.0};
    m.costs.exit.kind = TerminalKind::Constant;
    m.costs.exit.offset = {5.0};
    const auto e = mc_exit(m, kZero, v1(0.0), 0, 1e-3, 50.0, opts(500, 11));
    CHECK(e.value == Catch::Approx(5.0).epsilon(1e-14));
    CHECK(e.capped_fraction == 0.0);
    CHECK_FALSE(e.cap_warning);
}

TEST_CASE("exit: c = 1 gives E[tau] = (1 - x^2) / 2") {
    const ModelSpec m = brownian_exit_model();
    for (double x0 : {0.0, 0.5}) {
        const auto e = mc_exit(m, kZero, v1(x0), 0, 1e-4, 50.0, opts(10000, 12));
        CHECK(std::abs(e.value - (1.0 - x0 * x0) / 2.0) <= 3.0 * e.std_error + 0.02);
    }
}

TEST_CASE("exit: start on the boundary pays h immediately") {
    ModelSpec m = brownian_exit_model();
    m.costs.exit.kind = TerminalKind::Constant;
    m.costs.exit.offset = {2.5};
    const auto e = mc_exit(m, kZero, v1(1.0), 0, 1e-3, 10.0, opts(5, 13));
    CHECK(e.value == 2.5);
    CHECK(e.std_error == 0.0);
    CHECK_THROWS_AS(mc_exit(m, kZero, v1(1.5), 0, 1e-3, 10.0, opts(5, 13)), Error);
}

TEST_CASE("exit: capped paths are reported") {
    const ModelSpec m = constant_model({0.0}, {0.0}, {1.0}, m1(0.0));
    const auto e = mc_exit(m, kZero, v1(0.0), 0, 0.1, 3.0, opts(4, 14));
    CHECK(e.capped_fraction == 1.0);
    CHECK(e.cap_warning);
    CHECK(e.value == Catch::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("scaling all costs by 2 scales every estimate by 2") {
    ModelSpec a = saturated_model();
    ModelSpec b = a;
    b.costs.running.Q = per_regime(2, m1(2.0));
    b.costs.running.R = per_regime(2, m1(0.6));
    b.costs.running.cap = 8.0;
    b.costs.terminal.height = 2.0;
    const Policy pol = Policy::constant(v1(-1.0));
    const auto fa = mc_finite_horizon(a, pol, v1(0.5), 1, 1.0, 0.01, opts(300, 15));
    const auto fb = mc_finite_horizon(b, pol, v1(0.5), 1, 1.0, 0.01, opts(300, 15));
    CHECK(fb.value == 2.0 * fa.value);
    CHECK(fb.std_error == 2.0 * fa.std_error);
    const auto ea = mc_ergodic(a, pol, v1(0.5), 1, 10.0, 2.0, 0.01, opts(50, 16));
    const auto eb = mc_ergodic(b, pol, v1(0.5), 1, 10.0, 2.0, 0.01, opts(50, 16));
    CHECK(eb.value == 2.0 * ea.value);
}

TEST_CASE("same seed gives the same estimate regardless of thread count") {
    const ModelSpec m = saturated_model();
    const Policy pol = Policy::constant(v1(1.0));
    const auto a = mc_discounted(m, pol, v1(0.3), 0, 0.5, 0.02, 1e-2, opts(400, 17, 1));
    const auto b = mc_discounted(m, pol, v1(0.3), 0, 0.5, 0.02, 1e-2, opts(400, 17, 2));
    const auto c = mc_discounted(m, pol, v1(0.3), 0, 0.5, 0.02, 1e-2, opts(400, 18, 1));
    CHECK(a.value == b.value);
    CHECK(a.std_error == b.std_error);
    CHECK(a.value != c.value);
}

TEST_CASE("standard error shrinks like 1/sqrt(paths)") {
    const ModelSpec m = ou_clamped();
    const auto small = mc_ergodic(m, kZero, v1(0.0), 0, 20.0, 4.0, 0.02, opts(500, 19));
    const auto large = mc_ergodic(m, kZero, v1(0.0), 0, 20.0, 4.0, 0.02, opts(1000, 20));
    const double ratio = large.std_error / small.std_error;
    CHECK(ratio >= 0.6);
    CHECK(ratio <= 0.82);
}

TEST_CASE("estimates CSV layout") {
    EstimateRow r;
    r.criterion = "discounted";
    r.x0 = v1(0.5);
    r.i0 = 1;
    r.estimate.value = 1.25;
    r.estimate.paths = 10;
    const std::string csv = estimates_csv({r});
    CHECK(csv == "criterion,x0,i0,value,stderr,paths,bias_bound,capped_fraction\n"
                 "discounted,0.5,2,1.25,0,10,0,0\n");
}
