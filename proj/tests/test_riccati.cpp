#include "fixtures.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace rsctl;
using namespace fixtures;

namespace {

MatrixTrajectory constant_trajectory(const RegimeMatrices& value, double horizon, int steps) {
    MatrixTrajectory t;
    t.times = rsctl::detail::uniform_times(horizon, steps);
    t.values.assign(t.times.size(), value);
    return t;
}

double max_gap_at_zero(const MatrixTrajectory& a, const MatrixTrajectory& b) {
    double g = 0.0;
    for (std::size_t i = 0; i < a.values.front().size(); ++i)
        g = std::max(g, spectral_norm(a.values.front()[i] - b.values.front()[i]));
    return g;
}

}  // namespace

TEST_CASE("tanh benchmark: K(0) = tanh(1)") {
    const auto k = solve_coupled_riccati(tanh_lq(), 1000);
    CHECK(std::abs(k.at(0, 0)(0, 0) - std::tanh(1.0)) <= 1e-6);
    // whole trajectory follows tanh(T - t)
    for (int s = 0; s <= k.steps(); s += 100) CHECK(std::abs(k.at(s, 0)(0, 0) - std::tanh(1.0 - k.times[static_cast<std::size_t>(s)])) <= 1e-6);
}

TEST_CASE("zero cost gives zero value") {
    LQSpec lq = two_regime_lq();
    lq.B = per_regime(2, m1(3.7));
    lq.Q = per_regime(2, m1(0.0));
    lq.P = per_regime(2, m1(1e-12));
    const auto k = solve_coupled_riccati(lq, 1000);
    double worst = 0.0;
    for (int s = 0; s <= k.steps(); ++s)
        for (int i = 0; i < 2; ++i) worst = std::max(worst, spectral_norm(k.at(s, i)));
    CHECK(worst <= 1e-10);
}

TEST_CASE("pure forcing: K = P + Q (T - t)") {
    const auto k = solve_coupled_riccati(scalar_lq(0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 2.0), 1000);
    CHECK(k.at(0, 0)(0, 0) == Catch::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("two-regime case matches a quadruple-step reference") {
    const LQSpec lq = two_regime_lq();
    const auto k = solve_coupled_riccati(lq, 1000);
    const auto ref = solve_coupled_riccati(lq, 4000);
    CHECK(max_gap_at_zero(k, ref) <= 1e-8);
}

TEST_CASE("RK4 convergence order: differences shrink by at least 8 per halving") {
    const LQSpec lq = two_regime_lq();
    std::vector<MatrixTrajectory> runs;
    for (int steps : {10, 20, 40, 80}) runs.push_back(solve_coupled_riccati(lq, steps));
    std::vector<double> diffs;
    for (std::size_t r = 1; r < runs.size(); ++r) diffs.push_back(max_gap_at_zero(runs[r - 1], runs[r]));
    for (std::size_t r = 1; r < diffs.size(); ++r) CHECK(diffs[r - 1] / diffs[r] >= 8.0);
}

TEST_CASE("positive definiteness, a-priori bound and time-Lipschitz stability") {
    const LQSpec lq = two_regime_lq();
    const double bound = riccati_norm_bound(lq);
    // C0 = max(|Q| + |P|) = 2, k0 = max(2|A| + |C|^2) = 2.04
    CHECK(bound == Catch::Approx(2.0 * std::exp(2.04) * 2.0).epsilon(1e-12));
    std::vector<double> lips;
    for (int steps : {500, 1000, 2000}) {
        const auto k = solve_coupled_riccati(lq, steps);
        for (int s = 0; s <= k.steps(); ++s)
            for (int i = 0; i < 2; ++i) {
                if (s < k.steps()) CHECK(min_eigenvalue(k.at(s, i)) > 0.0);
                CHECK(spectral_norm(k.at(s, i)) <= bound);
                CHECK(max_abs_asymmetry(k.at(s, i)) == 0.0);
            }
        lips.push_back(time_lipschitz(k));
    }
    CHECK(lips[1] / lips[0] <= 1.1);
    CHECK(lips[2] / lips[1] <= 1.1);
}

TEST_CASE("lq_feedback: scalar K = 0.5 at x = 2 gives action -1") {
    const LQSpec lq = scalar_lq(0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0);
    const auto f = lq_feedback(constant_trajectory({m1(0.5)}, 1.0, 10), lq);
    const ModelSpec m = lq_model(lq);
    Vector u(1);
    Policy::lq_feedback(f).act(0.3, v1(2.0), 0, m.actions, u);
    CHECK(u(0) == Catch::Approx(-1.0).epsilon(1e-15));
}

TEST_CASE("lq_feedback: B = 0 gives zero gain") {
    const LQSpec lq = scalar_lq(0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0);
    const auto f = lq_feedback(solve_coupled_riccati(lq, 100), lq);
    for (const auto& slice : f.gains.values) CHECK(slice[0].norm() == 0.0);
}

TEST_CASE("lq_feedback: d = 2, l = 1 with K = I, B = (1, 0), R = 2") {
    LQSpec lq;
    lq.A = {Matrix::Zero(2, 2)};
    Matrix b(2, 1);
    b << 1.0, 0.0;
    lq.B = {b};
    lq.C = {Matrix::Zero(2, 2)};
    lq.Q = {Matrix::Identity(2, 2)};
    lq.R = {m1(2.0)};
    lq.P = {Matrix::Identity(2, 2)};
    lq.generator = m1(0.0);
    const auto f = lq_feedback(constant_trajectory({Matrix::Identity(2, 2)}, 1.0, 10), lq);
    const Matrix g = f.gains.at(0, 0);
    REQUIRE(g.rows() == 1);
    REQUIRE(g.cols() == 2);
    CHECK(g(0, 0) == Catch::Approx(0.5).epsilon(1e-14));
    CHECK(g(0, 1) == 0.0);
}

TEST_CASE("fixed_feedback_cost of the optimal feedback equals K") {
    const LQSpec lq = two_regime_lq();
    const auto k = solve_coupled_riccati(lq, 1000);
    const auto m = fixed_feedback_cost(lq, lq_feedback(k, lq), 1000);
    CHECK(max_trajectory_gap(m, k) <= 1e-7);
}

TEST_CASE("fixed_feedback_cost with F = 0 and no dynamics: M(0) = p + q T") {
    const LQSpec lq = scalar_lq(0.0, 1.0, 0.0, 0.7, 1.0, 1.3, 2.0);
    const auto m = fixed_feedback_cost(lq, constant_feedback({m1(0.0)}, 2.0), 500);
    CHECK(m.at(0, 0)(0, 0) == Catch::Approx(1.3 + 0.7 * 2.0).epsilon(1e-12));
}

TEST_CASE("constant feedback F = 1 on the tanh benchmark: M(0) = 1 - e^-2") {
    const auto m = fixed_feedback_cost(tanh_lq(), constant_feedback({m1(1.0)}, 1.0), 1000);
    const double v = m.at(0, 0)(0, 0);
    CHECK(std::abs(v - (1.0 - std::exp(-2.0))) <= 1e-6);
    CHECK(v > std::tanh(1.0));
}

TEST_CASE("suboptimality ordering: M(0) - K(0) is positive semidefinite for random feedback") {
    const LQSpec lq = two_regime_lq();
    const auto k = solve_coupled_riccati(lq, 400);
    std::mt19937_64 gen(12345);
    std::uniform_real_distribution<double> dist(-3.0, 3.0);
    for (int trial = 0; trial < 20; ++trial) {
        const auto m = fixed_feedback_cost(lq, constant_feedback({m1(dist(gen)), m1(dist(gen))}, 1.0), 400);
        for (int i = 0; i < 2; ++i) CHECK(min_eigenvalue(m.at(0, i) - k.at(0, i)) >= -1e-8);
    }
}

TEST_CASE("riccati_defect") {
    SECTION("exact constant solution") {
        LQSpec lq = two_regime_lq();
        lq.Q = per_regime(2, m1(0.0));
        lq.P = per_regime(2, m1(1e-12));
        CHECK(riccati_defect(solve_coupled_riccati(lq, 200), lq) <= 1e-9);
    }
    SECTION("zero trajectory with Q = I has defect |Q| = 1") {
        const LQSpec lq = scalar_lq(0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0);
        CHECK(riccati_defect(constant_trajectory({m1(0.0)}, 1.0, 50), lq) == Catch::Approx(1.0).epsilon(1e-14));
    }
    SECTION("second-order decay on the tanh benchmark") {
        const LQSpec lq = tanh_lq();
        const double d1 = riccati_defect(solve_coupled_riccati(lq, 1000), lq);
        const double d2 = riccati_defect(solve_coupled_riccati(lq, 2000), lq);
        CHECK(d2 <= 0.3 * d1);
    }
}

TEST_CASE("input errors") {
    SECTION("R not positive definite") {
        LQSpec lq = tanh_lq();
        lq.R = {m1(0.0)};
        try {
            solve_coupled_riccati(lq, 100);
            FAIL("expected E_EIG");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::Eig);
        }
    }
    SECTION("inconsistent generator") {
        LQSpec lq = two_regime_lq();
        lq.generator(0, 0) = 0.5;
        try {
            solve_coupled_riccati(lq, 100);
            FAIL("expected E_RATES");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::Rates);
        }
    }
    SECTION("finite-time growth past the blow-up threshold") {
        LQSpec lq = scalar_lq(20.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0);
        try {
            solve_coupled_riccati(lq, 1000);
            FAIL("expected E_BLOWUP");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::Blowup);
        }
    }
    SECTION("too few steps") { CHECK_THROWS_AS(solve_coupled_riccati(tanh_lq(), 4), Error); }
}

TEST_CASE("semidefinite terminal weight is nudged with a warning") {
    LQSpec lq = scalar_lq(0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0);
    const auto warnings = lq.nudge_terminal();
    REQUIRE(warnings.size() == 1);
    CHECK(lq.P[0](0, 0) == 1e-12);
    CHECK(lq.nudge_terminal().empty());
}

TEST_CASE("trajectory CSV layout") {
    const auto k = solve_coupled_riccati(two_regime_lq(), 8);
    const std::string csv = trajectory_csv(k);
    CHECK(csv.rfind("t,regime,row,col,value\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 9 * 2);
}
