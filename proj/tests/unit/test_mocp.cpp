#include <doctest.h>

#include <cmath>
#include <numbers>

#include "emompc/errors.hpp"
#include "emompc/library.hpp"
#include "emompc/mocp.hpp"
#include "emompc/reduction.hpp"

using namespace emompc;

namespace {

/// x' = u on [0, 1] with one step, so x(1) = u and J = (x(1), 1 - x(1)).
MocpDefinition toy_line() {
    MocpDefinition def;
    def.state_dim = 1;
    def.control_dim = 1;
    def.dynamics = [](std::span<const double>, std::span<const double> u, std::span<double> dx) { dx[0] = u[0]; };
    def.mayer_costs = {[](std::span<const double> x) { return x[0]; },
                       [](std::span<const double> x) { return 1.0 - x[0]; }};
    def.horizon = {0.0, 1.0, 1};
    def.x0 = {0.0};
    def.u_min = 0.0;
    def.u_max = 1.0;
    return def;
}

/// Two objectives with a common minimizer at u = 0.
MocpDefinition shared_minimizer() {
    MocpDefinition def;
    def.state_dim = 1;
    def.control_dim = 1;
    def.dynamics = [](std::span<const double>, std::span<const double>, std::span<double> dx) { dx[0] = 0.0; };
    def.running_costs = {[](std::span<const double>, std::span<const double> u) { return u[0] * u[0]; },
                         [](std::span<const double>, std::span<const double> u) { return 1.0 + u[0] * u[0]; }};
    def.horizon = {0.0, 1.0, 4};
    def.x0 = {0.0};
    def.u_min = -1.0;
    def.u_max = 1.0;
    return def;
}

}  // namespace

TEST_CASE("integrate_rk4: zero and constant dynamics") {
    const Horizon hz{0.0, 1.0, 4};
    const std::vector<double> x0{1.5, -2.0};
    const std::vector<double> u(4, 0.0);
    const auto zero = integrate_rk4([](auto, auto, std::span<double> dx) { dx[0] = dx[1] = 0.0; }, x0, u, hz);
    REQUIRE(zero.knots() == 5);
    for (std::size_t k = 0; k < 5; ++k) {
        CHECK(zero.at(k)[0] == 1.5);
        CHECK(zero.at(k)[1] == -2.0);
    }
    const auto lin = integrate_rk4(
        [](auto, auto, std::span<double> dx) {
            dx[0] = 2.0;
            dx[1] = -0.5;
        },
        x0, u, hz);
    for (std::size_t k = 0; k < 5; ++k) {
        CHECK(lin.at(k)[0] == 1.5 + 2.0 * 0.25 * double(k));
        CHECK(lin.at(k)[1] == -2.0 - 0.5 * 0.25 * double(k));
    }
}

TEST_CASE("integrate_rk4: exponential growth over one step") {
    const Horizon hz{0.0, 0.05, 1};
    const auto tr = integrate_rk4([](std::span<const double> x, auto, std::span<double> dx) { dx[0] = x[0]; },
                                  std::vector<double>{1.0}, std::vector<double>{0.0}, hz);
    CHECK(std::abs(tr.at(1)[0] - std::exp(0.05)) <= 1e-8);
}

TEST_CASE("integrate_rk4: fourth-order convergence") {
    auto f = [](std::span<const double> x, auto, std::span<double> dx) {
        dx[0] = x[1];
        dx[1] = -x[0];
    };
    auto err = [&](std::size_t steps) {
        const std::vector<double> u(steps, 0.0);
        const auto tr = integrate_rk4(f, std::vector<double>{1.0, 0.0}, u, Horizon{0.0, 1.0, steps});
        return std::abs(tr.at(steps)[0] - std::cos(1.0));
    };
    const double ratio = err(10) / err(20);
    CHECK(ratio > 14.0);
    CHECK(ratio < 18.0);
}

TEST_CASE("integrate_rk4: divergence is reported") {
    auto blow = [](std::span<const double> x, auto, std::span<double> dx) { dx[0] = x[0] * x[0] * 1e300; };
    CHECK_THROWS_AS(integrate_rk4(blow, std::vector<double>{1.0}, std::vector<double>(5, 0.0), Horizon{0, 1, 5}),
                    DivergenceError);
}

TEST_CASE("evaluate_objectives: unit running cost integrates to the horizon length") {
    MocpDefinition def;
    def.state_dim = 1;
    def.dynamics = [](auto, auto, std::span<double> dx) { dx[0] = 0.0; };
    def.running_costs = {[](auto, auto) { return 1.0; }, [](auto, auto) { return 1.0; }};
    def.horizon = {0.2, 0.7, 10};
    def.x0 = {0.0};
    const std::vector<double> u{0.3, -0.2, 0.1, 0.0, 0.5, -0.5, 0.4, 0.2, 0.0, 0.1};
    const auto J = evaluate_objectives(def, u);
    CHECK(J[0] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(J[1] == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("vehicle problem: centred, aligned and straight gives (0, -15)") {
    const auto def = build_reduced_mocp({}, VehicleProblemConfig{});
    const auto J = evaluate_objectives(def, std::vector<double>(10, 0.0));
    CHECK(J[0] == 0.0);
    CHECK(J[1] == -15.0);
}

TEST_CASE("vehicle problem: step-refinement oracle at the reference parameter") {
    const ReducedParameter rp{0.0, 1.0, std::numbers::pi / 6, 2.5, 0.05};
    VehicleProblemConfig coarse;
    VehicleProblemConfig fine = coarse;
    fine.horizon.steps = coarse.horizon.steps * 100;
    const auto Jc = evaluate_objectives(build_reduced_mocp(rp, coarse), std::vector<double>(10, 0.0));
    const auto Jf = evaluate_objectives(build_reduced_mocp(rp, fine), std::vector<double>(1000, 0.0));
    for (int i = 0; i < 2; ++i) {
        CHECK(std::isfinite(Jc[i]));
        CHECK(std::abs(Jc[i] - Jf[i]) <= 1e-4 * std::abs(Jf[i]));
    }
}

TEST_CASE("vehicle problem: central and one-sided gradients of J1 agree") {
    const ReducedParameter rp{0.5, 0.5, 0.2, 1.0, 0.02};
    const auto def = build_reduced_mocp(rp, VehicleProblemConfig{});
    auto j1 = [&](std::span<const double> u) { return evaluate_objectives(def, u)[0]; };
    const std::vector<double> u0(10, 0.0);
    const auto central = fd_gradient(j1, u0, 1e-6, 1e-6);
    const double f0 = j1(u0);
    double scale = 0.0;
    for (double g : central) scale = std::max(scale, std::abs(g));
    for (std::size_t i = 0; i < u0.size(); ++i) {
        auto up = u0;
        up[i] += 1e-7;
        const double forward = (j1(up) - f0) / 1e-7;
        CHECK(std::abs(forward - central[i]) <= 1e-5 * std::max(1.0, scale));
    }
}

TEST_CASE("knot_constraints: one value per knot after the start") {
    VehicleProblemConfig cfg;
    const auto def = build_reduced_mocp({0, 0, 0, 2.0, 0}, cfg);
    const std::vector<double> u(10, 0.0);
    const auto traj = integrate_rk4(def.dynamics, def.x0, u, def.horizon);
    const auto g = knot_constraints(def, u, traj);
    REQUIRE(g.size() == 10);
    for (double v : g) CHECK(v == doctest::Approx(2.0 - cfg.d_max));
}

TEST_CASE("solve_scalar: centred straight parameter") {
    const auto def = build_reduced_mocp({}, VehicleProblemConfig{});
    const std::vector<double> start(10, 0.0);
    const auto s1 = solve_scalar(def, 1, start);
    CHECK(std::abs(s1.entry.objectives[0]) <= 1e-6);
    for (double u : s1.entry.control) CHECK(std::abs(u) <= 1e-6);
    const auto s2 = solve_scalar(def, 2, start);
    CHECK(s2.entry.objectives[1] <= -15.0);
    CHECK_THROWS_AS(solve_scalar(def, 3, start), ParameterError);
}

TEST_CASE("solve_scalar: test problem is reproducible") {
    const auto def = witting_problem(0.5);
    const std::vector<double> start{0.0, 0.0};
    for (int which : {1, 2}) {
        const auto a = solve_scalar(def, which, start);
        const auto b = solve_scalar(def, which, start);
        CHECK(a.entry.control == b.entry.control);
        for (double v : a.entry.objectives) CHECK(std::isfinite(v));
    }
}

TEST_CASE("solve_reference_point: toy line") {
    const auto def = toy_line();
    const std::vector<double> start{0.0};
    const auto r0 = solve_reference_point(def, std::vector<double>{0.0, 0.0}, start);
    CHECK(r0.entry.control[0] == doctest::Approx(0.5).epsilon(1e-5));
    CHECK(r0.entry.objectives[0] == doctest::Approx(0.5).epsilon(1e-5));
    CHECK(r0.entry.objectives[1] == doctest::Approx(0.5).epsilon(1e-5));
    const auto r1 = solve_reference_point(def, std::vector<double>{0.2, 0.0}, start);
    CHECK(r1.entry.control[0] == doctest::Approx(0.6).epsilon(1e-5));
}

TEST_CASE("distribute_targets: single target at the ellipse midpoint") {
    const std::vector<double> a{0.0, 1.0}, b{1.0, 0.0};
    const auto t = distribute_targets(a, b, 0.1, 1);
    REQUIRE(t.size() == 1);
    const double expect = 1.0 - 1.1 * std::sqrt(0.5);
    CHECK(t[0][0] == doctest::Approx(expect).epsilon(1e-12));
    CHECK(t[0][1] == doctest::Approx(expect).epsilon(1e-12));
    CHECK(t[0][0] == doctest::Approx(0.2222).epsilon(1e-3));
}

TEST_CASE("distribute_targets: eighteen targets below the chord, monotone") {
    const std::vector<double> a{0.0, 1.0}, b{1.0, 0.0};
    const auto t = distribute_targets(a, b, 0.1, 18);
    REQUIRE(t.size() == 18);
    for (std::size_t i = 0; i < t.size(); ++i) {
        CHECK(t[i][0] + t[i][1] < 1.0);
        if (i > 0) {
            CHECK(t[i][0] > t[i - 1][0]);
            CHECK(t[i][1] < t[i - 1][1]);
        }
    }
    CHECK_THROWS_AS(distribute_targets(std::vector<double>{0, 0}, std::vector<double>{1, 1}, 0.1, 3),
                    DegenerateFrontError);
}

TEST_CASE("warm_start_predictor: extrapolation and clipping") {
    CHECK(warm_start_predictor(std::vector<double>{0.0}, std::vector<double>{0.0}, -0.5, 0.5)[0] == 0.0);
    CHECK(warm_start_predictor(std::vector<double>{0.0}, std::vector<double>{0.2}, -0.5, 0.5)[0] ==
          doctest::Approx(0.4));
    CHECK(warm_start_predictor(std::vector<double>{0.0}, std::vector<double>{0.4}, -0.5, 0.5)[0] == 0.5);
}

TEST_CASE("trace_front: twenty raw points from eighteen targets") {
    TraceOptions opts;
    opts.proper_eps.reset();
    const auto res = trace_front(build_reduced_mocp({0.0, 0.5, 0.2, 1.0, 0.02}, VehicleProblemConfig{}), opts);
    CHECK(res.raw.size() + res.dropped == 20);
    CHECK(res.front.size() >= 2);
    for (std::size_t i = 0; i < res.front.size(); ++i) {
        for (std::size_t j = 0; j < res.front.size(); ++j) {
            if (i != j) CHECK_FALSE(dominates(res.front[i].objectives, res.front[j].objectives));
        }
    }
}

TEST_CASE("trace_front: shared minimizer collapses to one point") {
    const auto res = trace_front(shared_minimizer());
    CHECK(res.front.size() == 1);
    CHECK(res.front[0].objectives[0] == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("trace_front: controls respect the box") {
    const auto def = build_reduced_mocp({1.0, -2.0, 0.3, 0.5, -0.05}, VehicleProblemConfig{});
    const auto res = trace_front(def);
    for (const auto& e : res.front.entries) {
        CHECK(e.control.size() == 10);
        for (double u : e.control) {
            CHECK(u >= def.u_min);
            CHECK(u <= def.u_max);
        }
    }
}
