#include <doctest.h>

#include <cmath>
#include <limits>

#include "emompc/errors.hpp"
#include "emompc/nlp.hpp"

using namespace emompc;

TEST_CASE("minimize: interior quadratic") {
    NlpProblem p;
    p.dimension = 1;
    p.objective = [](std::span<const double> u) { return (u[0] - 0.3) * (u[0] - 0.3); };
    p.lower = {0.0};
    p.upper = {1.0};
    const auto r = minimize(p, std::vector<double>{0.0});
    CHECK(r.converged);
    CHECK(r.minimizer[0] == doctest::Approx(0.3).epsilon(0).scale(1).epsilon(1e-6));
}

TEST_CASE("minimize: active lower bound") {
    NlpProblem p;
    p.dimension = 1;
    p.objective = [](std::span<const double> u) { return u[0]; };
    p.lower = {0.0};
    p.upper = {1.0};
    const auto r = minimize(p, std::vector<double>{0.7});
    CHECK(std::abs(r.minimizer[0]) <= 1e-9);
}

TEST_CASE("minimize: projection onto a linear constraint") {
    NlpProblem p;
    p.dimension = 2;
    p.objective = [](std::span<const double> u) {
        return (u[0] - 2.0) * (u[0] - 2.0) + (u[1] - 2.0) * (u[1] - 2.0);
    };
    p.inequality = [](std::span<const double> u) { return std::vector<double>{u[0] + u[1] - 1.0}; };
    p.lower = {-5.0, -5.0};
    p.upper = {5.0, 5.0};
    const auto r = minimize(p, std::vector<double>{0.0, 0.0});
    CHECK(r.max_violation <= 1e-6);
    CHECK(r.minimizer[0] == doctest::Approx(0.5).epsilon(1e-4));
    CHECK(r.minimizer[1] == doctest::Approx(0.5).epsilon(1e-4));
}

TEST_CASE("minimize: start outside the box is projected") {
    NlpProblem p;
    p.dimension = 1;
    p.objective = [](std::span<const double> u) { return (u[0] + 1.0) * (u[0] + 1.0); };
    p.lower = {0.0};
    p.upper = {1.0};
    const auto r = minimize(p, std::vector<double>{4.0});
    CHECK(std::abs(r.minimizer[0]) <= 1e-9);
}

TEST_CASE("minimize: deterministic") {
    NlpProblem p;
    p.dimension = 3;
    p.objective = [](std::span<const double> u) {
        return std::pow(u[0] - 0.1, 2) + 10 * std::pow(u[1] - u[0] * u[0], 2) + std::pow(u[2] + 0.3, 4);
    };
    p.lower = {-1, -1, -1};
    p.upper = {1, 1, 1};
    const std::vector<double> x0{0.5, -0.5, 0.2};
    const auto a = minimize(p, x0);
    const auto b = minimize(p, x0);
    CHECK(a.minimizer == b.minimizer);
    CHECK(a.objective_value == b.objective_value);
}

TEST_CASE("minimize: non-finite objective raises with the point") {
    NlpProblem p;
    p.dimension = 1;
    p.objective = [](std::span<const double> u) {
        return u[0] > 0.5 ? std::numeric_limits<double>::quiet_NaN() : -u[0];
    };
    p.lower = {0.0};
    p.upper = {1.0};
    try {
        minimize(p, std::vector<double>{0.0});
        FAIL("expected EvaluationError");
    } catch (const EvaluationError& e) {
        REQUIRE(e.point().size() == 1);
        CHECK(e.point()[0] > 0.5);
    }
}

TEST_CASE("minimize: dimension mismatch") {
    NlpProblem p;
    p.dimension = 2;
    p.objective = [](std::span<const double>) { return 0.0; };
    p.lower = {0.0};
    p.upper = {1.0, 1.0};
    CHECK_THROWS_AS(minimize(p, std::vector<double>{0.0, 0.0}), DimensionError);
}

TEST_CASE("fd_gradient: constant and quadratic") {
    auto c = [](std::span<const double>) { return 3.0; };
    for (double g : fd_gradient(c, std::vector<double>{1.0, -2.0})) CHECK(g == 0.0);
    auto q = [](std::span<const double> x) { return x[0] * x[0] + x[1] * x[1]; };
    const auto g = fd_gradient(q, std::vector<double>{1.0, 2.0});
    CHECK(g[0] == doctest::Approx(2.0).epsilon(1e-8));
    CHECK(g[1] == doctest::Approx(4.0).epsilon(1e-8));
}

TEST_CASE("max_violation") {
    CHECK(max_violation(std::vector<double>{-1.0, -0.5}) == 0.0);
    CHECK(max_violation(std::vector<double>{-1.0, 0.25, 0.1}) == 0.25);
    CHECK(max_violation(std::vector<double>{}) == 0.0);
}
