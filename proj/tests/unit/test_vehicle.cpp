#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "emompc/errors.hpp"
#include "emompc/vehicle.hpp"

using namespace emompc;

namespace {

double max_abs_diff(const VehicleState& a, const VehicleState& b) {
    double m = 0.0;
    const auto x = a.to_array(), y = b.to_array();
    for (std::size_t i = 0; i < 5; ++i) m = std::max(m, std::abs(x[i] - y[i]));
    return m;
}

}  // namespace

TEST_CASE("bicycle_rhs: rest state drives straight ahead") {
    const auto dx = bicycle_rhs({}, 0.0, VehicleParams{});
    CHECK(dx.p1 == 30.0);
    CHECK(dx.p2 == 0.0);
    CHECK(dx.theta == 0.0);
    CHECK(dx.v_y == 0.0);
    CHECK(dx.r == 0.0);
}

TEST_CASE("bicycle_coefficients: hand arithmetic at zero steering") {
    const VehicleParams p;
    const auto c = bicycle_coefficients(0.0, p);
    CHECK(c.c1 == doctest::Approx(-(65100.0 + 54100.0) / (1275.0 * 30.0)));
    CHECK(c.c1 == doctest::Approx(-3.11634).epsilon(1e-5));
    CHECK(c.c6 == doctest::Approx(65100.0 / 1627.0));
    CHECK(c.c6 == doctest::Approx(40.012).epsilon(1e-4));
    CHECK(c.c2 == doctest::Approx((-65100.0 + 1.45 * 54100.0) / (1627.0 * 30.0)));
    CHECK(c.c3 == doctest::Approx(65100.0 / 1275.0));
    CHECK(c.c4 == doctest::Approx((-65100.0 + 1.45 * 54100.0) / (1275.0 * 30.0) - 30.0));
    CHECK(c.c5 == doctest::Approx(-(65100.0 + 1.45 * 1.45 * 54100.0) / (1627.0 * 30.0)));
}

TEST_CASE("bicycle_coefficients: front stiffness scales with cos(u)") {
    const VehicleParams p;
    const auto c = bicycle_coefficients(0.3, p);
    CHECK(c.c3 == doctest::Approx(65100.0 * std::cos(0.3) / 1275.0));
    CHECK(c.c6 == doctest::Approx(65100.0 * std::cos(0.3) / 1627.0));
}

TEST_CASE("bicycle_rhs: non-positive speed is rejected") {
    VehicleParams p;
    p.v_x = 0.0;
    CHECK_THROWS_AS(bicycle_rhs({}, 0.0, p), ParameterError);
}

TEST_CASE("Se2Action: identity, quarter turn, group law") {
    const VehicleState x{1.0, 0.0, 0.0, 0.0, 0.0};
    const Se2Action id{};
    CHECK(max_abs_diff(id.apply(x), x) == 0.0);

    const Se2Action quarter{std::numbers::pi / 2, {0.0, 0.0}};
    const auto y = quarter.apply(x);
    CHECK(std::abs(y.p1) <= 1e-15);
    CHECK(y.p2 == doctest::Approx(1.0));
    CHECK(y.theta == doctest::Approx(std::numbers::pi / 2));

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(-3.0, 3.0);
    for (int i = 0; i < 100; ++i) {
        const Se2Action g{U(rng), {U(rng) * 10, U(rng) * 10}};
        const VehicleState s{U(rng), U(rng), U(rng), U(rng), U(rng)};
        CHECK(max_abs_diff(g.inverse().apply(g.apply(s)), s) <= 1e-12);
        CHECK(max_abs_diff(g.compose(g.inverse()).apply(s), s) <= 1e-12);
        const Se2Action h{U(rng), {U(rng), U(rng)}};
        CHECK(max_abs_diff(g.compose(h).apply(s), g.apply(h.apply(s))) <= 1e-12);
    }
}

TEST_CASE("equivariance: analytic sample and random samples") {
    const VehicleParams p;
    const Se2Action quarter{std::numbers::pi / 2, {0.0, 0.0}};
    CHECK(check_equivariance(quarter, VehicleState{}, 0.0, p) == 0.0);

    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const Se2Action g{std::numbers::pi * U(rng), {100 * U(rng), 100 * U(rng)}};
        const VehicleState x{50 * U(rng), 50 * U(rng), std::numbers::pi * U(rng), 3 * U(rng), 6 * U(rng)};
        worst = std::max(worst, check_equivariance(g, x, 0.5 * U(rng), p));
    }
    CHECK(worst <= 1e-10);
}

TEST_CASE("equivariance: a sign-flipped speed breaks it") {
    const VehicleParams p;
    const VehicleRhs broken = [&](const VehicleState& x, double u) {
        auto dx = bicycle_rhs(x, u, p);
        // speed term applied against the heading in the first component only
        dx.p1 = -p.v_x * std::cos(x.theta) - x.v_y * std::sin(x.theta);
        return dx;
    };
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const Se2Action g{std::numbers::pi * U(rng), {U(rng), U(rng)}};
        const VehicleState x{U(rng), U(rng), std::numbers::pi * U(rng), U(rng), U(rng)};
        worst = std::max(worst, check_equivariance(g, x, 0.5 * U(rng), broken));
    }
    CHECK(worst > 1.0);
}

TEST_CASE("mirror: involution and conjugation of the dynamics") {
    const VehicleParams p;
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        const VehicleState x{10 * U(rng), 10 * U(rng), std::numbers::pi * U(rng), 3 * U(rng), 6 * U(rng)};
        const double u = 0.5 * U(rng);
        CHECK(max_abs_diff(mirror_state(mirror_state(x)), x) == 0.0);
        const auto lhs = bicycle_rhs(mirror_state(x), -u, p);
        const auto rhs = mirror_state(bicycle_rhs(x, u, p));
        CHECK(max_abs_diff(lhs, rhs) <= 1e-10);
    }
    const auto m = mirror_control(std::vector<double>{0.1, -0.2, 0.0});
    CHECK(m == std::vector<double>{-0.1, 0.2, -0.0});
}

TEST_CASE("wrap_angle") {
    CHECK(wrap_angle(0.0) == 0.0);
    CHECK(wrap_angle(std::numbers::pi) == doctest::Approx(std::numbers::pi));
    CHECK(wrap_angle(-std::numbers::pi) == doctest::Approx(std::numbers::pi));
    CHECK(wrap_angle(3 * std::numbers::pi / 2) == doctest::Approx(-std::numbers::pi / 2));
}
