#include "emompc/vehicle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "emompc/errors.hpp"

namespace emompc {

BicycleCoefficients bicycle_coefficients(double u, const VehicleParams& p) {
    if (!(p.v_x > 0.0)) throw ParameterError("bicycle model requires v_x > 0");
    const double cf = p.c_alpha_f * std::cos(u);
    const double cr = p.c_alpha_r;
    BicycleCoefficients c{};
    c.c1 = -(cf + cr) / (p.m * p.v_x);
    c.c2 = (-p.l_f * cf + p.l_r * cr) / (p.i_z * p.v_x);
    c.c3 = cf / p.m;
    c.c4 = (-p.l_f * cf + p.l_r * cr) / (p.m * p.v_x) - p.v_x;
    c.c5 = -(p.l_f * p.l_f * cf + p.l_r * p.l_r * cr) / (p.i_z * p.v_x);
    c.c6 = p.l_f * cf / p.i_z;
    return c;
}

VehicleState bicycle_rhs(const VehicleState& x, double u, const VehicleParams& p) {
    const BicycleCoefficients c = bicycle_coefficients(u, p);
    const double ct = std::cos(x.theta);
    const double st = std::sin(x.theta);
    return {
        p.v_x * ct - x.v_y * st,
        p.v_x * st + x.v_y * ct,
        x.r,
        c.c1 * x.v_y + c.c2 * x.r + c.c3 * u,
        c.c4 * x.v_y + c.c5 * x.r + c.c6 * u,
    };
}

Dynamics bicycle_dynamics(const VehicleParams& params) {
    if (!(params.v_x > 0.0)) throw ParameterError("bicycle model requires v_x > 0");
    return [params](std::span<const double> x, std::span<const double> u, std::span<double> dx) {
        const VehicleState d = bicycle_rhs(VehicleState::from(x), u[0], params);
        dx[0] = d.p1;
        dx[1] = d.p2;
        dx[2] = d.theta;
        dx[3] = d.v_y;
        dx[4] = d.r;
    };
}

Vec2 Se2Action::apply(Vec2 p) const {
    const double c = std::cos(delta_theta);
    const double s = std::sin(delta_theta);
    return {c * p.x - s * p.y + delta_p.x, s * p.x + c * p.y + delta_p.y};
}

VehicleState Se2Action::apply(const VehicleState& x) const {
    const Vec2 p = apply(Vec2{x.p1, x.p2});
    return {p.x, p.y, x.theta + delta_theta, x.v_y, x.r};
}

VehicleState Se2Action::apply_tangent(const VehicleState& v) const {
    const double c = std::cos(delta_theta);
    const double s = std::sin(delta_theta);
    return {c * v.p1 - s * v.p2, s * v.p1 + c * v.p2, v.theta, v.v_y, v.r};
}

Se2Action Se2Action::inverse() const {
    const double c = std::cos(delta_theta);
    const double s = std::sin(delta_theta);
    // R^T * (-delta_p)
    return {-delta_theta, {-(c * delta_p.x + s * delta_p.y), -(-s * delta_p.x + c * delta_p.y)}};
}

Se2Action Se2Action::compose(const Se2Action& other) const {
    return {delta_theta + other.delta_theta, apply(other.delta_p)};
}

VehicleState mirror_state(const VehicleState& x) { return {x.p1, -x.p2, -x.theta, -x.v_y, -x.r}; }

Vec2 mirror_point(Vec2 p) { return {p.x, -p.y}; }

std::vector<double> mirror_control(std::span<const double> u) {
    std::vector<double> out(u.size());
    std::transform(u.begin(), u.end(), out.begin(), [](double v) { return -v; });
    return out;
}

double check_equivariance(const Se2Action& g, const VehicleState& x, double u, const VehicleRhs& rhs) {
    const auto lhs = rhs(g.apply(x), u).to_array();
    const auto rhs_q = g.apply_tangent(rhs(x, u)).to_array();
    double worst = 0.0;
    for (std::size_t i = 0; i < lhs.size(); ++i) worst = std::max(worst, std::abs(lhs[i] - rhs_q[i]));
    return worst;
}

double check_equivariance(const Se2Action& g, const VehicleState& x, double u, const VehicleParams& params) {
    return check_equivariance(g, x, u, [&params](const VehicleState& s, double v) { return bicycle_rhs(s, v, params); });
}

double wrap_angle(double a) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double w = std::fmod(a, two_pi);
    if (w <= -std::numbers::pi) w += two_pi;
    else if (w > std::numbers::pi) w -= two_pi;
    return w;
}

}  // namespace emompc
