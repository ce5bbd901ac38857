#pragma once

/**
 * @file vehicle.hpp
 * @brief Constant-speed bicycle model, the SE(2) symmetry action and the
 *        reflection at the horizontal axis.
 */

#include <array>
#include <functional>
#include <span>
#include <vector>

#include "emompc/mocp.hpp"

namespace emompc {

struct VehicleParams {
    double c_alpha_f = 65100.0;  ///< front cornering stiffness
    double c_alpha_r = 54100.0;  ///< rear cornering stiffness
    double l_f = 1.0;            ///< front axle to centre of mass [m]
    double l_r = 1.45;           ///< rear axle to centre of mass [m]
    double m = 1275.0;           ///< mass [kg]
    double i_z = 1627.0;         ///< yaw inertia [kg m^2]
    double v_x = 30.0;           ///< longitudinal speed [m/s]
};

/// (p1, p2, Theta, v_y, r)
struct VehicleState {
    double p1 = 0.0;
    double p2 = 0.0;
    double theta = 0.0;
    double v_y = 0.0;
    double r = 0.0;

    std::array<double, 5> to_array() const { return {p1, p2, theta, v_y, r}; }
    static VehicleState from(std::span<const double> x) { return {x[0], x[1], x[2], x[3], x[4]}; }
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

struct BicycleCoefficients {
    double c1, c2, c3, c4, c5, c6;
};

/// C1..C6 of the lateral/yaw equations at steering angle u.
BicycleCoefficients bicycle_coefficients(double u, const VehicleParams& params);

/// Right-hand side of the five-state bicycle ODE. Throws ParameterError if v_x <= 0.
VehicleState bicycle_rhs(const VehicleState& x, double u, const VehicleParams& params);

/// bicycle_rhs wrapped for the generic rollout (n_x = 5, n_u = 1).
Dynamics bicycle_dynamics(const VehicleParams& params);

/// Rotation by delta_theta followed by translation delta_p; acts on states and track points.
struct Se2Action {
    double delta_theta = 0.0;
    Vec2 delta_p{};

    Vec2 apply(Vec2 p) const;
    VehicleState apply(const VehicleState& x) const;
    /// Q * v for a state-space tangent vector (rotates the position block only).
    VehicleState apply_tangent(const VehicleState& v) const;
    Se2Action inverse() const;
    /// (this o other)(x) = this(other(x))
    Se2Action compose(const Se2Action& other) const;
};

/// Reflection at the horizontal axis: (p1, -p2, -Theta, -v_y, -r).
VehicleState mirror_state(const VehicleState& x);
Vec2 mirror_point(Vec2 p);

/// Steering is odd under the reflection: every value negated.
std::vector<double> mirror_control(std::span<const double> u);

using VehicleRhs = std::function<VehicleState(const VehicleState&, double)>;

/// || f(psi_g(x), u) - Q f(x, u) ||_inf for the given right-hand side.
double check_equivariance(const Se2Action& g, const VehicleState& x, double u, const VehicleRhs& rhs);
double check_equivariance(const Se2Action& g, const VehicleState& x, double u, const VehicleParams& params);

/// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

}  // namespace emompc
