#pragma once

/**
 * @file reduction.hpp
 * @brief Symmetry-reduced coordinates (v_y, r, xi, d, kappa) of the vehicle
 *        problem and the assembly of its two-objective control problem.
 */

#include <array>
#include <memory>

#include "emompc/mocp.hpp"
#include "emompc/track.hpp"
#include "emompc/vehicle.hpp"

namespace emompc {

struct ReducedParameter {
    double v_y = 0.0;
    double r = 0.0;
    double xi = 0.0;     ///< heading relative to the track tangent, (-pi, pi]
    double d = 0.0;      ///< signed lateral offset
    double kappa = 0.0;  ///< centre-line curvature at the projection

    std::array<double, 5> to_array() const { return {v_y, r, xi, d, kappa}; }
    static ReducedParameter from(const std::array<double, 5>& a) { return {a[0], a[1], a[2], a[3], a[4]}; }
    ReducedParameter mirrored() const { return {-v_y, -r, -xi, -d, -kappa}; }
};

struct Reduction {
    ReducedParameter param;  ///< normalized (stored side) coordinates
    bool mirrored = false;
    Se2Action frame;         ///< maps the local normalized track onto the global one
    Projection projection;
};

/**
 * @brief Reduces a global state against a track.
 *
 * Tuples with d < 0 (ties at d = 0 broken by the sign of xi, then of v_y) are
 * reflected to the stored side and reported with mirrored = true.
 */
Reduction reduce_state(const Track& track, const VehicleState& x);

/// Global state whose reduction is (param, mirrored) in the given frame.
VehicleState lift(const ReducedParameter& param, bool mirrored, const Se2Action& frame);

/// Initial state of the reduced problem: p = (0, d), Theta = xi.
VehicleState reduced_initial_state(const ReducedParameter& param);

struct VehicleProblemConfig {
    VehicleParams vehicle;
    Horizon horizon{0.0, 0.5, 10};
    double d_max = 5.0;
    double u_min = -0.5;
    double u_max = 0.5;
};

/**
 * @brief The vehicle MOCP on an arbitrary track: J1 = integral of d(t)^2,
 *        J2 = -(arc length between the projections of p(t0) and p(te)),
 *        knot-wise constraint d(t_k) <= d_max.
 */
MocpDefinition build_track_mocp(std::shared_ptr<const Track> track, const VehicleState& x0,
                                const VehicleProblemConfig& cfg);

/// build_track_mocp on the normalized arc of curvature kappa from reduced_initial_state.
MocpDefinition build_reduced_mocp(const ReducedParameter& param, const VehicleProblemConfig& cfg);

}  // namespace emompc
