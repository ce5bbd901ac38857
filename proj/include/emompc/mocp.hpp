#pragma once

/**
 * @file mocp.hpp
 * @brief Direct transcription of two-objective optimal control problems and
 *        the reference-point front tracer.
 *
 * Controls are piecewise constant on a uniform grid of `steps` intervals and
 * flattened step-major (u[k * n_u + j]). States are integrated with one RK4
 * step per control interval.
 */

#include <array>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "emompc/nlp.hpp"
#include "emompc/pareto.hpp"

namespace emompc {

struct Horizon {
    double t0 = 0.0;
    double te = 0.5;
    std::size_t steps = 10;

    double h() const { return (te - t0) / static_cast<double>(steps); }
};

using Dynamics = std::function<void(std::span<const double> x, std::span<const double> u, std::span<double> dx)>;
using RunningCost = std::function<double(std::span<const double> x, std::span<const double> u)>;
using MayerCost = std::function<double(std::span<const double> x_final)>;
/// Writes path_constraint_count values into out; feasible iff all <= 0.
using PathConstraint = std::function<void(std::span<const double> x, std::span<const double> u, std::span<double> out)>;

struct MocpDefinition {
    std::size_t state_dim = 0;
    std::size_t control_dim = 1;
    Dynamics dynamics;
    std::vector<RunningCost> running_costs;  ///< C_i, null entries contribute zero
    std::vector<MayerCost> mayer_costs;      ///< Phi_i, null entries contribute zero
    PathConstraint path_constraints;
    std::size_t path_constraint_count = 0;
    Horizon horizon;
    std::vector<double> x0;
    double u_min = -0.5;
    double u_max = 0.5;

    std::size_t objective_count() const { return std::max(running_costs.size(), mayer_costs.size()); }
    std::size_t decision_dim() const { return horizon.steps * control_dim; }
};

/// States at the p+1 knots, flattened knot-major.
struct Trajectory {
    std::size_t state_dim = 0;
    std::vector<double> states;

    std::size_t knots() const { return state_dim ? states.size() / state_dim : 0; }
    std::span<const double> at(std::size_t k) const { return {states.data() + k * state_dim, state_dim}; }
};

/// Classical RK4, control held constant within each step. Throws DivergenceError on non-finite states.
Trajectory integrate_rk4(const Dynamics& f, std::span<const double> x0, std::span<const double> u,
                         const Horizon& horizon, std::size_t control_dim = 1);

/// Trapezoid rule for running costs over the knots plus Mayer terms at te.
ObjectiveVector evaluate_objectives(const MocpDefinition& def, std::span<const double> u);
ObjectiveVector evaluate_objectives(const MocpDefinition& def, std::span<const double> u, const Trajectory& traj);

/// Path constraint values at knots 1..p (t in (t0, te]), flattened knot-major.
std::vector<double> knot_constraints(const MocpDefinition& def, std::span<const double> u, const Trajectory& traj);

/**
 * @brief Memoizes the most recent rollout so that objective and constraint
 *        callbacks of one solver query share a single integration.
 *
 * Not thread-safe; one instance per solver.
 */
class MocpEvaluator {
public:
    explicit MocpEvaluator(const MocpDefinition& def) : def_(def) {}

    const Trajectory& rollout(std::span<const double> u);
    ObjectiveVector objectives(std::span<const double> u);
    std::vector<double> constraints(std::span<const double> u);

private:
    const MocpDefinition& def_;
    std::vector<double> last_u_;
    Trajectory last_;
    bool valid_ = false;
};

struct SubproblemResult {
    ParetoEntry entry;
    bool converged = false;
    double max_violation = 0.0;
    int iterations = 0;
};

/// Minimizes objective `which` (1 or 2) subject to the path constraints.
SubproblemResult solve_scalar(const MocpDefinition& def, int which, std::span<const double> start,
                              const SolverOptions& opts = {});

/// Minimizes the squared distance between J(u) and the target, subject to the path constraints.
SubproblemResult solve_reference_point(const MocpDefinition& def, std::span<const double> target,
                                       std::span<const double> start, const SolverOptions& opts = {});

/**
 * @brief Places n_T targets on the quarter ellipse through A = a_img - (d1, 0)
 *        and B = b_img - (0, d2), centred at (B_x, A_y).
 *
 * Targets are C + (a cos t, b sin t) for t_j = pi + (pi/2) j / (n_T + 1), ordered
 * from the J1-minimizer side towards the J2-minimizer side. Throws
 * DegenerateFrontError if one image dominates the other.
 */
std::vector<ObjectiveVector> distribute_targets(std::span<const double> a_img, std::span<const double> b_img,
                                                std::array<double, 2> offsets, std::size_t n_targets);

inline std::vector<ObjectiveVector> distribute_targets(std::span<const double> a_img,
                                                       std::span<const double> b_img, double d_e,
                                                       std::size_t n_targets) {
    return distribute_targets(a_img, b_img, {d_e, d_e}, n_targets);
}

/// Linear extrapolation 2*u_curr - u_prev, clipped to [lower, upper].
std::vector<double> warm_start_predictor(std::span<const double> u_prev, std::span<const double> u_curr,
                                         double lower, double upper);

struct TraceOptions {
    std::size_t n_targets = 18;
    /// Ellipse offset; when unset each axis uses d_e_fraction of that objective's extent.
    std::optional<double> d_e;
    double d_e_fraction = 0.1;
    /// Tail trimming tolerance; unset skips proper filtering.
    std::optional<double> proper_eps = kDefaultProperEps;
    SolverOptions solver;
    /// Start of both scalar solves; empty means u = 0.
    std::vector<double> initial_control;
};

struct TraceResult {
    ParetoSet front;
    /// Feasible solved points before any filtering, scalar solutions first.
    std::vector<ParetoEntry> raw;
    std::size_t dropped = 0;       ///< reference-point solves discarded as infeasible
    std::size_t nonconverged = 0;  ///< feasible solves that hit the iteration budget
};

/**
 * @brief Two scalar solves, target placement, n_T reference-point solves
 *        (each warm-started from the solution of the nearest solved target),
 *        nondominated filtering and proper filtering.
 *
 * Throws FrontTraceError if a scalar solve ends infeasible.
 */
TraceResult trace_front(const MocpDefinition& def, const TraceOptions& opts = {});

}  // namespace emompc
