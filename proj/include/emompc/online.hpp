#pragma once

/**
 * @file online.hpp
 * @brief Online phase: neighbor lookup in the library grid, inverse-distance
 *        interpolation of preference-selected controls, the receding-horizon
 *        loop on a global track and lap metrics.
 */

#include <cstddef>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "emompc/library.hpp"
#include "emompc/track.hpp"

namespace emompc {

/// Distances at or below this value select the node's control verbatim.
inline constexpr double kDZeroTol = 1e-9;
/// Curvature threshold of the preference heuristic [1/m].
inline constexpr double kEpsKappa = 0.01;
inline constexpr double kHeuristicMin = 0.25;
inline constexpr double kHeuristicMax = 0.90;
inline constexpr double kHeuristicStep = 0.05;

struct Neighbor {
    MultiIndex index;
    double distance = 0.0;
};

struct LookupOptions {
    /// Measure distances in grid steps instead of raw parameter units.
    bool normalize = false;
};

struct LookupResult {
    std::vector<Neighbor> neighbors;
    std::vector<double> query;  ///< after clamping into the grid ranges
    bool clamped = false;
};

/**
 * @brief Base node (nearest grid value per dimension) and, for each dimension,
 *        the two nodes equal to the base except for that coordinate, which is
 *        replaced by the grid values bracketing the query. Duplicates removed.
 *
 * Out-of-range components are clamped with a warning.
 */
LookupResult neighbor_lookup(const GridSpec& grid, std::span<const double> q, const LookupOptions& opts = {});

struct WeightedFront {
    const ParetoSet* front = nullptr;
    double distance = 0.0;
};

struct Interpolation {
    std::vector<double> control;
    std::vector<double> weights;       ///< one per neighbor, summing to one
    std::optional<std::size_t> exact;  ///< neighbor taken verbatim
};

/**
 * @brief Selects a control from each neighbor front by preference and blends
 *        them with weights 1/d_i; a neighbor within d_zero_tol is returned verbatim.
 *
 * Neighbors with empty fronts get zero weight. Throws LookupError if no usable
 * neighbor remains.
 */
Interpolation interpolate_control(std::span<const WeightedFront> neighbors, double rho, double u_min, double u_max,
                                  double d_zero_tol = kDZeroTol);

/// Lowers rho by one step on near-straight track (|kappa| < eps_kappa), raises it otherwise, within the bounds.
double heuristic_rho(double prev_rho, double kappa, double eps_kappa = kEpsKappa);

struct MpcOptions {
    double d_zero_tol = kDZeroTol;
    bool normalize = false;
    double eps_kappa = kEpsKappa;
};

struct StepRecord {
    double time = 0.0;
    VehicleState state;        ///< state at the start of the step
    ReducedParameter reduced;  ///< normalized (stored-side) parameter
    bool mirrored = false;
    double d = 0.0;            ///< signed lateral offset
    double rho = 0.0;
    double u = 0.0;            ///< applied steering angle
    std::vector<std::size_t> neighbors;  ///< flat node indices
    std::vector<double> weights;
    std::size_t cell = 0;            ///< flat index of the nearest neighbor
    std::size_t selected_index = 0;  ///< selection within the nearest neighbor's front
    bool clamped = false;
};

struct StepOutput {
    StepRecord record;
    VehicleState next;
};

/**
 * @brief One receding-horizon step: reduce, look up, interpolate, undo the
 *        reflection, apply the first control value for one control interval.
 *
 * Throws SingularProjectionError if the state has no unique projection.
 */
StepOutput mpc_step(const Library& lib, const Track& track, const VehicleState& x, double rho,
                    const MpcOptions& opts = {}, double time = 0.0);

struct ScheduleEntry {
    double time = 0.0;
    double rho = 0.0;
};

enum class PolicyKind { Fixed, Schedule, Heuristic };

const char* to_string(PolicyKind k);

struct RhoPolicy {
    PolicyKind kind = PolicyKind::Fixed;
    double rho = 1.0;                     ///< fixed value, or heuristic start
    std::vector<ScheduleEntry> schedule;  ///< sorted by time

    static RhoPolicy fixed(double rho) { return {PolicyKind::Fixed, rho, {}}; }
    static RhoPolicy scheduled(std::vector<ScheduleEntry> s) { return {PolicyKind::Schedule, 0.0, std::move(s)}; }
    static RhoPolicy heuristic(double start = 0.5) { return {PolicyKind::Heuristic, start, {}}; }
};

/// Value of a schedule at time t: the last entry not later than t (the first entry before it).
double schedule_value(std::span<const ScheduleEntry> schedule, double t);

struct StopRule {
    bool one_lap = true;
    double t_max = 120.0;
};

struct ClosedLoopOptions {
    MpcOptions mpc;
    /// Abort when |d| exceeds this multiple of d_max.
    double abort_factor = 3.0;
    /// Overrides the library's d_max for the abort test.
    std::optional<double> d_max;
};

enum class RunStatus { Running, LapComplete, TimeLimit, Aborted };

const char* to_string(RunStatus s);

struct LapMetrics {
    double lap_time = 0.0;
    double integrated_distance = 0.0;
    double constraint_max = 0.0;
};

struct MpcTrace {
    std::vector<StepRecord> records;  ///< last record holds the final state (no control applied)
    RunStatus status = RunStatus::Running;
    std::optional<double> lap_time;  ///< interpolated completion time
    std::string abort_reason;
    bool feasible() const { return status != RunStatus::Aborted; }
};

/// lap_time = completion time (else the last record time), trapezoid of d^2 dt, max |d|.
LapMetrics lap_metrics(const MpcTrace& trace);

/// Latest-value-wins preference updates delivered to a running loop.
class PreferenceMailbox {
public:
    enum class Mode { Manual, Heuristic, Schedule };

    void post_rho(double rho);
    void post_mode(Mode mode);
    std::optional<double> take_rho();
    std::optional<Mode> take_mode();

private:
    std::mutex mutex_;
    std::optional<double> rho_;
    std::optional<Mode> mode_;
};

/**
 * @brief Stepwise closed loop. Reads its mailbox once at the start of each
 *        step; a posted rho switches the policy to that fixed value, a posted
 *        mode switches the policy kind.
 */
class ClosedLoop {
public:
    ClosedLoop(const Library& lib, const Track& track, const VehicleState& x0, RhoPolicy policy, StopRule stop = {},
               ClosedLoopOptions opts = {});

    /// Advances one control interval. Requires !finished().
    const StepRecord& step();
    bool finished() const { return trace_.status != RunStatus::Running; }
    void reset();

    PreferenceMailbox& mailbox() { return mailbox_; }
    const MpcTrace& trace() const { return trace_; }
    const RhoPolicy& policy() const { return policy_; }
    double time() const;
    const VehicleState& state() const { return x_; }
    double h() const { return h_; }
    /// Most recently applied preference (policy start value before the first step).
    double rho() const { return rho_; }

private:
    double next_rho(double kappa);
    void finish(RunStatus status, double t_end);

    const Library& lib_;
    const Track& track_;
    VehicleState x0_;
    RhoPolicy initial_policy_;
    RhoPolicy policy_;
    StopRule stop_;
    ClosedLoopOptions opts_;
    PreferenceMailbox mailbox_;

    double h_ = 0.0;
    double d_abort_ = 0.0;
    VehicleState x_;
    double rho_ = 0.0;
    std::size_t k_ = 0;
    double progress_ = 0.0;
    double s_prev_ = 0.0;
    MpcTrace trace_;
};

MpcTrace run_closed_loop(const Library& lib, const Track& track, const VehicleState& x0, const RhoPolicy& policy,
                         const StopRule& stop = {}, const ClosedLoopOptions& opts = {});

/// State on the centre line at arc parameter 0, aligned with the track.
VehicleState start_state(const Track& track);

void write_trace_csv(std::ostream& out, const MpcTrace& trace);
std::string trace_to_json(const MpcTrace& trace);

}  // namespace emompc
