#pragma once

/**
 * @file library.hpp
 * @brief Offline library: parameter grid, parallel front tracing per node,
 *        persistence, verification and the numerical symmetry scanner.
 */

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "emompc/mocp.hpp"
#include "emompc/pareto.hpp"
#include "emompc/reduction.hpp"

namespace emompc {

struct GridDim {
    std::string name;
    double min = 0.0;
    double max = 0.0;
    double step = 1.0;
    std::size_t count = 1;

    double value(std::size_t i) const { return min + static_cast<double>(i) * step; }
};

/// count = round((max - min) / step) + 1. Throws ConfigError on min > max or step <= 0.
GridDim make_dim(std::string name, double min, double max, double step);

struct GridSpec {
    std::vector<GridDim> dims;

    std::vector<std::size_t> counts() const;
};

using MultiIndex = std::vector<std::size_t>;

/// Product of the counts. Throws ConfigError on overflow or a zero count.
std::uint64_t grid_count(std::span<const std::size_t> counts);
std::uint64_t grid_count(const GridSpec& spec);

/// Lexicographic order, last dimension fastest.
MultiIndex unflatten(const GridSpec& spec, std::size_t flat);
std::size_t flatten(const GridSpec& spec, std::span<const std::size_t> index);
std::vector<double> node_value(const GridSpec& spec, std::span<const std::size_t> index);

inline constexpr const char* kReducedNames[5] = {"v_y", "r", "xi", "d", "kappa"};

/// Full-size grid over (v_y, r, xi, d, kappa): counts (13, 13, 7, 21, 9).
GridSpec full_grid();
/// Five points per dimension over the full-size ranges.
GridSpec desk_grid();

/// Builds at or above this node count require an explicit opt-in from the CLI.
inline constexpr std::uint64_t kLargeBuildNodes = 20000;

struct LibraryConfig {
    GridSpec grid = desk_grid();
    VehicleProblemConfig problem;
    SolverOptions solver;
    std::size_t n_targets = 18;
    double d_e_fraction = 0.1;
    double proper_eps = kDefaultProperEps;

    TraceOptions trace_options() const;
};

/// Parses a build configuration; throws ConfigError.
LibraryConfig parse_library_config(const std::string& json_text);
LibraryConfig load_library_config(const std::filesystem::path& path);

struct NodeFailure {
    MultiIndex index;
    std::string message;
};

struct Library {
    LibraryConfig config;
    std::vector<ParetoSet> entries;  ///< one per node, flat order
    std::vector<NodeFailure> failures;
    bool complete = true;
    double build_seconds = 0.0;  ///< not persisted

    const GridSpec& grid() const { return config.grid; }
    const ParetoSet& at(std::span<const std::size_t> index) const { return entries.at(flatten(config.grid, index)); }
    ReducedParameter parameter(std::span<const std::size_t> index) const;
};

/// Called after each finished node with (done, total, failures so far). Serialized by the builder.
using BuildProgress = std::function<void(std::size_t, std::size_t, std::size_t)>;

/// Control used for the retry of a failed node (both scalar solves start here).
inline constexpr double kRetryStart = 0.01;

/// Traces every node of the grid on `workers` threads. Results do not depend on the worker count.
Library build_library(const LibraryConfig& config, std::size_t workers, const BuildProgress& progress = {});

/// Traces one node (with the retry policy). Throws FrontTraceError when both attempts fail.
ParetoSet trace_node(const LibraryConfig& config, const ReducedParameter& param);

inline constexpr int kLibraryFormatVersion = 1;

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);

std::string serialize_library(const Library& lib);
/// Throws VersionError, ChecksumError or LoadError. check_integrity = false skips the checksum comparison.
Library deserialize_library(const std::string& text, bool check_integrity = true);
void save_library(const Library& lib, const std::filesystem::path& path);
Library load_library(const std::filesystem::path& path, bool check_integrity = true);

struct VerifyIssue {
    MultiIndex index;
    std::string check;
    std::string message;
};

struct VerifyReport {
    std::size_t entries_checked = 0;
    std::size_t spot_checks = 0;
    std::vector<VerifyIssue> issues;

    bool ok() const { return issues.empty(); }
};

struct VerifyOptions {
    double feasibility_tol = 1e-6;
    double objective_tol = 1e-8;  ///< relative to max(1, |J|)
    std::size_t spot_samples = 16;
    std::uint64_t seed = 7;
};

/**
 * @brief Audits every entry (nonempty, dimensions, nondominance, sort order,
 *        control bounds, knot feasibility, stored objectives) and spot-checks
 *        SE(2) and mirror invariance of the stored objectives on sampled nodes.
 */
VerifyReport verify_library(const Library& lib, const VerifyOptions& opts = {});

using ProblemFamily = std::function<MocpDefinition(std::span<const double>)>;

enum class ScanVerdict { Invariant, NotInvariant };

const char* to_string(ScanVerdict v);

struct ScanResult {
    double max_distance = 0.0;
    ScanVerdict verdict = ScanVerdict::Invariant;
    std::vector<ParetoSet> sets;
    std::vector<std::vector<double>> distances;  ///< pairwise decision-space Hausdorff
};

/// Front tracing settings of the scanner: no tail trimming, so whole sets are compared.
TraceOptions scan_trace_options();

/**
 * @brief Traces the problem at each value and compares the Pareto sets in
 *        decision space (densified polylines ordered along the front).
 *
 * Throws ParameterError for fewer than two values and FrontTraceError if a trace fails.
 */
ScanResult symmetry_scan(const ProblemFamily& family, const std::vector<std::vector<double>>& values, double eps,
                         const TraceOptions& opts = scan_trace_options());

/**
 * @brief Parameter-dependent two-objective test problem with
 *        J = (W(u) + u1 - u2, W(u) - u1 + u2) / 2 + gamma exp(-(u1 - u2)^2),
 *        W(u) = sqrt(1 + (u1 + u2)^2) + sqrt(1 + (u1 - u2)^2), posed as a static
 *        control problem (no dynamics, one step, unit horizon) on the box [-1, 1]^2.
 */
MocpDefinition witting_problem(double gamma);

/// Value (theta, dx, dy): the reduced problem at `param` with start state and arc moved by that rigid motion.
ProblemFamily bicycle_pose_family(const ReducedParameter& param, const VehicleProblemConfig& cfg);
/// Value (kappa): the reduced problem at `param` with its curvature replaced.
ProblemFamily bicycle_curvature_family(const ReducedParameter& param, const VehicleProblemConfig& cfg);

}  // namespace emompc
