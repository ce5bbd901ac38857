#pragma once

/**
 * @file pareto.hpp
 * @brief Dominance, nondominated filtering, proper-efficiency trimming,
 *        preference selection and Hausdorff distances.
 *
 * All functions are pure and may be called concurrently.
 */

#include <cstddef>
#include <span>
#include <vector>

namespace emompc {

/// Point in objective space; all objectives are minimized.
using ObjectiveVector = std::vector<double>;

/// A Pareto-optimal control sequence (flattened, step-major) and its image.
struct ParetoEntry {
    std::vector<double> control;
    ObjectiveVector objectives;
};

/// Mutually nondominated entries sorted ascending by the first objective.
struct ParetoSet {
    std::vector<ParetoEntry> entries;

    std::size_t size() const noexcept { return entries.size(); }
    bool empty() const noexcept { return entries.empty(); }
    const ParetoEntry& operator[](std::size_t i) const { return entries[i]; }

    std::vector<ObjectiveVector> front() const;
    std::vector<std::vector<double>> controls() const;
};

/// True iff a <= b componentwise and a != b. Throws DimensionError on length mismatch.
bool dominates(std::span<const double> a, std::span<const double> b);

/**
 * @brief Keeps exactly the entries not dominated by any other entry.
 *
 * Entries with identical objective vectors are collapsed to the first
 * occurrence. The result is sorted lexicographically by objectives.
 * Throws EmptySetError on empty input.
 */
ParetoSet nondominated_filter(std::span<const ParetoEntry> points);

/// Symmetric Hausdorff distance between two finite point sets (Euclidean metric).
double hausdorff(std::span<const std::vector<double>> a, std::span<const std::vector<double>> b);

/**
 * @brief Hausdorff distance between the polylines through two ordered point sequences.
 *
 * Each segment is densified with @p samples_per_segment interior points before
 * measuring point-to-polyline distances. A single point is a degenerate polyline.
 */
double hausdorff_polyline(std::span<const std::vector<double>> a,
                          std::span<const std::vector<double>> b,
                          std::size_t samples_per_segment = 32);

/// Default tail-trimming tolerance of proper_filter.
inline constexpr double kDefaultProperEps = 0.05;

/**
 * @brief Trims the long tails of a sorted two-objective front.
 *
 * The max-J1 endpoint is removed while its J2 improvement over its neighbour is
 * below eps times the J2 range of the input front; then the min-J1 endpoint is
 * removed while its J1 improvement is below eps times the J1 range. At least two
 * points are kept. Fronts with fewer than two points are returned unchanged.
 */
ParetoSet proper_filter(const ParetoSet& front, double eps = kDefaultProperEps);

struct Selection {
    std::size_t index = 0;
    double rho = 0.0;       ///< rho actually used, after clamping
    bool clamped = false;
};

/// Index round-half-up(rho * (M - 1)); rho = 0 picks min J1, rho = 1 picks min J2.
Selection select_index(std::size_t front_size, double rho);

/// Entry of a sorted front chosen by the preference weight rho (clamped to [0,1]).
const ParetoEntry& select_by_weight(const ParetoSet& front, double rho);

}  // namespace emompc
