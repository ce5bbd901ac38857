#pragma once

/**
 * @file track.hpp
 * @brief Reference tracks: the normalized constant-curvature arc used by the
 *        reduced problems and global polylines used in closed loop.
 *
 * Signed lateral offsets are positive to the left of the direction of travel,
 * which for a positive curvature is the side of the arc centre.
 */

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "emompc/vehicle.hpp"

namespace emompc {

/// Curvatures below this magnitude are treated as a straight line.
inline constexpr double kKappaTol = 1e-6;

/**
 * @brief Constant-curvature arc through the origin with heading 0, placed by `frame`.
 *
 * In local coordinates the arc is gamma(s) = (sin(kappa s), 1 - cos(kappa s)) / kappa
 * with s the arc length (s in (-pi/|kappa|, pi/|kappa|]), i.e. a circle of radius
 * 1/|kappa| centred at (0, 1/kappa).
 */
struct ArcTrack {
    double kappa = 0.0;
    Se2Action frame{};
};

class PolylineTrack {
public:
    PolylineTrack(std::string name, std::vector<Vec2> waypoints, bool closed);

    const std::string& name() const noexcept { return name_; }
    bool closed() const noexcept { return closed_; }
    double length() const noexcept { return length_; }
    const std::vector<Vec2>& waypoints() const noexcept { return points_; }
    std::size_t segment_count() const noexcept { return closed_ ? points_.size() : points_.size() - 1; }
    /// Cumulative arc length at each waypoint.
    const std::vector<double>& arc_lengths() const noexcept { return cum_s_; }
    const std::vector<double>& segment_lengths() const noexcept { return seg_len_; }
    /// Smoothed curvature estimate at each waypoint.
    const std::vector<double>& curvatures() const noexcept { return kappa_; }
    /// Tangent angle at each waypoint (central difference).
    const std::vector<double>& tangent_angles() const noexcept { return tangent_; }

    Vec2 point_at(double s) const;

private:
    std::string name_;
    std::vector<Vec2> points_;
    bool closed_;
    std::vector<double> cum_s_;
    std::vector<double> seg_len_;
    std::vector<double> kappa_;
    std::vector<double> tangent_;
    double length_ = 0.0;
};

using Track = std::variant<ArcTrack, PolylineTrack>;

struct Projection {
    Vec2 point;         ///< closest point on the centre line
    double d = 0.0;     ///< signed lateral offset (left positive)
    double alpha = 0.0; ///< tangent angle at the projection
    double kappa = 0.0; ///< curvature at the projection
    double s = 0.0;     ///< arc parameter of the projection
};

/// Closest-point projection. Throws SingularProjectionError at an arc centre.
Projection project_to_track(const Track& track, Vec2 p);

/// Unsigned distance to the centre line; defined everywhere, including an arc centre.
double distance_to_track(const Track& track, Vec2 p);

/// Signed arc length from s0 to s1; closed polylines wrap into (-L/2, L/2].
double arc_length_between(const Track& track, double s0, double s1);

Track se2_apply_track(const Se2Action& g, const Track& track);

/// Reflection of the track at the horizontal axis, keeping the direction of travel.
Track mirror_track(const Track& track);

/// Reads {name, closed, waypoints: [[x, y], ...]} (at least 8 points).
PolylineTrack load_track(const std::filesystem::path& path);
PolylineTrack parse_track(const std::string& json_text);

}  // namespace emompc
