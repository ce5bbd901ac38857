#include "emompc/track.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "emompc/errors.hpp"

namespace emompc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
Vec2 sub(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
double norm(Vec2 a) { return std::hypot(a.x, a.y); }

/// Signed curvature of the circle through three points (left turn positive).
double circumcurvature(Vec2 a, Vec2 b, Vec2 c) {
    const double ab = norm(sub(b, a));
    const double bc = norm(sub(c, b));
    const double ca = norm(sub(a, c));
    const double denom = ab * bc * ca;
    if (denom <= 0.0) return 0.0;
    return 2.0 * cross(sub(b, a), sub(c, b)) / denom;
}

Projection project_arc(const ArcTrack& arc, Vec2 p) {
    const Vec2 local = arc.frame.inverse().apply(p);
    Projection out;
    out.kappa = arc.kappa;
    double phi = 0.0;
    Vec2 q{};
    if (std::abs(arc.kappa) < kKappaTol) {
        q = {local.x, 0.0};
        out.s = local.x;
        out.d = local.y;
    } else {
        const double radius = 1.0 / std::abs(arc.kappa);
        const Vec2 center{0.0, 1.0 / arc.kappa};
        const Vec2 v = sub(local, center);
        const double r = norm(v);
        if (r <= 1e-12 * radius) throw SingularProjectionError("project_to_track: point at arc centre");
        q = {center.x + radius * v.x / r, center.y + radius * v.y / r};
        phi = std::atan2(arc.kappa * q.x, 1.0 - arc.kappa * q.y);
        out.s = phi / arc.kappa;
        out.d = dot(sub(local, q), Vec2{-std::sin(phi), std::cos(phi)});
    }
    out.point = arc.frame.apply(q);
    out.alpha = wrap_angle(phi + arc.frame.delta_theta);
    return out;
}

Projection project_polyline(const PolylineTrack& line, Vec2 p) {
    const auto& pts = line.waypoints();
    const auto& cum = line.arc_lengths();
    const auto& len = line.segment_lengths();
    const auto& kap = line.curvatures();
    const std::size_t n = pts.size();

    std::size_t best_i = 0;
    double best_t = 0.0;
    double best_d2 = std::numeric_limits<double>::infinity();
    const std::size_t segs = line.segment_count();
    for (std::size_t i = 0; i < segs; ++i) {
        const Vec2 a = pts[i];
        const Vec2 b = pts[(i + 1) % n];
        const Vec2 ab = sub(b, a);
        // open tracks continue straight beyond their end points
        const double lo = !line.closed() && i == 0 ? -kInf : 0.0;
        const double hi = !line.closed() && i + 1 == segs ? kInf : 1.0;
        const double t = std::clamp(dot(sub(p, a), ab) / dot(ab, ab), lo, hi);
        const Vec2 q{a.x + t * ab.x, a.y + t * ab.y};
        const double d2 = dot(sub(p, q), sub(p, q));
        if (d2 < best_d2) {
            best_d2 = d2;
            best_i = i;
            best_t = t;
        }
    }

    const std::size_t j = (best_i + 1) % n;
    const Vec2 a = pts[best_i];
    const Vec2 ab = sub(pts[j], a);
    Projection out;
    out.point = {a.x + best_t * ab.x, a.y + best_t * ab.y};
    out.s = cum[best_i] + best_t * len[best_i];
    if (line.closed() && out.s >= line.length()) out.s -= line.length();
    const double tk = std::clamp(best_t, 0.0, 1.0);
    out.kappa = (1.0 - tk) * kap[best_i] + tk * kap[j];

    const Vec2 offset = sub(p, out.point);
    const double dist = norm(offset);
    const double side = cross(ab, offset) >= 0.0 ? 1.0 : -1.0;
    out.d = side * dist;
    if (dist > 1e-12) {
        // tangent perpendicular to the offset; equals the segment heading off the vertices
        const Vec2 normal{side * offset.x / dist, side * offset.y / dist};
        out.alpha = wrap_angle(std::atan2(normal.y, normal.x) - 0.5 * std::numbers::pi);
    } else {
        out.alpha = std::atan2(ab.y, ab.x);
    }
    return out;
}

}  // namespace

PolylineTrack::PolylineTrack(std::string name, std::vector<Vec2> waypoints, bool closed)
    : name_(std::move(name)), points_(std::move(waypoints)), closed_(closed) {
    if (closed_ && points_.size() > 2) {
        const Vec2 gap = sub(points_.back(), points_.front());
        if (norm(gap) < 1e-9) points_.pop_back();
    }
    const std::size_t n = points_.size();
    if (n < 3) throw ConfigError("track '" + name_ + "': needs at least 3 distinct waypoints");

    const std::size_t segs = segment_count();
    seg_len_.resize(segs);
    cum_s_.assign(n + (closed_ ? 1 : 0), 0.0);
    for (std::size_t i = 0; i < segs; ++i) {
        seg_len_[i] = norm(sub(points_[(i + 1) % n], points_[i]));
        if (!(seg_len_[i] > 0.0)) throw ConfigError("track '" + name_ + "': repeated waypoint");
        cum_s_[i + 1] = cum_s_[i] + seg_len_[i];
    }
    length_ = cum_s_.back();

    tangent_.resize(n);
    std::vector<double> raw(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const bool has_prev = closed_ || i > 0;
        const bool has_next = closed_ || i + 1 < n;
        const Vec2 prev = points_[has_prev ? (i + n - 1) % n : i];
        const Vec2 next = points_[has_next ? (i + 1) % n : i];
        const Vec2 dir = sub(next, prev);
        tangent_[i] = std::atan2(dir.y, dir.x);
        if (has_prev && has_next) raw[i] = circumcurvature(prev, points_[i], next);
    }
    if (!closed_) {
        raw.front() = raw[1];
        raw.back() = raw[n - 2];
    }
    kappa_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (closed_) {
            kappa_[i] = (raw[(i + n - 1) % n] + raw[i] + raw[(i + 1) % n]) / 3.0;
        } else {
            const std::size_t lo = i == 0 ? 0 : i - 1;
            const std::size_t hi = std::min(n - 1, i + 1);
            double acc = 0.0;
            for (std::size_t k = lo; k <= hi; ++k) acc += raw[k];
            kappa_[i] = acc / static_cast<double>(hi - lo + 1);
        }
        if (!std::isfinite(kappa_[i])) throw ConfigError("track '" + name_ + "': non-finite curvature estimate");
    }
}

Vec2 PolylineTrack::point_at(double s) const {
    if (closed_) {
        s = std::fmod(s, length_);
        if (s < 0.0) s += length_;
    } else {
        s = std::clamp(s, 0.0, length_);
    }
    const auto it = std::upper_bound(cum_s_.begin(), cum_s_.end(), s);
    std::size_t i = it == cum_s_.begin() ? 0 : static_cast<std::size_t>(it - cum_s_.begin()) - 1;
    i = std::min(i, segment_count() - 1);
    const double t = (s - cum_s_[i]) / seg_len_[i];
    const Vec2 a = points_[i];
    const Vec2 b = points_[(i + 1) % points_.size()];
    return {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)};
}

Projection project_to_track(const Track& track, Vec2 p) {
    return std::visit(
        [&](const auto& t) -> Projection {
            if constexpr (std::is_same_v<std::decay_t<decltype(t)>, ArcTrack>) return project_arc(t, p);
            else return project_polyline(t, p);
        },
        track);
}

double distance_to_track(const Track& track, Vec2 p) {
    if (const auto* arc = std::get_if<ArcTrack>(&track)) {
        const Vec2 local = arc->frame.inverse().apply(p);
        if (std::abs(arc->kappa) < kKappaTol) return std::abs(local.y);
        const double radius = 1.0 / std::abs(arc->kappa);
        return std::abs(norm(sub(local, Vec2{0.0, 1.0 / arc->kappa})) - radius);
    }
    return std::abs(project_to_track(track, p).d);
}

double arc_length_between(const Track& track, double s0, double s1) {
    const auto* line = std::get_if<PolylineTrack>(&track);
    if (!line || !line->closed()) return s1 - s0;
    const double L = line->length();
    double w = std::fmod(s1 - s0, L);
    if (w > 0.5 * L) w -= L;
    else if (w <= -0.5 * L) w += L;
    return w;
}

Track se2_apply_track(const Se2Action& g, const Track& track) {
    if (const auto* arc = std::get_if<ArcTrack>(&track)) return ArcTrack{arc->kappa, g.compose(arc->frame)};
    const auto& line = std::get<PolylineTrack>(track);
    std::vector<Vec2> pts;
    pts.reserve(line.waypoints().size());
    for (const Vec2& p : line.waypoints()) pts.push_back(g.apply(p));
    return PolylineTrack(line.name(), std::move(pts), line.closed());
}

Track mirror_track(const Track& track) {
    if (const auto* arc = std::get_if<ArcTrack>(&track)) {
        return ArcTrack{-arc->kappa, Se2Action{-arc->frame.delta_theta, mirror_point(arc->frame.delta_p)}};
    }
    const auto& line = std::get<PolylineTrack>(track);
    std::vector<Vec2> pts;
    pts.reserve(line.waypoints().size());
    for (const Vec2& p : line.waypoints()) pts.push_back(mirror_point(p));
    return PolylineTrack(line.name(), std::move(pts), line.closed());
}

PolylineTrack parse_track(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("track: invalid JSON: ") + e.what());
    }
    try {
        const std::string name = j.value("name", std::string("track"));
        const bool closed = j.at("closed").get<bool>();
        std::vector<Vec2> pts;
        for (const auto& w : j.at("waypoints")) {
            if (!w.is_array() || w.size() != 2) throw ConfigError("track: waypoint must be [x, y]");
            pts.push_back({w[0].get<double>(), w[1].get<double>()});
        }
        if (pts.size() < 8) throw ConfigError("track: at least 8 waypoints required");
        return PolylineTrack(name, std::move(pts), closed);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("track: ") + e.what());
    }
}

PolylineTrack load_track(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open track file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_track(ss.str());
}

}  // namespace emompc
