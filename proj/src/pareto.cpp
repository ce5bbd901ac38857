#include "emompc/pareto.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <spdlog/spdlog.h>

#include "emompc/errors.hpp"

namespace emompc {

std::vector<ObjectiveVector> ParetoSet::front() const {
    std::vector<ObjectiveVector> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.objectives);
    return out;
}

std::vector<std::vector<double>> ParetoSet::controls() const {
    std::vector<std::vector<double>> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.control);
    return out;
}

bool dominates(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw DimensionError("dominates: objective vectors of length " + std::to_string(a.size()) +
                             " and " + std::to_string(b.size()));
    }
    bool strict = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] > b[i]) return false;
        if (a[i] < b[i]) strict = true;
    }
    return strict;
}

ParetoSet nondominated_filter(std::span<const ParetoEntry> points) {
    if (points.empty()) throw EmptySetError("nondominated_filter: empty input");
    const std::size_t k = points.front().objectives.size();
    for (const auto& p : points) {
        if (p.objectives.size() != k) throw DimensionError("nondominated_filter: mixed objective dimensions");
    }

    ParetoSet out;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& pi = points[i].objectives;
        bool keep = true;
        for (std::size_t j = 0; j < points.size() && keep; ++j) {
            if (j == i) continue;
            const auto& pj = points[j].objectives;
            if (dominates(pj, pi)) keep = false;
            // duplicates: only the first occurrence survives
            else if (j < i && pj == pi) keep = false;
        }
        if (keep) out.entries.push_back(points[i]);
    }
    std::stable_sort(out.entries.begin(), out.entries.end(),
                     [](const ParetoEntry& a, const ParetoEntry& b) { return a.objectives < b.objectives; });
    return out;
}

namespace {

double distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionError("hausdorff: points of different dimension");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

double directed(std::span<const std::vector<double>> from, std::span<const std::vector<double>> to) {
    double worst = 0.0;
    for (const auto& p : from) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& q : to) best = std::min(best, distance(p, q));
        worst = std::max(worst, best);
    }
    return worst;
}

double point_segment_distance(std::span<const double> p, std::span<const double> a, std::span<const double> b) {
    double ab2 = 0.0;
    double t = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double ab = b[i] - a[i];
        ab2 += ab * ab;
        t += (p[i] - a[i]) * ab;
    }
    t = ab2 > 0.0 ? std::clamp(t / ab2, 0.0, 1.0) : 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = p[i] - (a[i] + t * (b[i] - a[i]));
        s += d * d;
    }
    return std::sqrt(s);
}

double point_polyline_distance(std::span<const double> p, std::span<const std::vector<double>> line) {
    if (line.size() == 1) return distance(p, line.front());
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < line.size(); ++i) {
        best = std::min(best, point_segment_distance(p, line[i], line[i + 1]));
    }
    return best;
}

double directed_polyline(std::span<const std::vector<double>> from, std::span<const std::vector<double>> to,
                         std::size_t samples) {
    double worst = 0.0;
    std::vector<double> q;
    auto visit = [&](std::span<const double> p) { worst = std::max(worst, point_polyline_distance(p, to)); };
    for (std::size_t i = 0; i < from.size(); ++i) {
        if (from[i].size() != to.front().size()) throw DimensionError("hausdorff_polyline: dimension mismatch");
        visit(from[i]);
        if (i + 1 == from.size()) break;
        q.resize(from[i].size());
        for (std::size_t s = 1; s <= samples; ++s) {
            const double t = static_cast<double>(s) / static_cast<double>(samples + 1);
            for (std::size_t c = 0; c < q.size(); ++c) q[c] = from[i][c] + t * (from[i + 1][c] - from[i][c]);
            visit(q);
        }
    }
    return worst;
}

}  // namespace

double hausdorff(std::span<const std::vector<double>> a, std::span<const std::vector<double>> b) {
    if (a.empty() || b.empty()) throw EmptySetError("hausdorff: empty point set");
    return std::max(directed(a, b), directed(b, a));
}

double hausdorff_polyline(std::span<const std::vector<double>> a, std::span<const std::vector<double>> b,
                          std::size_t samples_per_segment) {
    if (a.empty() || b.empty()) throw EmptySetError("hausdorff_polyline: empty point set");
    return std::max(directed_polyline(a, b, samples_per_segment), directed_polyline(b, a, samples_per_segment));
}

ParetoSet proper_filter(const ParetoSet& front, double eps) {
    if (!(eps > 0.0 && eps < 0.5)) throw ParameterError("proper_filter: eps must lie in (0, 0.5)");
    if (front.size() < 2) return front;
    for (const auto& e : front.entries) {
        if (e.objectives.size() != 2) throw DimensionError("proper_filter: requires two objectives");
    }

    const auto& first = front.entries.front().objectives;
    const auto& last = front.entries.back().objectives;
    const double range1 = last[0] - first[0];
    const double range2 = first[1] - last[1];

    std::size_t lo = 0;
    std::size_t hi = front.size() - 1;
    while (hi - lo + 1 > 2) {
        const double gain = front[hi - 1].objectives[1] - front[hi].objectives[1];
        if (gain >= eps * range2) break;
        --hi;
    }
    while (hi - lo + 1 > 2) {
        const double gain = front[lo + 1].objectives[0] - front[lo].objectives[0];
        if (gain >= eps * range1) break;
        ++lo;
    }
    ParetoSet out;
    out.entries.assign(front.entries.begin() + static_cast<std::ptrdiff_t>(lo),
                       front.entries.begin() + static_cast<std::ptrdiff_t>(hi) + 1);
    return out;
}

Selection select_index(std::size_t front_size, double rho) {
    if (front_size == 0) throw EmptySetError("select_by_weight: empty front");
    Selection sel;
    sel.rho = rho;
    if (std::isnan(rho) || rho < 0.0 || rho > 1.0) {
        sel.rho = std::isnan(rho) ? 0.0 : std::clamp(rho, 0.0, 1.0);
        sel.clamped = true;
        spdlog::warn("preference rho={} outside [0,1], clamped to {}", rho, sel.rho);
    }
    const double pos = sel.rho * static_cast<double>(front_size - 1);
    sel.index = std::min(front_size - 1, static_cast<std::size_t>(std::floor(pos + 0.5)));
    return sel;
}

const ParetoEntry& select_by_weight(const ParetoSet& front, double rho) {
    if (!front.empty() && front[0].objectives.size() != 2) {
        throw DimensionError("select_by_weight: ordering requires two objectives");
    }
    return front.entries[select_index(front.size(), rho).index];
}

}  // namespace emompc
