#include "emompc/online.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "emompc/errors.hpp"

namespace emompc {

LookupResult neighbor_lookup(const GridSpec& grid, std::span<const double> q, const LookupOptions& opts) {
    const std::size_t n = grid.dims.size();
    if (q.size() != n) throw DimensionError("neighbor_lookup: query dimension does not match the grid");
    LookupResult out;
    out.query.resize(n);
    MultiIndex base(n), lo(n), hi(n);
    for (std::size_t i = 0; i < n; ++i) {
        const GridDim& dim = grid.dims[i];
        const double top = dim.value(dim.count - 1);
        double v = q[i];
        if (!std::isfinite(v)) throw ParameterError("neighbor_lookup: non-finite query component " + dim.name);
        if (v < dim.min || v > top) {
            spdlog::warn("neighbor_lookup: {} = {:.6g} outside [{:.6g}, {:.6g}], clamped", dim.name, v, dim.min, top);
            v = std::clamp(v, dim.min, top);
            out.clamped = true;
        }
        out.query[i] = v;
        const double pos = dim.count > 1 ? (v - dim.min) / dim.step : 0.0;
        const auto last = static_cast<double>(dim.count - 1);
        base[i] = static_cast<std::size_t>(std::clamp(std::round(pos), 0.0, last));
        lo[i] = static_cast<std::size_t>(std::clamp(std::floor(pos), 0.0, last));
        hi[i] = std::min(lo[i] + 1, dim.count - 1);
    }

    std::vector<MultiIndex> nodes{base};
    auto add = [&nodes](const MultiIndex& m) {
        if (std::find(nodes.begin(), nodes.end(), m) == nodes.end()) nodes.push_back(m);
    };
    for (std::size_t i = 0; i < n; ++i) {
        MultiIndex m = base;
        m[i] = lo[i];
        add(m);
        m[i] = hi[i];
        add(m);
    }

    for (auto& m : nodes) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const GridDim& dim = grid.dims[i];
            double diff = out.query[i] - dim.value(m[i]);
            if (opts.normalize && dim.count > 1) diff /= dim.step;
            s += diff * diff;
        }
        out.neighbors.push_back({std::move(m), std::sqrt(s)});
    }
    return out;
}

Interpolation interpolate_control(std::span<const WeightedFront> neighbors, double rho, double u_min, double u_max,
                                  double d_zero_tol) {
    if (neighbors.empty()) throw LookupError("interpolate_control: no neighbors");
    Interpolation out;
    out.weights.assign(neighbors.size(), 0.0);

    std::optional<std::size_t> exact;
    for (std::size_t i = 0; i < neighbors.size(); ++i) {
        const auto& nb = neighbors[i];
        if (!nb.front || nb.front->empty()) continue;
        if (nb.distance <= d_zero_tol && (!exact || nb.distance < neighbors[*exact].distance)) exact = i;
    }
    if (exact) {
        out.control = select_by_weight(*neighbors[*exact].front, rho).control;
        out.weights[*exact] = 1.0;
        out.exact = exact;
        return out;
    }

    double total = 0.0;
    for (std::size_t i = 0; i < neighbors.size(); ++i) {
        const auto& nb = neighbors[i];
        if (!nb.front || nb.front->empty()) continue;
        const auto& u = select_by_weight(*nb.front, rho).control;
        if (out.control.empty()) out.control.assign(u.size(), 0.0);
        if (u.size() != out.control.size()) throw DimensionError("interpolate_control: control lengths differ");
        const double w = 1.0 / nb.distance;
        for (std::size_t c = 0; c < u.size(); ++c) out.control[c] += w * u[c];
        out.weights[i] = w;
        total += w;
    }
    if (total == 0.0) throw LookupError("interpolate_control: every neighbor front is empty");
    for (double& c : out.control) c = std::clamp(c / total, u_min, u_max);
    for (double& w : out.weights) w /= total;
    return out;
}

double heuristic_rho(double prev_rho, double kappa, double eps_kappa) {
    if (std::abs(kappa) < eps_kappa) return std::max(kHeuristicMin, prev_rho - kHeuristicStep);
    return std::min(kHeuristicMax, prev_rho + kHeuristicStep);
}

StepOutput mpc_step(const Library& lib, const Track& track, const VehicleState& x, double rho,
                    const MpcOptions& opts, double time) {
    const auto& grid = lib.grid();
    const auto& problem = lib.config.problem;
    const Reduction red = reduce_state(track, x);
    const auto q = red.param.to_array();
    const LookupResult lookup = neighbor_lookup(grid, q, {opts.normalize});

    std::vector<WeightedFront> fronts;
    fronts.reserve(lookup.neighbors.size());
    StepRecord rec;
    double nearest = std::numeric_limits<double>::infinity();
    for (const auto& nb : lookup.neighbors) {
        const std::size_t flat = flatten(grid, nb.index);
        fronts.push_back({&lib.entries.at(flat), nb.distance});
        rec.neighbors.push_back(flat);
        if (nb.distance < nearest && !lib.entries[flat].empty()) {
            nearest = nb.distance;
            rec.cell = flat;
        }
    }
    const Interpolation interp =
        interpolate_control(fronts, rho, problem.u_min, problem.u_max, opts.d_zero_tol);

    double u = interp.control.at(0);
    if (red.mirrored) u = -u;

    const Horizon one{time, time + problem.horizon.h(), 1};
    const auto xa = x.to_array();
    const double ua[1] = {u};
    const Trajectory traj = integrate_rk4(bicycle_dynamics(problem.vehicle), xa, ua, one);

    rec.time = time;
    rec.state = x;
    rec.reduced = red.param;
    rec.mirrored = red.mirrored;
    rec.d = red.projection.d;
    rec.rho = rho;
    rec.u = u;
    rec.weights = interp.weights;
    rec.selected_index = select_index(lib.entries[rec.cell].size(), rho).index;
    rec.clamped = lookup.clamped;
    return {rec, VehicleState::from(traj.at(1))};
}

const char* to_string(PolicyKind k) {
    switch (k) {
        case PolicyKind::Fixed: return "manual";
        case PolicyKind::Schedule: return "schedule";
        case PolicyKind::Heuristic: return "heuristic";
    }
    return "?";
}

const char* to_string(RunStatus s) {
    switch (s) {
        case RunStatus::Running: return "running";
        case RunStatus::LapComplete: return "finished";
        case RunStatus::TimeLimit: return "time_limit";
        case RunStatus::Aborted: return "aborted";
    }
    return "?";
}

double schedule_value(std::span<const ScheduleEntry> schedule, double t) {
    if (schedule.empty()) throw ParameterError("schedule_value: empty schedule");
    double rho = schedule.front().rho;
    for (const auto& e : schedule) {
        if (e.time <= t + 1e-12) rho = e.rho;
        else break;
    }
    return rho;
}

LapMetrics lap_metrics(const MpcTrace& trace) {
    LapMetrics m;
    if (trace.records.empty()) return m;
    m.lap_time = trace.lap_time.value_or(trace.records.back().time);
    // samples past the completion time are cut off; the crossing interval is linearly interpolated
    for (std::size_t i = 0; i < trace.records.size(); ++i) {
        const auto& r = trace.records[i];
        if (i == 0) {
            m.constraint_max = std::abs(r.d);
            continue;
        }
        const auto& p = trace.records[i - 1];
        if (p.time >= m.lap_time) break;
        double t = r.time, d = r.d;
        if (t > m.lap_time) {
            d = p.d + (m.lap_time - p.time) / (t - p.time) * (r.d - p.d);
            t = m.lap_time;
        }
        m.constraint_max = std::max(m.constraint_max, std::abs(d));
        m.integrated_distance += 0.5 * (t - p.time) * (p.d * p.d + d * d);
    }
    return m;
}

void PreferenceMailbox::post_rho(double rho) {
    std::lock_guard lock(mutex_);
    rho_ = rho;
}

void PreferenceMailbox::post_mode(Mode mode) {
    std::lock_guard lock(mutex_);
    mode_ = mode;
}

std::optional<double> PreferenceMailbox::take_rho() {
    std::lock_guard lock(mutex_);
    return std::exchange(rho_, std::nullopt);
}

std::optional<PreferenceMailbox::Mode> PreferenceMailbox::take_mode() {
    std::lock_guard lock(mutex_);
    return std::exchange(mode_, std::nullopt);
}

namespace {

double clamp_rho(double rho) {
    if (!std::isfinite(rho)) throw ParameterError("rho must be finite");
    if (rho < 0.0 || rho > 1.0) {
        spdlog::warn("rho = {:.6g} outside [0, 1], clamped", rho);
        return std::clamp(rho, 0.0, 1.0);
    }
    return rho;
}

/// Arc parameter extended past the end of an open polyline along its last segment.
double progress_coordinate(const Track& track, const Projection& proj, Vec2 p) {
    const auto* line = std::get_if<PolylineTrack>(&track);
    if (!line || line->closed() || proj.s < line->length()) return proj.s;
    const auto& pts = line->waypoints();
    const Vec2 a = pts[pts.size() - 2];
    const Vec2 b = pts.back();
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    const double along = ((p.x - b.x) * (b.x - a.x) + (p.y - b.y) * (b.y - a.y)) / len;
    return line->length() + std::max(0.0, along);
}

std::optional<double> lap_length(const Track& track) {
    if (const auto* line = std::get_if<PolylineTrack>(&track)) return line->length();
    return std::nullopt;
}

}  // namespace

ClosedLoop::ClosedLoop(const Library& lib, const Track& track, const VehicleState& x0, RhoPolicy policy,
                       StopRule stop, ClosedLoopOptions opts)
    : lib_(lib), track_(track), x0_(x0), initial_policy_(std::move(policy)), stop_(stop), opts_(opts) {
    if (initial_policy_.kind == PolicyKind::Schedule) {
        if (initial_policy_.schedule.empty()) throw ParameterError("schedule policy needs at least one entry");
        std::stable_sort(initial_policy_.schedule.begin(), initial_policy_.schedule.end(),
                         [](const ScheduleEntry& a, const ScheduleEntry& b) { return a.time < b.time; });
        for (auto& e : initial_policy_.schedule) e.rho = clamp_rho(e.rho);
    } else {
        initial_policy_.rho = clamp_rho(initial_policy_.rho);
    }
    if (initial_policy_.kind == PolicyKind::Heuristic) {
        initial_policy_.rho = std::clamp(initial_policy_.rho, kHeuristicMin, kHeuristicMax);
    }
    h_ = lib_.config.problem.horizon.h();
    d_abort_ = opts_.abort_factor * opts_.d_max.value_or(lib_.config.problem.d_max);
    reset();
}

void ClosedLoop::reset() {
    x_ = x0_;
    policy_ = initial_policy_;
    rho_ = policy_.kind == PolicyKind::Schedule ? schedule_value(policy_.schedule, 0.0) : policy_.rho;
    k_ = 0;
    progress_ = 0.0;
    trace_ = {};
    try {
        const Projection p = project_to_track(track_, {x_.p1, x_.p2});
        s_prev_ = progress_coordinate(track_, p, {x_.p1, x_.p2});
    } catch (const SingularProjectionError&) {
        s_prev_ = 0.0;
    }
}

double ClosedLoop::time() const { return static_cast<double>(k_) * h_; }

double ClosedLoop::next_rho(double kappa) {
    switch (policy_.kind) {
        case PolicyKind::Fixed: return policy_.rho;
        case PolicyKind::Schedule: return schedule_value(policy_.schedule, time());
        case PolicyKind::Heuristic: return heuristic_rho(rho_, kappa, opts_.mpc.eps_kappa);
    }
    return rho_;
}

void ClosedLoop::finish(RunStatus status, double t_end) {
    StepRecord last;
    last.time = t_end;
    last.state = x_;
    last.rho = rho_;
    try {
        const Reduction red = reduce_state(track_, x_);
        last.reduced = red.param;
        last.mirrored = red.mirrored;
        last.d = red.projection.d;
    } catch (const Error&) {
        last.d = std::numeric_limits<double>::quiet_NaN();
    }
    trace_.records.push_back(std::move(last));
    trace_.status = status;
}

const StepRecord& ClosedLoop::step() {
    if (finished()) throw Error("ClosedLoop::step: run already finished");

    if (const auto mode = mailbox_.take_mode()) {
        switch (*mode) {
            case PreferenceMailbox::Mode::Manual: policy_ = RhoPolicy::fixed(rho_); break;
            case PreferenceMailbox::Mode::Heuristic:
                policy_ = RhoPolicy::heuristic(std::clamp(rho_, kHeuristicMin, kHeuristicMax));
                rho_ = policy_.rho;
                break;
            case PreferenceMailbox::Mode::Schedule:
                if (initial_policy_.kind == PolicyKind::Schedule) policy_ = initial_policy_;
                else spdlog::warn("set_mode schedule ignored: the run has no schedule");
                break;
        }
    }
    if (const auto r = mailbox_.take_rho()) policy_ = RhoPolicy::fixed(clamp_rho(*r));

    const double t = time();
    const std::size_t index = trace_.records.size();
    try {
        const Projection here = project_to_track(track_, {x_.p1, x_.p2});
        rho_ = next_rho(here.kappa);
        StepOutput out = mpc_step(lib_, track_, x_, rho_, opts_.mpc, t);
        trace_.records.push_back(std::move(out.record));
        x_ = out.next;
    } catch (const Error& e) {
        trace_.abort_reason = e.what();
        finish(RunStatus::Aborted, t);
        return trace_.records.back();
    }
    ++k_;
    const double t_new = time();

    try {
        const Projection p = project_to_track(track_, {x_.p1, x_.p2});
        if (std::abs(p.d) > d_abort_) {
            trace_.abort_reason = "lateral offset exceeded the abort limit";
            finish(RunStatus::Aborted, t_new);
            return trace_.records[index];
        }
        const double s = progress_coordinate(track_, p, {x_.p1, x_.p2});
        const double before = progress_;
        progress_ += arc_length_between(track_, s_prev_, s);
        s_prev_ = s;
        const auto L = lap_length(track_);
        if (stop_.one_lap && L && progress_ >= *L) {
            const double frac = progress_ > before ? (*L - before) / (progress_ - before) : 1.0;
            trace_.lap_time = t + std::clamp(frac, 0.0, 1.0) * h_;
            finish(RunStatus::LapComplete, t_new);
        } else if (t_new >= stop_.t_max - 1e-12) {
            finish(RunStatus::TimeLimit, t_new);
        }
    } catch (const Error& e) {
        trace_.abort_reason = e.what();
        finish(RunStatus::Aborted, t_new);
    }
    return trace_.records[index];
}

MpcTrace run_closed_loop(const Library& lib, const Track& track, const VehicleState& x0, const RhoPolicy& policy,
                         const StopRule& stop, const ClosedLoopOptions& opts) {
    ClosedLoop loop(lib, track, x0, policy, stop, opts);
    while (!loop.finished()) loop.step();
    return loop.trace();
}

VehicleState start_state(const Track& track) {
    if (const auto* arc = std::get_if<ArcTrack>(&track)) {
        return {arc->frame.delta_p.x, arc->frame.delta_p.y, arc->frame.delta_theta, 0.0, 0.0};
    }
    const auto& pts = std::get<PolylineTrack>(track).waypoints();
    return {pts[0].x, pts[0].y, std::atan2(pts[1].y - pts[0].y, pts[1].x - pts[0].x), 0.0, 0.0};
}

namespace {

double signed_xi(const StepRecord& r) { return r.mirrored ? -r.reduced.xi : r.reduced.xi; }
double signed_kappa(const StepRecord& r) { return r.mirrored ? -r.reduced.kappa : r.reduced.kappa; }

}  // namespace

void write_trace_csv(std::ostream& out, const MpcTrace& trace) {
    out << "time,p1,p2,theta,v_y,r,xi,d,kappa,rho,u\n";
    char buf[512];
    for (const auto& r : trace.records) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.time,
                      r.state.p1, r.state.p2, r.state.theta, r.state.v_y, r.state.r, signed_xi(r), r.d,
                      signed_kappa(r), r.rho, r.u);
        out << buf;
    }
    const LapMetrics m = lap_metrics(trace);
    std::snprintf(buf, sizeof buf, "# lap_time=%.17g integrated_distance=%.17g constraint_max=%.17g status=%s\n",
                  m.lap_time, m.integrated_distance, m.constraint_max, to_string(trace.status));
    out << buf;
}

std::string trace_to_json(const MpcTrace& trace) {
    using nlohmann::json;
    json records = json::array();
    for (const auto& r : trace.records) {
        records.push_back({{"time", r.time},
                           {"state", r.state.to_array()},
                           {"reduced", r.reduced.to_array()},
                           {"mirrored", r.mirrored},
                           {"d", r.d},
                           {"rho", r.rho},
                           {"u", r.u},
                           {"neighbors", r.neighbors},
                           {"weights", r.weights},
                           {"cell", r.cell},
                           {"selected_index", r.selected_index}});
    }
    const LapMetrics m = lap_metrics(trace);
    json summary = {{"lap_time", m.lap_time},
                    {"integrated_distance", m.integrated_distance},
                    {"constraint_max", m.constraint_max},
                    {"status", to_string(trace.status)}};
    if (!trace.abort_reason.empty()) summary["abort_reason"] = trace.abort_reason;
    return json{{"records", records}, {"summary", summary}}.dump();
}

}  // namespace emompc
