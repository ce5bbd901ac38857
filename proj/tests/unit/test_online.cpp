#include <doctest.h>

#include <cmath>
#include <sstream>
#include <thread>

#include "emompc/errors.hpp"
#include "emompc/online.hpp"

using namespace emompc;

namespace {

/// v_y, r, xi fixed at 0; d in {0, 1}; kappa in {-0.02, 0, 0.02}.
const Library& small_library() {
    static const Library lib = [] {
        LibraryConfig c;
        c.grid.dims = {make_dim("v_y", 0, 0, 1), make_dim("r", 0, 0, 1), make_dim("xi", 0, 0, 1),
                       make_dim("d", 0.0, 1.0, 1.0), make_dim("kappa", -0.02, 0.02, 0.02)};
        return build_library(c, 1);
    }();
    return lib;
}

PolylineTrack straight(double length) {
    std::vector<Vec2> pts;
    for (int i = 0; i <= static_cast<int>(length); ++i) pts.push_back({double(i), 0.0});
    return PolylineTrack("straight", pts, false);
}

ParetoSet front_of(std::vector<double> controls) {
    ParetoSet s;
    for (std::size_t i = 0; i < controls.size(); ++i) {
        s.entries.push_back({{controls[i]}, {double(i), -double(i)}});
    }
    return s;
}

MpcTrace synthetic_trace(double d, double seconds, double h) {
    MpcTrace t;
    const int n = static_cast<int>(std::lround(seconds / h));
    for (int k = 0; k <= n; ++k) {
        StepRecord r;
        r.time = k * h;
        r.d = d;
        t.records.push_back(r);
    }
    return t;
}

}  // namespace

TEST_CASE("neighbor_lookup: one dimension") {
    GridSpec g;
    g.dims = {make_dim("a", 0, 2, 1)};
    const auto r = neighbor_lookup(g, std::vector<double>{0.3});
    REQUIRE(r.neighbors.size() == 2);
    CHECK(r.neighbors[0].index == MultiIndex{0});
    CHECK(r.neighbors[0].distance == doctest::Approx(0.3));
    CHECK(r.neighbors[1].index == MultiIndex{1});
    CHECK(r.neighbors[1].distance == doctest::Approx(0.7));
    CHECK_FALSE(r.clamped);
}

TEST_CASE("neighbor_lookup: two dimensions, deduplicated") {
    GridSpec g;
    g.dims = {make_dim("a", 0, 1, 1), make_dim("b", 0, 1, 1)};
    const auto r = neighbor_lookup(g, std::vector<double>{0.3, 0.8});
    REQUIRE(r.neighbors.size() == 3);
    CHECK(r.neighbors[0].index == MultiIndex{0, 1});
    CHECK(r.neighbors[1].index == MultiIndex{1, 1});
    CHECK(r.neighbors[2].index == MultiIndex{0, 0});
}

TEST_CASE("neighbor_lookup: exact node, clamping, normalization") {
    GridSpec g;
    g.dims = {make_dim("a", 0, 2, 1), make_dim("b", 0, 10, 5)};
    const auto on = neighbor_lookup(g, std::vector<double>{1.0, 5.0});
    CHECK(on.neighbors[0].index == MultiIndex{1, 1});
    CHECK(on.neighbors[0].distance == 0.0);

    const auto out = neighbor_lookup(g, std::vector<double>{-4.0, 12.0});
    CHECK(out.clamped);
    CHECK(out.query == std::vector<double>{0.0, 10.0});
    CHECK(out.neighbors[0].distance == 0.0);

    const auto norm = neighbor_lookup(g, std::vector<double>{0.0, 2.5}, {true});
    bool found = false;
    for (const auto& n : norm.neighbors) {
        if (n.index == MultiIndex{0, 0}) {
            CHECK(n.distance == doctest::Approx(0.5));
            found = true;
        }
    }
    CHECK(found);
    CHECK_THROWS_AS(neighbor_lookup(g, std::vector<double>{0.0}), DimensionError);
    CHECK_THROWS_AS(neighbor_lookup(g, std::vector<double>{NAN, 0.0}), ParameterError);
}

TEST_CASE("interpolate_control: exact, equal and unequal weights") {
    const auto a = front_of({0.2}), b = front_of({0.4});
    const WeightedFront exact[] = {{&a, 0.0}, {&b, 1.0}};
    const auto e = interpolate_control(exact, 0.5, -1, 1);
    CHECK(e.control[0] == 0.2);
    CHECK(e.exact == std::optional<std::size_t>{0});

    const WeightedFront equal[] = {{&a, 1.0}, {&b, 1.0}};
    CHECK(interpolate_control(equal, 0.5, -1, 1).control[0] == doctest::Approx(0.3));

    const WeightedFront unequal[] = {{&a, 1.0}, {&b, 3.0}};
    const auto u = interpolate_control(unequal, 0.5, -1, 1);
    CHECK(u.control[0] == doctest::Approx(0.25));
    CHECK(u.weights[0] == doctest::Approx(0.75));
    CHECK(u.weights[1] == doctest::Approx(0.25));
}

TEST_CASE("interpolate_control: preference selects within each front") {
    const auto a = front_of({-0.4, 0.0, 0.4});
    const WeightedFront one[] = {{&a, 0.0}};
    CHECK(interpolate_control(one, 0.0, -1, 1).control[0] == -0.4);
    CHECK(interpolate_control(one, 0.5, -1, 1).control[0] == 0.0);
    CHECK(interpolate_control(one, 1.0, -1, 1).control[0] == 0.4);
}

TEST_CASE("interpolate_control: empty fronts") {
    const ParetoSet empty;
    const auto b = front_of({0.4});
    const WeightedFront mixed[] = {{&empty, 1.0}, {&b, 2.0}};
    const auto r = interpolate_control(mixed, 0.5, -1, 1);
    CHECK(r.control[0] == doctest::Approx(0.4));
    CHECK(r.weights[0] == 0.0);
    const WeightedFront none[] = {{&empty, 1.0}};
    CHECK_THROWS_AS(interpolate_control(none, 0.5, -1, 1), LookupError);
    CHECK_THROWS_AS(interpolate_control(std::span<const WeightedFront>{}, 0.5, -1, 1), LookupError);
}

TEST_CASE("interpolate_control: blend stays within the convex hull of the selected controls") {
    const auto a = front_of({-0.3}), b = front_of({0.1}), c = front_of({0.45});
    for (double da : {0.1, 0.5, 2.0}) {
        for (double db : {0.2, 1.0}) {
            const WeightedFront nb[] = {{&a, da}, {&b, db}, {&c, 0.7}};
            const double u = interpolate_control(nb, 0.3, -0.5, 0.5).control[0];
            CHECK(u >= -0.3);
            CHECK(u <= 0.45);
        }
    }
}

TEST_CASE("heuristic_rho: stated examples") {
    CHECK(heuristic_rho(0.5, 0.0) == doctest::Approx(0.45));
    CHECK(heuristic_rho(0.26, 0.005) == doctest::Approx(0.25));
    CHECK(heuristic_rho(0.88, 0.02) == doctest::Approx(0.90));
    CHECK(heuristic_rho(0.5, -0.02) == doctest::Approx(0.55));
    CHECK(heuristic_rho(0.25, 0.0) == 0.25);
    CHECK(heuristic_rho(0.9, 0.5) == 0.9);
}

TEST_CASE("schedule_value: piecewise constant") {
    const std::vector<ScheduleEntry> s{{0.0, 0.25}, {2.0, 0.5}, {4.0, 1.0}};
    CHECK(schedule_value(s, 0.0) == 0.25);
    CHECK(schedule_value(s, 1.99) == 0.25);
    CHECK(schedule_value(s, 2.0) == 0.5);
    CHECK(schedule_value(s, 10.0) == 1.0);
    CHECK_THROWS_AS(schedule_value(std::span<const ScheduleEntry>{}, 0.0), ParameterError);
}

TEST_CASE("lap_metrics: synthetic traces") {
    const auto one = lap_metrics(synthetic_trace(1.0, 5.0, 0.05));
    CHECK(one.integrated_distance == doctest::Approx(5.0));
    CHECK(one.constraint_max == 1.0);
    CHECK(one.lap_time == doctest::Approx(5.0));
    const auto zero = lap_metrics(synthetic_trace(0.0, 3.0, 0.05));
    CHECK(zero.integrated_distance == 0.0);
    CHECK(lap_metrics(MpcTrace{}).lap_time == 0.0);
}

TEST_CASE("lap_metrics: samples past the completion time are cut off") {
    auto t = synthetic_trace(1.0, 5.0, 0.05);
    StepRecord past;
    past.time = 5.05;
    past.d = 100.0;
    t.records.push_back(past);
    t.lap_time = 5.0;
    const auto m = lap_metrics(t);
    CHECK(m.integrated_distance == doctest::Approx(5.0));
    CHECK(m.constraint_max == 1.0);

    t.lap_time = 5.025;
    CHECK(lap_metrics(t).constraint_max == doctest::Approx(50.5));
}

TEST_CASE("mpc_step: state on a grid node uses that node's control") {
    const auto& lib = small_library();
    const Track arc = ArcTrack{0.02, {}};
    const ReducedParameter node{0.0, 0.0, 0.0, 1.0, 0.02};
    const VehicleState x = lift(node, false, Se2Action{});
    for (double rho : {0.0, 0.5, 1.0}) {
        const auto out = mpc_step(lib, arc, x, rho);
        const auto& front = lib.at(MultiIndex{0, 0, 0, 1, 2});
        CHECK(out.record.u == select_by_weight(front, rho).control[0]);
        CHECK_FALSE(out.record.mirrored);
    }
}

TEST_CASE("mpc_step: mirrored state applies the negated control") {
    const auto& lib = small_library();
    const Track left = ArcTrack{0.015, {}};
    const Track right = ArcTrack{-0.015, {}};
    const VehicleState x{0.0, 0.6, 0.0, 0.0, 0.0};
    for (double rho : {0.0, 0.5, 1.0}) {
        const auto a = mpc_step(lib, left, x, rho);
        const auto b = mpc_step(lib, right, mirror_state(x), rho);
        CHECK(b.record.mirrored);
        CHECK(b.record.u == doctest::Approx(-a.record.u));
        CHECK(b.next.p2 == doctest::Approx(-a.next.p2));
    }
}

TEST_CASE("mpc_step: centred on a straight, any preference") {
    const auto& lib = small_library();
    const Track line = straight(50.0);
    for (double rho : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        const auto out = mpc_step(lib, line, VehicleState{}, rho);
        CHECK(std::abs(out.record.u) <= 10 * lib.config.solver.g_tol);
    }
}

TEST_CASE("closed loop: 150 m straight takes five seconds") {
    const auto& lib = small_library();
    const Track line = straight(150.0);
    const auto trace = run_closed_loop(lib, line, start_state(line), RhoPolicy::fixed(0.5));
    REQUIRE(trace.status == RunStatus::LapComplete);
    const auto m = lap_metrics(trace);
    CHECK(std::abs(m.lap_time - 5.0) <= lib.config.problem.horizon.h());
    CHECK(m.integrated_distance <= 1e-6);
}

TEST_CASE("closed loop: time limit and abort") {
    const auto& lib = small_library();
    const Track line = straight(150.0);
    const auto limited = run_closed_loop(lib, line, start_state(line), RhoPolicy::fixed(0.5), {true, 1.0});
    CHECK(limited.status == RunStatus::TimeLimit);
    CHECK(limited.records.back().time == doctest::Approx(1.0));

    ClosedLoopOptions opts;
    opts.d_max = 0.1;
    const VehicleState off{0.0, 0.5, 0.3, 0.0, 0.0};
    const auto aborted = run_closed_loop(lib, line, off, RhoPolicy::fixed(1.0), {}, opts);
    CHECK(aborted.status == RunStatus::Aborted);
    CHECK_FALSE(aborted.feasible());
    CHECK_FALSE(aborted.abort_reason.empty());
}

TEST_CASE("closed loop: mirrored track and start give the mirrored trajectory") {
    const auto& lib = small_library();
    std::vector<Vec2> pts;
    for (int i = 0; i <= 20; ++i) pts.push_back({double(i), 0.0});
    for (int i = 1; i <= 60; ++i) {
        const double a = i / 50.0;
        pts.push_back({20.0 + 50.0 * std::sin(a), 50.0 - 50.0 * std::cos(a)});
    }
    const Track track = PolylineTrack("bend", pts, false);
    const VehicleState x0{0.0, 0.3, 0.0, 0.0, 0.0};
    const auto a = run_closed_loop(lib, track, x0, RhoPolicy::fixed(0.5));
    const auto b = run_closed_loop(lib, mirror_track(track), mirror_state(x0), RhoPolicy::fixed(0.5));
    CHECK(a.records.size() > 20);
    CHECK(b.status == a.status);
    REQUIRE(b.records.size() == a.records.size());
    for (std::size_t k = 0; k < a.records.size(); ++k) {
        const auto xa = mirror_state(a.records[k].state).to_array();
        const auto xb = b.records[k].state.to_array();
        for (std::size_t i = 0; i < xa.size(); ++i) CHECK(xb[i] == doctest::Approx(xa[i]).epsilon(1e-9).scale(1.0));
        CHECK(b.records[k].u == doctest::Approx(-a.records[k].u).epsilon(1e-9).scale(1.0));
    }
}

TEST_CASE("closed loop: mailbox updates apply at the next step") {
    const auto& lib = small_library();
    const Track line = straight(150.0);
    ClosedLoop loop(lib, line, start_state(line), RhoPolicy::fixed(0.5));
    CHECK(loop.step().rho == 0.5);
    loop.mailbox().post_rho(0.9);
    loop.mailbox().post_rho(0.7);
    CHECK(loop.step().rho == 0.7);
    CHECK(loop.step().rho == 0.7);
    loop.mailbox().post_rho(2.0);
    CHECK(loop.step().rho == 1.0);
    loop.mailbox().post_mode(PreferenceMailbox::Mode::Heuristic);
    CHECK(loop.step().rho == doctest::Approx(0.85));
    CHECK(loop.policy().kind == PolicyKind::Heuristic);
}

TEST_CASE("closed loop: mailbox is safe to post from another thread") {
    const auto& lib = small_library();
    const Track line = straight(150.0);
    ClosedLoop loop(lib, line, start_state(line), RhoPolicy::fixed(0.5));
    std::jthread writer([&] {
        for (int i = 0; i <= 100; ++i) loop.mailbox().post_rho(i / 100.0);
    });
    for (int i = 0; i < 20; ++i) {
        const double r = loop.step().rho;
        CHECK(r >= 0.0);
        CHECK(r <= 1.0);
    }
}

TEST_CASE("closed loop: schedule, heuristic and reset") {
    const auto& lib = small_library();
    const Track line = straight(150.0);
    const std::vector<ScheduleEntry> sched{{0.0, 0.25}, {1.0, 0.75}};
    const auto t = run_closed_loop(lib, line, start_state(line), RhoPolicy::scheduled(sched), {true, 2.0});
    for (const auto& r : t.records) {
        if (r.time < 1.0 - 1e-9) CHECK(r.rho == 0.25);
        else if (r.time < 2.0 - 1e-9) CHECK(r.rho == 0.75);
    }

    const auto h = run_closed_loop(lib, line, start_state(line), RhoPolicy::heuristic(0.5), {true, 2.0});
    CHECK(h.records[0].rho == doctest::Approx(0.45));
    CHECK(h.records[5].rho == doctest::Approx(0.25));

    ClosedLoop loop(lib, line, start_state(line), RhoPolicy::fixed(0.3));
    for (int i = 0; i < 5; ++i) loop.step();
    loop.reset();
    CHECK(loop.time() == 0.0);
    CHECK(loop.trace().records.empty());
    CHECK(loop.step().rho == 0.3);
}

TEST_CASE("trace export: CSV header, rows and footer") {
    const auto& lib = small_library();
    const Track line = straight(150.0);
    const auto t = run_closed_loop(lib, line, start_state(line), RhoPolicy::fixed(0.5), {true, 0.5});
    std::ostringstream out;
    write_trace_csv(out, t);
    const std::string csv = out.str();
    CHECK(csv.rfind("time,p1,p2,theta,v_y,r,xi,d,kappa,rho,u\n", 0) == 0);
    CHECK(csv.find("# lap_time=") != std::string::npos);
    CHECK(csv.find("status=time_limit") != std::string::npos);
    const auto rows = std::count(csv.begin(), csv.end(), '\n');
    CHECK(rows == static_cast<long>(t.records.size()) + 2);
    const auto json = trace_to_json(t);
    CHECK(json.find("\"records\"") != std::string::npos);
}
