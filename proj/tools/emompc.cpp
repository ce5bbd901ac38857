#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "emompc/errors.hpp"
#include "emompc/library.hpp"
#include "emompc/online.hpp"
#include "emompc/service.hpp"

namespace {

using namespace emompc;

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kUsage = 2;

int cmd_build(const std::string& config_path, const std::string& out, std::size_t jobs, bool full) {
    const LibraryConfig cfg = load_library_config(config_path);
    const std::uint64_t total = grid_count(cfg.grid);
    if (total >= kLargeBuildNodes && !full) {
        std::cerr << "error: grid has " << total << " nodes; pass --full to build a grid of this size\n";
        return kUsage;
    }
    if (jobs < 1) {
        std::cerr << "error: --jobs must be at least 1\n";
        return kUsage;
    }
    std::cerr << "building " << total << " nodes on " << jobs << " worker(s)\n";
    const std::size_t every = std::max<std::size_t>(1, static_cast<std::size_t>(total / 100));
    const Library lib = build_library(cfg, jobs, [every](std::size_t done, std::size_t n, std::size_t failed) {
        if (done % every == 0 || done == n) std::cerr << "  " << done << "/" << n << " nodes, " << failed << " failed\n";
    });
    save_library(lib, out);
    std::cout << "wrote " << out << " (" << lib.entries.size() << " nodes, " << lib.failures.size() << " failed, "
              << lib.build_seconds << " s)\n";
    for (const auto& f : lib.failures) {
        std::cout << "failed node";
        for (const auto i : f.index) std::cout << ' ' << i;
        std::cout << ": " << f.message << '\n';
    }
    return lib.complete ? kOk : kFailed;
}

std::vector<ScheduleEntry> load_schedule(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open schedule file " + path);
    std::vector<ScheduleEntry> s;
    try {
        nlohmann::json j = nlohmann::json::parse(in);
        if (j.is_object()) j = j.at("schedule");
        for (const auto& e : j) s.push_back({e.at(0).get<double>(), e.at(1).get<double>()});
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("schedule file: ") + e.what());
    }
    if (s.empty()) throw ConfigError("schedule file: no entries");
    return s;
}

struct SimulateArgs {
    std::string library;
    std::string track;
    std::optional<double> rho;
    std::string schedule;
    bool heuristic = false;
    std::string out;
    std::string json_out;
    double t_max = 120.0;
    bool no_lap = false;
    bool normalize = false;
};

int cmd_simulate(const SimulateArgs& a) {
    const int policies = (a.rho ? 1 : 0) + (a.schedule.empty() ? 0 : 1) + (a.heuristic ? 1 : 0);
    if (policies != 1) {
        std::cerr << "error: choose exactly one of --rho, --schedule, --heuristic\n";
        return kUsage;
    }
    Library lib;
    Track track = ArcTrack{};
    RhoPolicy policy;
    try {
        lib = load_library(a.library);
        track = load_track(a.track);
        if (a.rho) policy = RhoPolicy::fixed(*a.rho);
        else if (a.heuristic) policy = RhoPolicy::heuristic();
        else policy = RhoPolicy::scheduled(load_schedule(a.schedule));
    } catch (const LoadError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    }

    ClosedLoopOptions opts;
    opts.mpc.normalize = a.normalize;
    const MpcTrace trace = run_closed_loop(lib, track, start_state(track), policy, {!a.no_lap, a.t_max}, opts);
    if (!a.out.empty()) {
        std::ofstream f(a.out);
        write_trace_csv(f, trace);
    }
    if (!a.json_out.empty()) {
        std::ofstream f(a.json_out);
        f << trace_to_json(trace) << '\n';
    }
    const LapMetrics m = lap_metrics(trace);
    std::printf("lap_time=%.6f integrated_distance=%.6f constraint_max=%.6f status=%s\n", m.lap_time,
                m.integrated_distance, m.constraint_max, to_string(trace.status));
    if (!trace.feasible()) {
        std::cerr << "run aborted: " << trace.abort_reason << '\n';
        return kFailed;
    }
    return kOk;
}

int cmd_verify(const std::string& path) {
    Library lib;
    bool integrity_ok = true;
    try {
        lib = load_library(path);
    } catch (const ChecksumError& e) {
        std::cout << "FAIL integrity: " << e.what() << '\n';
        integrity_ok = false;
        try {
            lib = load_library(path, false);
        } catch (const LoadError&) {
            return kFailed;
        }
    } catch (const LoadError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    }
    const VerifyReport report = verify_library(lib);
    for (const auto& issue : report.issues) {
        std::cout << "FAIL " << issue.check << " [";
        for (std::size_t i = 0; i < issue.index.size(); ++i) std::cout << (i ? "," : "") << issue.index[i];
        std::cout << "]: " << issue.message << '\n';
    }
    if (!lib.complete) std::cout << "FAIL build incomplete: " << lib.failures.size() << " failed node(s)\n";
    std::cout << report.entries_checked << " entries, " << report.spot_checks << " invariance spot checks, "
              << report.issues.size() << " issue(s)\n";
    return integrity_ok && report.ok() && lib.complete ? kOk : kFailed;
}

std::vector<std::vector<double>> parse_values(const std::string& text) {
    std::vector<std::vector<double>> values;
    std::stringstream items(text);
    std::string item;
    while (std::getline(items, item, ',')) {
        std::vector<double> v;
        std::stringstream parts(item);
        std::string part;
        while (std::getline(parts, part, ':')) {
            try {
                std::size_t used = 0;
                v.push_back(std::stod(part, &used));
                if (used != part.size()) throw std::invalid_argument(part);
            } catch (const std::exception&) {
                throw ConfigError("cannot parse value '" + part + "'");
            }
        }
        values.push_back(std::move(v));
    }
    return values;
}

int cmd_scan(const std::string& problem, const std::string& values_text, double eps) {
    const ReducedParameter base{0.0, 1.0, std::numbers::pi / 6.0, 2.5, 0.05};
    ProblemFamily family;
    if (problem == "witting") {
        family = [](std::span<const double> v) {
            if (v.size() != 1) throw DimensionError("witting: value must be (gamma)");
            return witting_problem(v[0]);
        };
    } else if (problem == "bicycle-pose") {
        family = bicycle_pose_family(base, VehicleProblemConfig{});
    } else if (problem == "bicycle-kappa") {
        family = bicycle_curvature_family(base, VehicleProblemConfig{});
    } else {
        std::cerr << "error: unknown problem '" << problem << "' (witting, bicycle-pose, bicycle-kappa)\n";
        return kUsage;
    }
    std::vector<std::vector<double>> values;
    try {
        values = parse_values(values_text);
        if (values.size() < 2) throw ConfigError("at least two values required");
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    }
    ScanResult r;
    try {
        r = symmetry_scan(family, values, eps);
    } catch (const DimensionError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    }
    for (std::size_t a = 0; a < values.size(); ++a) {
        for (std::size_t b = a + 1; b < values.size(); ++b) {
            std::printf("pair %zu-%zu hausdorff=%.6e\n", a, b, r.distances[a][b]);
        }
    }
    std::printf("max_hausdorff=%.6e eps=%.3e verdict=%s\n", r.max_distance, eps, to_string(r.verdict));
    return r.verdict == ScanVerdict::Invariant ? kOk : kFailed;
}

Service* g_service = nullptr;

void on_signal(int) {
    if (g_service) g_service->stop();
}

int cmd_serve(const std::string& library, const std::string& tracks, const std::string& address, unsigned short port) {
    ServiceConfig cfg;
    try {
        cfg.library = std::make_shared<const Library>(load_library(library));
        cfg.tracks = load_track_directory(tracks);
    } catch (const LoadError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    }
    cfg.address = address;
    cfg.port = port;
    Service service(cfg);
    g_service = &service;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    const unsigned short bound = service.start();
    std::cout << "listening on " << address << ':' << bound << std::endl;
    service.run();
    g_service = nullptr;
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Explicit multiobjective MPC: offline library builder, closed-loop simulator and session service"};
    app.require_subcommand(1);
    std::string log_level = "warn";
    app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")->capture_default_str();

    std::string config, out = "lib.emompc.json";
    std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
    bool full = false;
    auto* build = app.add_subcommand("build", "Trace the Pareto front of every grid node and write the library");
    build->add_option("--config", config, "Build configuration (JSON)")->required()->check(CLI::ExistingFile);
    build->add_option("--out", out, "Library file to write")->capture_default_str();
    build->add_option("--jobs,-j", jobs, "Worker threads")->capture_default_str();
    build->add_flag("--full", full, "Allow grids of 20000 nodes or more");

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Run the closed loop on a track");
    simulate->add_option("--library", sim.library, "Library file")->required();
    simulate->add_option("--track", sim.track, "Track file (JSON)")->required();
    simulate->add_option("--rho", sim.rho, "Constant preference in [0, 1]");
    simulate->add_option("--schedule", sim.schedule, "Preference schedule file: [[time, rho], ...]");
    simulate->add_flag("--heuristic", sim.heuristic, "Curvature-driven preference heuristic");
    simulate->add_option("--out", sim.out, "Trace CSV output");
    simulate->add_option("--json", sim.json_out, "Trace JSON output");
    simulate->add_option("--t-max", sim.t_max, "Simulated time limit [s]")->capture_default_str();
    simulate->add_flag("--no-lap", sim.no_lap, "Ignore lap completion and run until --t-max");
    simulate->add_flag("--normalize", sim.normalize, "Scale lookup distances by the grid step of each dimension");

    std::string verify_path;
    auto* verify = app.add_subcommand("verify", "Audit a library file");
    verify->add_option("library", verify_path, "Library file")->required();

    std::string problem, values;
    double eps = 1e-3;
    auto* scan = app.add_subcommand("scan", "Compare Pareto sets across parameter values");
    scan->add_option("--problem", problem, "witting, bicycle-pose or bicycle-kappa")->required();
    scan->add_option("--values", values, "Comma-separated values; components separated by ':'")->required();
    scan->add_option("--eps", eps, "Invariance threshold")->capture_default_str();

    std::string serve_lib, track_dir = "data/tracks", address = "127.0.0.1";
    unsigned short port = 8080;
    auto* serve = app.add_subcommand("serve", "Serve simulation sessions over HTTP and WebSocket");
    serve->add_option("--library", serve_lib, "Library file")->required();
    serve->add_option("--tracks", track_dir, "Directory of track files")->capture_default_str();
    serve->add_option("--address", address, "Bind address")->capture_default_str();
    serve->add_option("--port", port, "Port (0 picks a free one)")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    spdlog::set_level(spdlog::level::from_str(log_level));
    try {
        if (*build) return cmd_build(config, out, jobs, full);
        if (*simulate) return cmd_simulate(sim);
        if (*verify) return cmd_verify(verify_path);
        if (*scan) return cmd_scan(problem, values, eps);
        if (*serve) return cmd_serve(serve_lib, track_dir, address, port);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailed;
    }
    return kUsage;
}
