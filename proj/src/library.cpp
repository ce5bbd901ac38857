#include "emompc/library.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "emompc/errors.hpp"

namespace emompc {

using nlohmann::json;

GridDim make_dim(std::string name, double min, double max, double step) {
    if (!std::isfinite(min) || !std::isfinite(max) || !std::isfinite(step)) {
        throw ConfigError("grid dimension '" + name + "': non-finite bound or step");
    }
    if (min > max) throw ConfigError("grid dimension '" + name + "': min > max");
    if (!(step > 0.0)) throw ConfigError("grid dimension '" + name + "': step must be positive");
    const double n = std::round((max - min) / step);
    if (n > 1e9) throw ConfigError("grid dimension '" + name + "': too many points");
    return {std::move(name), min, max, step, static_cast<std::size_t>(n) + 1};
}

std::vector<std::size_t> GridSpec::counts() const {
    std::vector<std::size_t> c;
    c.reserve(dims.size());
    for (const auto& d : dims) c.push_back(d.count);
    return c;
}

std::uint64_t grid_count(std::span<const std::size_t> counts) {
    if (counts.empty()) throw ConfigError("grid_count: no dimensions");
    std::uint64_t total = 1;
    for (const std::size_t c : counts) {
        if (c == 0) throw ConfigError("grid_count: zero count");
        if (total > std::numeric_limits<std::uint64_t>::max() / c) throw ConfigError("grid_count: overflow");
        total *= c;
    }
    return total;
}

std::uint64_t grid_count(const GridSpec& spec) {
    const auto c = spec.counts();
    return grid_count(c);
}

MultiIndex unflatten(const GridSpec& spec, std::size_t flat) {
    MultiIndex idx(spec.dims.size());
    for (std::size_t i = spec.dims.size(); i-- > 0;) {
        idx[i] = flat % spec.dims[i].count;
        flat /= spec.dims[i].count;
    }
    if (flat != 0) throw DimensionError("unflatten: index out of range");
    return idx;
}

std::size_t flatten(const GridSpec& spec, std::span<const std::size_t> index) {
    if (index.size() != spec.dims.size()) throw DimensionError("flatten: wrong number of indices");
    std::size_t flat = 0;
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (index[i] >= spec.dims[i].count) throw DimensionError("flatten: index out of range");
        flat = flat * spec.dims[i].count + index[i];
    }
    return flat;
}

std::vector<double> node_value(const GridSpec& spec, std::span<const std::size_t> index) {
    if (index.size() != spec.dims.size()) throw DimensionError("node_value: wrong number of indices");
    std::vector<double> v(index.size());
    for (std::size_t i = 0; i < index.size(); ++i) v[i] = spec.dims[i].value(index[i]);
    return v;
}

namespace {

constexpr double kPi = std::numbers::pi;

GridSpec literal_full_grid() {
    // rows as printed: the angle-sized range on d and the distance-sized range on xi
    return {{make_dim("v_y", -3.0, 3.0, 0.5), make_dim("r", -6.0, 6.0, 1.0), make_dim("xi", 0.0, 10.0, 0.5),
             make_dim("d", -kPi / 4.0, kPi / 4.0, kPi / 12.0), make_dim("kappa", -0.1, 0.1, 0.025)}};
}

}  // namespace

GridSpec full_grid() {
    return {{make_dim("v_y", -3.0, 3.0, 0.5), make_dim("r", -6.0, 6.0, 1.0),
             make_dim("xi", -kPi / 4.0, kPi / 4.0, kPi / 12.0), make_dim("d", 0.0, 10.0, 0.5),
             make_dim("kappa", -0.1, 0.1, 0.025)}};
}

GridSpec desk_grid() {
    return {{make_dim("v_y", -3.0, 3.0, 1.5), make_dim("r", -6.0, 6.0, 3.0),
             make_dim("xi", -kPi / 4.0, kPi / 4.0, kPi / 8.0), make_dim("d", 0.0, 10.0, 2.5),
             make_dim("kappa", -0.1, 0.1, 0.05)}};
}

TraceOptions LibraryConfig::trace_options() const {
    TraceOptions t;
    t.n_targets = n_targets;
    t.d_e_fraction = d_e_fraction;
    t.proper_eps = proper_eps;
    t.solver = solver;
    return t;
}

namespace {

json grid_to_json(const GridSpec& g) {
    json dims = json::array();
    for (const auto& d : g.dims) {
        dims.push_back({{"name", d.name}, {"min", d.min}, {"max", d.max}, {"step", d.step}, {"count", d.count}});
    }
    return {{"dims", dims}};
}

GridSpec grid_from_json(const json& j) {
    if (j.contains("preset")) {
        const auto preset = j.at("preset").get<std::string>();
        if (preset == "desk") return desk_grid();
        if (preset == "full") return full_grid();
        if (preset == "full_literal") return literal_full_grid();
        throw ConfigError("unknown grid preset '" + preset + "'");
    }
    GridSpec g;
    for (const auto& d : j.at("dims")) {
        GridDim dim = make_dim(d.at("name").get<std::string>(), d.at("min").get<double>(), d.at("max").get<double>(),
                               d.at("step").get<double>());
        if (d.contains("count") && d.at("count").get<std::size_t>() != dim.count) {
            throw ConfigError("grid dimension '" + dim.name + "': count does not match range and step");
        }
        g.dims.push_back(std::move(dim));
    }
    if (g.dims.empty()) throw ConfigError("grid has no dimensions");
    return g;
}

json horizon_to_json(const Horizon& h) { return {{"t0", h.t0}, {"te", h.te}, {"steps", h.steps}}; }

json vehicle_to_json(const VehicleProblemConfig& p) {
    const auto& v = p.vehicle;
    return {{"c_alpha_f", v.c_alpha_f}, {"c_alpha_r", v.c_alpha_r}, {"l_f", v.l_f}, {"l_r", v.l_r},
            {"m", v.m},                 {"i_z", v.i_z},             {"v_x", v.v_x}, {"d_max", p.d_max},
            {"u_min", p.u_min},         {"u_max", p.u_max}};
}

json solver_to_json(const LibraryConfig& c) {
    const auto& s = c.solver;
    return {{"g_tol", s.g_tol},
            {"c_tol", s.c_tol},
            {"max_outer", s.max_outer},
            {"max_inner", s.max_inner},
            {"penalty_growth", s.penalty_growth},
            {"initial_penalty", s.initial_penalty},
            {"fd_rel", s.fd_rel},
            {"fd_abs", s.fd_abs},
            {"n_targets", c.n_targets},
            {"d_e_fraction", c.d_e_fraction},
            {"proper_eps", c.proper_eps}};
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

LibraryConfig config_from_json(const json& j) {
    LibraryConfig c;
    if (j.contains("grid")) c.grid = grid_from_json(j.at("grid"));
    if (j.contains("horizon")) {
        const auto& h = j.at("horizon");
        read_opt(h, "t0", c.problem.horizon.t0);
        read_opt(h, "te", c.problem.horizon.te);
        read_opt(h, "steps", c.problem.horizon.steps);
    }
    if (j.contains("vehicle")) {
        const auto& v = j.at("vehicle");
        auto& p = c.problem.vehicle;
        read_opt(v, "c_alpha_f", p.c_alpha_f);
        read_opt(v, "c_alpha_r", p.c_alpha_r);
        read_opt(v, "l_f", p.l_f);
        read_opt(v, "l_r", p.l_r);
        read_opt(v, "m", p.m);
        read_opt(v, "i_z", p.i_z);
        read_opt(v, "v_x", p.v_x);
        read_opt(v, "d_max", c.problem.d_max);
        read_opt(v, "u_min", c.problem.u_min);
        read_opt(v, "u_max", c.problem.u_max);
    }
    if (j.contains("solver")) {
        const auto& s = j.at("solver");
        read_opt(s, "g_tol", c.solver.g_tol);
        read_opt(s, "c_tol", c.solver.c_tol);
        read_opt(s, "max_outer", c.solver.max_outer);
        read_opt(s, "max_inner", c.solver.max_inner);
        read_opt(s, "penalty_growth", c.solver.penalty_growth);
        read_opt(s, "initial_penalty", c.solver.initial_penalty);
        read_opt(s, "fd_rel", c.solver.fd_rel);
        read_opt(s, "fd_abs", c.solver.fd_abs);
        read_opt(s, "n_targets", c.n_targets);
        read_opt(s, "d_e_fraction", c.d_e_fraction);
        read_opt(s, "proper_eps", c.proper_eps);
    }

    const Horizon& h = c.problem.horizon;
    if (!(h.te > h.t0) || h.steps == 0) throw ConfigError("horizon: need te > t0 and steps >= 1");
    if (!(c.problem.vehicle.v_x > 0.0)) throw ConfigError("vehicle: v_x must be positive");
    if (!(c.problem.d_max > 0.0)) throw ConfigError("vehicle: d_max must be positive");
    if (!(c.problem.u_min < c.problem.u_max)) throw ConfigError("vehicle: need u_min < u_max");
    if (!(c.solver.g_tol > 0.0) || !(c.solver.c_tol > 0.0)) throw ConfigError("solver: tolerances must be positive");
    if (!(c.proper_eps > 0.0 && c.proper_eps < 0.5)) throw ConfigError("solver: proper_eps must lie in (0, 0.5)");
    if (c.grid.dims.size() != 5) throw ConfigError("grid: five dimensions (v_y, r, xi, d, kappa) required");
    for (std::size_t i = 0; i < 5; ++i) {
        if (c.grid.dims[i].name != kReducedNames[i]) {
            throw ConfigError("grid: dimension " + std::to_string(i) + " must be named '" + kReducedNames[i] + "'");
        }
    }
    return c;
}

}  // namespace

LibraryConfig parse_library_config(const std::string& json_text) {
    try {
        return config_from_json(json::parse(json_text));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("library config: ") + e.what());
    }
}

LibraryConfig load_library_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_library_config(ss.str());
}

ReducedParameter Library::parameter(std::span<const std::size_t> index) const {
    const auto v = node_value(config.grid, index);
    return {v[0], v[1], v[2], v[3], v[4]};
}

ParetoSet trace_node(const LibraryConfig& config, const ReducedParameter& param) {
    const MocpDefinition def = build_reduced_mocp(param, config.problem);
    TraceOptions opts = config.trace_options();
    std::string error;
    for (int attempt = 0; attempt < 2; ++attempt) {
        if (attempt == 1) opts.initial_control.assign(def.decision_dim(), kRetryStart);
        try {
            TraceResult r = trace_front(def, opts);
            if (!r.front.empty()) return std::move(r.front);
            error = "empty front";
        } catch (const Error& e) {
            error = e.what();
        }
    }
    throw FrontTraceError(error);
}

Library build_library(const LibraryConfig& config, std::size_t workers, const BuildProgress& progress) {
    if (workers < 1) throw ParameterError("build_library: workers must be >= 1");
    const auto start = std::chrono::steady_clock::now();
    const std::size_t total = static_cast<std::size_t>(grid_count(config.grid));

    Library lib;
    lib.config = config;
    lib.entries.resize(total);
    std::vector<std::optional<std::string>> errors(total);

    std::atomic<std::size_t> next{0};
    std::atomic<bool> abort{false};
    std::mutex report_mutex;
    std::size_t done = 0;
    std::size_t failed = 0;
    std::exception_ptr fatal;

    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= total || abort.load()) return;
            bool ok = true;
            try {
                const MultiIndex idx = unflatten(config.grid, i);
                lib.entries[i] = trace_node(config, lib.parameter(idx));
            } catch (const Error& e) {
                errors[i] = e.what();
                ok = false;
            } catch (...) {
                std::lock_guard lock(report_mutex);
                if (!fatal) fatal = std::current_exception();
                abort = true;
                return;
            }
            if (progress) {
                std::lock_guard lock(report_mutex);
                ++done;
                if (!ok) ++failed;
                progress(done, total, failed);
            }
        }
    };

    const std::size_t n_threads = std::min(workers, total);
    if (n_threads == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(n_threads);
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(work);
    }
    if (fatal) std::rethrow_exception(fatal);

    for (std::size_t i = 0; i < total; ++i) {
        if (errors[i]) lib.failures.push_back({unflatten(config.grid, i), *errors[i]});
    }
    lib.complete = lib.failures.empty();
    lib.build_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return lib;
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {

json entry_to_json(const MultiIndex& idx, const ParetoSet& set) {
    json front = json::array();
    for (const auto& e : set.entries) front.push_back({{"u", e.control}, {"J", e.objectives}});
    return {{"index", idx}, {"front", front}};
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace

std::string serialize_library(const Library& lib) {
    const std::size_t total = lib.entries.size();
    std::vector<std::string> lines(total);
    std::string canonical = "[";
    for (std::size_t i = 0; i < total; ++i) {
        lines[i] = entry_to_json(unflatten(lib.config.grid, i), lib.entries[i]).dump();
        if (i) canonical += ',';
        canonical += lines[i];
    }
    canonical += ']';

    json failures = json::array();
    for (const auto& f : lib.failures) failures.push_back({{"index", f.index}, {"message", f.message}});

    std::ostringstream out;
    out << "{\n";
    out << "\"format_version\": " << kLibraryFormatVersion << ",\n";
    out << "\"checksum\": \"" << hex64(fnv1a64(canonical)) << "\",\n";
    out << "\"complete\": " << (lib.complete ? "true" : "false") << ",\n";
    out << "\"failures\": " << failures.dump() << ",\n";
    out << "\"grid\": " << grid_to_json(lib.config.grid).dump() << ",\n";
    out << "\"horizon\": " << horizon_to_json(lib.config.problem.horizon).dump() << ",\n";
    out << "\"vehicle\": " << vehicle_to_json(lib.config.problem).dump() << ",\n";
    out << "\"solver\": " << solver_to_json(lib.config).dump() << ",\n";
    out << "\"entries\": [\n";
    for (std::size_t i = 0; i < total; ++i) out << lines[i] << (i + 1 < total ? ",\n" : "\n");
    out << "]\n}\n";
    return out.str();
}

Library deserialize_library(const std::string& text, bool check_integrity) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ChecksumError(std::string("library file is truncated or corrupted: ") + e.what());
    }
    try {
        if (!j.is_object() || !j.contains("format_version")) throw LoadError("library file: missing format_version");
        const int version = j.at("format_version").get<int>();
        if (version != kLibraryFormatVersion) {
            throw VersionError("library file has format version " + std::to_string(version) + ", expected " +
                               std::to_string(kLibraryFormatVersion));
        }
        const auto& entries = j.at("entries");
        const std::string expected = j.at("checksum").get<std::string>();
        if (check_integrity && hex64(fnv1a64(entries.dump())) != expected) throw ChecksumError("library file: checksum mismatch");

        Library lib;
        try {
            lib.config = config_from_json(j);
        } catch (const ConfigError& e) {
            throw LoadError(std::string("library file: ") + e.what());
        }
        const std::size_t total = static_cast<std::size_t>(grid_count(lib.config.grid));
        if (entries.size() != total) throw LoadError("library file: entry count does not match the grid");
        lib.entries.resize(total);
        for (std::size_t i = 0; i < total; ++i) {
            const auto& e = entries[i];
            const auto idx = e.at("index").get<MultiIndex>();
            if (flatten(lib.config.grid, idx) != i) throw LoadError("library file: entries out of order");
            for (const auto& p : e.at("front")) {
                lib.entries[i].entries.push_back(
                    {p.at("u").get<std::vector<double>>(), p.at("J").get<std::vector<double>>()});
            }
        }
        for (const auto& f : j.at("failures")) {
            lib.failures.push_back({f.at("index").get<MultiIndex>(), f.at("message").get<std::string>()});
        }
        lib.complete = j.at("complete").get<bool>();
        return lib;
    } catch (const json::exception& e) {
        throw LoadError(std::string("library file: ") + e.what());
    } catch (const DimensionError& e) {
        throw LoadError(std::string("library file: ") + e.what());
    }
}

void save_library(const Library& lib, const std::filesystem::path& path) {
    const std::string text = serialize_library(lib);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write library file " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error("failed writing library file " + path.string());
}

Library load_library(const std::filesystem::path& path, bool check_integrity) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open library file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return deserialize_library(ss.str(), check_integrity);
}

namespace {

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }

}  // namespace

VerifyReport verify_library(const Library& lib, const VerifyOptions& opts) {
    VerifyReport report;
    const auto& cfg = lib.config;
    const std::size_t n = cfg.problem.horizon.steps;
    auto issue = [&](const MultiIndex& idx, std::string check, std::string msg) {
        report.issues.push_back({idx, std::move(check), std::move(msg)});
    };

    const std::size_t total = static_cast<std::size_t>(grid_count(cfg.grid));
    if (lib.entries.size() != total) {
        issue({}, "count", "library holds " + std::to_string(lib.entries.size()) + " entries, grid has " +
                               std::to_string(total));
        return report;
    }

    for (std::size_t i = 0; i < total; ++i) {
        const MultiIndex idx = unflatten(cfg.grid, i);
        const ParetoSet& set = lib.entries[i];
        ++report.entries_checked;
        if (set.empty()) {
            issue(idx, "empty", "no Pareto points");
            continue;
        }
        bool shape_ok = true;
        for (const auto& e : set.entries) {
            if (e.control.size() != n || e.objectives.size() != 2) shape_ok = false;
        }
        if (!shape_ok) {
            issue(idx, "dimension", "control or objective vector of wrong length");
            continue;
        }
        for (std::size_t a = 0; a < set.size(); ++a) {
            for (const double u : set[a].control) {
                if (!(u >= cfg.problem.u_min && u <= cfg.problem.u_max)) {
                    issue(idx, "bounds", "control outside [u_min, u_max] at point " + std::to_string(a));
                    break;
                }
            }
            if (a > 0 && !(set[a - 1].objectives[0] < set[a].objectives[0])) {
                issue(idx, "order", "points not strictly ascending in J1 at point " + std::to_string(a));
            }
            for (std::size_t b = 0; b < set.size(); ++b) {
                if (a != b && dominates(set[a].objectives, set[b].objectives)) {
                    issue(idx, "dominance", "point " + std::to_string(a) + " dominates point " + std::to_string(b));
                }
            }
        }

        try {
            const MocpDefinition def = build_reduced_mocp(lib.parameter(idx), cfg.problem);
            for (std::size_t a = 0; a < set.size(); ++a) {
                const auto& e = set[a];
                const Trajectory traj = integrate_rk4(def.dynamics, def.x0, e.control, def.horizon);
                const double viol = max_violation(knot_constraints(def, e.control, traj));
                if (viol > opts.feasibility_tol) {
                    issue(idx, "feasibility", "knot violation " + std::to_string(viol) + " at point " + std::to_string(a));
                }
                const auto J = evaluate_objectives(def, e.control, traj);
                if (!close(J[0], e.objectives[0], opts.objective_tol) ||
                    !close(J[1], e.objectives[1], opts.objective_tol)) {
                    issue(idx, "objectives", "stored objectives differ from re-evaluation at point " + std::to_string(a));
                }
            }
        } catch (const Error& ex) {
            issue(idx, "evaluation", ex.what());
        }
    }

    // invariance spot checks on nodes whose start is not an arc centre
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < total; ++i) {
        if (lib.entries[i].empty()) continue;
        const ReducedParameter p = lib.parameter(unflatten(cfg.grid, i));
        if (std::abs(p.kappa) >= kKappaTol && std::abs(p.d * p.kappa - 1.0) < 1e-6) continue;
        candidates.push_back(i);
    }
    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
    std::uniform_real_distribution<double> shift(-100.0, 100.0);
    const std::size_t samples = std::min(opts.spot_samples, candidates.size());
    for (std::size_t s = 0; s < samples; ++s) {
        const std::size_t i = candidates[std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng)];
        const MultiIndex idx = unflatten(cfg.grid, i);
        const ReducedParameter p = lib.parameter(idx);
        const Se2Action g{angle(rng), {shift(rng), shift(rng)}};
        try {
            auto moved_track = std::make_shared<const Track>(se2_apply_track(g, ArcTrack{p.kappa, {}}));
            const MocpDefinition moved =
                build_track_mocp(moved_track, g.apply(reduced_initial_state(p)), cfg.problem);
            const MocpDefinition mirrored = build_reduced_mocp(p.mirrored(), cfg.problem);
            for (const auto& e : lib.entries[i].entries) {
                const auto Jg = evaluate_objectives(moved, e.control);
                if (!close(Jg[0], e.objectives[0], opts.objective_tol) || !close(Jg[1], e.objectives[1], opts.objective_tol)) {
                    issue(idx, "se2", "objectives change under a rigid motion of start and track");
                    break;
                }
            }
            for (const auto& e : lib.entries[i].entries) {
                const auto Jm = evaluate_objectives(mirrored, mirror_control(e.control));
                if (!close(Jm[0], e.objectives[0], opts.objective_tol) || !close(Jm[1], e.objectives[1], opts.objective_tol)) {
                    issue(idx, "mirror", "objectives change under reflection");
                    break;
                }
            }
        } catch (const Error& ex) {
            issue(idx, "evaluation", ex.what());
        }
        ++report.spot_checks;
    }
    return report;
}

const char* to_string(ScanVerdict v) { return v == ScanVerdict::Invariant ? "invariant" : "not invariant"; }

TraceOptions scan_trace_options() {
    TraceOptions t;
    t.proper_eps.reset();
    return t;
}

ScanResult symmetry_scan(const ProblemFamily& family, const std::vector<std::vector<double>>& values, double eps,
                         const TraceOptions& opts) {
    if (values.size() < 2) throw ParameterError("symmetry_scan: at least two parameter values required");
    if (!(eps >= 0.0)) throw ParameterError("symmetry_scan: eps must be non-negative");
    ScanResult out;
    out.sets.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        try {
            out.sets.push_back(trace_front(family(values[i]), opts).front);
        } catch (const Error& e) {
            throw FrontTraceError("symmetry_scan: trace failed at value " + std::to_string(i) + ": " + e.what());
        }
        if (out.sets.back().empty()) throw FrontTraceError("symmetry_scan: empty Pareto set at value " + std::to_string(i));
    }
    const std::size_t m = values.size();
    out.distances.assign(m, std::vector<double>(m, 0.0));
    for (std::size_t a = 0; a < m; ++a) {
        const auto ca = out.sets[a].controls();
        for (std::size_t b = a + 1; b < m; ++b) {
            const auto cb = out.sets[b].controls();
            const double d = ca == cb ? 0.0 : hausdorff_polyline(ca, cb);
            out.distances[a][b] = out.distances[b][a] = d;
            out.max_distance = std::max(out.max_distance, d);
        }
    }
    out.verdict = out.max_distance <= eps ? ScanVerdict::Invariant : ScanVerdict::NotInvariant;
    return out;
}

MocpDefinition witting_problem(double gamma) {
    MocpDefinition def;
    def.state_dim = 1;
    def.control_dim = 2;
    def.dynamics = [](std::span<const double>, std::span<const double>, std::span<double> dx) { dx[0] = 0.0; };
    auto objective = [gamma](double sign) {
        return [gamma, sign](std::span<const double>, std::span<const double> u) {
            const double plus = u[0] + u[1];
            const double minus = u[0] - u[1];
            const double w = std::sqrt(1.0 + plus * plus) + std::sqrt(1.0 + minus * minus);
            return 0.5 * (w + sign * minus) + gamma * std::exp(-minus * minus);
        };
    };
    def.running_costs = {objective(1.0), objective(-1.0)};
    def.horizon = {0.0, 1.0, 1};
    def.x0 = {0.0};
    def.u_min = -1.0;
    def.u_max = 1.0;
    return def;
}

ProblemFamily bicycle_pose_family(const ReducedParameter& param, const VehicleProblemConfig& cfg) {
    return [param, cfg](std::span<const double> v) {
        if (v.size() != 3) throw DimensionError("pose family: value must be (theta, dx, dy)");
        const Se2Action g{v[0], {v[1], v[2]}};
        auto track = std::make_shared<const Track>(se2_apply_track(g, ArcTrack{param.kappa, {}}));
        return build_track_mocp(std::move(track), g.apply(reduced_initial_state(param)), cfg);
    };
}

ProblemFamily bicycle_curvature_family(const ReducedParameter& param, const VehicleProblemConfig& cfg) {
    return [param, cfg](std::span<const double> v) {
        if (v.size() != 1) throw DimensionError("curvature family: value must be (kappa)");
        ReducedParameter p = param;
        p.kappa = v[0];
        return build_reduced_mocp(p, cfg);
    };
}

}  // namespace emompc
