#include "emompc/service.hpp"

#include <chrono>
#include <thread>

#include <boost/asio.hpp>
#include <boost/asio/co_spawn.hpp>
#include <boost/asio/detached.hpp>
#include <boost/asio/use_awaitable.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <spdlog/spdlog.h>

#include "emompc/errors.hpp"

namespace emompc {

using nlohmann::json;

namespace {

PreferenceMailbox::Mode parse_mode(const std::string& s) {
    if (s == "manual") return PreferenceMailbox::Mode::Manual;
    if (s == "heuristic") return PreferenceMailbox::Mode::Heuristic;
    if (s == "schedule") return PreferenceMailbox::Mode::Schedule;
    throw ConfigError("unknown mode '" + s + "'");
}

json state_json(const VehicleState& x) {
    return {{"p1", x.p1}, {"p2", x.p2}, {"theta", x.theta}, {"v_y", x.v_y}, {"r", x.r}};
}

json reduced_json(const ReducedParameter& p) {
    return {{"v_y", p.v_y}, {"r", p.r}, {"xi", p.xi}, {"d", p.d}, {"kappa", p.kappa}};
}

json metrics_json(const MpcTrace& trace) {
    const LapMetrics m = lap_metrics(trace);
    return {{"lap_time", m.lap_time}, {"integrated_distance", m.integrated_distance}, {"constraint_max", m.constraint_max}};
}

}  // namespace

SessionRequest parse_session_request(const std::string& body) {
    SessionRequest req;
    try {
        const json j = json::parse(body);
        req.track = j.at("track").get<std::string>();
        if (j.contains("speed")) req.speed = j.at("speed").get<double>();
        if (j.contains("t_max")) req.stop.t_max = j.at("t_max").get<double>();
        if (j.contains("one_lap")) req.stop.one_lap = j.at("one_lap").get<bool>();
        if (j.contains("policy")) {
            const json& p = j.at("policy");
            const std::string mode = p.value("mode", std::string("manual"));
            if (mode == "manual" || mode == "fixed") {
                req.policy = RhoPolicy::fixed(p.value("rho", 0.5));
            } else if (mode == "heuristic") {
                req.policy = RhoPolicy::heuristic(p.value("start", 0.5));
            } else if (mode == "schedule") {
                std::vector<ScheduleEntry> s;
                for (const auto& e : p.at("schedule")) s.push_back({e.at(0).get<double>(), e.at(1).get<double>()});
                if (s.empty()) throw ConfigError("schedule policy needs at least one entry");
                req.policy = RhoPolicy::scheduled(std::move(s));
            } else {
                throw ConfigError("unknown policy mode '" + mode + "'");
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("session request: ") + e.what());
    }
    if (!(req.stop.t_max > 0.0)) throw ConfigError("session request: t_max must be positive");
    return req;
}

Session::Session(std::string id, std::shared_ptr<const Library> lib, std::shared_ptr<const Track> track,
                 const SessionRequest& request)
    : id_(std::move(id)),
      lib_(std::move(lib)),
      track_(std::move(track)),
      track_name_(request.track),
      speed_(request.speed),
      loop_(*lib_, *track_, start_state(*track_), request.policy, request.stop) {}

void Session::queue(json frame) {
    std::lock_guard lock(mutex_);
    outbox_.push_back(frame.dump());
}

void Session::handle_message(const std::string& text) {
    try {
        const json msg = json::parse(text);
        const std::string type = msg.at("type").get<std::string>();
        if (type == "set_rho") {
            const double rho = msg.at("rho").get<double>();
            if (!std::isfinite(rho)) throw ConfigError("rho must be finite");
            loop_.mailbox().post_rho(rho);
            queue({{"type", "ack"}, {"command", type}, {"rho", rho}});
        } else if (type == "set_mode") {
            const std::string mode = msg.at("mode").get<std::string>();
            loop_.mailbox().post_mode(parse_mode(mode));
            queue({{"type", "ack"}, {"command", type}, {"mode", mode}});
        } else if (type == "pause" || type == "resume") {
            paused_ = type == "pause";
            queue({{"type", "ack"}, {"command", type}});
        } else if (type == "reset") {
            reset_pending_ = true;
            queue({{"type", "ack"}, {"command", type}});
        } else {
            throw ConfigError("unknown message type '" + type + "'");
        }
    } catch (const std::exception& e) {
        queue({{"type", "error"}, {"message", e.what()}});
    }
}

std::vector<std::string> Session::tick() {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out(outbox_.begin(), outbox_.end());
    outbox_.clear();
    if (reset_pending_.exchange(false)) {
        loop_.reset();
        terminal_sent_ = false;
    }
    if (paused_) return out;
    if (!loop_.finished()) {
        const StepRecord& rec = loop_.step();
        // an aborting step only yields the terminal record
        if (rec.neighbors.size() > 0) out.push_back(step_frame(rec).dump());
    }
    if (loop_.finished() && !terminal_sent_) {
        out.push_back(terminal_frame().dump());
        terminal_sent_ = true;
    }
    return out;
}

bool Session::finished() const {
    std::lock_guard lock(mutex_);
    return loop_.finished();
}

bool Session::try_attach() {
    if (attached_.exchange(true)) return false;
    std::lock_guard lock(mutex_);
    terminal_sent_ = false;
    return true;
}

void Session::detach() { attached_ = false; }

json Session::step_frame(const StepRecord& rec) const {
    json front = json::array();
    for (const auto& e : lib_->entries.at(rec.cell).entries) front.push_back(e.objectives);
    return {{"type", "step"},
            {"session", id_},
            {"time", rec.time},
            {"state", state_json(rec.state)},
            {"reduced", reduced_json(rec.reduced)},
            {"mirrored", rec.mirrored},
            {"d", rec.d},
            {"rho", rec.rho},
            {"u", rec.u},
            {"mode", to_string(loop_.policy().kind)},
            {"front", front},
            {"selected_index", rec.selected_index},
            {"metrics", metrics_json(loop_.trace())}};
}

json Session::terminal_frame() const {
    const auto& tr = loop_.trace();
    json f = {{"type", "end"},
              {"session", id_},
              {"status", to_string(tr.status)},
              {"time", tr.records.empty() ? 0.0 : tr.records.back().time},
              {"metrics", metrics_json(tr)}};
    if (!tr.abort_reason.empty()) f["abort_reason"] = tr.abort_reason;
    return f;
}

MpcTrace Session::trace() const {
    std::lock_guard lock(mutex_);
    return loop_.trace();
}

std::map<std::string, std::shared_ptr<const Track>> load_track_directory(const std::filesystem::path& dir) {
    std::map<std::string, std::shared_ptr<const Track>> out;
    if (!std::filesystem::is_directory(dir)) throw ConfigError("track directory " + dir.string() + " not found");
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        PolylineTrack t = load_track(f);
        const std::string name = t.name();
        out[name] = std::make_shared<const Track>(std::move(t));
    }
    return out;
}

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
using WsStream = websocket::stream<beast::tcp_stream>;

struct Service::Impl {
    net::io_context ioc{1};
    std::unique_ptr<tcp::acceptor> acceptor;
    std::thread thread;
};

Service::Service(ServiceConfig config) : config_(std::move(config)), impl_(std::make_unique<Impl>()) {
    if (!config_.library) throw ConfigError("service: no library");
}

Service::~Service() { stop(); }

std::shared_ptr<Session> Service::find_session(const std::string& id) const {
    std::lock_guard lock(sessions_mutex_);
    const auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
}

HttpReply Service::handle_http(const std::string& method, const std::string& target, const std::string& body) {
    auto error = [](unsigned status, const std::string& msg) { return HttpReply{status, json{{"error", msg}}.dump()}; };
    const std::string path = target.substr(0, target.find('?'));

    if (path == "/health") {
        if (method != "GET") return error(405, "method not allowed");
        return {200, json{{"status", "ok"}}.dump()};
    }
    if (path == "/library/meta") {
        if (method != "GET") return error(405, "method not allowed");
        const Library& lib = *config_.library;
        json dims = json::array();
        for (const auto& d : lib.grid().dims) {
            dims.push_back({{"name", d.name}, {"min", d.min}, {"max", d.max}, {"step", d.step}, {"count", d.count}});
        }
        const auto& p = lib.config.problem;
        return {200, json{{"format_version", kLibraryFormatVersion},
                          {"nodes", lib.entries.size()},
                          {"complete", lib.complete},
                          {"failures", lib.failures.size()},
                          {"grid", {{"dims", dims}}},
                          {"horizon", {{"t0", p.horizon.t0}, {"te", p.horizon.te}, {"steps", p.horizon.steps}}},
                          {"vehicle", {{"v_x", p.vehicle.v_x}, {"d_max", p.d_max}, {"u_min", p.u_min}, {"u_max", p.u_max}}},
                          {"n_targets", lib.config.n_targets}}
                         .dump()};
    }
    if (path == "/tracks") {
        if (method != "GET") return error(405, "method not allowed");
        json tracks = json::array();
        for (const auto& [name, t] : config_.tracks) {
            const auto& line = std::get<PolylineTrack>(*t);
            json pts = json::array();
            for (const auto& w : line.waypoints()) pts.push_back({w.x, w.y});
            tracks.push_back({{"name", name}, {"closed", line.closed()}, {"length", line.length()}, {"waypoints", pts}});
        }
        return {200, json{{"tracks", tracks}}.dump()};
    }
    if (path == "/sessions") {
        if (method != "POST") return error(405, "method not allowed");
        SessionRequest req;
        try {
            req = parse_session_request(body);
        } catch (const ConfigError& e) {
            return error(400, e.what());
        }
        const auto it = config_.tracks.find(req.track);
        if (it == config_.tracks.end()) return error(404, "unknown track '" + req.track + "'");
        std::shared_ptr<Session> s;
        {
            std::lock_guard lock(sessions_mutex_);
            const std::string id = "s" + std::to_string(next_id_++);
            try {
                s = std::make_shared<Session>(id, config_.library, it->second, req);
            } catch (const Error& e) {
                return error(400, e.what());
            }
            sessions_[id] = s;
        }
        return {201, json{{"id", s->id()}}.dump()};
    }
    return error(404, "not found");
}

namespace {

/// Session id of a "/sessions/{id}/stream" target, or empty.
std::string stream_session_id(std::string_view target) {
    constexpr std::string_view prefix = "/sessions/";
    constexpr std::string_view suffix = "/stream";
    target = target.substr(0, target.find('?'));
    if (!target.starts_with(prefix) || !target.ends_with(suffix)) return {};
    if (target.size() <= prefix.size() + suffix.size()) return {};
    return std::string(target.substr(prefix.size(), target.size() - prefix.size() - suffix.size()));
}

net::awaitable<void> read_loop(std::shared_ptr<WsStream> ws, std::shared_ptr<Session> session,
                               std::shared_ptr<bool> alive) {
    beast::flat_buffer buffer;
    try {
        for (;;) {
            co_await ws->async_read(buffer, net::use_awaitable);
            session->handle_message(beast::buffers_to_string(buffer.data()));
            buffer.consume(buffer.size());
        }
    } catch (const std::exception&) {
    }
    *alive = false;
}

net::awaitable<void> run_stream(std::shared_ptr<WsStream> ws, std::shared_ptr<Session> session) {
    auto executor = co_await net::this_coro::executor;
    auto alive = std::make_shared<bool>(true);
    net::co_spawn(executor, read_loop(ws, session, alive), net::detached);

    using clock = std::chrono::steady_clock;
    const auto idle = std::chrono::milliseconds(20);
    const auto pace = session->speed() > 0.0
                          ? std::chrono::duration_cast<clock::duration>(
                                std::chrono::duration<double>(session->step_seconds() / session->speed()))
                          : clock::duration::zero();
    net::steady_timer timer(executor);
    auto next = clock::now();
    try {
        while (*alive) {
            const bool was_running = !session->paused() && !session->finished();
            for (const auto& frame : session->tick()) {
                ws->text(true);
                co_await ws->async_write(net::buffer(frame), net::use_awaitable);
            }
            next = was_running ? std::max(next + pace, clock::now() - pace) : clock::now() + idle;
            timer.expires_at(next);
            co_await timer.async_wait(net::use_awaitable);
        }
    } catch (const std::exception& e) {
        spdlog::debug("stream {} closed: {}", session->id(), e.what());
    }
    session->detach();
}

}  // namespace

namespace {

net::awaitable<void> handle_connection(Service& service, tcp::socket socket) {
    beast::tcp_stream stream(std::move(socket));
    beast::flat_buffer buffer;
    try {
        for (;;) {
            http::request<http::string_body> req;
            co_await http::async_read(stream, buffer, req, net::use_awaitable);

            if (websocket::is_upgrade(req)) {
                const std::string id = stream_session_id(std::string(req.target()));
                auto session = id.empty() ? nullptr : service.find_session(id);
                HttpReply refusal;
                if (!session) refusal = {404, json{{"error", "unknown session"}}.dump()};
                else if (!session->try_attach()) refusal = {409, json{{"error", "session already streaming"}}.dump()};
                if (refusal.status != 200) {
                    http::response<http::string_body> res{static_cast<http::status>(refusal.status), req.version()};
                    res.set(http::field::content_type, "application/json");
                    res.body() = refusal.body;
                    res.prepare_payload();
                    co_await http::async_write(stream, res, net::use_awaitable);
                    break;
                }
                auto ws = std::make_shared<WsStream>(std::move(stream));
                co_await ws->async_accept(req, net::use_awaitable);
                co_await run_stream(ws, session);
                co_return;
            }

            const HttpReply reply = service.handle_http(std::string(req.method_string()), std::string(req.target()), req.body());
            http::response<http::string_body> res{static_cast<http::status>(reply.status), req.version()};
            res.set(http::field::content_type, "application/json");
            res.set(http::field::access_control_allow_origin, "*");
            res.keep_alive(req.keep_alive());
            res.body() = reply.body;
            res.prepare_payload();
            co_await http::async_write(stream, res, net::use_awaitable);
            if (!req.keep_alive()) break;
        }
    } catch (const std::exception&) {
    }
    beast::error_code ec;
    stream.socket().shutdown(tcp::socket::shutdown_send, ec);
}

net::awaitable<void> accept_loop(Service& service, tcp::acceptor& acceptor) {
    for (;;) {
        tcp::socket socket = co_await acceptor.async_accept(net::use_awaitable);
        net::co_spawn(acceptor.get_executor(), handle_connection(service, std::move(socket)), net::detached);
    }
}

}  // namespace

unsigned short Service::start() {
    if (impl_->acceptor) throw Error("service already started");
    const auto address = net::ip::make_address(config_.address);
    impl_->acceptor = std::make_unique<tcp::acceptor>(impl_->ioc, tcp::endpoint{address, config_.port});
    const unsigned short port = impl_->acceptor->local_endpoint().port();
    net::co_spawn(impl_->ioc, accept_loop(*this, *impl_->acceptor), [](std::exception_ptr) {});
    impl_->thread = std::thread([this] { impl_->ioc.run(); });
    return port;
}

void Service::run() {
    start();
    if (impl_->thread.joinable()) impl_->thread.join();
}

void Service::stop() {
    impl_->ioc.stop();
    if (impl_->thread.joinable() && impl_->thread.get_id() != std::this_thread::get_id()) impl_->thread.join();
}

}  // namespace emompc
