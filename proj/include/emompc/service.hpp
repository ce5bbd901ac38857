#pragma once

/**
 * @file service.hpp
 * @brief Interactive simulation sessions and the HTTP/WebSocket service that
 *        streams them.
 *
 * Stream frames (server to client), one JSON text message each:
 *   {"type":"step", time, state, reduced, mirrored, d, rho, u, mode, front, selected_index, metrics}
 *   {"type":"ack", command, ...}      control message accepted
 *   {"type":"error", message}         malformed message; the session continues
 *   {"type":"end", status, metrics}   run finished or aborted
 * Client messages: {"type":"set_rho","rho":r}, {"type":"set_mode","mode":"manual"|"heuristic"|"schedule"},
 * {"type":"pause"}, {"type":"resume"}, {"type":"reset"}.
 */

#include <atomic>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emompc/online.hpp"

namespace emompc {

struct SessionRequest {
    std::string track;
    RhoPolicy policy = RhoPolicy::fixed(0.5);
    StopRule stop;
    double speed = 1.0;  ///< simulated seconds per wall-clock second; <= 0 runs unthrottled
};

/// Parses a POST /sessions body. Throws ConfigError.
SessionRequest parse_session_request(const std::string& body);

/**
 * @brief One simulation run driven frame by frame.
 *
 * handle_message may be called from any thread; tick must be called from a
 * single thread at a time.
 */
class Session {
public:
    Session(std::string id, std::shared_ptr<const Library> lib, std::shared_ptr<const Track> track,
            const SessionRequest& request);

    const std::string& id() const { return id_; }
    const std::string& track_name() const { return track_name_; }
    double speed() const { return speed_; }
    double step_seconds() const { return loop_.h(); }

    /// Applies a client message; queues an ack or error frame.
    void handle_message(const std::string& text);

    /// Queued frames, then at most one simulation step, then the terminal frame once.
    std::vector<std::string> tick();

    bool paused() const { return paused_.load(); }
    bool finished() const;
    /// Rearms the terminal frame for a newly attached stream.
    bool try_attach();
    void detach();

    nlohmann::json step_frame(const StepRecord& rec) const;
    nlohmann::json terminal_frame() const;
    MpcTrace trace() const;

private:
    void queue(nlohmann::json frame);

    std::string id_;
    std::shared_ptr<const Library> lib_;
    std::shared_ptr<const Track> track_;
    std::string track_name_;
    double speed_;
    ClosedLoop loop_;

    mutable std::mutex mutex_;  ///< guards outbox_ and the loop against trace() readers
    std::deque<std::string> outbox_;
    std::atomic<bool> paused_{false};
    std::atomic<bool> reset_pending_{false};
    std::atomic<bool> attached_{false};
    bool terminal_sent_ = false;
};

struct HttpReply {
    unsigned status = 200;
    std::string body;
};

struct ServiceConfig {
    std::shared_ptr<const Library> library;
    std::map<std::string, std::shared_ptr<const Track>> tracks;
    std::string address = "127.0.0.1";
    unsigned short port = 8080;
};

/// Loads every *.json track in a directory, keyed by track name.
std::map<std::string, std::shared_ptr<const Track>> load_track_directory(const std::filesystem::path& dir);

class Service {
public:
    explicit Service(ServiceConfig config);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Routes a plain HTTP request (no sockets involved).
    HttpReply handle_http(const std::string& method, const std::string& target, const std::string& body);
    std::shared_ptr<Session> find_session(const std::string& id) const;

    /// Binds and serves on a background thread; returns the bound port (config port 0 picks one).
    unsigned short start();
    /// Binds and serves on the calling thread until stop().
    void run();
    void stop();

private:
    struct Impl;
    ServiceConfig config_;
    mutable std::mutex sessions_mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::size_t next_id_ = 1;
    std::unique_ptr<Impl> impl_;
};

}  // namespace emompc
