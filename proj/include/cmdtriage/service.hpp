#pragma once

// In-memory session API over HTTP/JSON for interactive front ends.
//
//   POST   /sessions                 {scene}            -> 201 {session_id}
//   GET    /sessions/{id}                               -> 200 session record
//   POST   /sessions/{id}/command    {goal}             -> 200 triage result
//   POST   /sessions/{id}/answer     {answer}           -> 200 triage result
//   DELETE /sessions/{id}                               -> 204
//
// Errors are {code, message}. A session handles one request at a time.

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "cmdtriage/app.hpp"
#include "cmdtriage/triage.hpp"

namespace cmdtriage::service {

struct ServiceOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::chrono::seconds idle_timeout{30 * 60};
  std::chrono::seconds sweep_interval{60};
  /// Wait for a busy session instead of answering 409.
  bool queue_when_busy = false;
};

struct Session {
  std::string id;
  std::chrono::system_clock::time_point created_at;
  std::chrono::steady_clock::time_point last_used;
  triage::DialogueState dialogue;
  bool has_command = false;
  std::mutex busy;
};

class SessionService {
 public:
  SessionService(triage::TriageConfig config, triage::Resources resources, ServiceOptions options = {});

  void register_routes(httplib::Server& server);

  /// Drops sessions idle longer than the timeout; returns how many.
  std::size_t evict_idle(std::chrono::steady_clock::time_point now);
  std::size_t session_count() const;

 private:
  std::shared_ptr<Session> find(const std::string& id);
  std::string new_id();

  void create(const httplib::Request& req, httplib::Response& res);
  void get(const httplib::Request& req, httplib::Response& res);
  void command(const httplib::Request& req, httplib::Response& res);
  void answer(const httplib::Request& req, httplib::Response& res);
  void remove(const httplib::Request& req, httplib::Response& res);

  triage::TriageConfig config_;
  triage::Resources resources_;
  ServiceOptions options_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t id_state_;
};

/// Loads the engine, serves until SIGINT/SIGTERM, then shuts down cleanly.
int cmd_serve(const std::filesystem::path& config_path, const ServiceOptions& options, std::ostream& err);

}  // namespace cmdtriage::service
