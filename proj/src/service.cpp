#include "cmdtriage/service.hpp"

#include <condition_variable>
#include <csignal>
#include <ctime>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include <pthread.h>

#include "cmdtriage/error.hpp"
#include "cmdtriage/prompt.hpp"

namespace cmdtriage::service {

using nlohmann::json;

namespace {

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  res.status = status;
  res.set_content(json{{"code", code}, {"message", message}}.dump(), "application/json");
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

std::string iso8601(std::chrono::system_clock::time_point t) {
  const auto tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::optional<json> parse_body(const httplib::Request& req, httplib::Response& res) {
  try {
    auto j = json::parse(req.body);
    if (!j.is_object()) {
      send_error(res, 400, "bad_request", "body must be a JSON object");
      return std::nullopt;
    }
    return j;
  } catch (const json::exception& e) {
    send_error(res, 400, "bad_request", std::string("malformed JSON: ") + e.what());
    return std::nullopt;
  }
}

json result_body(const Session& s) {
  json j = *s.dialogue.last_result;
  j["session_id"] = s.id;
  j["dialogue"] = {{"status", triage::to_string(s.dialogue.status)},
                   {"rounds_used", s.dialogue.rounds_used},
                   {"pending_question", s.dialogue.pending_question ? json(*s.dialogue.pending_question) : json()}};
  return j;
}

// Maps pipeline failures onto HTTP statuses.
template <typename Fn>
void guarded(httplib::Response& res, Fn fn) {
  try {
    fn();
  } catch (const TransportError& e) {
    send_error(res, 502, "backend_error", e.what());
  } catch (const RuleMissError& e) {
    send_error(res, 502, "backend_error", e.what());
  } catch (const BatchError& e) {
    send_error(res, 502, "backend_error", e.what());
  } catch (const PreconditionError& e) {
    send_error(res, 400, "bad_request", e.what());
  } catch (const json::exception& e) {
    send_error(res, 400, "bad_request", e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, "internal", e.what());
  }
}

}  // namespace

SessionService::SessionService(triage::TriageConfig config, triage::Resources resources, ServiceOptions options)
    : config_(config), resources_(std::move(resources)), options_(options), id_state_(std::random_device{}()) {
  config_.validate();
  id_state_ = (id_state_ << 32) ^ std::random_device{}();
}

std::string SessionService::new_id() {
  // caller holds mu_
  std::mt19937_64 rng(id_state_++);
  std::ostringstream os;
  os << std::hex << std::setfill('0') << std::setw(16) << rng() << std::setw(16) << rng();
  return os.str();
}

std::shared_ptr<Session> SessionService::find(const std::string& id) {
  std::lock_guard lock(mu_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) return nullptr;
  it->second->last_used = std::chrono::steady_clock::now();
  return it->second;
}

std::size_t SessionService::session_count() const {
  std::lock_guard lock(mu_);
  return sessions_.size();
}

std::size_t SessionService::evict_idle(std::chrono::steady_clock::time_point now) {
  std::lock_guard lock(mu_);
  std::size_t dropped = 0;
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    // busy sessions are in use, hence not idle
    std::unique_lock busy(it->second->busy, std::try_to_lock);
    if (busy.owns_lock() && now - it->second->last_used > options_.idle_timeout) {
      busy.unlock();
      it = sessions_.erase(it);
      ++dropped;
    } else {
      ++it;
    }
  }
  return dropped;
}

void SessionService::register_routes(httplib::Server& server) {
  server.Post("/sessions", [this](const auto& req, auto& res) { create(req, res); });
  server.Get(R"(/sessions/([^/]+))", [this](const auto& req, auto& res) { get(req, res); });
  server.Delete(R"(/sessions/([^/]+))", [this](const auto& req, auto& res) { remove(req, res); });
  server.Post(R"(/sessions/([^/]+)/command)", [this](const auto& req, auto& res) { command(req, res); });
  server.Post(R"(/sessions/([^/]+)/answer)", [this](const auto& req, auto& res) { answer(req, res); });
}

void SessionService::create(const httplib::Request& req, httplib::Response& res) {
  const auto body = parse_body(req, res);
  if (!body) return;
  guarded(res, [&] {
    const json& scene_json = body->contains("scene") ? body->at("scene") : *body;
    auto scene = scene_json.get<prompt::SceneDescription>();
    scene.validate();
    auto s = std::make_shared<Session>();
    s->created_at = std::chrono::system_clock::now();
    s->last_used = std::chrono::steady_clock::now();
    s->dialogue.scene = std::move(scene);
    {
      std::lock_guard lock(mu_);
      do s->id = new_id();
      while (sessions_.count(s->id));
      sessions_[s->id] = s;
    }
    send_json(res, 201, {{"session_id", s->id}});
  });
}

void SessionService::get(const httplib::Request& req, httplib::Response& res) {
  const auto s = find(req.matches[1].str());
  if (!s) return send_error(res, 404, "not_found", "no session " + req.matches[1].str());
  std::unique_lock busy(s->busy, std::defer_lock);
  if (options_.queue_when_busy)
    busy.lock();
  else if (!busy.try_lock())
    return send_error(res, 409, "session_busy", "session is handling another request");
  json j{{"session_id", s->id}, {"created_at", iso8601(s->created_at)}, {"dialogue", s->dialogue}};
  j["last_result"] = s->dialogue.last_result ? json(*s->dialogue.last_result) : json();
  send_json(res, 200, j);
}

void SessionService::remove(const httplib::Request& req, httplib::Response& res) {
  std::lock_guard lock(mu_);
  if (!sessions_.erase(req.matches[1].str()))
    return send_error(res, 404, "not_found", "no session " + req.matches[1].str());
  res.status = 204;
}

void SessionService::command(const httplib::Request& req, httplib::Response& res) {
  const auto s = find(req.matches[1].str());
  if (!s) return send_error(res, 404, "not_found", "no session " + req.matches[1].str());
  const auto body = parse_body(req, res);
  if (!body) return;
  std::unique_lock busy(s->busy, std::defer_lock);
  if (options_.queue_when_busy)
    busy.lock();
  else if (!busy.try_lock())
    return send_error(res, 409, "session_busy", "session is handling another request");
  if (s->dialogue.pending_question)
    return send_error(res, 409, "question_pending", "answer the pending question first");
  if (!body->contains("goal") || !body->at("goal").is_string() || body->at("goal").get<std::string>().empty())
    return send_error(res, 400, "bad_request", "body needs a non-empty 'goal' string");

  guarded(res, [&] {
    triage::DialogueState next;
    next.scene = s->dialogue.scene;
    next.goal = prompt::GoalCommand{body->at("goal").get<std::string>(), {}};
    triage::dialogue_step(next, config_, resources_);
    s->dialogue = std::move(next);
    s->has_command = true;
    send_json(res, 200, result_body(*s));
  });
}

void SessionService::answer(const httplib::Request& req, httplib::Response& res) {
  const auto s = find(req.matches[1].str());
  if (!s) return send_error(res, 404, "not_found", "no session " + req.matches[1].str());
  const auto body = parse_body(req, res);
  if (!body) return;
  std::unique_lock busy(s->busy, std::defer_lock);
  if (options_.queue_when_busy)
    busy.lock();
  else if (!busy.try_lock())
    return send_error(res, 409, "session_busy", "session is handling another request");
  if (!s->dialogue.pending_question) return send_error(res, 409, "no_pending_question", "nothing to answer");
  if (!body->contains("answer") || !body->at("answer").is_string())
    return send_error(res, 400, "bad_request", "body needs an 'answer' string");

  guarded(res, [&] {
    auto next = s->dialogue;
    triage::dialogue_answer(next, body->at("answer").get<std::string>());
    triage::dialogue_step(next, config_, resources_);
    s->dialogue = std::move(next);
    send_json(res, 200, result_body(*s));
  });
}

// ---------------------------------------------------------------------------

int cmd_serve(const std::filesystem::path& config_path, const ServiceOptions& options, std::ostream& err) {
  // Block the shutdown signals in every thread; one thread waits for them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  std::unique_ptr<SessionService> service;
  try {
    const auto config = app::load_engine_config(config_path);
    service = std::make_unique<SessionService>(config.triage, app::make_resources(config), options);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return app::kExitError;
  }

  httplib::Server server;
  service->register_routes(server);
  if (!server.bind_to_port(options.host, options.port)) {
    err << "error: cannot bind " << options.host << ':' << options.port << '\n';
    return app::kExitError;
  }

  std::mutex stop_mu;
  std::condition_variable stop_cv;
  bool stopping = false;

  std::thread sweeper([&] {
    std::unique_lock lock(stop_mu);
    while (!stop_cv.wait_for(lock, options.sweep_interval, [&] { return stopping; }))
      service->evict_idle(std::chrono::steady_clock::now());
  });
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    {
      std::lock_guard lock(stop_mu);
      if (stopping) return;  // woken by the shutdown path below
      stopping = true;
    }
    stop_cv.notify_all();
    server.stop();
  });

  err << "listening on " << options.host << ':' << options.port << '\n';
  const bool ok = server.listen_after_bind();
  {
    std::lock_guard lock(stop_mu);
    if (!stopping) {
      stopping = true;
      pthread_kill(waiter.native_handle(), SIGTERM);
    }
  }
  stop_cv.notify_all();
  waiter.join();
  sweeper.join();
  err << "shut down\n";
  return ok ? 0 : app::kExitError;
}

}  // namespace cmdtriage::service
