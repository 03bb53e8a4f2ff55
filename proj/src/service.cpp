#include "steerlab/service.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <mutex>

#include "steerlab/errors.hpp"
#include "steerlab/fitting.hpp"
#include "steerlab/io.hpp"
#include "steerlab/metrics.hpp"
#include "steerlab/session.hpp"

// After the Eigen-based headers: <resolv.h> defines a `_res` macro that
// collides with Eigen parameter names.
#include <httplib.h>

namespace steerlab::service {

namespace {

using io::json;

struct HttpError {
  int status;
  std::string kind;
  std::string reason;
};

struct SessionRecord {
  std::mutex mu;
  std::string id;
  std::filesystem::path dir;
  session::SessionPlan plan;
  session::SessionState state;
  std::vector<metrics::MeasureRow> tutorial_rows;
  std::vector<metrics::MeasureRow> experiment_rows;
  int logs = 0;
};

json planned_to_json(const session::PlannedTrial& t) {
  return {{"trial_id", t.trial_id}, {"flipped", t.flipped}, {"block", t.block}};
}

json plan_to_json(const session::SessionPlan& plan) {
  json tutorial = json::array();
  json queue = json::array();
  for (const auto& t : plan.tutorial) tutorial.push_back(planned_to_json(t));
  for (const auto& t : plan.queue) queue.push_back(planned_to_json(t));
  return {{"participant_id", plan.participant_id},
          {"seed", plan.seed},
          {"reversed", plan.reversed},
          {"tutorial", tutorial},
          {"queue", queue}};
}

json state_to_json(const session::SessionState& s) {
  return {{"phase", session::to_string(s.phase)},
          {"tutorial_trials", s.tutorial_trials},
          {"experiment_trials", s.experiment_trials},
          {"break_started_ms", s.break_started_ms}};
}

json measures_to_json(const metrics::TrialMeasures& m) {
  json j = {{"mt_ms", m.mt},       {"opm", m.opm}, {"v_avg", m.v_avg},
            {"exits", m.exits},    {"w_e", m.w_e}, {"path_px", m.path_distance}};
  for (const auto& [name, phase] : {std::pair{"outbound", &m.outbound}, std::pair{"inbound", &m.inbound}}) {
    if (*phase) {
      j[name] = {{"mt_ms", (*phase)->mt},
                 {"opm", (*phase)->opm},
                 {"v_avg", (*phase)->v_avg},
                 {"exits", (*phase)->exits},
                 {"path_px", (*phase)->path_distance}};
    }
  }
  return j;
}

bool valid_participant(const std::string& id) {
  if (id.empty() || id.size() > 64) return false;
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
    if (!ok) return false;
  }
  return true;
}

void send(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

}  // namespace

std::filesystem::path resolve_data_dir(const std::filesystem::path& fallback) {
  if (const char* env = std::getenv("STEERLAB_DATA_DIR"); env && *env) return env;
  return fallback;
}

struct Service::Impl {
  ServiceConfig cfg;
  httplib::Server server;
  std::mutex sessions_mu;
  std::map<std::string, std::shared_ptr<SessionRecord>> sessions;
  std::vector<std::string> trial_ids;

  explicit Impl(ServiceConfig c) : cfg(std::move(c)) {
    if (!cfg.clock_ms) {
      const auto t0 = std::chrono::steady_clock::now();
      cfg.clock_ms = [t0] {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      };
    }
    for (const auto& t : cfg.trials) trial_ids.push_back(t.trial_id);
    routes();
  }

  // Runs `body`, converting library errors to HTTP errors. `log_errors`
  // maps validation failures to 422 instead of 400.
  template <typename F>
  void guarded(httplib::Response& res, bool log_errors, F&& body) {
    try {
      body();
    } catch (const HttpError& e) {
      send(res, e.status, {{"error", e.kind}, {"reason", e.reason}});
    } catch (const ProtocolError& e) {
      send(res, 409, {{"error", "protocol"}, {"reason", e.what()}});
    } catch (const ReferenceError& e) {
      send(res, log_errors ? 422 : 404, {{"error", "reference"}, {"reason", e.what()}});
    } catch (const ValidationError& e) {
      send(res, log_errors ? 422 : 400, {{"error", "validation"}, {"reason", e.what()}});
    } catch (const json::exception& e) {
      send(res, 400, {{"error", "json"}, {"reason", e.what()}});
    } catch (const std::exception& e) {
      send(res, 500, {{"error", "internal"}, {"reason", e.what()}});
    }
  }

  std::shared_ptr<SessionRecord> find(const std::string& id) {
    std::lock_guard lock(sessions_mu);
    const auto it = sessions.find(id);
    if (it == sessions.end()) throw HttpError{404, "not_found", "unknown session '" + id + "'"};
    return it->second;
  }

  // Ends a break once the gate has elapsed on the service clock.
  void settle(SessionRecord& s) {
    if (s.state.phase == session::Phase::kBreak) {
      const double now = cfg.clock_ms();
      if (now - s.state.break_started_ms >= session::kBreakMs) {
        s.state = session::advance(s.state, session::BreakFinished{now});
      }
    }
  }

  void persist_state(const SessionRecord& s) {
    io::write_file(s.dir / "state.json", state_to_json(s.state).dump(1) + "\n");
    io::write_file(s.dir / "measures.csv", io::format_measures_csv(s.experiment_rows));
    io::write_file(s.dir / "tutorial_measures.csv", io::format_measures_csv(s.tutorial_rows));
  }

  void routes() {
    server.Get("/api/v1/trials", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, false, [&] {
        json arr = json::array();
        for (const auto& t : cfg.trials) arr.push_back(io::trialspec_to_json(t));
        send(res, 200, arr);
      });
    });

    server.Get(R"(/api/v1/trials/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, false, [&] { send(res, 200, io::trialspec_to_json(io::find_trial(cfg.trials, req.matches[1]))); });
    });

    server.Post("/api/v1/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, false, [&] { create_session(req, res); });
    });

    server.Get(R"(/api/v1/sessions/([^/]+)/next)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, false, [&] {
        const auto s = find(req.matches[1]);
        std::lock_guard lock(s->mu);
        settle(*s);
        send(res, 200, next_json(*s));
      });
    });

    server.Post(R"(/api/v1/sessions/([^/]+)/logs)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, true, [&] { ingest(req, res); });
    });

    server.Get(R"(/api/v1/sessions/([^/]+)/report)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, false, [&] {
        const auto s = find(req.matches[1]);
        std::lock_guard lock(s->mu);
        send(res, 200, report_json(*s));
      });
    });
  }

  void create_session(const httplib::Request& req, httplib::Response& res) {
    const json body = json::parse(req.body);
    if (!body.is_object() || !body.contains("participant_id")) {
      throw HttpError{400, "bad_request", "body needs participant_id"};
    }
    const std::string participant = body.at("participant_id").get<std::string>();
    if (!valid_participant(participant)) {
      throw HttpError{400, "bad_request", "participant_id must be 1-64 characters of [A-Za-z0-9_-]"};
    }
    const std::uint64_t seed = body.value("seed", std::uint64_t{0});
    const bool reversed = body.value("reversed", false);

    auto record = std::make_shared<SessionRecord>();
    record->plan = session::make_plan(participant, trial_ids, seed, reversed);
    {
      std::lock_guard lock(sessions_mu);
      const std::filesystem::path root = cfg.data_dir / "sessions";
      for (int n = 1;; ++n) {
        char suffix[16];
        std::snprintf(suffix, sizeof suffix, "-%03d", n);
        const std::string id = participant + suffix;
        if (!sessions.count(id) && !std::filesystem::exists(root / id)) {
          record->id = id;
          record->dir = root / id;
          break;
        }
      }
      std::filesystem::create_directories(record->dir / "logs");
      sessions[record->id] = record;
    }
    std::lock_guard lock(record->mu);
    io::write_file(record->dir / "plan.json", plan_to_json(record->plan).dump(1) + "\n");
    persist_state(*record);
    send(res, 201, {{"session_id", record->id}, {"plan", plan_to_json(record->plan)}});
  }

  json next_json(const SessionRecord& s) {
    const auto trial = session::current_trial(s.plan, s.state);
    json j = {{"session_id", s.id},
              {"phase", session::to_string(s.state.phase)},
              {"trial", trial ? planned_to_json(*trial) : json(nullptr)},
              {"tutorial_trials", s.state.tutorial_trials},
              {"experiment_trials", s.state.experiment_trials}};
    if (s.state.phase == session::Phase::kBreak) {
      j["break_remaining_ms"] = std::max(0.0, session::kBreakMs - (cfg.clock_ms() - s.state.break_started_ms));
    }
    return j;
  }

  void ingest(const httplib::Request& req, httplib::Response& res) {
    const auto s = find(req.matches[1]);
    std::lock_guard lock(s->mu);
    settle(*s);
    const session::Phase phase = s->state.phase;
    if (phase != session::Phase::kTutorial && phase != session::Phase::kExperiment) {
      throw ProtocolError("logs are not accepted in phase " + std::string(session::to_string(phase)));
    }

    std::string text = req.body;
    const auto ct = req.get_header_value("Content-Type");
    if (ct.rfind("application/json", 0) == 0) {
      const json body = json::parse(req.body);
      if (!body.is_object() || !body.contains("trajlog") || !body.at("trajlog").is_string()) {
        throw ValidationError("JSON body needs a string field 'trajlog'");
      }
      text = body.at("trajlog").get<std::string>();
    }
    const metrics::Trajectory traj = io::parse_trajlog(text);
    const auto expected = session::current_trial(s->plan, s->state);
    if (!expected) throw ProtocolError("session has no pending trial");
    if (traj.trial_id != expected->trial_id || traj.flipped != expected->flipped) {
      throw ProtocolError("log is for " + traj.trial_id + (traj.flipped ? " (flipped)" : "") + " but the session expects " +
                          expected->trial_id + (expected->flipped ? " (flipped)" : ""));
    }
    if (traj.participant_id != s->plan.participant_id) {
      throw ProtocolError("log participant " + traj.participant_id + " does not own this session");
    }

    const std::vector<metrics::Trajectory> one{traj};
    const metrics::MeasureRow row = io::analyze_logs(one, cfg.trials).front();

    ++s->logs;
    char name[96];
    std::snprintf(name, sizeof name, "%04d_%s_%s.trajlog", s->logs,
                  phase == session::Phase::kTutorial ? "tutorial" : "experiment", traj.trial_id.c_str());
    io::write_file(s->dir / "logs" / name, text);

    json decision = nullptr;
    const session::TrialCompleted done{{row.measures.v_avg, row.measures.exits}, cfg.clock_ms()};
    s->state = session::advance(s->state, done);
    if (phase == session::Phase::kTutorial) {
      s->tutorial_rows.push_back(row);
      decision = s->state.phase == session::Phase::kExperiment      ? "pass"
                 : s->state.phase == session::Phase::kFailedTutorial ? "fail"
                                                                      : "continue";
    } else {
      s->experiment_rows.push_back(row);
    }
    persist_state(*s);
    send(res, 200,
         {{"measures", measures_to_json(row.measures)},
          {"tutorial_decision", decision},
          {"phase", session::to_string(s->state.phase)},
          {"log_file", name}});
  }

  json report_json(const SessionRecord& s) {
    json rows = json::array();
    for (const auto& r : s.experiment_rows) {
      json m = measures_to_json(r.measures);
      m["trial_id"] = r.trial_id;
      m["repetition"] = r.repetition;
      rows.push_back(m);
    }
    const metrics::Summary summary = metrics::summarize(s.experiment_rows, trial_ids);
    json per_trial = json::array();
    for (const auto& t : summary.per_trial) {
      per_trial.push_back({{"trial_id", t.trial_id},
                           {"mt_ms", t.mt.mean},
                           {"opm", t.opm.mean},
                           {"v_avg", t.v_avg.mean},
                           {"exits", t.exits.mean}});
    }
    json fits = nullptr;
    if (summary.per_trial.size() == cfg.trials.size() && !cfg.trials.empty()) {
      const auto features = io::features_from_summary(cfg.trials, summary);
      std::vector<models::TrialFeatures> f;
      for (const auto& r : features) f.push_back(r.features);
      const auto forms = fitting::standard_forms();
      const auto batch = fitting::fit_all(f, forms);
      fits = io::fitreport(batch.fits, batch.ranking, batch.failures);
    }
    return {{"session_id", s.id},
            {"phase", session::to_string(s.state.phase)},
            {"measures", rows},
            {"measures_csv", io::format_measures_csv(s.experiment_rows)},
            {"tutorial_measures_csv", io::format_measures_csv(s.tutorial_rows)},
            {"summary", per_trial},
            {"fits", fits}};
  }
};

Service::Service(ServiceConfig cfg) : impl_(std::make_unique<Impl>(std::move(cfg))) {}

Service::~Service() { stop(); }

int Service::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw Error("cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) throw Error("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void Service::run() { impl_->server.listen_after_bind(); }

void Service::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace steerlab::service
