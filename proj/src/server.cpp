#include "hntt/server.hpp"

#include <httplib.h>

#include "hntt/error.hpp"
#include "hntt/io.hpp"

namespace hntt::server {
namespace {

using nlohmann::json;

int status_for(const Error& e) {
  const std::string& c = e.code();
  if (c == "not_found") return 404;
  if (c == "unauthorized") return 401;
  if (c == "duplicate_judge" || c == "duplicate_study" || c == "session_closed" ||
      c == "survey_already_submitted") {
    return 409;
  }
  if (c == "bad_request") return 400;
  if (c == "storage") return 500;
  return 422;
}

void send(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& msg) {
  send(res, status, {{"error", code}, {"message", msg}});
}

json parse_body(const httplib::Request& req) {
  try {
    return req.body.empty() ? json::object() : json::parse(req.body);
  } catch (const json::exception& e) {
    throw ValidationError("bad_request", std::string("request body is not valid JSON: ") + e.what());
  }
}

json agent_state(const navsim::NavEnv& env) {
  return {{"x", env.state().position.x},
          {"y", env.state().position.y},
          {"heading", env.state().heading},
          {"goal_index", env.goal_index()},
          {"steps", env.state().steps_elapsed}};
}

}  // namespace

struct HttpServer::PlaySession {
  traj::Recorder recorder;
};

HttpServer::HttpServer(study::StudyService& service, std::shared_ptr<const navsim::WorldMap> map,
                       ServerOptions options)
    : service_(service), map_(std::move(map)), options_(std::move(options)),
      http_(std::make_unique<httplib::Server>()), play_rng_(derive_seed(options_.seed, 0x91A)) {
  if (!options_.human_store.empty()) humans_ = std::make_unique<traj::TrajectoryStore>(options_.human_store);
  routes();
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind() {
  if (options_.port == 0) return options_.port = http_->bind_to_any_port(options_.host);
  if (!http_->bind_to_port(options_.host, options_.port)) {
    throw ConfigError("cannot bind " + options_.host + ":" + std::to_string(options_.port));
  }
  return options_.port;
}

void HttpServer::listen() { http_->listen_after_bind(); }

void HttpServer::stop() {
  if (http_) http_->stop();
}

void HttpServer::routes() {
  auto& s = *http_;
  s.set_default_headers({{"Access-Control-Allow-Origin", options_.allow_origin},
                         {"Access-Control-Allow-Headers", "Content-Type, Authorization"},
                         {"Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS"}});
  s.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const Error& e) {
      send_error(res, status_for(e), e.code(), e.what());
    } catch (const json::exception& e) {
      send_error(res, 400, "bad_request", e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  });

  auto require_analyst = [this](const httplib::Request& req) {
    const std::string expected = "Bearer " + options_.analyst_token;
    if (options_.analyst_token.empty() || req.get_header_value("Authorization") != expected) {
      throw Error("unauthorized", "analyst bearer token required");
    }
  };

  s.Get("/map", [this](const httplib::Request&, httplib::Response& res) {
    send(res, 200, navsim::map_to_json(*map_));
  });

  s.Post("/studies", [this, require_analyst](const httplib::Request& req, httplib::Response& res) {
    require_analyst(req);
    const std::string id = service_.create_study(study::study_from_json(parse_body(req)));
    send(res, 201, {{"study_id", id}});
  });

  s.Get(R"(/studies/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    const study::StudyDefinition def = service_.get_study(req.matches[1]);
    json fam = json::array(), comp = json::array();
    for (const auto& q : def.familiarity_questions) fam.push_back({{"id", q.id}, {"text", q.text}, {"options", q.options}});
    for (const auto& q : def.comprehension_questions) comp.push_back({{"id", q.id}, {"text", q.text}, {"options", q.options}});
    send(res, 200, {{"study_id", def.study_id}, {"total", study::kTrialsPerStudy},
                    {"familiarity_questions", fam}, {"comprehension_questions", comp}});
  });

  s.Post(R"(/studies/([^/]+)/sessions)", [this](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    const study::Session sess = service_.create_session(req.matches[1], body.value("judge_id", ""));
    send(res, 201, {{"session_id", sess.session_id}, {"study_id", sess.study_id}, {"judge_id", sess.judge_id},
                    {"status", study::to_string(sess.status)}, {"total", study::kTrialsPerStudy}});
  });

  s.Get(R"(/sessions/([^/]+)/next-trial)", [this](const httplib::Request& req, httplib::Response& res) {
    send(res, 200, service_.next_trial(req.matches[1]));
  });

  s.Post(R"(/sessions/([^/]+)/responses)", [this](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    study::ResponseInput in;
    in.trial_index = body.value("trial_index", -1);
    in.choice = body.value("choice", "");
    in.justification = body.value("justification", "");
    in.certainty = body.value("certainty", 0);
    in.page_seconds = body.value("page_seconds", 0.0);
    const study::Ack ack = service_.submit_response(req.matches[1], in);
    send(res, 200, {{"accepted", true}, {"status", study::to_string(ack.status)},
                    {"answered", ack.answered}, {"remaining", ack.remaining}});
  });

  s.Post(R"(/sessions/([^/]+)/survey)", [this](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    study::SurveyAnswers a;
    a.familiarity_general = body.value("familiarity_general", 0);
    a.familiarity_specific = body.value("familiarity_specific", 0);
    a.comprehension = body.value("comprehension", json::object());
    service_.submit_survey(req.matches[1], a);
    send(res, 200, {{"accepted", true}});
  });

  s.Get(R"(/studies/([^/]+)/export)", [this, require_analyst](const httplib::Request& req, httplib::Response& res) {
    require_analyst(req);
    const study::Dataset d = service_.export_dataset(req.matches[1]);
    if (req.get_param_value("format") == "csv") {
      res.status = 200;
      res.set_content(study::to_csv(d), "text/csv");
    } else {
      send(res, 200, study::to_json(d));
    }
  });

  // Play mode: a live Shaped14 episode driven one action per request.
  s.Post("/play", [this](const httplib::Request& req, httplib::Response& res) {
    if (!humans_) throw Error("not_found", "play mode is disabled on this server");
    const json body = parse_body(req);
    auto session = std::make_unique<PlaySession>(PlaySession{
        traj::Recorder(map_, navsim::ActionVariant::kShaped14, traj::Controller::kHuman, reward::RewardConfig{})});
    std::optional<int> goal;
    if (body.contains("goal_index") && !body["goal_index"].is_null()) goal = body["goal_index"].get<int>();
    std::string id;
    std::uint64_t seed;
    {
      std::lock_guard lock(play_mu_);
      id = "play" + io::hex64(play_rng_());
      seed = play_rng_();
    }
    session->recorder.reset(seed, goal);
    json actions = json::array();
    for (const auto& a : navsim::action_space(navsim::ActionVariant::kShaped14)) {
      actions.push_back({{"label", a.label}, {"heading_delta", a.heading_delta}, {"move", a.move}});
    }
    const json state = agent_state(session->recorder.env());
    {
      std::lock_guard lock(play_mu_);
      play_[id] = std::move(session);
    }
    send(res, 201, {{"play_id", id}, {"state", state}, {"actions", actions}});
  });

  s.Post(R"(/play/([^/]+)/step)", [this](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    const std::string id = req.matches[1];
    std::lock_guard lock(play_mu_);
    auto it = play_.find(id);
    if (it == play_.end()) throw NotFoundError("unknown play session " + id);
    traj::Recorder& rec = it->second->recorder;
    const navsim::StepResult& r = rec.step(body.value("action", -1));
    json out = {{"state", agent_state(rec.env())},
                {"done", r.done},
                {"reached_goal", r.info.reached_goal},
                {"died", r.info.died},
                {"collided_wall", r.info.collided_wall}};
    if (r.done) {
      const traj::Trajectory t = rec.finish("h" + io::hex64(fnv1a(id)), io::utc_now());
      humans_->put(t);
      out["trajectory_id"] = t.id;
      play_.erase(it);
    }
    send(res, 200, out);
  });

  s.Get(R"(/recordings/([^/]+)/replay)", [this](const httplib::Request& req, httplib::Response& res) {
    if (!humans_) throw Error("not_found", "play mode is disabled on this server");
    send(res, 200, traj::replay_json(humans_->get(req.matches[1])));
  });

  s.Delete(R"(/play/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    std::lock_guard lock(play_mu_);
    play_.erase(req.matches[1]);
    send(res, 200, {{"discarded", true}});
  });
}

}  // namespace hntt::server
