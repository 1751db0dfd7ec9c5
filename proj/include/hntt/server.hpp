#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "hntt/study.hpp"
#include "hntt/trajectory.hpp"

namespace httplib {
class Server;
}

namespace hntt::server {

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::string analyst_token;  // bearer token for study creation and export
  std::string allow_origin = "*";
  std::filesystem::path human_store;  // play-mode recordings; empty disables play mode
  std::uint64_t seed = 0;
};

// JSON API over a StudyService:
//   POST /studies                      (analyst)
//   GET  /studies/{id}
//   POST /studies/{id}/sessions
//   GET  /sessions/{id}/next-trial
//   POST /sessions/{id}/responses
//   POST /sessions/{id}/survey
//   GET  /studies/{id}/export[?format=csv]   (analyst)
//   GET  /map
//   POST /play, POST /play/{id}/step, DELETE /play/{id}
//   GET  /recordings/{id}/replay
class HttpServer {
 public:
  HttpServer(study::StudyService& service, std::shared_ptr<const navsim::WorldMap> map,
             ServerOptions options);
  ~HttpServer();

  // Binds and returns the port (useful with port 0).
  int bind();
  // Blocks until stop().
  void listen();
  void stop();

 private:
  struct PlaySession;
  void routes();

  study::StudyService& service_;
  std::shared_ptr<const navsim::WorldMap> map_;
  ServerOptions options_;
  std::unique_ptr<httplib::Server> http_;
  std::unique_ptr<traj::TrajectoryStore> humans_;
  std::mutex play_mu_;
  std::map<std::string, std::unique_ptr<PlaySession>> play_;
  Rng play_rng_;
};

}  // namespace hntt::server
