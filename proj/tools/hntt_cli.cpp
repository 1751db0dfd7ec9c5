// hntt: command-line driver for the whole pipeline.
//
// Exit codes: 0 ok, 2 configuration or usage error, 3 runtime failure.

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hntt/error.hpp"
#include "hntt/experiment.hpp"
#include "hntt/kvstore.hpp"
#include "hntt/pipeline.hpp"
#include "hntt/server.hpp"

namespace {

namespace fs = std::filesystem;
using namespace hntt;

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

server::HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

std::string defaults_footer() {
  std::string s = "\nConfig defaults (override with --config <file.json>):\n";
  for (const auto& line : describe_defaults()) s += line + "\n";
  s += "\nEnvironment: HNTT_DATA_DIR sets the data directory (default ./hntt_data);\n"
       "HNTT_ANALYST_TOKEN sets the analyst bearer token for `serve`.\n"
       "Exit codes: 0 ok, 2 configuration error, 3 runtime error.\n";
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Human navigation Turing test laboratory"};
  app.require_subcommand(1);
  app.footer(defaults_footer());

  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string agent = "";
  bool quiet = false;
  app.add_option("--config", config_path, "Experiment config JSON")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Reseed every random stream from one value");
  app.add_option("--workers", workers, "Parallel environment workers for training")->check(CLI::PositiveNumber);
  app.add_option("--out", out_dir, "Data directory (overrides HNTT_DATA_DIR)");
  app.add_option("--agent", agent, "Agent kind: symbolic | hybrid | reward_shaping");
  app.add_flag("-q,--quiet", quiet, "Suppress progress output");

  auto* train = app.add_subcommand("train", "Train an agent with PPO; writes a checkpoint and learning curve");
  std::optional<std::int64_t> total_steps;
  train->add_option("--steps", total_steps, "Total environment steps");

  auto* rollout = app.add_subcommand("rollout", "Record a trajectory corpus from a checkpoint or the scripted proxy");
  std::string controller;
  std::optional<int> n;
  rollout->add_option("--controller", controller, "symbolic | hybrid | reward_shaping | scripted_proxy");
  rollout->add_option("-n,--count", n, "Number of episodes");

  auto* build = app.add_subcommand("build-study", "Filter, pair by goal and register a 6-trial study");
  std::string study_id, human_side = "scripted_proxy";
  build->add_option("--study-id", study_id, "Study id (default study-<agent>)");
  build->add_option("--human-side", human_side, "human | scripted_proxy");

  auto* serve = app.add_subcommand("serve", "Run the study HTTP service");
  std::string host = "127.0.0.1", token;
  int port = 8080;
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port (0 = any free port)");
  serve->add_option("--token", token, "Analyst bearer token (default $HNTT_ANALYST_TOKEN)");

  auto* judge = app.add_subcommand("judge-sim", "Answer a study with synthetic judges and export the dataset");
  pipeline::JudgeSimOptions sim;
  judge->add_option("--study-id", study_id, "Study id (default study-<agent>)");
  judge->add_option("--judges", sim.judges, "Number of judges")->check(CLI::PositiveNumber);
  judge->add_option("--p-correct", sim.p_correct, "Per-trial probability of picking the human video")
      ->check(CLI::Range(0.0, 1.0));

  auto* analyze = app.add_subcommand("analyze", "Bootstrap verdict, summaries, regression and agreement stats");
  std::string dataset, labels_a, labels_b;
  analyze->add_option("--study-id", study_id, "Study id (default study-<agent>)");
  analyze->add_option("--dataset", dataset, "Dataset JSON export or per-judge CSV")->check(CLI::ExistingFile);
  analyze->add_option("--labels-a", labels_a, "Annotator A code labels CSV")->check(CLI::ExistingFile);
  analyze->add_option("--labels-b", labels_b, "Annotator B code labels CSV")->check(CLI::ExistingFile);

  auto* report = app.add_subcommand("report", "Render analysis reports as a summary table");
  std::vector<std::string> report_files;
  report->add_option("reports", report_files, "Report JSON files (default: every report in the data directory)");

  auto* pipe = app.add_subcommand("pipeline", "train, rollout, build-study, judge-sim, analyze and report in one go");
  pipe->add_option("--steps", total_steps, "Total environment steps");
  pipe->add_option("--judges", sim.judges, "Number of synthetic judges")->check(CLI::PositiveNumber);
  pipe->add_option("--p-correct", sim.p_correct, "Per-trial probability of picking the human video")
      ->check(CLI::Range(0.0, 1.0));
  bool skip_train = false;
  pipe->add_flag("--skip-train", skip_train, "Reuse an existing checkpoint");

  auto* config = app.add_subcommand("config", "Print the effective configuration as JSON");
  auto* map_cmd = app.add_subcommand("map", "Print the map JSON (built-in default unless the config names one)");
  std::string map_out;
  map_cmd->add_option("--write", map_out, "Write to this file instead of stdout");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  const pipeline::Log log = [quiet](const std::string& msg) {
    if (!quiet) std::cerr << msg << "\n";
  };

  try {
    ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : load_experiment(config_path);
    if (!agent.empty()) cfg.agent_kind = ppo::agent_kind_from_string(agent);
    if (seed) cfg.reseed(*seed);
    if (workers) cfg.ppo.workers = *workers;
    if (total_steps) cfg.ppo.total_steps = *total_steps;
    if (n) cfg.corpus_size = *n;
    cfg.validate();
    const pipeline::Layout layout{out_dir.empty() ? pipeline::default_data_dir() : fs::path(out_dir)};
    const std::string sid = study_id.empty() ? pipeline::default_study_id(cfg.agent_kind) : study_id;

    if (config->parsed()) {
      std::cout << to_json(cfg).dump(2) << "\n";
    } else if (map_cmd->parsed()) {
      if (map_out.empty()) {
        std::cout << navsim::map_to_json(*cfg.load_map()).dump(2) << "\n";
      } else {
        navsim::save_map(*cfg.load_map(), map_out);
      }
    } else if (train->parsed()) {
      pipeline::train(cfg, layout, log);
    } else if (rollout->parsed()) {
      const traj::Controller c = controller.empty() ? traj::controller_for(cfg.agent_kind)
                                                    : traj::controller_from_string(controller);
      pipeline::rollout(cfg, layout, c, log);
    } else if (build->parsed()) {
      pipeline::BuildStudyOptions o;
      o.study_id = sid;
      o.human_side = traj::controller_from_string(human_side);
      pipeline::build_study(cfg, layout, o, log);
    } else if (serve->parsed()) {
      if (token.empty()) {
        if (const char* t = std::getenv("HNTT_ANALYST_TOKEN")) token = t;
      }
      if (token.empty()) log("warning: no analyst token set; export and study creation are disabled");
      fs::create_directories(layout.root);
      KvStore db(layout.database().string());
      study::StudyService service(db, {cfg.study.min_justification_chars, cfg.seeds.service});
      server::ServerOptions so;
      so.host = host;
      so.port = port;
      so.analyst_token = token;
      so.human_store = layout.corpus(traj::Controller::kHuman);
      so.seed = cfg.seeds.service;
      server::HttpServer srv(service, cfg.load_map(), so);
      const int bound = srv.bind();
      std::cout << "listening on http://" << host << ":" << bound << std::endl;
      g_server = &srv;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      srv.listen();
      g_server = nullptr;
    } else if (judge->parsed()) {
      pipeline::judge_sim(cfg, layout, sid, sim, log);
    } else if (analyze->parsed()) {
      std::optional<LabelSets> labels;
      if (labels_a.empty() != labels_b.empty()) throw ConfigError("--labels-a and --labels-b go together");
      if (!labels_a.empty()) labels = pipeline::load_labels(labels_a, labels_b);
      std::optional<fs::path> ds;
      if (!dataset.empty()) ds = dataset;
      pipeline::analyze(cfg, layout, sid, ds, labels, log);
    } else if (report->parsed()) {
      std::vector<fs::path> files(report_files.begin(), report_files.end());
      std::cout << pipeline::report(layout, files);
    } else if (pipe->parsed()) {
      if (!skip_train) pipeline::train(cfg, layout, log);
      pipeline::rollout(cfg, layout, traj::controller_for(cfg.agent_kind), log);
      pipeline::rollout(cfg, layout, traj::Controller::kScriptedProxy, log);
      pipeline::BuildStudyOptions o;
      o.study_id = sid;
      pipeline::build_study(cfg, layout, o, log);
      pipeline::judge_sim(cfg, layout, sid, sim, log);
      pipeline::analyze(cfg, layout, sid, std::nullopt, std::nullopt, log);
      std::cout << pipeline::report(layout, {layout.report(sid)});
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "error (" << e.code() << "): " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
