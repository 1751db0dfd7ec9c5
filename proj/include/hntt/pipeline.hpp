#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hntt/experiment.hpp"
#include "hntt/study.hpp"

namespace hntt::pipeline {

// Where each command reads and writes under the data directory.
struct Layout {
  std::filesystem::path root;

  std::filesystem::path agent_dir(ppo::AgentKind kind) const;
  std::filesystem::path checkpoint(ppo::AgentKind kind) const;
  std::filesystem::path curve(ppo::AgentKind kind) const;
  std::filesystem::path corpus(traj::Controller c) const;
  std::filesystem::path study_file(const std::string& study_id) const;
  std::filesystem::path pairs_file(const std::string& study_id) const;
  std::filesystem::path database() const;
  std::filesystem::path export_json(const std::string& study_id) const;
  std::filesystem::path export_csv(const std::string& study_id) const;
  std::filesystem::path report(const std::string& study_id) const;
  std::filesystem::path summary() const;
};

// $HNTT_DATA_DIR, else ./hntt_data.
std::filesystem::path default_data_dir();

// Timestamp for new records: $SOURCE_DATE_EPOCH when set, else now.
std::string record_timestamp();

std::string default_study_id(ppo::AgentKind kind);

using Log = std::function<void(const std::string&)>;

ppo::TrainResult train(const ExperimentConfig& cfg, const Layout& layout, const Log& log = {});

// Agent controllers roll out their checkpoint; kHuman is not recordable
// here (use play mode) and kScriptedProxy needs no checkpoint. Returns the
// number of trajectories written.
int rollout(const ExperimentConfig& cfg, const Layout& layout, traj::Controller controller,
            const Log& log = {});

struct BuildStudyOptions {
  std::string study_id;  // empty = default_study_id(agent_kind)
  traj::Controller human_side = traj::Controller::kScriptedProxy;
};

// Filters both corpora, pairs by goal, writes the pairs and the study
// definition and registers it with the study database.
study::StudyDefinition build_study(const ExperimentConfig& cfg, const Layout& layout,
                                   const BuildStudyOptions& options, const Log& log = {});

struct JudgeSimOptions {
  int judges = 92;
  double p_correct = 0.5;  // per-trial probability of picking the human video
  std::string judge_prefix = "judge";
};

// Synthetic judges answering through the study service. Judges that
// already have a session are left alone, so reruns are no-ops.
void simulate_judges(study::StudyService& service, const std::string& study_id,
                     const JudgeSimOptions& options, std::uint64_t seed);

// Runs simulate_judges against the data directory's database and writes
// the JSON and CSV exports.
study::Dataset judge_sim(const ExperimentConfig& cfg, const Layout& layout, const std::string& study_id,
                         const JudgeSimOptions& options, const Log& log = {});

// Writes reports/<study>.json from a dataset file (export JSON or CSV).
nlohmann::json analyze(const ExperimentConfig& cfg, const Layout& layout, const std::string& study_id,
                       const std::optional<std::filesystem::path>& dataset,
                       const std::optional<LabelSets>& labels, const Log& log = {});

// Renders every report under reports/ (or the given files) into
// reports/summary.txt and returns the text.
std::string report(const Layout& layout, const std::vector<std::filesystem::path>& reports = {});

LabelSets load_labels(const std::filesystem::path& a, const std::filesystem::path& b);

}  // namespace hntt::pipeline
