#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hntt/ppo.hpp"
#include "hntt/reward.hpp"
#include "hntt/stats.hpp"
#include "hntt/study.hpp"
#include "hntt/trajectory.hpp"

namespace hntt {

inline constexpr int kExperimentSchemaVersion = 1;

struct StudyParams {
  int trials = study::kTrialsPerStudy;
  double trim_seconds = 1.0;
  double min_duration_seconds = 10.0;
  std::size_t min_justification_chars = 3;
};

struct StatsParams {
  int iterations = 10'000;
  double level = 0.95;
  int subsample_n = 50;
  int subsample_repeats = 100;
  double accuracy_split = 0.8;
};

struct Seeds {
  std::uint64_t train = 0;
  std::uint64_t rollout = 1;
  std::uint64_t pairing = 2;
  std::uint64_t service = 3;
  std::uint64_t stats = 4;
  std::uint64_t judges = 5;
};

struct ExperimentConfig {
  std::string map_path;  // empty = built-in default map
  ppo::AgentKind agent_kind = ppo::AgentKind::kRewardShaping;
  ppo::PPOConfig ppo;
  reward::RewardConfig reward;
  int corpus_size = 100;
  ppo::ActMode rollout_mode = ppo::ActMode::kStochastic;
  StudyParams study;
  StatsParams stats;
  Seeds seeds;

  // Range checks plus existence of referenced files; throws ConfigError.
  void validate() const;
  std::shared_ptr<const navsim::WorldMap> load_map() const;
  // Applies --seed to every stream so one flag reseeds the whole run.
  void reseed(std::uint64_t seed);
};

nlohmann::json to_json(const ExperimentConfig& c);
// Missing fields keep their defaults; unknown top-level keys are rejected.
// Does not validate: call validate() once paths are resolved.
ExperimentConfig experiment_from_json(const nlohmann::json& j);
// Resolves a relative map path against the file's directory, then validates.
ExperimentConfig load_experiment(const std::filesystem::path& path);

// One line per configurable default with a short note on where it comes
// from, for --help.
std::vector<std::string> describe_defaults();

// ---------------------------------------------------------------------------
// Analysis

// Accepts the JSON export or the per-judge CSV (judge_id, accuracy,
// mean_uncertainty, familiarity_general, familiarity_specific, ...).
study::Dataset load_dataset(const std::filesystem::path& path);
study::Dataset dataset_from_csv(const std::string& text);

struct LabelSets {
  std::vector<stats::CodeLabel> annotator_a;
  std::vector<stats::CodeLabel> annotator_b;
};

// Bootstrap verdict, summaries, subsample validation, familiarity
// regression and (when labels are given) kappa and code proportions.
nlohmann::json analyze_dataset(const study::Dataset& d, const StatsParams& params, std::uint64_t seed,
                               const std::optional<LabelSets>& labels = std::nullopt);

// Tabular text with one row per report: median accuracy (IQR) [CI], then
// median uncertainty (IQR), then the verdicts.
std::string render_reports(const std::vector<nlohmann::json>& reports);

}  // namespace hntt
