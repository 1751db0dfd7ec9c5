#pragma once

#include <array>
#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hntt/kvstore.hpp"
#include "hntt/rng.hpp"
#include "hntt/trajectory.hpp"

namespace hntt::study {

inline constexpr int kTrialsPerStudy = 6;
inline constexpr int kStudySchemaVersion = 1;

struct Question {
  std::string id;
  std::string text;
  std::vector<std::string> options;  // ordinal scale, first = 1
};

// Two-item familiarity battery and the comprehension checks, asked once
// per judge before the trials.
std::vector<Question> familiarity_battery();
std::vector<Question> comprehension_battery();
// The three per-trial questions shown with every pair.
std::vector<Question> trial_questions();

struct StudyTrial {
  traj::TrialPair pair;
  nlohmann::json replay_a;  // replay of pair.video_a
  nlohmann::json replay_b;
};

struct StudyDefinition {
  std::string study_id;
  std::string agent_kind;
  std::vector<StudyTrial> trials;
  std::vector<Question> familiarity_questions = familiarity_battery();
  std::vector<Question> comprehension_questions = comprehension_battery();

  // Exactly kTrialsPerStudy valid pairs with replays.
  void validate() const;
};

nlohmann::json to_json(const StudyDefinition& s);
StudyDefinition study_from_json(const nlohmann::json& j);

// Resolves each pair's trajectories from `store` and embeds their replays.
StudyDefinition build_study(std::string study_id, std::string agent_kind,
                            const std::vector<traj::TrialPair>& pairs,
                            const traj::TrajectoryStore& store);

enum class SessionStatus { kOpen, kComplete };
std::string to_string(SessionStatus s);

struct Response {
  int trial_index = 0;  // index into StudyDefinition::trials
  int position = 0;     // 0-based presentation position
  traj::Slot choice = traj::Slot::kA;
  std::string justification;
  int certainty = 3;  // 1 = extremely certain ... 5 = extremely uncertain
  bool correct = false;
  double page_seconds = 0.0;
};

struct SurveyAnswers {
  int familiarity_general = 0;  // 1..5
  int familiarity_specific = 0;
  nlohmann::json comprehension = nlohmann::json::object();
};

struct Session {
  std::string session_id;
  std::string study_id;
  std::string judge_id;
  std::array<int, kTrialsPerStudy> trial_order{};
  std::array<traj::Slot, kTrialsPerStudy> human_slot{};  // by trial index
  std::vector<Response> responses;
  std::optional<SurveyAnswers> survey;
  SessionStatus status = SessionStatus::kOpen;

  std::optional<int> next_trial() const;
};

nlohmann::json to_json(const Session& s);
Session session_from_json(const nlohmann::json& j);

struct ResponseInput {
  int trial_index = -1;
  std::string choice;
  std::string justification;
  int certainty = 0;
  double page_seconds = 0.0;
};

struct Ack {
  SessionStatus status = SessionStatus::kOpen;
  int answered = 0;
  int remaining = 0;
};

struct JudgeTrialRow {
  int trial_index = 0;
  int position = 0;
  int goal_index = 0;
  std::string choice;
  std::string human_slot;
  bool correct = false;
  int certainty = 0;
  std::string justification;
  bool duplicate_justification = false;
  double page_seconds = 0.0;
};

struct JudgeRow {
  std::string judge_id;
  std::string session_id;
  double accuracy = 0.0;
  double mean_uncertainty = 0.0;
  std::optional<int> familiarity_general;
  std::optional<int> familiarity_specific;
  nlohmann::json comprehension;
  std::vector<JudgeTrialRow> trials;
};

struct Dataset {
  std::string study_id;
  std::string agent_kind;
  std::vector<JudgeRow> judges;
};

nlohmann::json to_json(const Dataset& d);
Dataset dataset_from_json(const nlohmann::json& j);
// One row per judge: judge_id, accuracy, mean_uncertainty, familiarity
// columns, then correct_k and certainty_k for k = 1..6 by position.
std::string to_csv(const Dataset& d);

struct ServiceOptions {
  std::size_t min_justification_chars = 3;
  std::uint64_t seed = 0;
};

class StudyService {
 public:
  StudyService(KvStore& store, ServiceOptions options = {});

  // Stores the definition; assigns an id when study_id is empty.
  std::string create_study(StudyDefinition def);
  StudyDefinition get_study(const std::string& study_id);

  Session create_session(const std::string& study_id, const std::string& judge_id);
  Session create_session(const std::string& study_id, const std::string& judge_id, Rng& rng);
  Session get_session(const std::string& session_id);

  // Judge-facing payload for the next unanswered trial; contains replays
  // labelled A/B and the questions, never the ground truth.
  nlohmann::json next_trial(const std::string& session_id);
  Ack submit_response(const std::string& session_id, const ResponseInput& in);
  void submit_survey(const std::string& session_id, const SurveyAnswers& answers);

  Dataset export_dataset(const std::string& study_id);

 private:
  KvStore& store_;
  ServiceOptions options_;
  std::mutex rng_mu_;
  Rng rng_;
};

// Fields a judge-facing JSON document must never contain.
bool leaks_ground_truth(const nlohmann::json& payload);

}  // namespace hntt::study
