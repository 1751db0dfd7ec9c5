#include "hntt/study.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <numeric>
#include <regex>
#include <sstream>

#include "hntt/error.hpp"
#include "hntt/io.hpp"

namespace hntt::study {
namespace {

using nlohmann::json;

const std::vector<std::string> kFamiliarityScale = {
    "Not at all familiar", "Slightly familiar", "Moderately familiar", "Very familiar",
    "Extremely familiar"};

json to_json(const Question& q) { return {{"id", q.id}, {"text", q.text}, {"options", q.options}}; }

Question question_from_json(const json& j) {
  return {j.at("id").get<std::string>(), j.at("text").get<std::string>(),
          j.at("options").get<std::vector<std::string>>()};
}

json questions_json(const std::vector<Question>& qs) {
  json arr = json::array();
  for (const Question& q : qs) arr.push_back(to_json(q));
  return arr;
}

std::vector<Question> questions_from_json(const json& j) {
  std::vector<Question> out;
  for (const json& q : j) out.push_back(question_from_json(q));
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Lowercased with whitespace runs collapsed, for duplicate detection.
std::string normalise(const std::string& s) {
  std::string out;
  bool space = false;
  for (unsigned char c : trim(s)) {
    if (std::isspace(c)) {
      space = true;
      continue;
    }
    if (space && !out.empty()) out += ' ';
    space = false;
    out += static_cast<char>(std::tolower(c));
  }
  return out;
}

std::string study_key(const std::string& id) { return "study/" + id; }
std::string session_key(const std::string& id) { return "session/" + id; }
std::string judge_key(const std::string& study, const std::string& judge) { return "judge/" + study + "/" + judge; }
std::string roster_prefix(const std::string& study) { return "roster/" + study + "/"; }

json response_json(const Response& r) {
  return {{"trial_index", r.trial_index},   {"position", r.position},
          {"choice", traj::to_string(r.choice)}, {"justification", r.justification},
          {"certainty", r.certainty},       {"correct", r.correct},
          {"page_seconds", r.page_seconds}};
}

Response response_from_json(const json& j) {
  Response r;
  r.trial_index = j.at("trial_index").get<int>();
  r.position = j.at("position").get<int>();
  r.choice = traj::slot_from_string(j.at("choice").get<std::string>());
  r.justification = j.at("justification").get<std::string>();
  r.certainty = j.at("certainty").get<int>();
  r.correct = j.at("correct").get<bool>();
  r.page_seconds = j.at("page_seconds").get<double>();
  return r;
}

}  // namespace

std::vector<Question> familiarity_battery() {
  return {
      {"familiarity_general", "How familiar are you with action games played from a third-person camera?", kFamiliarityScale},
      {"familiarity_specific", "How familiar are you with the particular game shown in the videos?", kFamiliarityScale},
  };
}

std::vector<Question> comprehension_battery() {
  return {
      {"expected_time", "Roughly how long do you expect this survey to take?",
       {"Under 10 minutes", "About 30 minutes", "Over an hour"}},
      {"all_required", "Must every question be answered before you can finish?", {"Yes", "No"}},
  };
}

std::vector<Question> trial_questions() {
  return {
      {"choice", "Which video do you think was controlled by a person?", {"A", "B"}},
      {"justification", "What in the videos led you to that choice?", {}},
      {"certainty", "How sure are you?",
       {"Extremely certain", "Somewhat certain", "Neither certain nor uncertain", "Somewhat uncertain",
        "Extremely uncertain"}},
  };
}

void StudyDefinition::validate() const {
  if (static_cast<int>(trials.size()) != kTrialsPerStudy) {
    throw ValidationError("invalid_study", "a study needs exactly " + std::to_string(kTrialsPerStudy) +
                                               " trials, got " + std::to_string(trials.size()));
  }
  std::vector<std::string> seen;
  for (const StudyTrial& t : trials) {
    t.pair.validate();
    for (const std::string& v : {t.pair.video_a, t.pair.video_b}) {
      if (std::find(seen.begin(), seen.end(), v) != seen.end()) {
        throw ValidationError("invalid_study", "trajectory " + v + " appears in two trials");
      }
      seen.push_back(v);
    }
    for (const json* r : {&t.replay_a, &t.replay_b}) {
      if (!r->is_object() || r->value("schema", "") != "hntt.replay" || !r->contains("frames")) {
        throw ValidationError("invalid_study", "trial " + t.pair.pair_id + " lacks a replay payload");
      }
      if (r->at("goal_index").get<int>() != t.pair.goal_index) {
        throw ValidationError("invalid_study", "trial " + t.pair.pair_id + " replay goal mismatch");
      }
    }
  }
}

json to_json(const StudyDefinition& s) {
  json trials = json::array();
  for (const StudyTrial& t : s.trials) {
    trials.push_back({{"pair", traj::to_json(t.pair)}, {"replay_a", t.replay_a}, {"replay_b", t.replay_b}});
  }
  return {{"schema", "hntt.study"},
          {"version", kStudySchemaVersion},
          {"study_id", s.study_id},
          {"agent_kind", s.agent_kind},
          {"trials", trials},
          {"familiarity_questions", questions_json(s.familiarity_questions)},
          {"comprehension_questions", questions_json(s.comprehension_questions)}};
}

StudyDefinition study_from_json(const json& j) {
  StudyDefinition s;
  try {
    if (j.value("schema", "hntt.study") != "hntt.study" || j.value("version", kStudySchemaVersion) != kStudySchemaVersion) {
      throw ValidationError("invalid_study", "unsupported study schema");
    }
    s.study_id = j.value("study_id", "");
    s.agent_kind = j.at("agent_kind").get<std::string>();
    for (const json& t : j.at("trials")) {
      s.trials.push_back({traj::trial_pair_from_json(t.at("pair")), t.at("replay_a"), t.at("replay_b")});
    }
    if (j.contains("familiarity_questions")) s.familiarity_questions = questions_from_json(j.at("familiarity_questions"));
    if (j.contains("comprehension_questions")) s.comprehension_questions = questions_from_json(j.at("comprehension_questions"));
  } catch (const json::exception& e) {
    throw ValidationError("invalid_study", std::string("malformed study: ") + e.what());
  }
  s.validate();
  return s;
}

StudyDefinition build_study(std::string study_id, std::string agent_kind,
                            const std::vector<traj::TrialPair>& pairs,
                            const traj::TrajectoryStore& store) {
  StudyDefinition s;
  s.study_id = std::move(study_id);
  s.agent_kind = std::move(agent_kind);
  for (const traj::TrialPair& p : pairs) {
    s.trials.push_back({p, traj::replay_json(store.get(p.video_a)), traj::replay_json(store.get(p.video_b))});
  }
  s.validate();
  return s;
}

std::string to_string(SessionStatus s) { return s == SessionStatus::kOpen ? "open" : "complete"; }

std::optional<int> Session::next_trial() const {
  if (responses.size() >= trial_order.size()) return std::nullopt;
  return trial_order[responses.size()];
}

json to_json(const Session& s) {
  json responses = json::array();
  for (const Response& r : s.responses) responses.push_back(response_json(r));
  json slots = json::array();
  for (traj::Slot x : s.human_slot) slots.push_back(traj::to_string(x));
  json out = {{"session_id", s.session_id}, {"study_id", s.study_id},  {"judge_id", s.judge_id},
              {"trial_order", s.trial_order}, {"human_slot", slots},  {"responses", responses},
              {"status", to_string(s.status)}};
  if (s.survey) {
    out["survey"] = {{"familiarity_general", s.survey->familiarity_general},
                     {"familiarity_specific", s.survey->familiarity_specific},
                     {"comprehension", s.survey->comprehension}};
  }
  return out;
}

Session session_from_json(const json& j) {
  Session s;
  s.session_id = j.at("session_id").get<std::string>();
  s.study_id = j.at("study_id").get<std::string>();
  s.judge_id = j.at("judge_id").get<std::string>();
  s.trial_order = j.at("trial_order").get<std::array<int, kTrialsPerStudy>>();
  const auto slots = j.at("human_slot").get<std::vector<std::string>>();
  for (std::size_t i = 0; i < s.human_slot.size(); ++i) s.human_slot[i] = traj::slot_from_string(slots.at(i));
  for (const json& r : j.at("responses")) s.responses.push_back(response_from_json(r));
  s.status = j.at("status").get<std::string>() == "complete" ? SessionStatus::kComplete : SessionStatus::kOpen;
  if (j.contains("survey")) {
    const json& v = j.at("survey");
    s.survey = SurveyAnswers{v.at("familiarity_general").get<int>(), v.at("familiarity_specific").get<int>(),
                             v.at("comprehension")};
  }
  return s;
}

// ---------------------------------------------------------------------------
// Export

json to_json(const Dataset& d) {
  json judges = json::array();
  for (const JudgeRow& r : d.judges) {
    json trials = json::array();
    for (const JudgeTrialRow& t : r.trials) {
      trials.push_back({{"trial_index", t.trial_index},
                        {"position", t.position},
                        {"goal_index", t.goal_index},
                        {"choice", t.choice},
                        {"human_slot", t.human_slot},
                        {"correct", t.correct},
                        {"certainty", t.certainty},
                        {"justification", t.justification},
                        {"duplicate_justification", t.duplicate_justification},
                        {"page_seconds", t.page_seconds}});
    }
    judges.push_back({{"judge_id", r.judge_id},
                      {"session_id", r.session_id},
                      {"accuracy", r.accuracy},
                      {"mean_uncertainty", r.mean_uncertainty},
                      {"familiarity_general", r.familiarity_general ? json(*r.familiarity_general) : json(nullptr)},
                      {"familiarity_specific", r.familiarity_specific ? json(*r.familiarity_specific) : json(nullptr)},
                      {"comprehension", r.comprehension},
                      {"trials", trials}});
  }
  return {{"schema", "hntt.dataset"}, {"version", 1}, {"study_id", d.study_id}, {"agent_kind", d.agent_kind}, {"judges", judges}};
}

Dataset dataset_from_json(const json& j) {
  Dataset d;
  try {
    d.study_id = j.value("study_id", "");
    d.agent_kind = j.value("agent_kind", "");
    for (const json& r : j.at("judges")) {
      JudgeRow row;
      row.judge_id = r.at("judge_id").get<std::string>();
      row.session_id = r.value("session_id", "");
      row.accuracy = r.at("accuracy").get<double>();
      row.mean_uncertainty = r.value("mean_uncertainty", 0.0);
      if (r.contains("familiarity_general") && !r["familiarity_general"].is_null()) row.familiarity_general = r["familiarity_general"].get<int>();
      if (r.contains("familiarity_specific") && !r["familiarity_specific"].is_null()) row.familiarity_specific = r["familiarity_specific"].get<int>();
      row.comprehension = r.value("comprehension", json::object());
      for (const json& t : r.value("trials", json::array())) {
        JudgeTrialRow tr;
        tr.trial_index = t.at("trial_index").get<int>();
        tr.position = t.at("position").get<int>();
        tr.goal_index = t.value("goal_index", 0);
        tr.choice = t.at("choice").get<std::string>();
        tr.human_slot = t.at("human_slot").get<std::string>();
        tr.correct = t.at("correct").get<bool>();
        tr.certainty = t.at("certainty").get<int>();
        tr.justification = t.value("justification", "");
        tr.duplicate_justification = t.value("duplicate_justification", false);
        tr.page_seconds = t.value("page_seconds", 0.0);
        row.trials.push_back(std::move(tr));
      }
      d.judges.push_back(std::move(row));
    }
  } catch (const json::exception& e) {
    throw ValidationError("invalid_dataset", std::string("malformed dataset: ") + e.what());
  }
  return d;
}

std::string to_csv(const Dataset& d) {
  std::ostringstream out;
  out.precision(17);
  out << "judge_id,accuracy,mean_uncertainty,familiarity_general,familiarity_specific";
  for (int k = 1; k <= kTrialsPerStudy; ++k) out << ",correct_" << k << ",certainty_" << k;
  out << "\n";
  for (const JudgeRow& r : d.judges) {
    out << r.judge_id << ',' << r.accuracy << ',' << r.mean_uncertainty << ',';
    if (r.familiarity_general) out << *r.familiarity_general;
    out << ',';
    if (r.familiarity_specific) out << *r.familiarity_specific;
    std::vector<const JudgeTrialRow*> by_pos(kTrialsPerStudy, nullptr);
    for (const JudgeTrialRow& t : r.trials) {
      if (t.position >= 0 && t.position < kTrialsPerStudy) by_pos[static_cast<std::size_t>(t.position)] = &t;
    }
    for (const JudgeTrialRow* t : by_pos) {
      if (t) {
        out << ',' << (t->correct ? 1 : 0) << ',' << t->certainty;
      } else {
        out << ",,";
      }
    }
    out << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Service

StudyService::StudyService(KvStore& store, ServiceOptions options)
    : store_(store), options_(options), rng_(derive_seed(options.seed, 0x57D)) {}

std::string StudyService::create_study(StudyDefinition def) {
  def.validate();
  if (def.study_id.empty()) {
    std::lock_guard lock(rng_mu_);
    def.study_id = "st" + io::hex64(rng_());
  }
  if (def.study_id.find('/') != std::string::npos) throw ValidationError("invalid_study", "study id may not contain '/'");
  store_.transact([&](KvStore::Txn& t) {
    if (!t.insert_new(study_key(def.study_id), to_json(def).dump())) {
      throw ValidationError("duplicate_study", "study " + def.study_id + " already exists");
    }
  });
  return def.study_id;
}

StudyDefinition StudyService::get_study(const std::string& study_id) {
  const auto raw = store_.get(study_key(study_id));
  if (!raw) throw NotFoundError("unknown study " + study_id);
  return study_from_json(json::parse(*raw));
}

Session StudyService::create_session(const std::string& study_id, const std::string& judge_id) {
  std::lock_guard lock(rng_mu_);
  return create_session(study_id, judge_id, rng_);
}

Session StudyService::create_session(const std::string& study_id, const std::string& judge_id, Rng& rng) {
  if (trim(judge_id).empty()) throw ValidationError("invalid_judge", "judge_id is required");
  if (judge_id.find_first_of("/,\"\r\n") != std::string::npos) {
    throw ValidationError("invalid_judge", "judge_id may not contain '/', ',', quotes or line breaks");
  }
  Session s;
  s.study_id = study_id;
  s.judge_id = judge_id;
  s.session_id = "s" + io::hex64(rng());
  std::iota(s.trial_order.begin(), s.trial_order.end(), 0);
  hntt::shuffle(s.trial_order.begin(), s.trial_order.end(), rng);
  for (traj::Slot& slot : s.human_slot) slot = uniform_index(rng, 2) == 0 ? traj::Slot::kA : traj::Slot::kB;

  store_.transact([&](KvStore::Txn& t) {
    if (!t.get(study_key(study_id))) throw NotFoundError("unknown study " + study_id);
    if (!t.insert_new(judge_key(study_id, judge_id), s.session_id)) {
      throw ValidationError("duplicate_judge", "judge " + judge_id + " already has a session for study " + study_id);
    }
    t.put(session_key(s.session_id), to_json(s).dump());
    t.put(roster_prefix(study_id) + s.session_id, "");
  });
  return s;
}

Session StudyService::get_session(const std::string& session_id) {
  const auto raw = store_.get(session_key(session_id));
  if (!raw) throw NotFoundError("unknown session " + session_id);
  return session_from_json(json::parse(*raw));
}

json StudyService::next_trial(const std::string& session_id) {
  const Session s = get_session(session_id);
  const auto next = s.next_trial();
  if (!next) {
    return {{"session_id", s.session_id}, {"status", to_string(s.status)}, {"answered", s.responses.size()},
            {"total", kTrialsPerStudy}};
  }
  const StudyDefinition def = get_study(s.study_id);
  const StudyTrial& trial = def.trials[static_cast<std::size_t>(*next)];
  // The canonical pair keeps the human in slot A; the session decides where
  // the judge actually sees it.
  const json& human = trial.pair.human_slot == traj::Slot::kA ? trial.replay_a : trial.replay_b;
  const json& agent = trial.pair.human_slot == traj::Slot::kA ? trial.replay_b : trial.replay_a;
  const bool human_left = s.human_slot[static_cast<std::size_t>(*next)] == traj::Slot::kA;
  json questions = json::array();
  for (const Question& q : trial_questions()) questions.push_back(to_json(q));
  return {{"session_id", s.session_id},
          {"status", to_string(s.status)},
          {"trial_index", *next},
          {"position", s.responses.size()},
          {"total", kTrialsPerStudy},
          {"videos", {{"A", human_left ? human : agent}, {"B", human_left ? agent : human}}},
          {"questions", questions}};
}

Ack StudyService::submit_response(const std::string& session_id, const ResponseInput& in) {
  Ack ack;
  store_.transact([&](KvStore::Txn& t) {
    const auto raw = t.get(session_key(session_id));
    if (!raw) throw NotFoundError("unknown session " + session_id);
    Session s = session_from_json(json::parse(*raw));
    if (s.status != SessionStatus::kOpen) throw ValidationError("session_closed", "session " + session_id + " is complete");
    const auto next = s.next_trial();
    if (!next || in.trial_index != *next) {
      throw ValidationError("out_of_order_trial", "expected trial_index " + (next ? std::to_string(*next) : std::string("none")) +
                                                      ", got " + std::to_string(in.trial_index));
    }
    if (in.choice != "A" && in.choice != "B") throw ValidationError("invalid_choice", "choice must be \"A\" or \"B\"");
    const std::string text = trim(in.justification);
    if (text.empty()) throw ValidationError("empty_justification", "justification is required");
    if (text.size() < options_.min_justification_chars) {
      throw ValidationError("justification_too_short", "justification must have at least " +
                                                           std::to_string(options_.min_justification_chars) + " characters");
    }
    if (in.certainty < 1 || in.certainty > 5) throw ValidationError("certainty_out_of_range", "certainty must be in 1..5");
    if (!(in.page_seconds >= 0.0)) throw ValidationError("invalid_timing", "page_seconds must be >= 0");

    Response r;
    r.trial_index = in.trial_index;
    r.position = static_cast<int>(s.responses.size());
    r.choice = traj::slot_from_string(in.choice);
    r.justification = in.justification;
    r.certainty = in.certainty;
    r.correct = r.choice == s.human_slot[static_cast<std::size_t>(in.trial_index)];
    r.page_seconds = in.page_seconds;
    s.responses.push_back(std::move(r));
    if (static_cast<int>(s.responses.size()) == kTrialsPerStudy) s.status = SessionStatus::kComplete;
    t.put(session_key(session_id), to_json(s).dump());
    ack.status = s.status;
    ack.answered = static_cast<int>(s.responses.size());
    ack.remaining = kTrialsPerStudy - ack.answered;
  });
  return ack;
}

void StudyService::submit_survey(const std::string& session_id, const SurveyAnswers& answers) {
  for (int v : {answers.familiarity_general, answers.familiarity_specific}) {
    if (v < 1 || v > 5) throw ValidationError("familiarity_out_of_range", "familiarity answers must be in 1..5");
  }
  store_.transact([&](KvStore::Txn& t) {
    const auto raw = t.get(session_key(session_id));
    if (!raw) throw NotFoundError("unknown session " + session_id);
    Session s = session_from_json(json::parse(*raw));
    if (s.survey) throw ValidationError("survey_already_submitted", "survey answers are immutable once accepted");
    s.survey = answers;
    t.put(session_key(session_id), to_json(s).dump());
  });
}

Dataset StudyService::export_dataset(const std::string& study_id) {
  Dataset d;
  std::vector<Session> sessions;
  StudyDefinition def;
  store_.transact([&](KvStore::Txn& t) {
    const auto raw = t.get(study_key(study_id));
    if (!raw) throw NotFoundError("unknown study " + study_id);
    def = study_from_json(json::parse(*raw));
    for (const auto& [key, _] : t.scan(roster_prefix(study_id))) {
      const auto sid = key.substr(roster_prefix(study_id).size());
      sessions.push_back(session_from_json(json::parse(*t.get(session_key(sid)))));
    }
  });
  d.study_id = study_id;
  d.agent_kind = def.agent_kind;

  std::erase_if(sessions, [](const Session& s) { return s.status != SessionStatus::kComplete; });
  if (sessions.empty()) throw ValidationError("empty_dataset", "study " + study_id + " has no complete sessions");
  std::sort(sessions.begin(), sessions.end(), [](const Session& a, const Session& b) { return a.judge_id < b.judge_id; });

  std::map<std::string, int> text_count;
  for (const Session& s : sessions) {
    for (const Response& r : s.responses) ++text_count[normalise(r.justification)];
  }
  for (const Session& s : sessions) {
    JudgeRow row;
    row.judge_id = s.judge_id;
    row.session_id = s.session_id;
    double correct = 0.0, certainty = 0.0;
    for (const Response& r : s.responses) {
      JudgeTrialRow tr;
      tr.trial_index = r.trial_index;
      tr.position = r.position;
      tr.goal_index = def.trials[static_cast<std::size_t>(r.trial_index)].pair.goal_index;
      tr.choice = traj::to_string(r.choice);
      tr.human_slot = traj::to_string(s.human_slot[static_cast<std::size_t>(r.trial_index)]);
      tr.correct = r.correct;
      tr.certainty = r.certainty;
      tr.justification = r.justification;
      tr.duplicate_justification = text_count[normalise(r.justification)] > 1;
      tr.page_seconds = r.page_seconds;
      correct += r.correct ? 1.0 : 0.0;
      certainty += r.certainty;
      row.trials.push_back(std::move(tr));
    }
    row.accuracy = correct / static_cast<double>(s.responses.size());
    row.mean_uncertainty = certainty / static_cast<double>(s.responses.size());
    if (s.survey) {
      row.familiarity_general = s.survey->familiarity_general;
      row.familiarity_specific = s.survey->familiarity_specific;
      row.comprehension = s.survey->comprehension;
    } else {
      row.comprehension = json::object();
    }
    d.judges.push_back(std::move(row));
  }
  return d;
}

bool leaks_ground_truth(const json& payload) {
  static const std::vector<std::string> kKeys = {"human_slot", "controller", "controller_a", "controller_b",
                                                 "correct",    "video_a",    "video_b",      "pair_id",
                                                 "agent_kind", "trajectory_id", "trial_order"};
  static const std::vector<std::string> kValues = {"scripted_proxy", "reward_shaping", "symbolic", "hybrid"};
  if (payload.is_object()) {
    for (const auto& [k, v] : payload.items()) {
      if (std::find(kKeys.begin(), kKeys.end(), k) != kKeys.end()) return true;
      if (leaks_ground_truth(v)) return true;
    }
  } else if (payload.is_array()) {
    for (const json& v : payload) {
      if (leaks_ground_truth(v)) return true;
    }
  } else if (payload.is_string()) {
    const auto& s = payload.get_ref<const std::string&>();
    // Recorded trajectory ids: 't' (rollouts) or 'h' (play mode) plus 16 hex digits.
    static const std::regex kTrajectoryId("[th][0-9a-f]{16}");
    return std::find(kValues.begin(), kValues.end(), s) != kValues.end() || std::regex_match(s, kTrajectoryId);
  }
  return false;
}

}  // namespace hntt::study
