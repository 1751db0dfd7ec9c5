#include "hntt/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <set>
#include <sstream>

#include "hntt/error.hpp"
#include "hntt/io.hpp"

namespace hntt {
namespace {

using nlohmann::json;

template <typename T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [k, _] : j.items()) {
    if (!known.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
  }
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << v;
  return os.str();
}

}  // namespace

void ExperimentConfig::validate() const {
  ppo.validate();
  reward.validate();
  if (!map_path.empty() && !std::filesystem::exists(map_path)) {
    throw ConfigError("map file not found: " + map_path);
  }
  if (corpus_size <= 0) throw ConfigError("corpus.size must be > 0");
  if (study.trials != study::kTrialsPerStudy) {
    throw ConfigError("study.trials must be " + std::to_string(study::kTrialsPerStudy));
  }
  if (study.trim_seconds < 0 || study.min_duration_seconds < 0) throw ConfigError("study durations must be >= 0");
  if (stats.iterations <= 0) throw ConfigError("stats.iterations must be > 0");
  if (!(stats.level > 0 && stats.level < 1)) throw ConfigError("stats.level must be in (0, 1)");
  if (stats.subsample_n <= 1 || stats.subsample_repeats <= 0) throw ConfigError("stats subsample settings must be positive");
  if (!(stats.accuracy_split >= 0 && stats.accuracy_split <= 1)) throw ConfigError("stats.accuracy_split must be in [0, 1]");
}

std::shared_ptr<const navsim::WorldMap> ExperimentConfig::load_map() const {
  if (map_path.empty()) return std::make_shared<const navsim::WorldMap>(navsim::default_map());
  return std::make_shared<const navsim::WorldMap>(navsim::load_map(map_path));
}

void ExperimentConfig::reseed(std::uint64_t seed) {
  seeds = {derive_seed(seed, 1), derive_seed(seed, 2), derive_seed(seed, 3),
           derive_seed(seed, 4), derive_seed(seed, 5), derive_seed(seed, 6)};
  seeds.train = seed;
  ppo.seed = seed;
}

json to_json(const ExperimentConfig& c) {
  return {{"schema", "hntt.experiment"},
          {"version", kExperimentSchemaVersion},
          {"map", c.map_path},
          {"agent_kind", ppo::to_string(c.agent_kind)},
          {"ppo", ppo::to_json(c.ppo)},
          {"reward", reward::to_json(c.reward)},
          {"corpus", {{"size", c.corpus_size}, {"mode", c.rollout_mode == ppo::ActMode::kStochastic ? "stochastic" : "deterministic"}}},
          {"study",
           {{"trials", c.study.trials},
            {"trim_seconds", c.study.trim_seconds},
            {"min_duration_seconds", c.study.min_duration_seconds},
            {"min_justification_chars", c.study.min_justification_chars}}},
          {"stats",
           {{"iterations", c.stats.iterations},
            {"level", c.stats.level},
            {"subsample_n", c.stats.subsample_n},
            {"subsample_repeats", c.stats.subsample_repeats},
            {"accuracy_split", c.stats.accuracy_split}}},
          {"seeds",
           {{"train", c.seeds.train},
            {"rollout", c.seeds.rollout},
            {"pairing", c.seeds.pairing},
            {"service", c.seeds.service},
            {"stats", c.seeds.stats},
            {"judges", c.seeds.judges}}}};
}

ExperimentConfig experiment_from_json(const json& j) {
  ExperimentConfig c;
  try {
    reject_unknown(j, {"schema", "version", "map", "agent_kind", "ppo", "reward", "corpus", "study", "stats", "seeds"},
                   "experiment config");
    if (j.value("schema", "hntt.experiment") != "hntt.experiment") throw ConfigError("not an experiment config");
    if (j.value("version", kExperimentSchemaVersion) != kExperimentSchemaVersion) {
      throw ConfigError("unsupported experiment config version");
    }
    take(j, "map", c.map_path);
    if (j.contains("agent_kind")) c.agent_kind = ppo::agent_kind_from_string(j.at("agent_kind").get<std::string>());
    if (j.contains("ppo")) c.ppo = ppo::ppo_config_from_json(j.at("ppo"), c.ppo);
    if (j.contains("reward")) c.reward = reward::reward_config_from_json(j.at("reward"), c.reward);
    if (j.contains("corpus")) {
      const json& k = j.at("corpus");
      take(k, "size", c.corpus_size);
      if (k.contains("mode")) {
        const auto m = k.at("mode").get<std::string>();
        if (m != "stochastic" && m != "deterministic") throw ConfigError("corpus.mode must be stochastic|deterministic");
        c.rollout_mode = m == "stochastic" ? ppo::ActMode::kStochastic : ppo::ActMode::kDeterministic;
      }
    }
    if (j.contains("study")) {
      const json& s = j.at("study");
      take(s, "trials", c.study.trials);
      take(s, "trim_seconds", c.study.trim_seconds);
      take(s, "min_duration_seconds", c.study.min_duration_seconds);
      take(s, "min_justification_chars", c.study.min_justification_chars);
    }
    if (j.contains("stats")) {
      const json& s = j.at("stats");
      take(s, "iterations", c.stats.iterations);
      take(s, "level", c.stats.level);
      take(s, "subsample_n", c.stats.subsample_n);
      take(s, "subsample_repeats", c.stats.subsample_repeats);
      take(s, "accuracy_split", c.stats.accuracy_split);
    }
    if (j.contains("seeds")) {
      const json& s = j.at("seeds");
      take(s, "train", c.seeds.train);
      take(s, "rollout", c.seeds.rollout);
      take(s, "pairing", c.seeds.pairing);
      take(s, "service", c.seeds.service);
      take(s, "stats", c.seeds.stats);
      take(s, "judges", c.seeds.judges);
      c.ppo.seed = c.seeds.train;
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed experiment config: ") + e.what());
  }
  return c;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  json j;
  try {
    j = json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  ExperimentConfig c = experiment_from_json(j);
  // Relative map paths resolve against the config file's directory.
  if (!c.map_path.empty() && std::filesystem::path(c.map_path).is_relative()) {
    const auto resolved = path.parent_path() / c.map_path;
    if (std::filesystem::exists(resolved)) c.map_path = resolved.string();
  }
  c.validate();
  return c;
}

std::vector<std::string> describe_defaults() {
  const ExperimentConfig c;
  std::vector<std::string> out;
  auto add = [&](const std::string& key, const std::string& value, const std::string& source) {
    std::string line = "  " + key + " = " + value;
    if (line.size() < 44) line.resize(44, ' ');
    out.push_back(line + " [" + source + "]");
  };
  auto num = [](double v) {
    std::ostringstream os;
    if (v == std::floor(v) && std::fabs(v) < 1e15) {
      os << static_cast<long long>(v);
    } else {
      os << v;
    }
    return os.str();
  };
  const char* hp = "agent hyperparameter table";
  add("ppo.batch_size", num(c.ppo.batch_size), hp);
  add("ppo.learning_rate", num(c.ppo.learning_rate), hp);
  add("ppo.optimizer", "adam(0.9, 0.999, 1e-8)", hp);
  add("ppo.gamma", num(c.ppo.gamma), hp);
  add("ppo.lambda", num(c.ppo.lambda), hp);
  add("ppo.clip_range", num(c.ppo.clip_range), hp);
  add("ppo.grad_norm_clip", num(c.ppo.grad_norm_clip), hp);
  add("ppo.entropy_coef", num(c.ppo.entropy_coef), hp);
  add("ppo.value_coef", num(c.ppo.value_coef), hp);
  add("ppo.minibatches_per_update", num(c.ppo.minibatches_per_update), hp);
  add("ppo.epochs_per_update", num(c.ppo.epochs_per_update), hp);
  add("ppo.dropout_rate", num(c.ppo.dropout_rate), hp);
  add("ppo.replay_batches", num(c.ppo.replay_batches), "replay buffer = 5 x batch, diagnostics only");
  add("ppo.hidden", num(c.ppo.hidden), "implementation choice");
  add("ppo.total_steps", num(static_cast<double>(c.ppo.total_steps)), "implementation choice");
  add("ppo.eval_interval", num(static_cast<double>(c.ppo.eval_interval)), "implementation choice");
  add("ppo.curve_window", num(c.ppo.curve_window), "learning curves smoothed over 200");
  add("ppo.workers", num(c.ppo.workers), "implementation choice");
  add("reward.step_penalty", num(c.reward.step_penalty), "base reward: per-step penalty");
  add("reward.death_penalty", num(c.reward.death_penalty), "base reward: one-time death penalty");
  add("reward.goal_reward", num(c.reward.goal_reward), "base reward: reaching the goal");
  add("reward.approach_scale", num(c.reward.approach_scale), "base reward: incremental approach term");
  add("reward.camera_threshold", num(c.reward.camera_threshold), "camera shaping: change threshold");
  add("reward.camera_penalty_scale", num(c.reward.camera_penalty_scale), "camera shaping: implementation choice");
  add("reward.collision_penalty", num(c.reward.collision_penalty), "collision shaping: per wall hit");
  add("reward.slow_threshold", num(c.reward.slow_threshold), "slow-movement shaping: 220 map units");
  add("reward.slow_penalty", num(c.reward.slow_penalty), "slow-movement shaping: penalty");
  add("corpus.size", num(c.corpus_size), "100 videos per agent");
  add("study.trials", num(c.study.trials), "6 trials per judge");
  add("study.trim_seconds", num(c.study.trim_seconds), "human tail trim, implementation choice");
  add("study.min_duration_seconds", num(c.study.min_duration_seconds), "videos under 10 s excluded");
  add("study.min_justification_chars", num(static_cast<double>(c.study.min_justification_chars)), "response screening");
  add("stats.iterations", num(c.stats.iterations), "bootstrap over 10000 iterations");
  add("stats.level", num(c.stats.level), "95% confidence interval");
  add("stats.subsample_n", num(c.stats.subsample_n), "subsample validation: 50 judges");
  add("stats.subsample_repeats", num(c.stats.subsample_repeats), "subsample validation: 100 repeats");
  add("stats.accuracy_split", num(c.stats.accuracy_split), "high accuracy = greater than 80%");
  return out;
}

// ---------------------------------------------------------------------------
// Analysis

study::Dataset dataset_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty_dataset", "dataset CSV is empty");
  auto split = [](const std::string& s) {
    std::vector<std::string> f;
    std::string cur;
    for (char ch : s) {
      if (ch == ',') {
        f.push_back(cur);
        cur.clear();
      } else if (ch != '\r') {
        cur += ch;
      }
    }
    f.push_back(cur);
    return f;
  };
  const auto header = split(line);
  auto col = [&](const std::string& name) -> int {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return static_cast<int>(i);
    }
    return -1;
  };
  const int c_judge = col("judge_id"), c_acc = col("accuracy"), c_unc = col("mean_uncertainty"),
            c_fg = col("familiarity_general"), c_fs = col("familiarity_specific");
  if (c_judge < 0 || c_acc < 0) throw ValidationError("invalid_dataset", "dataset CSV needs judge_id and accuracy columns");
  study::Dataset d;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto f = split(line);
    auto at = [&](int i) { return i >= 0 && static_cast<std::size_t>(i) < f.size() ? f[static_cast<std::size_t>(i)] : std::string(); };
    study::JudgeRow r;
    try {
      r.judge_id = at(c_judge);
      r.accuracy = std::stod(at(c_acc));
      if (!at(c_unc).empty()) r.mean_uncertainty = std::stod(at(c_unc));
      if (!at(c_fg).empty()) r.familiarity_general = std::stoi(at(c_fg));
      if (!at(c_fs).empty()) r.familiarity_specific = std::stoi(at(c_fs));
    } catch (const std::exception&) {
      throw ValidationError("invalid_dataset", "unparsable dataset row: " + line);
    }
    r.comprehension = json::object();
    for (int k = 1; k <= study::kTrialsPerStudy; ++k) {
      const std::string c = at(col("correct_" + std::to_string(k)));
      const std::string u = at(col("certainty_" + std::to_string(k)));
      if (c.empty()) continue;
      study::JudgeTrialRow t;
      t.position = k - 1;
      t.trial_index = k - 1;
      t.correct = c == "1";
      t.certainty = u.empty() ? 0 : std::stoi(u);
      r.trials.push_back(t);
    }
    d.judges.push_back(std::move(r));
  }
  return d;
}

study::Dataset load_dataset(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw NotFoundError("dataset " + path.string() + " not found; produce one with `hntt judge-sim` or the service export");
  }
  const std::string text = io::read_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    try {
      return study::dataset_from_json(json::parse(text));
    } catch (const json::exception& e) {
      throw ValidationError("invalid_dataset", std::string("malformed dataset JSON: ") + e.what());
    }
  }
  return dataset_from_csv(text);
}

json analyze_dataset(const study::Dataset& d, const StatsParams& params, std::uint64_t seed,
                     const std::optional<LabelSets>& labels) {
  if (d.judges.empty()) throw ValidationError("empty_dataset", "dataset has no judges");
  std::vector<double> acc, unc;
  std::map<std::string, double> acc_by_judge;
  json per_judge = json::array();
  for (const study::JudgeRow& r : d.judges) {
    acc.push_back(r.accuracy);
    unc.push_back(r.mean_uncertainty);
    acc_by_judge[r.judge_id] = r.accuracy;
    per_judge.push_back({{"judge_id", r.judge_id}, {"accuracy", r.accuracy}, {"mean_uncertainty", r.mean_uncertainty},
                         {"high_accuracy", stats::high_accuracy(r.accuracy, params.accuracy_split)}});
  }
  json report = {{"schema", "hntt.report"}, {"version", 1}, {"study_id", d.study_id},
                 {"agent_kind", d.agent_kind}, {"n_judges", d.judges.size()}, {"per_judge", per_judge}};

  Rng boot_rng(derive_seed(seed, 1));
  if (acc.size() >= 2) {
    const stats::BootstrapResult b = stats::bootstrap_median_ci(acc, params.iterations, params.level, boot_rng);
    report["accuracy"] = stats::to_json(b);
    report["verdict"] = b.passed ? "passes HNTT" : "fails HNTT";
  } else {
    report["accuracy"] = stats::to_json(stats::summary_stats(acc));
    report["verdict"] = "undetermined (fewer than 2 judges)";
  }
  report["uncertainty"] = stats::to_json(stats::summary_stats(unc));

  if (static_cast<int>(acc.size()) >= params.subsample_n) {
    Rng sub_rng(derive_seed(seed, 2));
    report["subsample"] = stats::to_json(stats::subsample_validation(acc, params.subsample_n, params.subsample_repeats,
                                                                     params.iterations, params.level, sub_rng));
  } else {
    report["subsample"] = {{"skipped", "fewer judges than subsample_n"}};
  }

  std::vector<double> y, spec, gen;
  for (const study::JudgeRow& r : d.judges) {
    if (!r.familiarity_general || !r.familiarity_specific) continue;
    y.push_back(r.accuracy);
    spec.push_back(*r.familiarity_specific);
    gen.push_back(*r.familiarity_general);
  }
  try {
    stats::RegressionResult reg = stats::ols_regression(y, {spec, gen});
    json rj = stats::to_json(reg);
    rj["covariates"] = {"familiarity_specific", "familiarity_general"};
    rj["n"] = y.size();
    report["regression"] = rj;
  } catch (const ArgumentError& e) {
    report["regression"] = {{"skipped", e.what()}};
  }

  if (labels) {
    const auto kappas = stats::kappa_by_code(labels->annotator_a, labels->annotator_b);
    json kj = json::array();
    double total = 0.0;
    for (const auto& k : kappas) {
      kj.push_back(stats::to_json(k));
      total += k.kappa;
    }
    Rng coin(derive_seed(seed, 3));
    const auto merged = stats::resolve_disagreements(labels->annotator_a, labels->annotator_b, coin);
    report["kappa"] = {{"by_code", kj}, {"mean", total / static_cast<double>(kappas.size())}};
    report["code_proportions"] = {
        {"humanlike", stats::to_json(stats::code_proportions(merged, stats::GroupBy::kHumanlike))},
        {"accuracy_group", stats::to_json(stats::code_proportions(merged, stats::GroupBy::kAccuracyGroup,
                                                                  acc_by_judge, params.accuracy_split))}};
  }
  return report;
}

std::string render_reports(const std::vector<json>& reports) {
  std::ostringstream out;
  std::size_t width = 16;
  for (const json& r : reports) width = std::max(width, r.value("agent_kind", std::string("agent")).size() + 2);
  auto name = [&](const json& r) {
    std::string n = r.value("agent_kind", "");
    if (n.empty()) n = r.value("study_id", "agent");
    n.resize(width, ' ');
    return n;
  };
  std::string head = "Agent";
  head.resize(width, ' ');
  out << head << "Median Accuracy (IQR) [95% CI]\n";
  for (const json& r : reports) {
    const json& a = r.at("accuracy");
    out << name(r) << fmt(a.at("median").get<double>()) << " (" << fmt(a.at("iqr")[0].get<double>()) << "-"
        << fmt(a.at("iqr")[1].get<double>()) << ")";
    if (a.contains("ci")) out << " [" << fmt(a.at("ci")[0].get<double>()) << ", " << fmt(a.at("ci")[1].get<double>()) << "]";
    out << "\n";
  }
  out << "\n" << head << "Median Uncertainty (IQR)\n";
  for (const json& r : reports) {
    const json& u = r.at("uncertainty");
    out << name(r) << fmt(u.at("median").get<double>()) << " (" << fmt(u.at("iqr")[0].get<double>()) << "-"
        << fmt(u.at("iqr")[1].get<double>()) << ")\n";
  }
  out << "\n";
  for (const json& r : reports) out << name(r) << r.value("verdict", "") << "\n";
  return out.str();
}

}  // namespace hntt
