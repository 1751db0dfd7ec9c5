// Acceptance run: one PASS/FAIL line per criterion on stdout, progress on
// stderr. Exit status is the number of failed criteria (capped at 100).
//
// Trained agents are cached under --work-dir together with their training
// time, so reruns with the same settings skip retraining.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <numeric>
#include <set>

#include <CLI11.hpp>

#include "hntt/error.hpp"
#include "hntt/experiment.hpp"
#include "hntt/io.hpp"
#include "hntt/pipeline.hpp"
#include "hntt/reward.hpp"
#include "hntt/stats.hpp"

namespace {

namespace fs = std::filesystem;
using namespace hntt;
using nlohmann::json;
using Clock = std::chrono::steady_clock;
using nn::Matrix;
using nn::Vector;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_failed = 0;

void report(const std::string& id, const Outcome& o, double seconds) {
  char t[32];
  std::snprintf(t, sizeof t, "%.1fs", seconds);
  std::cout << (o.pass ? "PASS " : "FAIL ") << id << " (" << t << "): " << o.detail << std::endl;
  if (!o.pass) ++g_failed;
}

template <typename F>
void criterion(const std::string& id, F&& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  report(id, o, std::chrono::duration<double>(Clock::now() - t0).count());
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void progress(const std::string& msg) { std::cerr << "[acceptance] " << msg << std::endl; }

// ---------------------------------------------------------------------------

Outcome reward_truth_table() {
  reward::RewardConfig c;
  c.shaping_enabled = true;
  int bad = 0;
  for (int mask = 0; mask < 8; ++mask) {
    const bool camera = mask & 1, collide = mask & 2, slow = mask & 4;
    navsim::StepInfo s;
    s.prev_goal_distance = s.new_goal_distance = 1000.0;
    s.initial_goal_distance = 2000.0;
    s.heading_delta = camera ? 0.4 : 0.15;
    s.abs_heading_delta = std::abs(s.heading_delta);
    s.collided_wall = collide;
    s.displacement = s.recent_travel = slow ? 219.9 : 220.0;
    const double cam = reward::camera_term(s, c), col = reward::collision_term(s, c), slw = reward::slow_term(s, c);
    bad += (cam != 0.0) != camera;
    bad += (col != 0.0) != collide;
    bad += (slw != 0.0) != slow;
    bad += std::abs(reward::shaped_reward(s, c) - (reward::base_reward(s, c) + cam + col + slw)) > 1e-15;
  }
  navsim::StepInfo s;
  s.heading_delta = -0.15;
  s.abs_heading_delta = 0.15;
  s.recent_travel = s.displacement = 250.0;
  bad += reward::camera_term(s, c) != 0.0;
  s.heading_delta = -0.25;
  s.abs_heading_delta = 0.25;
  bad += std::abs(reward::camera_term(s, c) - (-0.05 * 0.1)) > 1e-15;
  s.recent_travel = s.displacement = 10.0;
  s.reached_goal = true;
  bad += reward::slow_term(s, c) != 0.0;
  return {bad == 0, "8 trigger combinations + boundaries, " + std::to_string(bad) + " mismatches"};
}

std::vector<double> gae_double_sum(const std::vector<double>& r, const std::vector<double>& v,
                                   const std::vector<std::uint8_t>& done, double boot, double g, double l) {
  const std::size_t n = r.size();
  std::vector<double> adv(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double w = 1.0;
    for (std::size_t k = t; k < n; ++k) {
      const double next = done[k] ? 0.0 : (k + 1 < n ? v[k + 1] : boot);
      adv[t] += w * (r[k] + g * next - v[k]);
      if (done[k]) break;
      w *= g * l;
    }
  }
  return adv;
}

Outcome ppo_correctness() {
  double worst_grad = 0.0;
  int draws = 0;
  for (int draw = 0; draw < 24; ++draw, ++draws) {
    nn::NetShape shape;
    shape.symbolic_inputs = 4;
    shape.depth_inputs = draw % 2 ? 12 : 0;
    shape.hidden = 6;
    shape.actions = 5;
    nn::PolicyNetwork net(shape, 500 + static_cast<std::uint64_t>(draw));
    Rng rng(static_cast<std::uint64_t>(draw));
    net.mutable_params() *= 1.0 + uniform01(rng);
    ppo::RolloutBatch b;
    const int m = 8;
    b.observations = Matrix(shape.input_size(), m);
    for (Eigen::Index i = 0; i < b.observations.size(); ++i) b.observations.data()[i] = 2 * uniform01(rng) - 1;
    const Matrix lp = nn::log_softmax(net.forward(b.observations).logits);
    for (int i = 0; i < m; ++i) {
      const int a = static_cast<int>(uniform_index(rng, 5));
      b.actions.push_back(a);
      b.log_probs.push_back(lp(a, i) + 0.4 * (2 * uniform01(rng) - 1));
      b.advantages.push_back(2 * uniform01(rng) - 1);
      b.returns.push_back(2 * uniform01(rng) - 1);
    }
    std::vector<int> idx(m);
    std::iota(idx.begin(), idx.end(), 0);
    ppo::PPOConfig c;
    c.dropout_rate = draw % 3 ? 0.1 : 0.0;
    c.entropy_coef = 0.01;
    const Vector g = ppo::ppo_loss(b, idx, net, c, 9, true).gradient;
    Vector fd(g.size());
    nn::PolicyNetwork probe = net;
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      const double x = net.params()(i);
      probe.mutable_params()(i) = x + h;
      const double up = ppo::ppo_loss(b, idx, probe, c, 9, false).diag.loss;
      probe.mutable_params()(i) = x - h;
      const double down = ppo::ppo_loss(b, idx, probe, c, 9, false).diag.loss;
      probe.mutable_params()(i) = x;
      fd(i) = (up - down) / (2 * h);
    }
    worst_grad = std::max(worst_grad, (g - fd).norm() / std::max({g.norm(), fd.norm(), 1e-12}));
  }

  double worst_gae = 0.0;
  Rng rng(77);
  for (int f = 0; f < 200; ++f) {
    std::vector<double> r(5), v(5);
    std::vector<std::uint8_t> d(5);
    for (int t = 0; t < 5; ++t) {
      r[static_cast<std::size_t>(t)] = 2 * uniform01(rng) - 1;
      v[static_cast<std::size_t>(t)] = 2 * uniform01(rng) - 1;
      d[static_cast<std::size_t>(t)] = uniform01(rng) < 0.25;
    }
    const double boot = uniform01(rng), gamma = 0.9 + 0.1 * uniform01(rng), lambda = uniform01(rng);
    const auto out = ppo::gae(r, v, d, boot, gamma, lambda);
    const auto ref = gae_double_sum(r, v, d, boot, gamma, lambda);
    for (std::size_t t = 0; t < 5; ++t) worst_gae = std::max(worst_gae, std::abs(out.advantages[t] - ref[t]));
  }
  return {draws >= 20 && worst_grad < 1e-4 && worst_gae <= 1e-10,
          std::to_string(draws) + " draws, worst gradient rel. error " + fmt("%.2e", worst_grad) +
              "; worst GAE error " + fmt("%.2e", worst_gae) + " over 200 fixtures"};
}

// ---------------------------------------------------------------------------
// Training with a cache.

struct Trained {
  ppo::Agent agent;
  std::vector<ppo::CurvePoint> curve;
  double seconds = 0.0;
  bool cached = false;
};

Trained train_cached(ExperimentConfig cfg, const pipeline::Layout& layout) {
  const fs::path meta_path = layout.agent_dir(cfg.agent_kind) / "acceptance_meta.json";
  const std::uint64_t hash = ppo::config_hash(cfg.agent_kind, cfg.ppo, cfg.reward);
  const auto map = cfg.load_map();
  if (fs::exists(meta_path) && fs::exists(layout.checkpoint(cfg.agent_kind))) {
    const json meta = json::parse(io::read_file(meta_path));
    if (meta.value("config_hash", std::string()) == io::hex64(hash) &&
        meta.value("total_steps", std::int64_t{0}) == cfg.ppo.total_steps) {
      Trained t{ppo::load_checkpoint(layout.checkpoint(cfg.agent_kind), map.get()),
                ppo::read_curve_csv(layout.curve(cfg.agent_kind)), meta.at("seconds").get<double>(), true};
      return t;
    }
  }
  const auto t0 = Clock::now();
  const pipeline::Log log = [&](const std::string& m) { progress(ppo::to_string(cfg.agent_kind) + " seed " + std::to_string(cfg.ppo.seed) + ": " + m); };
  ppo::TrainResult r = pipeline::train(cfg, layout, log);
  Trained t{std::move(r.agent), std::move(r.curve), std::chrono::duration<double>(Clock::now() - t0).count(), false};
  io::write_atomic(meta_path, json{{"config_hash", io::hex64(hash)}, {"total_steps", cfg.ppo.total_steps},
                                   {"seconds", t.seconds}}.dump(2) + "\n");
  return t;
}

Outcome convergence(const std::vector<Trained>& runs, const std::shared_ptr<const navsim::WorldMap>& map,
                    const reward::RewardConfig& rc) {
  std::vector<int> oracle;
  for (int g = 0; g < navsim::kGoalCount; ++g) oracle.push_back(navsim::shortest_path_steps(*map, g));
  bool ok = true;
  std::string detail;
  for (std::size_t s = 0; s < runs.size(); ++s) {
    const Trained& t = runs[s];
    if (t.curve.size() < 2) return {false, "seed " + std::to_string(s) + ": learning curve too short"};
    const double initial = t.curve.front().mean_episode_length;
    const double final_len = t.curve.back().mean_episode_length;
    std::vector<int> goals;
    for (int i = 0; i < 10 * navsim::kGoalCount; ++i) goals.push_back(i % navsim::kGoalCount);
    const auto per_goal = ppo::evaluate(t.agent, map, rc, static_cast<int>(goals.size()), ppo::ActMode::kStochastic,
                                        1000 + s, goals);
    int within = 0;
    for (int g = 0; g < navsim::kGoalCount; ++g) {
      double len = 0.0;
      for (int k = 0; k < 10; ++k) len += per_goal.episodes[static_cast<std::size_t>(g + navsim::kGoalCount * k)].length;
      within += len / 10.0 <= 1.5 * oracle[static_cast<std::size_t>(g)];
    }
    const auto ev = ppo::evaluate(t.agent, map, rc, 100, ppo::ActMode::kStochastic, 2000 + s);
    const bool seed_ok = final_len <= 0.5 * initial && within >= 14 && ev.success_rate >= 0.95 && t.seconds <= 1800.0;
    ok = ok && seed_ok;
    detail += (s ? "; " : "") + std::string("seed ") + std::to_string(s) + ": length " + fmt("%.1f", initial) +
              " -> " + fmt("%.1f", final_len) + ", " + std::to_string(within) + "/16 goals within 1.5x oracle, success " +
              fmt("%.2f", ev.success_rate) + ", train " + fmt("%.0f", t.seconds) + "s" + (t.cached ? " (cached)" : "");
  }
  return {ok, detail};
}

Outcome shaping_effect(const Trained& shaped, const Trained& hybrid, const std::shared_ptr<const navsim::WorldMap>& map,
                       const reward::RewardConfig& rc) {
  const auto a = ppo::evaluate(shaped.agent, map, rc, 100, ppo::ActMode::kStochastic, 31);
  const auto b = ppo::evaluate(hybrid.agent, map, rc, 100, ppo::ActMode::kStochastic, 31);
  const bool ok = a.mean_abs_heading_delta < b.mean_abs_heading_delta && a.collision_rate < b.collision_rate &&
                  std::abs(a.success_rate - b.success_rate) <= 0.05 + 1e-12;
  return {ok, "|dheading|/step " + fmt("%.4f", a.mean_abs_heading_delta) + " vs " + fmt("%.4f", b.mean_abs_heading_delta) +
                  ", collisions/step " + fmt("%.4f", a.collision_rate) + " vs " + fmt("%.4f", b.collision_rate) +
                  ", success " + fmt("%.2f", a.success_rate) + " vs " + fmt("%.2f", b.success_rate) +
                  " (reward shaping vs hybrid)"};
}

// ---------------------------------------------------------------------------
// Statistics.

std::vector<double> bernoulli_accuracies(int judges, double p, Rng& rng) {
  std::vector<double> acc;
  for (int j = 0; j < judges; ++j) {
    int k = 0;
    for (int t = 0; t < 6; ++t) k += uniform01(rng) < p;
    acc.push_back(k / 6.0);
  }
  return acc;
}

Outcome hntt_calibration() {
  Rng gen(derive_seed(2024, 1));
  int pass_null = 0, fail_alt = 0;
  for (int d = 0; d < 100; ++d) {
    pass_null += stats::bootstrap_median_ci(bernoulli_accuracies(92, 0.5, gen), 10'000, 0.95, gen).passed;
    fail_alt += !stats::bootstrap_median_ci(bernoulli_accuracies(50, 0.83, gen), 10'000, 0.95, gen).passed;
  }
  return {pass_null >= 90 && fail_alt >= 90,
          "Bernoulli(0.5): passed " + std::to_string(pass_null) + "/100; Bernoulli(0.83): failed " +
              std::to_string(fail_alt) + "/100"};
}

Outcome subsample_shape() {
  Rng gen(derive_seed(2024, 2));
  const auto acc = bernoulli_accuracies(92, 0.5, gen);
  const auto s = stats::subsample_validation(acc, 50, 100, 10'000, 0.95, gen);
  const bool ok = std::abs(s.mean_median - 0.5) <= 0.02 && s.pass_rate >= 0.95 && s.var_median <= 0.005;
  return {ok, "mean median " + fmt("%.3f", s.mean_median) + ", variance " + fmt("%.5f", s.var_median) + ", pass rate " +
                  fmt("%.2f", s.pass_rate) + " (50 of 92 judges, 100 repeats)"};
}

Outcome stats_oracles() {
  const std::vector<double> y = {16.68, 11.50, 12.03, 14.88, 13.75, 18.11, 8.00, 17.83, 79.24, 21.50, 40.33, 21.00, 13.50,
                                 19.75, 24.00, 29.00, 15.35, 19.00, 9.50, 35.10, 17.90, 52.32, 18.75, 19.83, 10.75};
  const std::vector<double> x1 = {7, 3, 3, 4, 6, 7, 2, 7, 30, 5, 16, 10, 4, 6, 9, 10, 6, 7, 3, 17, 10, 26, 9, 8, 4};
  const std::vector<double> x2 = {560, 220, 340, 80, 150, 330, 110, 210, 1460, 605, 688, 215, 255,
                                  462, 448, 776, 200, 132, 36, 770, 140, 810, 450, 635, 150};
  const auto r = stats::ols_regression(y, {x1, x2});
  Eigen::MatrixXd X(25, 3);
  Eigen::VectorXd Y(25);
  for (int i = 0; i < 25; ++i) {
    X.row(i) << 1.0, x1[static_cast<std::size_t>(i)], x2[static_cast<std::size_t>(i)];
    Y(i) = y[static_cast<std::size_t>(i)];
  }
  const Eigen::VectorXd normal = (X.transpose() * X).ldlt().solve(X.transpose() * Y);
  const double beta_err = std::max({std::abs(r.intercept - normal(0)), std::abs(r.betas[0] - normal(1)),
                                    std::abs(r.betas[1] - normal(2))});
  const bool f_ok = std::abs(r.f_statistic - 261.2351086605637) <= 1e-7 &&
                    std::abs(r.f_p_value - 4.687422207749737e-16) <= 1e-6 * 4.687422207749737e-16;

  auto kappa = [](int a, int b, int c, int d) {
    std::vector<int> x, z;
    for (int i = 0; i < a; ++i) x.push_back(1), z.push_back(1);
    for (int i = 0; i < b; ++i) x.push_back(1), z.push_back(0);
    for (int i = 0; i < c; ++i) x.push_back(0), z.push_back(1);
    for (int i = 0; i < d; ++i) x.push_back(0), z.push_back(0);
    return stats::cohens_kappa(x, z).kappa;
  };
  // Closed forms: (p_o - p_e) / (1 - p_e).
  const double k1 = kappa(4, 1, 1, 49), k2 = kappa(10, 5, 8, 17), k_one = kappa(6, 0, 0, 6), k_zero = kappa(1, 1, 1, 1),
               k_const = kappa(0, 0, 0, 9);
  const bool kappa_ok = std::abs(k1 - 0.78) <= 1e-12 && std::abs(k2 - 1.0 / 3.0) <= 1e-12 && k_one == 1.0 &&
                        std::abs(k_zero) <= 1e-12 && k_const == 1.0;
  const bool split_ok = !stats::high_accuracy(0.80, 0.8) && stats::high_accuracy(5.0 / 6.0, 0.8);
  return {beta_err <= 1e-9 && f_ok && kappa_ok && split_ok,
          "OLS vs normal equations max |diff| " + fmt("%.1e", beta_err) + ", F " + fmt("%.6f", r.f_statistic) + " p " +
              fmt("%.6e", r.f_p_value) + "; kappa " + fmt("%.12f", k1) + ", " + fmt("%.12f", k2) + ", 1, 0, const=1; " +
              "0.80 is " + (stats::high_accuracy(0.80, 0.8) ? "high" : "low")};
}

Outcome randomization() {
  KvStore db(":memory:");
  study::StudyService svc(db, {3, derive_seed(2024, 3)});
  study::StudyDefinition def;
  def.study_id = "randomization";
  def.agent_kind = "reward_shaping";
  for (int g = 0; g < 6; ++g) {
    traj::TrialPair p;
    p.pair_id = "p" + std::to_string(g);
    char h[32], a[32];
    std::snprintf(h, sizeof h, "t%016x", 0x100 + g);
    std::snprintf(a, sizeof a, "t%016x", 0x200 + g);
    p.video_a = h;
    p.video_b = a;
    p.goal_index = p.goal_a = p.goal_b = g;
    p.controller_a = traj::Controller::kScriptedProxy;
    p.controller_b = traj::Controller::kRewardShaping;
    p.duration_a = p.duration_b = 12.0;
    // Frames do not matter for ordering; the service only needs well-formed payloads.
    const json replay = {{"schema", "hntt.replay"}, {"goal_index", g}, {"frames", json::array()}};
    def.trials.push_back({p, replay, replay});
  }
  svc.create_study(def);
  std::vector<std::vector<int>> table(6, std::vector<int>(6, 0));
  int slot_a = 0;
  std::map<std::string, int> orders;
  for (int i = 0; i < 1000; ++i) {
    const study::Session s = svc.create_session("randomization", "judge" + std::to_string(i));
    std::string key;
    for (int pos = 0; pos < 6; ++pos) {
      const int t = s.trial_order[static_cast<std::size_t>(pos)];
      ++table[static_cast<std::size_t>(t)][static_cast<std::size_t>(pos)];
      key += static_cast<char>('0' + t);
    }
    ++orders[key];
    for (auto slot : s.human_slot) slot_a += slot == traj::Slot::kA;
  }
  double chi_pos = 0.0;
  for (const auto& row : table) {
    for (int c : row) chi_pos += (c - 1000.0 / 6) * (c - 1000.0 / 6) / (1000.0 / 6);
  }
  const double half = 3000.0;
  const double chi_side = 2 * (slot_a - half) * (slot_a - half) / half;
  // Critical values at alpha = 0.01 for df 25 and 1.
  const bool ok = chi_pos < 44.314102 && chi_side < 6.634897;
  return {ok, "trial-position chi2 " + fmt("%.2f", chi_pos) + " (df 25, crit 44.31), side chi2 " + fmt("%.2f", chi_side) +
                  " (df 1, crit 6.63), " + std::to_string(orders.size()) + " distinct orders in 1000 sessions"};
}

Outcome pipeline_identity(const ExperimentConfig& base, const Trained& shaped, const fs::path& work) {
  const pipeline::Layout layout{work / "pipeline"};
  fs::remove_all(layout.root);
  ExperimentConfig cfg = base;
  cfg.agent_kind = ppo::AgentKind::kRewardShaping;
  fs::create_directories(layout.agent_dir(cfg.agent_kind));
  ppo::save_checkpoint(shaped.agent, layout.checkpoint(cfg.agent_kind));

  const pipeline::Log log = [](const std::string& m) { progress("pipeline: " + m); };
  const int n_agent = pipeline::rollout(cfg, layout, traj::Controller::kRewardShaping, log);
  const int n_human = pipeline::rollout(cfg, layout, traj::Controller::kScriptedProxy, log);
  const study::StudyDefinition def = pipeline::build_study(cfg, layout, {}, log);
  pipeline::JudgeSimOptions sim;
  sim.judges = 92;
  pipeline::judge_sim(cfg, layout, def.study_id, sim, log);
  const json rep = pipeline::analyze(cfg, layout, def.study_id, std::nullopt, std::nullopt, log);

  // Pairs: shared goals and the duration rule on the stored trajectories.
  int pair_errors = 0;
  const traj::TrajectoryStore humans(layout.corpus(traj::Controller::kScriptedProxy));
  const traj::TrajectoryStore agents(layout.corpus(traj::Controller::kRewardShaping));
  traj::FilterOptions fo{cfg.study.min_duration_seconds, cfg.study.trim_seconds};
  for (const traj::TrialPair& p : traj::load_pairs(layout.pairs_file(def.study_id))) {
    const auto h = traj::filter_and_postprocess({humans.get(p.video_a)}, fo);
    const auto a = traj::filter_and_postprocess({agents.get(p.video_b)}, fo);
    if (h.size() != 1 || a.size() != 1) {
      ++pair_errors;
      continue;
    }
    pair_errors += h[0].goal_index != a[0].goal_index || h[0].goal_index != p.goal_index;
    pair_errors += h[0].duration_seconds < cfg.study.min_duration_seconds - 1e-9;
    pair_errors += a[0].duration_seconds < cfg.study.min_duration_seconds - 1e-9;
  }

  // Per-judge accuracy recomputed from the stored sessions.
  KvStore db(layout.database().string());
  study::StudyService svc(db, {cfg.study.min_justification_chars, cfg.seeds.service});
  const json exported = json::parse(io::read_file(layout.export_json(def.study_id)));
  std::map<std::string, std::string> session_of;
  for (const json& j : exported.at("judges")) session_of[j.at("judge_id")] = j.at("session_id");
  int acc_errors = 0, checked = 0;
  for (const json& pj : rep.at("per_judge")) {
    const study::Session s = svc.get_session(session_of.at(pj.at("judge_id")));
    int correct = 0;
    for (const study::Response& r : s.responses) {
      // Ground truth from the pair: the human video is shown on the session's human slot.
      correct += r.choice == s.human_slot[static_cast<std::size_t>(r.trial_index)];
    }
    acc_errors += s.responses.size() != 6 || std::abs(pj.at("accuracy").get<double>() - correct / 6.0) > 1e-12;
    ++checked;
  }
  const bool ok = pair_errors == 0 && acc_errors == 0 && checked == 92 && def.trials.size() == 6 &&
                  rep.contains("verdict");
  return {ok, std::to_string(n_agent) + " agent + " + std::to_string(n_human) + " proxy trajectories, 6 pairs (" +
                  std::to_string(pair_errors) + " goal/duration violations), " + std::to_string(checked) +
                  " judges recomputed (" + std::to_string(acc_errors) + " mismatches), verdict \"" +
                  rep.value("verdict", "") + "\""};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string work = "acceptance_work";
  std::int64_t steps = ExperimentConfig{}.ppo.total_steps;
  app.add_option("--work-dir", work, "Scratch directory; trained agents are cached here");
  app.add_option("--steps", steps, "Training steps per agent");
  CLI11_PARSE(app, argc, argv);

  setenv("SOURCE_DATE_EPOCH", "1700000000", 1);
  const fs::path root(work);
  fs::create_directories(root);
  ExperimentConfig base;
  base.ppo.total_steps = steps;
  const auto map = base.load_map();

  criterion("reward-truth-table", reward_truth_table);
  criterion("ppo-correctness", ppo_correctness);
  criterion("statistics-oracles", stats_oracles);
  criterion("randomization", randomization);
  criterion("hntt-calibration", hntt_calibration);
  criterion("subsample-validation", subsample_shape);

  std::vector<Trained> shaped;
  std::optional<Trained> hybrid;
  try {
    for (std::uint64_t seed : {0, 1, 2}) {
      ExperimentConfig cfg = base;
      cfg.agent_kind = ppo::AgentKind::kRewardShaping;
      cfg.ppo.seed = cfg.seeds.train = seed;
      progress("training reward_shaping seed " + std::to_string(seed));
      shaped.push_back(train_cached(cfg, pipeline::Layout{root / ("seed" + std::to_string(seed))}));
    }
    ExperimentConfig cfg = base;
    cfg.agent_kind = ppo::AgentKind::kHybrid;
    progress("training hybrid seed 0");
    hybrid = train_cached(cfg, pipeline::Layout{root / "seed0"});
  } catch (const std::exception& e) {
    progress(std::string("training failed: ") + e.what());
  }

  reward::RewardConfig rc = base.reward;
  criterion("convergence", [&]() -> Outcome {
    if (shaped.size() != 3) return {false, "training did not complete"};
    return convergence(shaped, map, rc);
  });
  criterion("shaping-effect", [&]() -> Outcome {
    if (shaped.empty() || !hybrid) return {false, "training did not complete"};
    return shaping_effect(shaped[0], *hybrid, map, rc);
  });
  criterion("pipeline-identity", [&]() -> Outcome {
    if (shaped.empty()) return {false, "training did not complete"};
    return pipeline_identity(base, shaped[0], root);
  });

  std::cout << (g_failed == 0 ? "ALL PASS" : std::to_string(g_failed) + " FAILED") << std::endl;
  return std::min(g_failed, 100);
}
