#include "hntt/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "hntt/error.hpp"
#include "hntt/io.hpp"
#include "hntt/rng.hpp"

namespace hntt::ppo {
namespace {

using nlohmann::json;

bool all_finite(const Vector& v) { return v.allFinite(); }

using io::hex64;
using io::parse_hex64;

}  // namespace

std::string to_string(AgentKind kind) {
  switch (kind) {
    case AgentKind::kSymbolic: return "symbolic";
    case AgentKind::kHybrid: return "hybrid";
    case AgentKind::kRewardShaping: return "reward_shaping";
  }
  return "unknown";
}

AgentKind agent_kind_from_string(const std::string& s) {
  if (s == "symbolic") return AgentKind::kSymbolic;
  if (s == "hybrid") return AgentKind::kHybrid;
  if (s == "reward_shaping") return AgentKind::kRewardShaping;
  throw ConfigError("unknown agent kind: " + s + " (expected symbolic|hybrid|reward_shaping)");
}

AgentProfile profile(AgentKind kind) {
  switch (kind) {
    case AgentKind::kSymbolic: return {false, navsim::ActionVariant::kBaseline8, false};
    case AgentKind::kHybrid: return {true, navsim::ActionVariant::kBaseline8, false};
    case AgentKind::kRewardShaping: return {true, navsim::ActionVariant::kShaped14, true};
  }
  throw ConfigError("unknown agent kind");
}

void PPOConfig::validate() const {
  if (!(gamma > 0 && gamma <= 1)) throw ConfigError("ppo: gamma must be in (0, 1]");
  if (!(lambda > 0 && lambda <= 1)) throw ConfigError("ppo: lambda must be in (0, 1]");
  if (!(clip_range > 0)) throw ConfigError("ppo: clip_range must be > 0");
  if (batch_size <= 0 || minibatches_per_update <= 0 || batch_size % minibatches_per_update != 0) {
    throw ConfigError("ppo: batch_size must be divisible by minibatches_per_update");
  }
  if (workers <= 0 || batch_size % workers != 0) {
    throw ConfigError("ppo: batch_size must be divisible by workers");
  }
  if (epochs_per_update <= 0) throw ConfigError("ppo: epochs_per_update must be > 0");
  if (!(learning_rate > 0)) throw ConfigError("ppo: learning_rate must be > 0");
  if (!(dropout_rate >= 0 && dropout_rate < 1)) throw ConfigError("ppo: dropout_rate must be in [0, 1)");
  if (hidden <= 0) throw ConfigError("ppo: hidden must be > 0");
  if (total_steps <= 0 || eval_interval <= 0) throw ConfigError("ppo: total_steps and eval_interval must be > 0");
  if (curve_window <= 0) throw ConfigError("ppo: curve_window must be > 0");
  if (replay_batches < 0) throw ConfigError("ppo: replay_batches must be >= 0");
}

json to_json(const PPOConfig& c) {
  return {{"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_epsilon", c.adam_epsilon},
          {"gamma", c.gamma},
          {"lambda", c.lambda},
          {"clip_range", c.clip_range},
          {"grad_norm_clip", c.grad_norm_clip},
          {"entropy_coef", c.entropy_coef},
          {"value_coef", c.value_coef},
          {"minibatches_per_update", c.minibatches_per_update},
          {"epochs_per_update", c.epochs_per_update},
          {"dropout_rate", c.dropout_rate},
          {"normalize_advantages", c.normalize_advantages},
          {"replay_batches", c.replay_batches},
          {"hidden", c.hidden},
          {"total_steps", c.total_steps},
          {"eval_interval", c.eval_interval},
          {"curve_window", c.curve_window},
          {"workers", c.workers},
          {"seed", c.seed}};
}

PPOConfig ppo_config_from_json(const json& j, PPOConfig c) {
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
  c.adam_epsilon = j.value("adam_epsilon", c.adam_epsilon);
  c.gamma = j.value("gamma", c.gamma);
  c.lambda = j.value("lambda", c.lambda);
  c.clip_range = j.value("clip_range", c.clip_range);
  c.grad_norm_clip = j.value("grad_norm_clip", c.grad_norm_clip);
  c.entropy_coef = j.value("entropy_coef", c.entropy_coef);
  c.value_coef = j.value("value_coef", c.value_coef);
  c.minibatches_per_update = j.value("minibatches_per_update", c.minibatches_per_update);
  c.epochs_per_update = j.value("epochs_per_update", c.epochs_per_update);
  c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
  c.normalize_advantages = j.value("normalize_advantages", c.normalize_advantages);
  c.replay_batches = j.value("replay_batches", c.replay_batches);
  c.hidden = j.value("hidden", c.hidden);
  c.total_steps = j.value("total_steps", c.total_steps);
  c.eval_interval = j.value("eval_interval", c.eval_interval);
  c.curve_window = j.value("curve_window", c.curve_window);
  c.workers = j.value("workers", c.workers);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Features

FeatureEncoder::FeatureEncoder(const navsim::WorldMap& map, bool use_depth) {
  const auto& m = map.main_region;
  distance_scale_ = 0.5 * std::hypot(m.hi.x - m.lo.x, m.hi.y - m.lo.y);
  jump_scale_ = 1000.0;
  speed_ = map.speed;
  centre_ = (map.bounds.lo + map.bounds.hi) * 0.5;
  half_extent_ = (map.bounds.hi - map.bounds.lo) * 0.5;
  depth_range_ = map.depth.max_range;
  depth_size_ = use_depth ? map.depth.rays : 0;
}

void FeatureEncoder::encode(const navsim::Observation& obs, double* out) const {
  using namespace navsim;
  const auto& s = obs.symbolic;
  if (static_cast<int>(s.size()) != kSymbolicSize) {
    throw ShapeError("observation symbolic block has " + std::to_string(s.size()) + " entries");
  }
  out[0] = s[kGoalDx] / distance_scale_;
  out[1] = s[kGoalDy] / distance_scale_;
  out[2] = s[kGoalDistance] / distance_scale_;
  out[3] = std::sin(s[kHeading]);
  out[4] = std::cos(s[kHeading]);
  out[5] = s[kLastDisplacement] / speed_;
  out[6] = s[kOnIsland];
  out[7] = s[kJumpDx] / jump_scale_;
  out[8] = s[kJumpDy] / jump_scale_;
  out[9] = (s[kPosX] - centre_.x) / half_extent_.x;
  out[10] = (s[kPosY] - centre_.y) / half_extent_.y;
  // Unit bearings, independent of distance.
  const double gd = std::hypot(s[kGoalDx], s[kGoalDy]);
  out[11] = gd > 0 ? s[kGoalDx] / gd : 0.0;
  out[12] = gd > 0 ? s[kGoalDy] / gd : 0.0;
  const double jd = std::hypot(s[kJumpDx], s[kJumpDy]);
  out[13] = jd > 0 ? s[kJumpDx] / jd : 0.0;
  out[14] = jd > 0 ? s[kJumpDy] / jd : 0.0;
  if (depth_size_ > 0) {
    if (static_cast<int>(obs.depth.size()) != depth_size_) {
      throw ShapeError("observation depth block has " + std::to_string(obs.depth.size()) +
                       " rays, encoder expects " + std::to_string(depth_size_));
    }
    for (int i = 0; i < depth_size_; ++i) out[kSymbolicFeatures + i] = obs.depth[static_cast<std::size_t>(i)] / depth_range_;
  }
}

Vector FeatureEncoder::encode(const navsim::Observation& obs) const {
  Vector v(size());
  encode(obs, v.data());
  return v;
}

nn::NetShape network_shape(const FeatureEncoder& enc, navsim::ActionVariant actions, int hidden) {
  nn::NetShape s;
  s.symbolic_inputs = FeatureEncoder::kSymbolicFeatures;
  s.depth_inputs = enc.depth_size();
  s.hidden = hidden;
  s.actions = static_cast<int>(navsim::action_space(actions).size());
  return s;
}

// ---------------------------------------------------------------------------
// Advantage estimation and loss

Advantages gae(std::span<const double> rewards, std::span<const double> values,
               std::span<const std::uint8_t> dones, double bootstrap_value, double gamma,
               double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) {
    throw ShapeError("gae: rewards, values and dones must have equal length");
  }
  Advantages out{std::vector<double>(n), std::vector<double>(n)};
  double next_adv = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double nonterminal = dones[i] ? 0.0 : 1.0;
    const double next_value = i + 1 < n ? values[i + 1] : bootstrap_value;
    const double delta = rewards[i] + gamma * next_value * nonterminal - values[i];
    next_adv = delta + gamma * lambda * nonterminal * next_adv;
    out.advantages[i] = next_adv;
    out.returns[i] = next_adv + values[i];
  }
  return out;
}

LossResult ppo_loss(const RolloutBatch& batch, std::span<const int> indices,
                    const nn::PolicyNetwork& net, const PPOConfig& cfg,
                    std::uint64_t dropout_seed, bool with_gradient) {
  const auto m = static_cast<Eigen::Index>(indices.size());
  if (m == 0) throw ShapeError("ppo_loss: empty minibatch");
  Matrix x(batch.observations.rows(), m);
  for (Eigen::Index i = 0; i < m; ++i) x.col(i) = batch.observations.col(indices[static_cast<std::size_t>(i)]);

  std::optional<nn::DropoutMasks> masks;
  if (cfg.dropout_rate > 0) {
    masks = nn::make_dropout_masks(net.shape().hidden, static_cast<int>(m), cfg.dropout_rate, dropout_seed);
  }
  const nn::ForwardPass fp = net.forward(x, masks ? &*masks : nullptr);
  const Matrix logp = nn::log_softmax(fp.logits);
  const double inv_m = 1.0 / static_cast<double>(m);

  LossResult res;
  Matrix dlogits;
  nn::RowVector dvalues;
  if (with_gradient) {
    dlogits = Matrix::Zero(fp.logits.rows(), m);
    dvalues = nn::RowVector::Zero(m);
  }
  double clipped_count = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto idx = static_cast<std::size_t>(indices[static_cast<std::size_t>(i)]);
    const int a = batch.actions[idx];
    const double adv = batch.advantages[idx];
    const double lp = logp(a, i);
    const double ratio = std::exp(lp - batch.log_probs[idx]);
    const double clipped_ratio = std::clamp(ratio, 1.0 - cfg.clip_range, 1.0 + cfg.clip_range);
    const double unclipped = ratio * adv;
    const double clipped = clipped_ratio * adv;
    res.diag.policy_loss -= std::min(unclipped, clipped) * inv_m;
    if (std::abs(ratio - 1.0) > cfg.clip_range) clipped_count += 1;
    res.diag.approx_kl += ((ratio - 1.0) - (lp - batch.log_probs[idx])) * inv_m;

    const Eigen::ArrayXd lp_col = logp.col(i).array();
    const Eigen::ArrayXd p_col = lp_col.exp();
    const double entropy = -(p_col * lp_col).sum();
    res.diag.entropy += entropy * inv_m;

    const double v_err = fp.values(i) - batch.returns[idx];
    res.diag.value_loss += v_err * v_err * inv_m;

    if (with_gradient) {
      // d(-surrogate)/d(log pi(a)) is -ratio*A on the unclipped branch and 0 once clipping binds.
      const double g_lp = unclipped <= clipped ? -adv * ratio * inv_m : 0.0;
      auto col = dlogits.col(i);
      col = (-g_lp) * p_col.matrix();
      col(a) += g_lp;
      // Entropy bonus: d(-c2 H)/d logit_j = c2 * p_j (log p_j + H).
      if (cfg.entropy_coef != 0.0) {
        col += (cfg.entropy_coef * inv_m * p_col * (lp_col + entropy)).matrix();
      }
      dvalues(i) = cfg.value_coef * 2.0 * v_err * inv_m;
    }
  }
  res.diag.clip_fraction = clipped_count * inv_m;
  res.diag.loss = res.diag.policy_loss + cfg.value_coef * res.diag.value_loss -
                  cfg.entropy_coef * res.diag.entropy;
  if (with_gradient) res.gradient = net.backward(fp, dlogits, dvalues);
  return res;
}

Vector action_probabilities(const nn::PolicyNetwork& net, const Vector& features) {
  const nn::ForwardPass fp = net.forward(features);
  return nn::log_softmax(fp.logits).col(0).array().exp().matrix();
}

namespace {

int sample_or_argmax(const Eigen::Ref<const Vector>& log_probs, ActMode mode, Rng& rng) {
  Eigen::Index best = 0;
  if (mode == ActMode::kDeterministic) {
    log_probs.maxCoeff(&best);
    return static_cast<int>(best);
  }
  const double u = uniform01(rng);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < log_probs.size(); ++i) {
    acc += std::exp(log_probs(i));
    if (u < acc) return static_cast<int>(i);
  }
  // Rounding left a sliver above the cumulative sum; take the likeliest action.
  log_probs.maxCoeff(&best);
  return static_cast<int>(best);
}

}  // namespace

int act(const nn::PolicyNetwork& net, const Vector& features, ActMode mode, std::mt19937_64& rng) {
  const nn::ForwardPass fp = net.forward(features);
  const Matrix lp = nn::log_softmax(fp.logits);
  return sample_or_argmax(lp.col(0), mode, rng);
}

Adam::Adam(std::size_t n, double lr, double beta1, double beta2, double eps)
    : m_(Vector::Zero(static_cast<Eigen::Index>(n))),
      v_(Vector::Zero(static_cast<Eigen::Index>(n))),
      lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(Vector& params, const Vector& grad) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / bc1) / ((v_.array() / bc2).sqrt() + eps_);
}

// ---------------------------------------------------------------------------
// Agents and checkpoints

int Agent::act(const navsim::Observation& obs, ActMode mode, std::mt19937_64& rng) const {
  return ppo::act(net, encoder.encode(obs), mode, rng);
}

Agent make_agent(AgentKind kind, const navsim::WorldMap& map, int hidden, std::uint64_t seed) {
  Agent a;
  a.kind = kind;
  const AgentProfile prof = profile(kind);
  a.encoder = FeatureEncoder(map, prof.uses_depth);
  a.net = nn::PolicyNetwork(network_shape(a.encoder, prof.actions, hidden), derive_seed(seed, 0xA11CE));
  a.map_fingerprint = map.fingerprint();
  return a;
}

void save_checkpoint(const Agent& agent, const std::filesystem::path& path) {
  json params = json::array();
  for (Eigen::Index i = 0; i < agent.net.params().size(); ++i) params.push_back(agent.net.params()(i));
  json doc = {{"schema", "hntt.checkpoint"},
              {"version", kCheckpointVersion},
              {"agent_kind", to_string(agent.kind)},
              {"action_variant", navsim::to_string(agent.actions())},
              {"symbolic_layout_version", navsim::kSymbolicVersion},
              {"shape", nn::to_json(agent.net.shape())},
              {"map_fingerprint", hex64(agent.map_fingerprint)},
              {"config_hash", hex64(agent.config_hash)},
              {"trained_steps", agent.trained_steps},
              {"params", std::move(params)}};
  io::write_atomic(path, doc.dump() + "\n");
}

Agent load_checkpoint(const std::filesystem::path& path, const navsim::WorldMap* map) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("checkpoint not found: " + path.string());
  json doc;
  try {
    in >> doc;
    if (doc.value("schema", "") != "hntt.checkpoint" || doc.at("version").get<int>() != kCheckpointVersion) {
      throw ConfigError("unsupported checkpoint format: " + path.string());
    }
    if (doc.at("symbolic_layout_version").get<int>() != navsim::kSymbolicVersion) {
      throw ConfigError("checkpoint uses a different observation layout");
    }
    Agent a;
    a.kind = agent_kind_from_string(doc.at("agent_kind").get<std::string>());
    a.map_fingerprint = parse_hex64(doc.at("map_fingerprint").get<std::string>());
    a.config_hash = parse_hex64(doc.at("config_hash").get<std::string>());
    a.trained_steps = doc.at("trained_steps").get<std::int64_t>();
    const nn::NetShape shape = nn::net_shape_from_json(doc.at("shape"));
    const auto& p = doc.at("params");
    Vector params(static_cast<Eigen::Index>(p.size()));
    for (std::size_t i = 0; i < p.size(); ++i) params(static_cast<Eigen::Index>(i)) = p[i].get<double>();
    a.net = nn::PolicyNetwork(shape, std::move(params));
    if (map) {
      if (map->fingerprint() != a.map_fingerprint) {
        throw ConfigError("checkpoint " + path.string() + " was trained on a different map");
      }
      a.encoder = FeatureEncoder(*map, profile(a.kind).uses_depth);
      if (network_shape(a.encoder, a.actions(), shape.hidden) != shape) {
        throw ConfigError("checkpoint network shape does not match the map's observation layout");
      }
    }
    return a;
  } catch (const json::exception& e) {
    throw ConfigError("malformed checkpoint " + path.string() + ": " + e.what());
  }
}

std::uint64_t config_hash(AgentKind kind, const PPOConfig& cfg, const reward::RewardConfig& rc) {
  const json doc = {{"agent_kind", to_string(kind)}, {"ppo", to_json(cfg)}, {"reward", reward::to_json(rc)}};
  return fnv1a(doc.dump());
}

// ---------------------------------------------------------------------------
// Training

void write_curve_csv(const std::vector<CurvePoint>& curve, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "step,mean_episode_length,success_rate\n";
  out.precision(17);
  for (const CurvePoint& p : curve) {
    out << p.step << ',' << p.mean_episode_length << ',' << p.success_rate << '\n';
  }
  io::write_atomic(path, out.str());
}

std::vector<CurvePoint> read_curve_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("learning curve not found: " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<CurvePoint> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    CurvePoint p;
    char comma;
    row >> p.step >> comma >> p.mean_episode_length >> comma >> p.success_rate;
    out.push_back(p);
  }
  return out;
}

namespace {

struct Worker {
  navsim::NavEnv env;
  Rng rng;
  navsim::Observation obs;
  int episode_length = 0;
};

void reset_worker(Worker& w) {
  w.obs = w.env.reset(w.rng());
  w.episode_length = 0;
}

}  // namespace

TrainResult train(AgentKind kind, const PPOConfig& cfg, std::shared_ptr<const navsim::WorldMap> map,
                  const reward::RewardConfig& reward_cfg, const TrainOptions& options) {
  cfg.validate();
  reward_cfg.validate();
  if (!map) throw ConfigError("train: map required");
  const AgentProfile prof = profile(kind);
  reward::RewardConfig rc = reward_cfg;
  rc.shaping_enabled = prof.shaping;

  TrainResult result;
  Agent& agent = result.agent;
  agent = make_agent(kind, *map, cfg.hidden, cfg.seed);
  agent.config_hash = config_hash(kind, cfg, rc);
  nn::PolicyNetwork& net = agent.net;
  Adam adam(static_cast<std::size_t>(net.params().size()), cfg.learning_rate, cfg.adam_beta1,
            cfg.adam_beta2, cfg.adam_epsilon);
  Rng update_rng(derive_seed(cfg.seed, 0xB0B));

  const int n_workers = cfg.workers;
  const int horizon = cfg.batch_size / n_workers;
  const int n = cfg.batch_size;
  const int in_size = agent.encoder.size();

  std::vector<Worker> workers;
  workers.reserve(static_cast<std::size_t>(n_workers));
  for (int w = 0; w < n_workers; ++w) {
    workers.push_back({navsim::NavEnv(map, prof.actions), Rng(derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(w))), {}, 0});
    reset_worker(workers.back());
  }

  std::deque<std::pair<int, bool>> recent;  // (length, success) of completed episodes
  std::deque<RolloutBatch> replay;
  std::int64_t steps = 0;
  std::int64_t next_eval = cfg.eval_interval;
  std::int64_t next_checkpoint = options.checkpoint_interval > 0 ? options.checkpoint_interval : -1;
  Vector last_good = net.params();

  auto checkpoint_to = [&](const std::string& name) {
    if (options.out_dir.empty()) return;
    const auto path = options.out_dir / name;
    agent.trained_steps = steps;
    save_checkpoint(agent, path);
    result.checkpoints.push_back(path);
  };

  Matrix current(in_size, n_workers);
  RolloutBatch batch;
  while (steps < cfg.total_steps) {
    batch.observations.resize(in_size, n);
    batch.actions.assign(static_cast<std::size_t>(n), 0);
    batch.log_probs.assign(static_cast<std::size_t>(n), 0.0);
    batch.rewards.assign(static_cast<std::size_t>(n), 0.0);
    batch.values.assign(static_cast<std::size_t>(n), 0.0);
    batch.dones.assign(static_cast<std::size_t>(n), 0);

    for (int w = 0; w < n_workers; ++w) agent.encoder.encode(workers[static_cast<std::size_t>(w)].obs, current.col(w).data());
    for (int t = 0; t < horizon; ++t) {
      const nn::ForwardPass fp = net.forward(current);
      const Matrix logp = nn::log_softmax(fp.logits);
      for (int w = 0; w < n_workers; ++w) {
        Worker& wk = workers[static_cast<std::size_t>(w)];
        const auto idx = static_cast<std::size_t>(w * horizon + t);
        const int a = sample_or_argmax(logp.col(w), ActMode::kStochastic, wk.rng);
        batch.observations.col(static_cast<Eigen::Index>(idx)) = current.col(w);
        batch.actions[idx] = a;
        batch.log_probs[idx] = logp(a, w);
        batch.values[idx] = fp.values(w);

        const navsim::StepResult sr = wk.env.step(a);
        batch.rewards[idx] = reward::reward(sr.info, rc);
        ++wk.episode_length;
        if (sr.done) {
          batch.dones[idx] = 1;
          recent.emplace_back(wk.episode_length, sr.info.reached_goal);
          while (static_cast<int>(recent.size()) > cfg.curve_window) recent.pop_front();
          reset_worker(wk);
        } else {
          wk.obs = sr.observation;
        }
        agent.encoder.encode(wk.obs, current.col(w).data());
      }
    }
    const nn::RowVector bootstrap = net.forward(current).values;

    batch.advantages.assign(static_cast<std::size_t>(n), 0.0);
    batch.returns.assign(static_cast<std::size_t>(n), 0.0);
    for (int w = 0; w < n_workers; ++w) {
      const auto off = static_cast<std::size_t>(w * horizon);
      const auto len = static_cast<std::size_t>(horizon);
      const Advantages adv = gae(std::span(batch.rewards).subspan(off, len),
                                 std::span(batch.values).subspan(off, len),
                                 std::span(batch.dones).subspan(off, len), bootstrap(w), cfg.gamma,
                                 cfg.lambda);
      std::copy(adv.advantages.begin(), adv.advantages.end(), batch.advantages.begin() + static_cast<std::ptrdiff_t>(off));
      std::copy(adv.returns.begin(), adv.returns.end(), batch.returns.begin() + static_cast<std::ptrdiff_t>(off));
    }
    if (cfg.normalize_advantages) {
      const double mean = std::accumulate(batch.advantages.begin(), batch.advantages.end(), 0.0) / n;
      double var = 0.0;
      for (double a : batch.advantages) var += (a - mean) * (a - mean);
      const double sd = std::sqrt(var / n) + 1e-8;
      for (double& a : batch.advantages) a = (a - mean) / sd;
    }

    UpdateStats stats;
    const bool at_eval = steps + n >= next_eval;
    if (at_eval && !replay.empty()) {
      double se = 0.0;
      std::size_t count = 0;
      for (const RolloutBatch& old : replay) {
        const nn::RowVector v = net.forward(old.observations).values;
        for (std::size_t i = 0; i < old.size(); ++i) {
          const double e = v(static_cast<Eigen::Index>(i)) - old.returns[i];
          se += e * e;
        }
        count += old.size();
      }
      stats.replay_value_mse = se / static_cast<double>(count);
    }

    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    const int mb = n / cfg.minibatches_per_update;
    LossDiagnostics diag_sum;
    int diag_count = 0;
    for (int epoch = 0; epoch < cfg.epochs_per_update; ++epoch) {
      hntt::shuffle(order.begin(), order.end(), update_rng);
      for (int k = 0; k < cfg.minibatches_per_update; ++k) {
        const std::span<const int> idx(order.data() + static_cast<std::ptrdiff_t>(k) * mb, static_cast<std::size_t>(mb));
        LossResult lr = ppo_loss(batch, idx, net, cfg, update_rng(), true);
        const double gnorm = lr.gradient.norm();
        if (!std::isfinite(lr.diag.loss) || !std::isfinite(gnorm)) {
          net.mutable_params() = last_good;
          checkpoint_to("diverged_last_good.json");
          throw DivergenceError("non-finite loss at step " + std::to_string(steps));
        }
        if (cfg.grad_norm_clip > 0 && gnorm > cfg.grad_norm_clip) lr.gradient *= cfg.grad_norm_clip / gnorm;
        adam.step(net.mutable_params(), lr.gradient);
        diag_sum.loss += lr.diag.loss;
        diag_sum.policy_loss += lr.diag.policy_loss;
        diag_sum.value_loss += lr.diag.value_loss;
        diag_sum.entropy += lr.diag.entropy;
        diag_sum.clip_fraction += lr.diag.clip_fraction;
        diag_sum.approx_kl += lr.diag.approx_kl;
        ++diag_count;
      }
    }
    if (!all_finite(net.params())) {
      net.mutable_params() = last_good;
      checkpoint_to("diverged_last_good.json");
      throw DivergenceError("non-finite parameters at step " + std::to_string(steps));
    }
    last_good = net.params();

    if (cfg.replay_batches > 0) {
      replay.push_back(std::move(batch));
      batch = RolloutBatch{};
      while (static_cast<int>(replay.size()) > cfg.replay_batches) replay.pop_front();
    }

    steps += n;
    stats.step = steps;
    const double inv = 1.0 / std::max(1, diag_count);
    stats.diag = {diag_sum.loss * inv, diag_sum.policy_loss * inv, diag_sum.value_loss * inv,
                  diag_sum.entropy * inv, diag_sum.clip_fraction * inv, diag_sum.approx_kl * inv};

    const CurvePoint* point = nullptr;
    if (steps >= next_eval) {
      while (next_eval <= steps) next_eval += cfg.eval_interval;
      if (!recent.empty()) {
        double len = 0.0, succ = 0.0;
        for (auto [l, s] : recent) {
          len += l;
          succ += s ? 1.0 : 0.0;
        }
        result.curve.push_back({steps, len / static_cast<double>(recent.size()), succ / static_cast<double>(recent.size())});
        point = &result.curve.back();
      }
    }
    if (options.on_update) options.on_update(stats, point);
    if (next_checkpoint > 0 && steps >= next_checkpoint) {
      checkpoint_to("checkpoint_" + std::to_string(steps) + ".json");
      next_checkpoint += options.checkpoint_interval;
    }
  }

  agent.trained_steps = steps;
  if (!options.out_dir.empty()) {
    checkpoint_to("final.json");
    write_curve_csv(result.curve, options.out_dir / "learning_curve.csv");
  }
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation

EvalSummary evaluate(const Agent& agent, std::shared_ptr<const navsim::WorldMap> map,
                     const reward::RewardConfig& reward_cfg, int episodes, ActMode mode,
                     std::uint64_t seed, const std::vector<int>& goals) {
  if (episodes <= 0) throw ArgumentError("evaluate: episodes must be > 0");
  if (map->fingerprint() != agent.map_fingerprint) throw ConfigError("evaluate: agent was trained on a different map");
  reward::RewardConfig rc = reward_cfg;
  rc.shaping_enabled = profile(agent.kind).shaping;
  navsim::NavEnv env(map, agent.actions());
  EvalSummary summary;
  double heading_sum = 0.0;
  std::int64_t total_steps = 0, total_collisions = 0;
  for (int e = 0; e < episodes; ++e) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(e)));
    std::optional<int> goal;
    if (!goals.empty()) goal = goals[static_cast<std::size_t>(e) % goals.size()];
    navsim::Observation obs = env.reset(rng(), goal);
    EpisodeRecord rec;
    rec.goal_index = env.goal_index();
    double ep_heading = 0.0;
    while (true) {
      const int a = agent.act(obs, mode, rng);
      const navsim::StepResult sr = env.step(a);
      ++rec.length;
      ep_heading += sr.info.abs_heading_delta;
      rec.collisions += sr.info.collided_wall ? 1 : 0;
      rec.total_reward += reward::reward(sr.info, rc);
      obs = sr.observation;
      if (sr.done) {
        rec.success = sr.info.reached_goal;
        rec.died = sr.info.died;
        break;
      }
    }
    rec.mean_abs_heading_delta = ep_heading / rec.length;
    heading_sum += ep_heading;
    total_steps += rec.length;
    total_collisions += rec.collisions;
    summary.success_rate += rec.success ? 1.0 : 0.0;
    summary.mean_length += rec.length;
    summary.episodes.push_back(rec);
  }
  summary.success_rate /= episodes;
  summary.mean_length /= episodes;
  summary.mean_abs_heading_delta = heading_sum / static_cast<double>(total_steps);
  summary.collision_rate = static_cast<double>(total_collisions) / static_cast<double>(total_steps);
  return summary;
}

}  // namespace hntt::ppo
