// _hntt: thin Python bindings. JSON-shaped results cross the boundary as
// strings and are decoded by the hntt package.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hntt/error.hpp"
#include "hntt/experiment.hpp"
#include "hntt/navsim.hpp"
#include "hntt/ppo.hpp"
#include "hntt/reward.hpp"
#include "hntt/stats.hpp"

namespace py = pybind11;
using namespace hntt;
using nlohmann::json;

namespace {

std::shared_ptr<const navsim::WorldMap> map_or_default(const std::optional<std::string>& map_json) {
  if (!map_json) return std::make_shared<const navsim::WorldMap>(navsim::default_map());
  return std::make_shared<const navsim::WorldMap>(navsim::map_from_json(json::parse(*map_json)));
}

py::dict obs_dict(const navsim::Observation& o) {
  py::dict d;
  d["symbolic"] = o.symbolic;
  d["depth"] = o.depth;
  return d;
}

py::dict info_dict(const navsim::StepInfo& s) {
  py::dict d;
  d["collided_wall"] = s.collided_wall;
  d["displacement"] = s.displacement;
  d["recent_travel"] = s.recent_travel;
  d["heading_delta"] = s.heading_delta;
  d["abs_heading_delta"] = s.abs_heading_delta;
  d["reached_goal"] = s.reached_goal;
  d["died"] = s.died;
  d["jumped"] = s.jumped;
  d["truncated"] = s.truncated;
  d["prev_goal_distance"] = s.prev_goal_distance;
  d["new_goal_distance"] = s.new_goal_distance;
  d["initial_goal_distance"] = s.initial_goal_distance;
  return d;
}

navsim::StepInfo info_from(const py::dict& d) {
  navsim::StepInfo s;
  auto get = [&](const char* k, auto& field) {
    if (d.contains(k)) field = d[k].cast<std::decay_t<decltype(field)>>();
  };
  get("collided_wall", s.collided_wall);
  get("displacement", s.displacement);
  get("recent_travel", s.recent_travel);
  get("heading_delta", s.heading_delta);
  get("reached_goal", s.reached_goal);
  get("died", s.died);
  get("jumped", s.jumped);
  get("truncated", s.truncated);
  get("prev_goal_distance", s.prev_goal_distance);
  get("new_goal_distance", s.new_goal_distance);
  get("initial_goal_distance", s.initial_goal_distance);
  s.abs_heading_delta = std::abs(s.heading_delta);
  return s;
}

reward::RewardConfig reward_cfg(const std::optional<std::string>& cfg_json, bool shaping) {
  reward::RewardConfig c = cfg_json ? reward::reward_config_from_json(json::parse(*cfg_json)) : reward::RewardConfig{};
  if (!cfg_json) c.shaping_enabled = shaping;
  c.validate();
  return c;
}

}  // namespace

PYBIND11_MODULE(_hntt, m) {
  m.doc() = "Navigation simulator, PPO evaluation and HNTT statistics";

  // Translators run newest first, so the subclass goes last.
  py::register_exception<Error>(m, "HnttError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("default_map_json", [] { return navsim::map_to_json(navsim::default_map()).dump(); });
  m.def("default_config_json", [] { return to_json(ExperimentConfig{}).dump(); });
  m.def("load_config_json", [](const std::string& path) { return to_json(load_experiment(path)).dump(); },
        py::arg("path"));
  m.def("shortest_path_steps",
        [](int goal, const std::optional<std::string>& map_json) {
          return navsim::shortest_path_steps(*map_or_default(map_json), goal);
        },
        py::arg("goal"), py::arg("map_json") = py::none());

  py::class_<navsim::NavEnv>(m, "Env")
      .def(py::init([](const std::string& variant, const std::optional<std::string>& map_json) {
             return navsim::NavEnv(map_or_default(map_json), navsim::action_variant_from_string(variant));
           }),
           py::arg("variant") = "shaped14", py::arg("map_json") = py::none())
      .def("reset",
           [](navsim::NavEnv& e, std::uint64_t seed, std::optional<int> goal) { return obs_dict(e.reset(seed, goal)); },
           py::arg("seed"), py::arg("goal") = py::none())
      .def("step",
           [](navsim::NavEnv& e, int action) {
             const auto r = e.step(action);
             return py::make_tuple(obs_dict(r.observation), info_dict(r.info), r.done);
           },
           py::arg("action"))
      .def_property_readonly("action_count", &navsim::NavEnv::action_count)
      .def_property_readonly("goal_index", &navsim::NavEnv::goal_index)
      .def_property_readonly("done", &navsim::NavEnv::done)
      .def_property_readonly("position", [](const navsim::NavEnv& e) {
        return py::make_tuple(e.state().position.x, e.state().position.y);
      })
      .def_property_readonly("heading", [](const navsim::NavEnv& e) { return e.state().heading; })
      .def_property_readonly("steps", [](const navsim::NavEnv& e) { return e.state().steps_elapsed; });

  m.def("reward_terms",
        [](const py::dict& info, bool shaping, const std::optional<std::string>& cfg_json) {
          const auto s = info_from(info);
          const auto c = reward_cfg(cfg_json, shaping);
          py::dict d;
          d["base"] = reward::base_reward(s, c);
          d["camera"] = reward::camera_term(s, c);
          d["collision"] = reward::collision_term(s, c);
          d["slow"] = reward::slow_term(s, c);
          d["total"] = reward::reward(s, c);
          return d;
        },
        py::arg("info"), py::arg("shaping") = true, py::arg("config_json") = py::none());

  m.def("evaluate_checkpoint",
        [](const std::string& path, int episodes, std::uint64_t seed, bool deterministic,
           const std::optional<std::string>& map_json) {
          const auto map = map_or_default(map_json);
          ppo::Agent agent = ppo::load_checkpoint(path, map.get());
          reward::RewardConfig rc;
          rc.shaping_enabled = ppo::profile(agent.kind).shaping;
          ppo::EvalSummary s;
          {
            py::gil_scoped_release release;
            s = ppo::evaluate(agent, map, rc, episodes,
                              deterministic ? ppo::ActMode::kDeterministic : ppo::ActMode::kStochastic, seed);
          }
          py::dict d;
          d["episodes"] = static_cast<int>(s.episodes.size());
          d["success_rate"] = s.success_rate;
          d["mean_length"] = s.mean_length;
          d["mean_abs_heading_delta"] = s.mean_abs_heading_delta;
          d["collision_rate"] = s.collision_rate;
          return d;
        },
        py::arg("path"), py::arg("episodes") = 100, py::arg("seed") = 0, py::arg("deterministic") = false,
        py::arg("map_json") = py::none());

  m.def("quantile", &stats::quantile, py::arg("values"), py::arg("p"));
  m.def("bootstrap_median_ci_json",
        [](const std::vector<double>& acc, int iterations, double level, std::uint64_t seed) {
          Rng rng(seed);
          return stats::to_json(stats::bootstrap_median_ci(acc, iterations, level, rng)).dump();
        },
        py::arg("accuracies"), py::arg("iterations") = 10'000, py::arg("level") = 0.95, py::arg("seed") = 0);
  m.def("subsample_validation_json",
        [](const std::vector<double>& acc, int n, int repeats, int iterations, double level, std::uint64_t seed) {
          Rng rng(seed);
          return stats::to_json(stats::subsample_validation(acc, n, repeats, iterations, level, rng)).dump();
        },
        py::arg("accuracies"), py::arg("subsample_n") = 50, py::arg("repeats") = 100,
        py::arg("iterations") = 10'000, py::arg("level") = 0.95, py::arg("seed") = 0);
  m.def("ols_json",
        [](const std::vector<double>& y, const std::vector<std::vector<double>>& xs) {
          return stats::to_json(stats::ols_regression(y, xs)).dump();
        },
        py::arg("y"), py::arg("predictors"));
  m.def("cohens_kappa_json",
        [](const std::vector<int>& a, const std::vector<int>& b) { return stats::to_json(stats::cohens_kappa(a, b)).dump(); },
        py::arg("a"), py::arg("b"));
}
