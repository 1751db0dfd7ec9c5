#include <doctest.h>

#include "hntt/error.hpp"
#include "hntt/reward.hpp"
#include "test_util.hpp"

using namespace hntt;
using navsim::StepInfo;
using reward::RewardConfig;

namespace {

// Neutral step: no progress, enough recent travel, no events.
StepInfo neutral() {
  StepInfo s;
  s.displacement = 250.0;
  s.recent_travel = 250.0;
  s.prev_goal_distance = 1000.0;
  s.new_goal_distance = 1000.0;
  s.initial_goal_distance = 2000.0;
  return s;
}

RewardConfig shaped_cfg() {
  RewardConfig c;
  c.shaping_enabled = true;
  return c;
}

}  // namespace

TEST_CASE("reward config defaults and validation") {
  RewardConfig c;
  CHECK(c.step_penalty == -0.01);
  CHECK(c.death_penalty == -1.0);
  CHECK(c.goal_reward == 1.0);
  CHECK(c.camera_threshold == 0.15);
  CHECK(c.collision_penalty == -0.05);
  CHECK(c.slow_threshold == 220.0);
  CHECK(c.slow_penalty == -0.01);
  CHECK_NOTHROW(c.validate());

  RewardConfig bad = c;
  bad.collision_penalty = 0.05;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.goal_reward = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.slow_threshold = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  const RewardConfig back = reward::reward_config_from_json(reward::to_json(shaped_cfg()));
  CHECK(reward::to_json(back) == reward::to_json(shaped_cfg()));
}

TEST_CASE("base reward examples") {
  const RewardConfig c;
  StepInfo s = neutral();
  CHECK(reward::base_reward(s, c) == doctest::Approx(-0.01).epsilon(1e-12));

  s.reached_goal = true;
  CHECK(reward::base_reward(s, c) == doctest::Approx(0.99).epsilon(1e-12));

  s = neutral();
  s.died = true;
  CHECK(reward::base_reward(s, c) == doctest::Approx(-1.01).epsilon(1e-12));

  // Approach term normalised by the episode's initial distance.
  s = neutral();
  s.new_goal_distance = 900.0;
  CHECK(reward::approach_term(s, c) == doctest::Approx(100.0 / 2000.0));
  RewardConfig fixed = c;
  fixed.normalizing_distance = 500.0;
  CHECK(reward::approach_term(s, fixed) == doctest::Approx(100.0 / 500.0));
}

TEST_CASE("shaping truth table over all eight trigger combinations") {
  const RewardConfig c = shaped_cfg();
  for (int mask = 0; mask < 8; ++mask) {
    const bool camera = mask & 1, collide = mask & 2, slow = mask & 4;
    StepInfo s = neutral();
    // Off states sit exactly on the thresholds, which must not fire.
    s.heading_delta = camera ? -0.5 : 0.15;
    s.abs_heading_delta = std::abs(s.heading_delta);
    s.collided_wall = collide;
    s.displacement = slow ? 219.0 : 220.0;
    s.recent_travel = s.displacement;
    CAPTURE(mask);
    const double cam = reward::camera_term(s, c);
    const double col = reward::collision_term(s, c);
    const double slw = reward::slow_term(s, c);
    CHECK((cam != 0.0) == camera);
    CHECK((col != 0.0) == collide);
    CHECK((slw != 0.0) == slow);
    if (camera) CHECK(cam == doctest::Approx(-0.05 * (0.5 - 0.15)).epsilon(1e-12));
    if (collide) CHECK(col == -0.05);
    if (slow) CHECK(slw == -0.01);
    CHECK(reward::shaped_reward(s, c) == doctest::Approx(reward::base_reward(s, c) + cam + col + slw).epsilon(1e-15));
  }
}

TEST_CASE("shaping boundary examples") {
  const RewardConfig c = shaped_cfg();
  StepInfo s = neutral();
  s.heading_delta = 0.15;
  CHECK(reward::camera_term(s, c) == 0.0);
  s.heading_delta = std::nextafter(0.15, 1.0);
  CHECK(reward::camera_term(s, c) < 0.0);

  s = neutral();
  s.collided_wall = true;
  CHECK(reward::shaped_reward(s, c) == doctest::Approx(reward::base_reward(s, c) - 0.05).epsilon(1e-12));

  s = neutral();
  s.displacement = s.recent_travel = 219.0;
  CHECK(reward::shaped_reward(s, c) == doctest::Approx(reward::base_reward(s, c) - 0.01).epsilon(1e-12));
  s.displacement = s.recent_travel = 220.0;
  CHECK(reward::shaped_reward(s, c) == doctest::Approx(reward::base_reward(s, c)).epsilon(1e-12));

  // The slow window spans two steps: one full stride plus a short one is not slow.
  s = neutral();
  s.displacement = 30.0;
  s.recent_travel = 110.0 + 110.0;
  CHECK(reward::slow_term(s, c) == 0.0);

  // Never punish the goal-reaching step for being slow.
  s = neutral();
  s.displacement = s.recent_travel = 10.0;
  s.reached_goal = true;
  CHECK(reward::slow_term(s, c) == 0.0);
}

TEST_CASE("shaping disabled reduces to the base reward") {
  RewardConfig c;
  c.shaping_enabled = false;
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    StepInfo s;
    s.heading_delta = (uniform01(rng) - 0.5) * 3.0;
    s.collided_wall = uniform01(rng) < 0.5;
    s.displacement = 300 * uniform01(rng);
    s.recent_travel = s.displacement + 110 * uniform01(rng);
    s.reached_goal = uniform01(rng) < 0.1;
    s.died = !s.reached_goal && uniform01(rng) < 0.1;
    s.prev_goal_distance = 3000 * uniform01(rng);
    s.new_goal_distance = 3000 * uniform01(rng);
    s.initial_goal_distance = 3000;
    CHECK(reward::shaped_reward(s, c) == reward::base_reward(s, c));
    CHECK(reward::reward(s, c) == reward::base_reward(s, c));
    // Purity.
    RewardConfig on = c;
    on.shaping_enabled = true;
    CHECK(reward::shaped_reward(s, on) == reward::shaped_reward(s, on));
  }
}

TEST_CASE("approach term telescopes over an episode") {
  const auto map = hntt::testing::default_map_ptr();
  const RewardConfig c;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    navsim::NavEnv env(map, navsim::ActionVariant::kShaped14);
    env.reset(seed);
    const double d0 = geom::distance(env.state().position, env.goal());
    Rng rng(seed);
    double sum = 0.0, d_end = d0;
    while (!env.done()) {
      const auto r = env.step(static_cast<int>(uniform_index(rng, 14)));
      sum += reward::approach_term(r.info, c);
      d_end = r.info.new_goal_distance;
    }
    CHECK(sum == doctest::Approx((d0 - d_end) / d0).epsilon(1e-10));
  }
}
