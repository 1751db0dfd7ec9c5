import json
import os
import pathlib

import numpy as np
import pytest

import hntt

SOURCE = pathlib.Path(os.environ.get("HNTT_SOURCE_DIR", pathlib.Path(__file__).resolve().parents[2]))


def test_default_map_matches_shipped_file():
    shipped = json.loads((SOURCE / "data" / "default_map.json").read_text())
    assert hntt.default_map() == shipped


def test_config_defaults():
    cfg = hntt.default_config()
    assert cfg["agent_kind"] == "reward_shaping"
    assert cfg["ppo"]["total_steps"] == 2_000_000


def test_env_episode_terminates_and_is_deterministic():
    def run(seed):
        env = hntt.Env("shaped14")
        obs = env.reset(seed)
        assert env.action_count == 14
        assert obs["symbolic"] and obs["depth"]
        rng = np.random.default_rng(seed)
        trace = []
        done = False
        while not done:
            obs, info, done = env.step(int(rng.integers(env.action_count)))
            trace.append(env.position)
        return trace, info

    a, info = run(5)
    b, _ = run(5)
    assert a == b
    assert info["reached_goal"] or info["died"] or info["truncated"]
    assert hntt.Env("baseline8").action_count == 8


def test_env_rejects_bad_variant():
    with pytest.raises(ValueError):
        hntt.Env("walk")


def test_shortest_path_oracle():
    steps = [hntt.shortest_path_steps(g) for g in range(16)]
    assert all(s > 0 for s in steps)


def test_reward_terms():
    info = {"collided_wall": True, "displacement": 250.0, "recent_travel": 250.0,
            "prev_goal_distance": 1000.0, "new_goal_distance": 1000.0, "initial_goal_distance": 2000.0}
    t = hntt.reward_terms(info)
    assert t["collision"] == pytest.approx(-0.05)
    assert t["camera"] == 0.0 and t["slow"] == 0.0
    assert t["total"] == pytest.approx(t["base"] - 0.05)
    assert hntt.reward_terms(info, shaping=False)["total"] == pytest.approx(t["base"])


def test_statistics():
    assert hntt.quantile([3, 1, 4, 1, 5, 9, 2, 6], 0.25) == pytest.approx(1.75)
    a = [1] * 4 + [1] + [0] + [0] * 49
    b = [1] * 4 + [0] + [1] + [0] * 49
    assert hntt.cohens_kappa(a, b)["kappa"] == pytest.approx(0.78, abs=1e-12)

    rng = np.random.default_rng(1)
    x1, x2 = rng.normal(size=40), rng.normal(size=40)
    y = 1.0 + 2.0 * x1 - 0.5 * x2 + rng.normal(scale=0.1, size=40)
    r = hntt.ols(y, [x1, x2])
    ref, *_ = np.linalg.lstsq(np.column_stack([np.ones(40), x1, x2]), y, rcond=None)
    assert [r["intercept"], *r["betas"]] == pytest.approx(list(ref), abs=1e-9)

    acc = (rng.binomial(6, 0.5, size=92) / 6).tolist()
    one = hntt.bootstrap_median_ci(acc, iterations=2000, seed=3)
    assert one == hntt.bootstrap_median_ci(acc, iterations=2000, seed=3)
    assert one["ci"][0] <= one["median"] <= one["ci"][1]
    sub = hntt.subsample_validation(acc, subsample_n=50, repeats=20, iterations=500, seed=3)
    assert 0.0 <= sub["pass_rate"] <= 1.0


def test_missing_checkpoint_raises():
    with pytest.raises(hntt.HnttError):
        hntt.evaluate_checkpoint("/nonexistent/final.json", episodes=1)
