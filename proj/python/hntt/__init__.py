"""Python access to the hntt simulator, checkpoint evaluation and statistics."""

import json as _json

try:
    from . import _hntt
except ImportError:  # build tree: the extension sits next to the package
    import _hntt

ConfigError = _hntt.ConfigError
HnttError = _hntt.HnttError
Env = _hntt.Env
quantile = _hntt.quantile
shortest_path_steps = _hntt.shortest_path_steps
reward_terms = _hntt.reward_terms
evaluate_checkpoint = _hntt.evaluate_checkpoint


def default_map():
    return _json.loads(_hntt.default_map_json())


def default_config():
    return _json.loads(_hntt.default_config_json())


def load_config(path):
    return _json.loads(_hntt.load_config_json(str(path)))


def bootstrap_median_ci(accuracies, iterations=10_000, level=0.95, seed=0):
    return _json.loads(_hntt.bootstrap_median_ci_json(list(accuracies), iterations, level, seed))


def subsample_validation(accuracies, subsample_n=50, repeats=100, iterations=10_000, level=0.95, seed=0):
    return _json.loads(
        _hntt.subsample_validation_json(list(accuracies), subsample_n, repeats, iterations, level, seed))


def ols(y, predictors):
    return _json.loads(_hntt.ols_json(list(y), [list(p) for p in predictors]))


def cohens_kappa(a, b):
    return _json.loads(_hntt.cohens_kappa_json(list(a), list(b)))
