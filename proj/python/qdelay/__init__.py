"""Python access to the qdelay simulator, baselines and learned predictors.

Configurations are plain dicts with the same sections as the JSON config
files (seed, sim, dataset, model, eval); missing keys take their defaults.
"""

import json
import os

from ._qdelay import (
    ConfigError,
    FormatError,
    GaussianMixture,
    IoError,
    Model,
    erlang_c,
    figure_ids,
    read_dataset,
)
from . import _qdelay

__all__ = [
    "ConfigError",
    "FormatError",
    "GaussianMixture",
    "HolPredictor",
    "IoError",
    "Model",
    "derived_values",
    "erlang_c",
    "evaluate",
    "figure_ids",
    "make_dataset",
    "read_dataset",
    "reproduce",
    "resolve_config",
    "simulate",
    "simulate_to_csv",
    "train",
]


def _dump(config):
    if config is None:
        return ""
    return json.dumps(config)


def resolve_config(config=None):
    """Fully resolved config dict, with defaults filled in and values checked."""
    return json.loads(_qdelay.resolve_config(_dump(config)))


def derived_values(config=None):
    return json.loads(_qdelay.derived_values(_dump(config)))


def simulate(config=None):
    """Runs the simulator and returns per-customer numpy arrays.

    Keys: arrival_time, service_start, service_duration, wait, les, hol,
    warmup (bool), plus the scalar completions.
    """
    return _qdelay.simulate_arrays(_dump(config))


def HolPredictor(config=None):
    return _qdelay.HolPredictor(_dump(config))


def simulate_to_csv(config, out_dir):
    return _qdelay.cmd_simulate(_dump(config), os.fspath(out_dir))


def make_dataset(customers, config, out_dir):
    _qdelay.cmd_make_dataset(os.fspath(customers), _dump(config), os.fspath(out_dir))


def train(train_csv, config, out_dir):
    return _qdelay.cmd_train(os.fspath(train_csv), _dump(config), os.fspath(out_dir))


def evaluate(test_csv, config, out_dir, model=None, baseline=None, customers=None):
    """Scores a model file or a baseline ("les", "hol", "refined-hol")."""
    doc = _qdelay.cmd_evaluate(
        None if model is None else os.fspath(model),
        baseline,
        os.fspath(test_csv),
        _dump(config),
        os.fspath(out_dir),
        None if customers is None else os.fspath(customers),
    )
    return json.loads(doc)


def reproduce(figure, workdir, config=None):
    return json.loads(_qdelay.cmd_reproduce(figure, _dump(config), os.fspath(workdir)))
