"""Python access to the Wukong C++ core.

Configs and dataset specs are plain dicts; they are passed to the core as JSON.
"""

import json

from . import _wukong
from ._wukong import (
    ConfigError,
    DataError,
    NumericError,
    UndefinedMetricError,
    auc,
    fm_basic,
    fm_lowrank,
    fnv1a64,
    hash_token,
    logloss,
)

__all__ = [
    "ConfigError",
    "DataError",
    "Model",
    "NumericError",
    "UndefinedMetricError",
    "auc",
    "count_flops",
    "fit_power_law",
    "fm_basic",
    "fm_lowrank",
    "fnv1a64",
    "hash_token",
    "logloss",
    "train",
]


def count_flops(config):
    return json.loads(_wukong.count_flops(json.dumps(config)))


def fit_power_law(x, y):
    return json.loads(_wukong.fit_power_law(list(map(float, x)), list(map(float, y))))


class Model:
    """A 64-bit model built from a config dict, or loaded from a checkpoint."""

    def __init__(self, config=None, _impl=None):
        self._impl = _impl if _impl is not None else _wukong.Model(json.dumps(config))

    @classmethod
    def load(cls, path):
        return cls(_impl=_wukong.Model.load(str(path)))

    def save(self, path):
        self._impl.save(str(path))

    def predict(self, batch):
        return self._impl.predict(batch)

    def parameter_names(self):
        return self._impl.parameter_names()

    def parameter(self, name):
        return self._impl.parameter(name)

    @property
    def config(self):
        return json.loads(self._impl.config_json())

    @property
    def digest(self):
        return self._impl.digest()


def train(config, data, options=None):
    """Trains at 64-bit; returns (list of metric dicts, Model)."""
    lines, impl = _wukong.train(json.dumps(config), json.dumps(data), json.dumps(options or {}))
    return [json.loads(l) for l in lines], Model(_impl=impl)
