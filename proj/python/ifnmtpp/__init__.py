# Copyright 2026 The ifnmtpp Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Python bindings for the ifnmtpp C++ library."""

import json as _json

from ._core import (
    ConfigError,
    DataError,
    Error,
    NumericError,
    Predictor,
    calibrate_binary,
    oracle_log_density,
    predict_mark,
    process_names,
    simulate,
)
from . import _core


def default_config():
    """Returns the default experiment configuration as a dict."""
    return _json.loads(_core.default_config())


def _dump(config):
    return config if isinstance(config, str) else _json.dumps(config)


def generate(config):
    _core.generate(_dump(config))


def preprocess(config):
    _core.preprocess(_dump(config))


def train(config):
    """Trains and writes a checkpoint; returns (best_step, best_val_nll)."""
    return _core.train(_dump(config))


def calibrate(config):
    _core.calibrate(_dump(config))


def evaluate(config):
    return _json.loads(_core.evaluate(_dump(config)))


def fidelity(config, oracle=False):
    return _json.loads(_core.fidelity(_dump(config), oracle))


def checkpoint_path(config):
    return str(_core.checkpoint_path(_dump(config)))


__all__ = [
    "ConfigError",
    "DataError",
    "Error",
    "NumericError",
    "Predictor",
    "calibrate",
    "calibrate_binary",
    "checkpoint_path",
    "default_config",
    "evaluate",
    "fidelity",
    "generate",
    "oracle_log_density",
    "predict_mark",
    "preprocess",
    "process_names",
    "simulate",
    "train",
]
