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

import math

import pytest

import ifnmtpp


def test_processes_and_simulation():
    assert set(ifnmtpp.process_names()) == {"hawkes_1", "hawkes_2", "poisson", "self_correct", "renewal"}
    events = ifnmtpp.simulate("poisson", 2000, seed=3)
    assert len(events) == 2000
    times = [t for _, t in events]
    assert all(b > a for a, b in zip(times, times[1:]))
    assert {m for m, _ in events} <= set(range(5))
    assert abs(times[-1] / 2000 - 1.0) < 0.1
    assert ifnmtpp.simulate("hawkes_1", 50, seed=1) == ifnmtpp.simulate("hawkes_1", 50, seed=1)


def test_oracle_density():
    # Exponential waiting time with a uniform mark.
    value = ifnmtpp.oracle_log_density("poisson", [(0, 1.0)], 2, 2.5)
    assert value == pytest.approx(-1.5 - math.log(5.0))


def test_thresholds():
    eps, f1 = ifnmtpp.calibrate_binary([0.1, 0.9, 0.8, 0.2], [False, True, True, False])
    assert f1 == 1.0
    assert 0.2 < eps < 0.8
    assert ifnmtpp.predict_mark([0.9, 0.1], [0.99, 0.01], [0.0, 0.0]) == 1
    assert ifnmtpp.predict_mark([0.2, 0.5, 0.3], [1 / 3] * 3, [0.0] * 3) == 1


def test_errors():
    with pytest.raises(ifnmtpp.ConfigError):
        ifnmtpp.simulate("lorenz", 10)
    with pytest.raises(ifnmtpp.Error):
        ifnmtpp.generate({"bogus": 1})


def test_pipeline(tmp_path):
    cfg = ifnmtpp.default_config()
    cfg.update(out=str(tmp_path), process="poisson", seed=5)
    cfg["generate"].update(train=20, val=5, test=5, seq_len=12)
    cfg["data"] = {k: str(tmp_path / "data" / f"{k}.jsonl") for k in ("train", "val", "test")}
    cfg["model"].update(history_dim=8, input_dim=8, num_layers=2, embedding_dim=8)
    cfg["train"].update(steps=40, warmup_steps=8, batch_size=4, eval_every=20)
    cfg["sample"]["n_samples"] = 10
    cfg["normalize"] = False
    cfg["fidelity"].update(grid_points=32, max_prefixes=4)

    ifnmtpp.generate(cfg)
    ifnmtpp.preprocess(cfg)
    step, nll = ifnmtpp.train(cfg)
    assert step >= 0 and math.isfinite(nll)
    ifnmtpp.calibrate(cfg)
    report = ifnmtpp.evaluate(cfg)
    assert set(report["methods"]) == {
        "ours",
        "ours-w/o-thresholding",
        "time-mark-with-thresholding",
        "time-mark-w/o-thresholding",
    }
    assert math.isfinite(report["nll"])
    assert ifnmtpp.fidelity(cfg, oracle=True)["l1"] <= 1e-6

    model = ifnmtpp.Predictor(ifnmtpp.checkpoint_path(cfg))
    assert model.num_marks == 5
    history = [(1, 0.5), (3, 1.7)]
    probs = model.mark_prob(history)
    assert sum(probs) == pytest.approx(1.0, abs=1e-9)
    t = model.predict_time(history, 2, seed=1)
    assert t > 1.7
    assert model.predict_time(history, 2, seed=1) == t
    assert math.isfinite(model.log_density(history, 0, 2.4))
