import json
import os
import subprocess

import numpy as np
import pytest

import wukong

SYNTH = {"format": "synthetic", "num_features": 3, "cardinalities": [4], "target_order": 2,
         "num_examples": 256, "seed": 1}

CONFIG = {"d": 4, "l": 1, "n_F": 2, "n_L": 2, "k": 2, "fmb_mlp": [8], "head_mlp": [8], "seed": 3,
          "schema": {"categorical": [{"name": f"f{i}", "cardinality": 4} for i in range(3)]}}


def test_hash_golden():
    assert wukong.fnv1a64("foobar") == 0x85944171F73967E8
    assert wukong.hash_token("foobar", 1000) == 1 + 0x85944171F73967E8 % 999


def test_lowrank_fm_matches_numpy():
    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, size=(2, 5, 3))
    y = rng.uniform(-1, 1, size=(5, 4))
    got = wukong.fm_lowrank(x, y)
    want = np.einsum("bnd,bmd,mk->bnk", x, x, y)
    np.testing.assert_allclose(got, want, atol=1e-12)
    np.testing.assert_allclose(wukong.fm_basic(x), np.einsum("bnd,bmd->bnm", x, x), atol=1e-12)


def test_metrics():
    assert wukong.auc([0.1, 0.9, 0.4], [0, 1, 0]) == 1.0
    assert wukong.logloss([0.0], [1.0]) == pytest.approx(np.log(2.0))
    with pytest.raises(wukong.UndefinedMetricError):
        wukong.auc([0.1, 0.2], [1, 1])


def test_flops_and_power_law():
    report = wukong.count_flops(CONFIG)
    assert report["total"] > 0
    x = [1, 3, 10, 30, 100]
    fit = wukong.fit_power_law(x, [2.0 + 0.5 * v ** 0.3 for v in x])
    assert fit["c"] == pytest.approx(0.3, rel=1e-6)


def test_model_predict_and_checkpoint(tmp_path):
    m = wukong.Model(CONFIG)
    assert "layer.0.lcb.w" in m.parameter_names()
    batch = {"categorical": [[[1], [2, 3]], [[0], []], [[3], [3]]]}
    z = m.predict(batch)
    assert z.shape == (2,)
    m.save(tmp_path / "m.ckpt")
    back = wukong.Model.load(tmp_path / "m.ckpt")
    np.testing.assert_array_equal(back.predict(batch), z)
    assert back.digest == m.digest
    with pytest.raises(wukong.ConfigError):
        wukong.Model({"d": "four"})


def test_train_is_deterministic():
    cfg = {k: v for k, v in CONFIG.items() if k != "schema"}
    opts = {"batch_size": 32, "record_wall_time": False}
    a, _ = wukong.train(cfg, SYNTH, opts)
    b, _ = wukong.train(cfg, SYNTH, opts)
    assert len(a) == 1 and a == b
    assert a[0]["examples_seen"] == 256


@pytest.mark.skipif("WUKONG_CLI" not in os.environ, reason="CLI path not provided")
def test_cli_flops_matches_module(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(CONFIG))
    out = subprocess.run([os.environ["WUKONG_CLI"], "flops", "--config", str(path)],
                         check=True, capture_output=True, text=True).stdout
    assert json.loads(out) == wukong.count_flops(CONFIG)
