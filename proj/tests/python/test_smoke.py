import math

import numpy as np
import pytest

import hncr


def test_mobius_add_example():
    out = hncr.mobius_add(np.array([0.3, 0.0]), np.array([0.0, 0.4]))
    np.testing.assert_allclose(out, [0.348 / 1.0144, 0.364 / 1.0144], rtol=0, atol=1e-12)


def test_exp_log_round_trip():
    rng = np.random.default_rng(0)
    x = rng.normal(size=8)
    x *= 0.5 / np.linalg.norm(x)
    y = rng.normal(size=8)
    y *= 0.7 / np.linalg.norm(y)
    back = hncr.exp_map(x, hncr.log_map(x, y))
    np.testing.assert_allclose(back, y, atol=1e-10)


def test_distance_from_origin():
    d = hncr.distance(np.zeros(2), np.array([0.5, 0.0]))
    assert d == pytest.approx(2 * math.atanh(0.5), abs=1e-12)
    assert hncr.distance(np.zeros(2), np.array([0.5, 0.0]), c=0.0) == pytest.approx(1.0)


def test_projection_and_scale():
    p = hncr.project(np.array([2.0, 0.0]))
    assert np.linalg.norm(p) == pytest.approx(1 - hncr.BALL_EPS)
    assert hncr.riemannian_scale(np.zeros(3)) == 0.25
    assert hncr.conformal_factor(np.zeros(3)) == 2.0


def test_matvec_shape_checked():
    with pytest.raises(ValueError):
        hncr.mobius_matvec(np.eye(3), np.zeros(2))
    out = hncr.mobius_matvec(np.eye(2) * 2, np.array([0.1, 0.0]))
    assert out[0] == pytest.approx(math.tanh(2 * math.atanh(0.1)))


def test_decoder():
    assert hncr.fermi_dirac(2.0) == 0.5
    assert hncr.fermi_dirac(1.0) > hncr.fermi_dirac(3.0)


def test_metrics_match_brute_force():
    rng = np.random.default_rng(3)
    scores = rng.integers(0, 5, size=200) / 5
    labels = rng.integers(0, 2, size=200)
    pos, neg = scores[labels == 1], scores[labels == 0]
    brute = ((pos[:, None] > neg[None, :]) + 0.5 * (pos[:, None] == neg[None, :])).mean()
    assert hncr.auc(scores, labels) == brute
    assert hncr.auc(scores, np.ones(200)) is None
    assert hncr.accuracy([0.6, 0.6], [1, 0]) == 0.5


def test_two_block_data():
    pairs, ub, ib = hncr.two_block(seed=1)
    assert pairs.shape[1] == 2
    assert len(ub) == 200 and len(ib) == 300
    same = np.mean([ub[u] == ib[i] for u, i in pairs])
    assert same > 0.9


def test_cli_round_trip(tmp_path):
    data = tmp_path / "ratings.tsv"
    hncr.write_two_block(str(data), users=40, items=60, seed=2)
    out = tmp_path / "out"
    common = ["--dataset", str(data), "--out", str(out), "--dim", "4", "--epochs", "1", "--batch", "16",
              "--line-epochs", "3", "--latent-user", "8", "--latent-item", "8", "--ranking-negatives", "10"]
    assert hncr.run_cli(["prepare", *common]) == 0
    assert hncr.run_cli(["train", *common]) == 0
    assert (out / "checkpoint.txt").exists()
    assert hncr.run_cli(["evaluate", "--dataset", str(tmp_path / "missing.tsv")]) == 2
