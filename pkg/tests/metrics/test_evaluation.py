import json

import numpy as np
import pytest

from reguide.errors import InsufficientDataError, NonFiniteError, ShapeError
from reguide.metrics.evaluation import (
    FeatureSet,
    MetricsReport,
    diversity,
    evaluate,
    frechet_distance,
    frechet_from_moments,
    mm_dist,
    r_precision,
    r_precision_curve,
)
from reguide.numerics.rng import RngStream


def test_fid_of_identical_sets_is_zero():
    feats = RngStream(0, 0).normal((500, 4))
    assert frechet_distance(feats, feats) == pytest.approx(0.0, abs=1e-8)


def test_fid_of_a_mean_shift_is_the_squared_shift():
    feats = RngStream(1, 0).normal((400, 3))
    shift = np.array([1.0, -2.0, 0.5])
    assert frechet_distance(feats, feats + shift) == pytest.approx(shift @ shift, rel=1e-6)


def test_fid_from_one_dimensional_moments():
    assert frechet_from_moments(np.zeros(1), np.eye(1), np.ones(1), np.eye(1)) == pytest.approx(1.0)


def test_fid_of_swapped_diagonal_covariances():
    a, b = np.diag([1.0, 4.0]), np.diag([4.0, 1.0])
    assert frechet_from_moments(np.zeros(2), a, np.zeros(2), b) == pytest.approx(2.0)


def test_fid_input_checks():
    with pytest.raises(InsufficientDataError):
        frechet_distance(np.zeros((1, 2)), np.zeros((5, 2)))
    with pytest.raises(ShapeError):
        frechet_distance(np.zeros((5, 2)), np.zeros((5, 3)))
    with pytest.raises(NonFiniteError):
        frechet_from_moments(np.zeros(1), np.full((1, 1), np.inf), np.zeros(1), np.eye(1))


def test_perfect_pairing_has_full_r_precision():
    feats = RngStream(2, 0).normal((64, 8)) * 10.0
    assert r_precision(feats, feats) == 1.0


def test_duplicate_conditions_do_not_both_hit():
    feats = RngStream(4, 0).normal((32, 8)) * 10.0
    feats[1] = feats[0]
    curve = r_precision_curve(feats, feats.copy(), ks=(1, 2))
    assert curve[1] == pytest.approx(30 / 32)
    assert curve[2] == 1.0


def test_random_pairing_is_at_chance():
    stream = RngStream(3, 0)
    motion, cond = stream.normal((10240, 8)), stream.normal((10240, 8))
    curve = r_precision_curve(motion, cond, ks=(1, 2, 3, 32))
    assert curve[1] == pytest.approx(1 / 32, abs=0.01)
    assert curve[1] <= curve[2] <= curve[3]
    assert curve[32] == 1.0


def test_r_precision_input_checks():
    with pytest.raises(ShapeError):
        r_precision(np.zeros((40, 2)), np.zeros((40, 3)))
    with pytest.raises(InsufficientDataError):
        r_precision(np.zeros((31, 2)), np.zeros((31, 2)))


def test_mm_dist():
    assert mm_dist(np.zeros((1, 2)), np.array([[3.0, 4.0]])) == pytest.approx(5.0)
    feats = RngStream(4, 0).normal((20, 3))
    assert mm_dist(feats, feats) == 0.0


def test_mm_dist_ignores_joint_row_order():
    stream = RngStream(5, 0)
    motion, cond = stream.normal((50, 3)), stream.normal((50, 3))
    order = stream.permutation(50)
    assert mm_dist(motion, cond) == pytest.approx(mm_dist(motion[order], cond[order]))


def test_diversity_of_identical_rows_is_zero():
    assert diversity(np.ones((40, 3)), n_pairs=20) == 0.0


def test_diversity_of_two_clusters():
    feats = np.zeros((600, 2))
    feats[300:] = [6.0, 8.0]
    value = diversity(feats, n_pairs=300, seed=1)
    assert 3.5 < value < 6.5
    assert diversity(feats, n_pairs=300, seed=1) == value


def test_diversity_needs_enough_rows():
    with pytest.raises(InsufficientDataError):
        diversity(np.zeros((10, 2)), n_pairs=6)


def test_feature_set_checks():
    with pytest.raises(ShapeError):
        FeatureSet(np.zeros(3), "real")
    with pytest.raises(NonFiniteError):
        FeatureSet(np.array([[np.nan]]), "generated")


def test_metrics_report_serialisation():
    report = MetricsReport(
        r_precision={1: 0.5, 2: 0.7, 3: 0.8},
        fid=0.1,
        mm_dist=1.2,
        diversity=2.0,
        diversity_real=2.5,
        mean_reward=0.3,
        n_real=64,
        n_generated=64,
        seed=0,
    )
    assert report.diversity_gap == pytest.approx(0.5)
    assert "R-precision top-1" in report.to_text()
    payload = json.loads(json.dumps(report.to_dict()))
    assert payload["r_precision"]["2"] == 0.7


def test_evaluating_real_data_against_itself(tiny_reward_model, tiny_dataset):
    test = tiny_dataset.split("test")
    report = evaluate(tiny_reward_model, test, test, seed=0, n_pairs=16)
    assert report.fid == pytest.approx(0.0, abs=1e-6)
    assert report.diversity_gap == 0.0
    assert report.n_generated == report.n_real == len(test)
    assert report.checkpoint_hash == tiny_reward_model.fingerprint


def test_evaluation_is_deterministic(tiny_reward_model, tiny_dataset):
    real, generated = tiny_dataset.split("test"), tiny_dataset.split("train")
    first = evaluate(tiny_reward_model, real, generated, seed=3, n_pairs=16)
    second = evaluate(tiny_reward_model, real, generated, seed=3, n_pairs=16)
    assert first.to_dict() == second.to_dict()
