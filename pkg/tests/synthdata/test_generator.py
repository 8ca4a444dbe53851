import math

import numpy as np
import pytest

from reguide.config import CLASS_NAMES, DatasetSpec
from reguide.errors import (
    ConditionError,
    EmptyInputError,
    SeedError,
    ShapeError,
    UnknownTokenError,
)
from reguide.synthdata.generator import (
    N_BINS,
    N_CLASSES,
    VOCAB_SIZE,
    Condition,
    build_dataset,
    generate_motion,
    pair_seed,
    parse_condition,
    split_of_seed,
    tokenize,
    validate_tokens,
)
from reguide.synthdata.storage import encode_dataset


def make_condition(name: str, speed=0.0, curvature=0.0, amplitude=0.0, heading=0.0) -> Condition:
    return Condition(CLASS_NAMES.index(name), (speed, curvature, amplitude, heading))


def test_line_moves_at_constant_velocity():
    motion = generate_motion(make_condition("line", speed=1.0), 4, seed=0, jitter=0.0)
    np.testing.assert_allclose(motion.frames, [[0, 0], [1, 0], [2, 0], [3, 0]])


def test_stop_go_at_zero_speed_stands_still():
    motion = generate_motion(make_condition("stop-go"), 16, seed=0, jitter=0.0)
    np.testing.assert_array_equal(motion.frames, np.zeros((16, 2)))


def test_arc_heading_turns_by_curvature_times_distance():
    cond = make_condition("arc-left", speed=1.0, curvature=0.1)
    motion = generate_motion(cond, 101, seed=0, jitter=0.0, dim=4)
    vx, vy = motion.frames[-1, 2:]
    assert math.atan2(vy, vx) % (2 * math.pi) == pytest.approx((100 * 0.1) % (2 * math.pi), abs=1e-9)


def test_arc_right_mirrors_arc_left():
    left = generate_motion(make_condition("arc-left", 0.2, 0.3), 16, seed=0, jitter=0.0)
    right = generate_motion(make_condition("arc-right", 0.2, 0.3), 16, seed=0, jitter=0.0)
    np.testing.assert_allclose(left.frames[:, 0], right.frames[:, 0])
    np.testing.assert_allclose(left.frames[:, 1], -right.frames[:, 1])


def test_velocity_channels_match_finite_differences():
    cond = make_condition("sine", speed=0.2, curvature=0.05, amplitude=0.3)
    frames = generate_motion(cond, 64, seed=0, jitter=0.0, dim=4).frames
    central = (frames[2:, :2] - frames[:-2, :2]) / 2.0
    np.testing.assert_allclose(central, frames[1:-1, 2:], atol=1e-3)


def test_jitter_is_seeded():
    cond = make_condition("zigzag", 0.2, 0.0, 0.3)
    a = generate_motion(cond, 16, seed=5)
    assert a == generate_motion(cond, 16, seed=5)
    assert a != generate_motion(cond, 16, seed=6)


@pytest.mark.parametrize("n_frames,dim", [(1, 2), (16, 3)])
def test_bad_motion_shapes(n_frames: int, dim: int):
    with pytest.raises(ShapeError):
        generate_motion(make_condition("line", 0.1), n_frames, seed=0, dim=dim)


def test_condition_validation():
    with pytest.raises(ConditionError):
        Condition(N_CLASSES, (0.0, 0.0, 0.0, 0.0))
    with pytest.raises(ConditionError):
        Condition(0, (0.0, float("nan"), 0.0, 0.0))
    with pytest.raises(ConditionError):
        parse_condition("teleport:speed=1")
    with pytest.raises(ConditionError):
        parse_condition("line:speed")


def test_parse_condition_fills_midpoints():
    cond = parse_condition("arc-left:speed=0.2")
    assert cond.name == "arc-left"
    assert cond.params[0] == 0.2
    assert cond.params[1] == pytest.approx(0.35)
    assert cond.in_range


def test_tokens_differ_by_one_bin():
    low = make_condition("zigzag", speed=0.1, amplitude=0.3)
    high = make_condition("zigzag", speed=0.1 + 1.5 * 0.2 / N_BINS, amplitude=0.3)
    a, b = tokenize(low), tokenize(high)
    assert a != b
    assert b[1] - a[1] == 1
    assert all(0 <= token < VOCAB_SIZE for token in a + b)


def test_unknown_tokens_are_rejected():
    with pytest.raises(UnknownTokenError):
        validate_tokens(np.array([[0, VOCAB_SIZE]]))


def test_pair_seeds_encode_the_split():
    for split in ("train", "val", "test", "generated"):
        assert split_of_seed(pair_seed(split, 42, 7)) == split
    assert pair_seed("train", 42, 7) != pair_seed("test", 42, 7)


def test_generator_seed_must_fit_the_pair_seed():
    assert pair_seed("train", (1 << 28) - 1, 0) != pair_seed("train", 0, 0)
    for seed in (-1, 1 << 28):
        with pytest.raises(SeedError):
            pair_seed("train", seed, 0)
    with pytest.raises(SeedError):
        build_dataset(DatasetSpec(train={"line": 1}), seed=1 << 28)


def test_build_dataset_counts():
    dataset = build_dataset(DatasetSpec(train={"line": 2}), seed=3)
    assert len(dataset) == 2
    assert [p.condition.name for p in dataset] == ["line", "line"]


def test_build_dataset_split_sizes():
    dataset = build_dataset(DatasetSpec.balanced(800, 100, 100, n_frames=4), seed=0)
    assert [len(dataset.split(s)) for s in ("train", "val", "test")] == [800, 100, 100]
    seeds = {split: {p.seed for p in dataset.split(split)} for split in ("train", "val", "test")}
    assert not seeds["train"] & seeds["test"]


def test_build_dataset_is_deterministic():
    spec = DatasetSpec.balanced(16, 8, 8)
    assert encode_dataset(build_dataset(spec, seed=9)) == encode_dataset(build_dataset(spec, seed=9))


def test_parallel_build_matches_serial():
    spec = DatasetSpec.balanced(16, 0, 0)
    assert build_dataset(spec, seed=1, n_workers=2) == build_dataset(spec, seed=1)


def test_empty_spec_is_rejected():
    with pytest.raises(EmptyInputError):
        build_dataset(DatasetSpec(), seed=0)


def test_unknown_class_in_spec():
    with pytest.raises(ValueError):
        DatasetSpec(train={"cartwheel": 3})


def test_stored_pairs_regenerate_exactly():
    dataset = build_dataset(DatasetSpec.balanced(24, 6, 6, n_frames=16), seed=5)
    for pair in dataset:
        regenerated = generate_motion(
            pair.condition, dataset.n_frames, pair.seed, jitter=dataset.jitter, dim=dataset.dim
        )
        np.testing.assert_array_equal(regenerated.frames, pair.motion.frames)


def test_classes_are_separable():
    dataset = build_dataset(DatasetSpec.balanced(240, 0, 0, n_frames=16), seed=0)
    flat = dataset.motions.reshape(len(dataset), -1)
    dist = np.linalg.norm(flat[:, None] - flat[None], axis=-1)
    same = dataset.class_ids[:, None] == dataset.class_ids[None]
    off_diagonal = ~np.eye(len(dataset), dtype=bool)

    assert dist[~same].mean() > dist[same & off_diagonal].mean()
