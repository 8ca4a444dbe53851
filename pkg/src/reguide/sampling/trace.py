"""Trace files and generated-sample datasets written by the sample command."""

import json
from collections.abc import Sequence
from pathlib import Path

import numpy as np
import pandas as pd

from reguide.sampling.sampler import SampleTrace
from reguide.synthdata.generator import Dataset, MotionSequence, Pair, pair_seed


def trace_rows(traces: Sequence[SampleTrace]) -> list[dict]:
    return [
        {"sample": i, "t": r.t, "reward": r.reward, "grad_norm": r.grad_norm}
        for i, trace in enumerate(traces)
        for r in trace.records
    ]


def write_trace(traces: Sequence[SampleTrace], path: Path) -> None:
    """One JSON object per step and sample, in sampling order."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        for row in trace_rows(traces):
            f.write(json.dumps(row) + "\n")


def read_trace(path: Path) -> pd.DataFrame:
    return pd.read_json(path, lines=True)


def reward_curve(trace: pd.DataFrame) -> pd.DataFrame:
    """Mean reward and gradient norm per timestep across samples."""
    return (
        trace.groupby("t", sort=False)[["reward", "grad_norm"]]
        .mean()
        .sort_index(ascending=False)
    )


def samples_to_dataset(
    results: Sequence[tuple[MotionSequence, SampleTrace]], seed: int
) -> Dataset:
    """Pack generated motions with their conditions under the "generated" split."""
    if not results:
        raise ValueError("no samples to pack")
    pairs = []
    for motion, trace in results:
        if trace.condition is None:
            raise ValueError("sample trace carries no condition")
        pairs.append(
            Pair(
                condition=trace.condition,
                motion=motion,
                seed=pair_seed("generated", seed, trace.stream_id),
                split="generated",
            )
        )
    first = results[0][0]
    return Dataset(
        pairs=pairs,
        generator_seed=seed,
        n_frames=first.n_frames,
        dim=first.dim,
        jitter=0.0,
        split_tag="generated",
    )


def final_rewards(traces: Sequence[SampleTrace]) -> np.ndarray:
    return np.array(
        [np.nan if t.final_reward is None else t.final_reward for t in traces], dtype=np.float64
    )
