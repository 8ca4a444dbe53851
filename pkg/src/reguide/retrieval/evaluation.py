"""Small-batch cross-modal retrieval protocol.

The split is shuffled with the seed and cut into batches of 32 (a trailing
partial batch is dropped). Within a batch every motion ranks all conditions by
cosine similarity, and every condition ranks all motions; a query hits at k
when fewer than k candidates score strictly higher than its true partner.
"""

from dataclasses import asdict, dataclass, field
from functools import partial

import numpy as np
import pandas as pd
from loguru import logger

from reguide.diffusion.schedule import NoiseSchedule, forward_noise
from reguide.errors import InsufficientDataError
from reguide.numerics.rng import RngStream
from reguide.reward.losses import cosine_matrix
from reguide.reward.model import RewardModel
from reguide.synthdata.generator import Dataset
from reguide.utils import parallel_process_with_retries

RECALL_KS = (1, 2, 3, 5, 10)


@dataclass
class RetrievalReport:
    motion_to_text: dict[int, float]
    text_to_motion: dict[int, float]
    batch_size: int
    n_batches: int
    seed: int
    noise_t: int = 0
    n_queries: int = field(init=False)

    def __post_init__(self) -> None:
        self.n_queries = self.batch_size * self.n_batches

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "motion->text": {f"R@{k}": v for k, v in self.motion_to_text.items()},
                "text->motion": {f"R@{k}": v for k, v in self.text_to_motion.items()},
            }
        )

    def to_dict(self) -> dict:
        out = asdict(self)
        out["motion_to_text"] = {str(k): v for k, v in self.motion_to_text.items()}
        out["text_to_motion"] = {str(k): v for k, v in self.text_to_motion.items()}
        return out


def batch_hits(similarity: np.ndarray, ks: tuple[int, ...] = RECALL_KS) -> dict[int, np.ndarray]:
    """Per-row hit indicators at each k; the true partner of row i is column i.

    Candidates tied with the true partner rank ahead of it, so duplicate
    conditions in a batch cannot both score a hit.
    """
    true = np.diag(similarity)[:, None]
    rank = (similarity >= true).sum(axis=1) - 1
    return {k: rank < k for k in ks}


def _batch_recall(similarity: np.ndarray, ks: tuple[int, ...]) -> tuple[dict, dict]:
    return batch_hits(similarity, ks), batch_hits(similarity.T, ks)


def _summarise(
    results: list[tuple[dict, dict]], ks: tuple[int, ...]
) -> tuple[dict[int, float], dict[int, float]]:
    m2t = {k: float(np.mean(np.concatenate([r[0][k] for r in results]))) for k in ks}
    t2m = {k: float(np.mean(np.concatenate([r[1][k] for r in results]))) for k in ks}
    return m2t, t2m


def recall_from_embeddings(
    z_motion: np.ndarray,
    z_cond: np.ndarray,
    batch_size: int = 32,
    seed: int = 0,
    ks: tuple[int, ...] = RECALL_KS,
) -> RetrievalReport:
    """Run the batch protocol on precomputed paired embeddings."""
    n = len(z_motion)
    if n < batch_size:
        raise InsufficientDataError(f"{n} pairs is fewer than one batch of {batch_size}")
    order = RngStream(seed, 0).permutation(n)
    n_batches = n // batch_size
    results = []
    for b in range(n_batches):
        idx = order[b * batch_size : (b + 1) * batch_size]
        results.append(_batch_recall(cosine_matrix(z_motion[idx], z_cond[idx]), ks))
    m2t, t2m = _summarise(results, ks)
    return RetrievalReport(m2t, t2m, batch_size, n_batches, seed)


def _evaluate_batch(
    b: int,
    model: RewardModel,
    motions: np.ndarray,
    tokens: np.ndarray,
    order: np.ndarray,
    batch_size: int,
    seed: int,
    noise_t: int,
    sched: NoiseSchedule | None,
    ks: tuple[int, ...],
) -> tuple[dict, dict]:
    idx = order[b * batch_size : (b + 1) * batch_size]
    x = motions[idx]
    if noise_t > 0:
        eps = RngStream(seed, 1 + b).normal(x.shape)
        x = forward_noise(x, noise_t, eps, sched)  # type: ignore[arg-type]
    z_m = model.motion_embeddings(x, noise_t)
    z_c = model.condition_embeddings(tokens[idx])
    return _batch_recall(cosine_matrix(z_m, z_c), ks)


def retrieval_eval(
    model: RewardModel,
    split: Dataset,
    batch_size: int = 32,
    seed: int = 0,
    noise_t: int = 0,
    sched: NoiseSchedule | None = None,
    n_workers: int = 1,
    ks: tuple[int, ...] = RECALL_KS,
) -> RetrievalReport:
    """Recall@k in both directions on `split`, on clean or noised motions.

    Args:
        model: Reward model producing both embeddings.
        split: Pairs to evaluate.
        batch_size: Retrieval batch size.
        seed: Seed of the shuffle and of the per-batch noise streams.
        noise_t: Forward-noise every motion to this timestep first (0 = clean).
            The same timestep feeds the encoder's timestep token.
        sched: Noise schedule, required when `noise_t > 0`.
        n_workers: Batches evaluated in parallel.
        ks: Cut-offs to report.

    Raises:
        InsufficientDataError: If the split is smaller than one batch.
    """
    n = len(split)
    if n < batch_size:
        raise InsufficientDataError(f"split of {n} pairs is smaller than batch {batch_size}")
    if noise_t > 0 and sched is None:
        raise ValueError("noise_t > 0 needs a noise schedule")
    model.check_timestep(noise_t)

    order = RngStream(seed, 0).permutation(n)
    n_batches = n // batch_size
    task = partial(
        _evaluate_batch,
        model=model,
        motions=split.motions,
        tokens=split.tokens,
        order=order,
        batch_size=batch_size,
        seed=seed,
        noise_t=noise_t,
        sched=sched,
        ks=ks,
    )
    results = parallel_process_with_retries(task, list(range(n_batches)), n_workers=n_workers)
    m2t, t2m = _summarise(results, ks)
    report = RetrievalReport(m2t, t2m, batch_size, n_batches, seed, noise_t)
    logger.info(
        f"Retrieval at t={noise_t}: motion->text R@1 {m2t[ks[0]]:.3f}, "
        f"text->motion R@1 {t2m[ks[0]]:.3f} over {report.n_queries} queries"
    )
    return report
