"""Generation metrics computed on reward-model features.

R-precision and MM distance compare each generated motion with its own
condition; the Fréchet distance and diversity compare feature distributions.
Features are the reward model's clean-motion (t=0) and condition latents, so
values are only comparable between runs that share a reward checkpoint.
"""

from dataclasses import asdict, dataclass, field
from typing import Literal

import numpy as np
import pandas as pd
from loguru import logger
from scipy.linalg import eigh
from scipy.spatial.distance import cdist

from reguide.errors import InsufficientDataError, NonFiniteError, ShapeError
from reguide.numerics.rng import RngStream
from reguide.reward.model import RewardModel
from reguide.synthdata.generator import Dataset

R_PRECISION_KS = (1, 2, 3)
EIGEN_FLOOR = 1e-10


@dataclass(eq=False)
class FeatureSet:
    matrix: np.ndarray
    source: Literal["real", "generated", "condition"]
    checkpoint_hash: str = ""

    def __post_init__(self) -> None:
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if self.matrix.ndim != 2:
            raise ShapeError(f"features must be [n, d], got shape {self.matrix.shape}")
        if not np.all(np.isfinite(self.matrix)):
            raise NonFiniteError(f"{self.source} features contain non-finite entries")

    def __len__(self) -> int:
        return len(self.matrix)


def _matrix(feats: FeatureSet | np.ndarray) -> np.ndarray:
    return feats.matrix if isinstance(feats, FeatureSet) else np.asarray(feats, dtype=np.float64)


def extract_features(
    model: RewardModel, dataset: Dataset, source: Literal["real", "generated"]
) -> tuple[FeatureSet, FeatureSet]:
    """Clean-motion and condition features of every pair in `dataset`."""
    motion = model.motion_embeddings(dataset.motions, 0)
    cond = model.condition_embeddings(dataset.tokens)
    return (
        FeatureSet(motion, source, model.fingerprint),
        FeatureSet(cond, "condition", model.fingerprint),
    )


def pair_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise Euclidean distance between two equally shaped matrices."""
    return np.linalg.norm(np.asarray(a) - np.asarray(b), axis=1)


def _check_paired(motion: np.ndarray, cond: np.ndarray) -> None:
    if motion.shape != cond.shape:
        raise ShapeError(f"paired features differ in shape: {motion.shape} vs {cond.shape}")


def r_precision_curve(
    motion_feats: FeatureSet | np.ndarray,
    cond_feats: FeatureSet | np.ndarray,
    batch_size: int = 32,
    ks: tuple[int, ...] = R_PRECISION_KS,
    seed: int = 0,
) -> dict[int, float]:
    """R-precision at every k in `ks` over shuffled batches.

    Within a batch each motion ranks the batch's conditions by Euclidean
    distance; the true condition hits at k when fewer than k other conditions
    are at least as close, so ties count against the query. A trailing
    partial batch is dropped.

    Raises:
        ShapeError: If the two sets are not paired row for row.
        InsufficientDataError: If there are fewer rows than one batch.
    """
    motion, cond = _matrix(motion_feats), _matrix(cond_feats)
    _check_paired(motion, cond)
    n = len(motion)
    if n < batch_size:
        raise InsufficientDataError(f"{n} pairs is fewer than one batch of {batch_size}")
    order = RngStream(seed, 0).permutation(n)
    hits = {k: 0 for k in ks}
    n_batches = n // batch_size
    for b in range(n_batches):
        idx = order[b * batch_size : (b + 1) * batch_size]
        dist = cdist(motion[idx], cond[idx])
        rank = (dist <= np.diag(dist)[:, None]).sum(axis=1) - 1
        for k in ks:
            hits[k] += int((rank < k).sum())
    return {k: hits[k] / (n_batches * batch_size) for k in ks}


def r_precision(
    motion_feats: FeatureSet | np.ndarray,
    cond_feats: FeatureSet | np.ndarray,
    batch_size: int = 32,
    k: int = 1,
    seed: int = 0,
) -> float:
    return r_precision_curve(motion_feats, cond_feats, batch_size, (k,), seed)[k]


def _trace_sqrt_product(sigma_a: np.ndarray, sigma_b: np.ndarray) -> float:
    """tr((S_a S_b)^{1/2}) as tr((sqrt(S_a) S_b sqrt(S_a))^{1/2}), both roots symmetric."""
    w, v = eigh(sigma_a)
    root_a = (v * np.sqrt(np.where(w > EIGEN_FLOOR, w, 0.0))) @ v.T
    inner = root_a @ sigma_b @ root_a
    w_inner = eigh((inner + inner.T) / 2.0, eigvals_only=True)
    return float(np.sum(np.sqrt(np.where(w_inner > EIGEN_FLOOR, w_inner, 0.0))))


def frechet_from_moments(
    mu_a: np.ndarray, sigma_a: np.ndarray, mu_b: np.ndarray, sigma_b: np.ndarray
) -> float:
    mu_a, mu_b = np.atleast_1d(mu_a), np.atleast_1d(mu_b)
    sigma_a, sigma_b = np.atleast_2d(sigma_a), np.atleast_2d(sigma_b)
    if not (np.all(np.isfinite(sigma_a)) and np.all(np.isfinite(sigma_b))):
        raise NonFiniteError("covariance has non-finite entries")
    diff = mu_a - mu_b
    value = diff @ diff + np.trace(sigma_a) + np.trace(sigma_b)
    value -= 2.0 * _trace_sqrt_product(sigma_a, sigma_b)
    return float(max(value, 0.0))


def frechet_distance(feats_a: FeatureSet | np.ndarray, feats_b: FeatureSet | np.ndarray) -> float:
    """Fréchet distance between Gaussians fitted to two feature sets.

    Raises:
        InsufficientDataError: If either set has fewer than two rows.
        NonFiniteError: If a covariance is not finite.
    """
    a, b = _matrix(feats_a), _matrix(feats_b)
    if len(a) < 2 or len(b) < 2:
        raise InsufficientDataError("each feature set needs at least two rows")
    if a.shape[1] != b.shape[1]:
        raise ShapeError(f"feature widths differ: {a.shape[1]} vs {b.shape[1]}")
    return frechet_from_moments(
        a.mean(axis=0), np.cov(a, rowvar=False), b.mean(axis=0), np.cov(b, rowvar=False)
    )


def mm_dist(motion_feats: FeatureSet | np.ndarray, cond_feats: FeatureSet | np.ndarray) -> float:
    """Mean distance between each motion feature and its paired condition feature."""
    motion, cond = _matrix(motion_feats), _matrix(cond_feats)
    _check_paired(motion, cond)
    if len(motion) == 0:
        raise InsufficientDataError("mm_dist needs at least one pair")
    return float(pair_distance(motion, cond).mean())


def diversity(feats: FeatureSet | np.ndarray, n_pairs: int = 300, seed: int = 0) -> float:
    """Mean distance over `n_pairs` disjoint random pairs of rows.

    Raises:
        InsufficientDataError: If there are fewer than 2 * n_pairs rows.
    """
    x = _matrix(feats)
    if n_pairs < 1 or len(x) < 2 * n_pairs:
        raise InsufficientDataError(f"diversity over {n_pairs} pairs needs {2 * n_pairs} rows")
    order = RngStream(seed, 0).permutation(len(x))
    return float(pair_distance(x[order[:n_pairs]], x[order[n_pairs : 2 * n_pairs]]).mean())


@dataclass
class MetricsReport:
    r_precision: dict[int, float]
    fid: float
    mm_dist: float
    diversity: float
    diversity_real: float
    mean_reward: float
    n_real: int
    n_generated: int
    seed: int
    checkpoint_hash: str = ""
    diversity_gap: float = field(init=False)

    def __post_init__(self) -> None:
        self.diversity_gap = abs(self.diversity - self.diversity_real)

    def to_frame(self) -> pd.DataFrame:
        rows = {f"R-precision top-{k}": v for k, v in self.r_precision.items()}
        rows.update(
            {
                "FID": self.fid,
                "MM Dist": self.mm_dist,
                "Diversity": self.diversity,
                "Diversity (real)": self.diversity_real,
                "Diversity gap": self.diversity_gap,
                "Mean reward": self.mean_reward,
            }
        )
        return pd.DataFrame({"value": rows})

    def to_text(self) -> str:
        return self.to_frame().to_string(float_format=lambda v: f"{v:.4f}") + "\n"

    def to_dict(self) -> dict:
        out = asdict(self)
        out["r_precision"] = {str(k): v for k, v in self.r_precision.items()}
        return out


def mean_text_reward(motion: np.ndarray, cond: np.ndarray) -> float:
    """Mean cosine between clean-motion and condition latents."""
    num = np.sum(motion * cond, axis=1)
    den = np.linalg.norm(motion, axis=1) * np.linalg.norm(cond, axis=1)
    return float(np.mean(np.clip(num / den, -1.0, 1.0)))


def evaluate(
    model: RewardModel,
    real: Dataset,
    generated: Dataset,
    seed: int = 0,
    batch_size: int = 32,
    n_pairs: int = 300,
) -> MetricsReport:
    """Full metric suite for generated motions against a real split.

    Diversity uses at most half the rows of each set as pairs.
    """
    real_m, _ = extract_features(model, real, "real")
    gen_m, gen_c = extract_features(model, generated, "generated")

    pairs = min(n_pairs, len(gen_m) // 2, len(real_m) // 2)
    if pairs < n_pairs:
        logger.warning(f"Diversity over {pairs} pairs instead of {n_pairs}: too few rows")

    report = MetricsReport(
        r_precision=r_precision_curve(gen_m, gen_c, batch_size, R_PRECISION_KS, seed),
        fid=frechet_distance(real_m, gen_m),
        mm_dist=mm_dist(gen_m, gen_c),
        diversity=diversity(gen_m, pairs, seed),
        diversity_real=diversity(real_m, pairs, seed),
        mean_reward=mean_text_reward(gen_m.matrix, gen_c.matrix),
        n_real=len(real_m),
        n_generated=len(gen_m),
        seed=seed,
        checkpoint_hash=model.fingerprint,
    )
    logger.info(
        f"R@1 {report.r_precision[1]:.3f}, FID {report.fid:.4f}, "
        f"MM Dist {report.mm_dist:.4f}, Diversity {report.diversity:.4f}"
    )
    return report
