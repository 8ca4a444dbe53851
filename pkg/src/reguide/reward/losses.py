"""Training losses of the reward model: symmetric InfoNCE and the representation loss."""

import numpy as np

from reguide.config import RewardModelConfig
from reguide.errors import EmptyInputError, ShapeError
from reguide.numerics import autodiff as ad
from reguide.numerics.autodiff import Tensor, TensorLike
from reguide.numerics.layers import TensorParams
from reguide.reward.model import condition_latent, decode_latent, motion_latent


def cosine_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = a / np.linalg.norm(a, axis=1, keepdims=True)
    b = b / np.linalg.norm(b, axis=1, keepdims=True)
    return a @ b.T


def negative_mask(cond_similarity: np.ndarray, threshold: float) -> np.ndarray:
    """True where a logit stays in the softmax: the positive, and negatives at or below threshold."""
    keep = ~(cond_similarity > threshold)
    np.fill_diagonal(keep, True)
    return keep


def contrastive_loss(
    z_motion: TensorLike,
    z_cond: TensorLike,
    tau: float,
    threshold: float,
    cond_similarity: np.ndarray | None = None,
) -> Tensor:
    """Symmetric InfoNCE over cosine logits, with near-duplicate negatives filtered.

    Row i's positive is column i. Negatives (i, j) whose condition similarity
    exceeds `threshold` are removed from both softmax directions.

    Args:
        z_motion: Motion latents [B, d].
        z_cond: Condition latents [B, d].
        tau: Temperature.
        threshold: Negative-filter threshold on condition similarity.
        cond_similarity: [B, B] condition similarities. Defaults to the cosine
            between the (detached) condition latents.

    Returns:
        Tensor: Mean of the motion->condition and condition->motion cross-entropies.
    """
    z_motion, z_cond = ad.as_tensor(z_motion), ad.as_tensor(z_cond)
    batch = z_motion.shape[0]
    if batch == 0:
        raise EmptyInputError("contrastive loss needs at least one pair")
    if z_motion.shape != z_cond.shape:
        raise ShapeError(f"latent shapes differ: {z_motion.shape} vs {z_cond.shape}")
    if cond_similarity is None:
        cond_similarity = cosine_matrix(z_cond.value, z_cond.value)
    keep = negative_mask(np.asarray(cond_similarity), threshold)

    logits = ad.matmul(ad.normalize(z_motion), ad.normalize(z_cond).T) / tau
    diag = np.arange(batch)
    positives = logits[diag, diag]
    motion_to_cond = ad.logsumexp(logits, axis=1, mask=keep) - positives
    cond_to_motion = ad.logsumexp(logits, axis=0, mask=keep) - positives
    return 0.5 * (ad.mean(motion_to_cond) + ad.mean(cond_to_motion))


def reconstruction_loss(recon: TensorLike, target: np.ndarray) -> Tensor:
    """Smooth-L1 summed over each motion's elements, averaged over the batch."""
    recon = ad.as_tensor(recon)
    target = np.asarray(target, dtype=np.float64)
    if recon.shape != target.shape:
        raise ShapeError(f"reconstruction {recon.shape} does not match motion {target.shape}")
    per_item = ad.sum(ad.smooth_l1(recon - target), axis=tuple(range(1, recon.ndim)))
    return ad.mean(per_item)


def latent_gap(z_motion: TensorLike, z_cond: TensorLike) -> Tensor:
    """L1 distance between paired latents, averaged over the batch."""
    return ad.mean(ad.sum(ad.absolute(ad.as_tensor(z_motion) - z_cond), axis=1))


def representation_terms(
    recon_motion: TensorLike,
    recon_cond: TensorLike,
    x0: np.ndarray,
    z_motion: TensorLike,
    z_cond: TensorLike,
) -> Tensor:
    """Motion-reconstruction + condition-reconstruction + latent-agreement terms."""
    return (
        reconstruction_loss(recon_motion, x0)
        + reconstruction_loss(recon_cond, x0)
        + latent_gap(z_motion, z_cond)
    )


def representation_loss(
    config: RewardModelConfig,
    p: TensorParams,
    x_t: np.ndarray,
    t: np.ndarray,
    x0: np.ndarray,
    tokens: np.ndarray,
) -> Tensor:
    """Representation loss of a batch; decoders reconstruct the clean motion x0 from both latents."""
    if np.shape(x_t) != np.shape(x0):
        raise ShapeError(f"x_t {np.shape(x_t)} and x0 {np.shape(x0)} differ")
    z_motion = motion_latent(config, p, x_t, t)
    z_cond = condition_latent(config, p, tokens)
    return representation_terms(
        decode_latent(config, p, z_motion),
        decode_latent(config, p, z_cond),
        x0,
        z_motion,
        z_cond,
    )
