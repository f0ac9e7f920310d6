"""Categorical distribution utilities on raw logits.

All functions accept a single logit vector or a batch with a leading dim and
use numerically stable log-sum-exp. Float inputs keep their precision (the
float64 path exists for finite-difference checks); anything else is float32.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits)
    if z.dtype not in (np.float32, np.float64):
        z = z.astype(np.float32)
    zmax = z.max(axis=-1, keepdims=True)
    shifted = z - zmax
    lse = np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))
    return shifted - lse


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def entropy(logits: np.ndarray) -> np.ndarray:
    logp = log_softmax(logits)
    return -np.sum(np.exp(logp) * logp, axis=-1)


def kl_divergence(logits_p: np.ndarray, logits_q: np.ndarray) -> np.ndarray:
    """KL(p || q) between categoricals given by logits."""
    logp = log_softmax(logits_p)
    logq = log_softmax(logits_q)
    return np.sum(np.exp(logp) * (logp - logq), axis=-1)


def sample_logits(logits: np.ndarray, rng: np.random.Generator) -> int:
    """Draw one action index from a single logit vector."""
    p = softmax(logits)
    # float32 rows can sum marginally off 1; normalize for the cdf walk.
    p = p / p.sum()
    return int(np.searchsorted(np.cumsum(p), rng.random(), side="right").clip(0, p.shape[-1] - 1))


def sample_categorical(logits: np.ndarray, rng: np.random.Generator) -> tuple[int, float]:
    """Draw one action; returns (index, log-probability at that index)."""
    a = sample_logits(logits, rng)
    return a, float(log_softmax(logits)[a])


def sample_logits_batch(logits: np.ndarray, rngs: list[np.random.Generator]) -> np.ndarray:
    """Row i sampled with rngs[i]; keeps per-worker streams independent."""
    p = softmax(logits)
    p = p / p.sum(axis=-1, keepdims=True)
    cdf = np.cumsum(p, axis=-1)
    n, k = p.shape
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        out[i] = np.searchsorted(cdf[i], rngs[i].random(), side="right")
    np.clip(out, 0, k - 1, out=out)
    return out


@dataclass(frozen=True)
class CategoricalHead:
    """A single categorical action distribution."""

    logits: np.ndarray

    def probs(self) -> np.ndarray:
        return softmax(self.logits)

    def log_prob(self, action: int) -> float:
        return float(log_softmax(self.logits)[action])

    def entropy(self) -> float:
        return float(entropy(self.logits))

    def sample(self, rng: np.random.Generator) -> int:
        return sample_logits(self.logits, rng)

    def argmax(self) -> int:
        return int(np.argmax(self.logits))
