"""Synthetic semantic encoder models.

The theoretical encoder emits a concept prototype perturbed by iid Gaussian
coordinate noise, optionally clamped back into the dimension ranges so the
output is always a valid (quantizable) point.  ``encoder_floor`` measures the
semantic error rate of that encoder against a noiseless channel, which is the
high-SNR limit of the end-to-end system.  ``sample_in_tau_ball`` draws
conceptually unambiguous points, mimicking data concentrated around the
prototypes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .decode import ConceptSet, prototype_matrix, sample_ball, tau
from .space import SemanticPoint, SpaceSpec, distortion_matrix

__all__ = [
    "TheoreticalEncoderConfig",
    "sample_concept",
    "encode_theoretical",
    "encoder_floor",
    "sample_in_tau_ball",
]

_FLOOR_CHUNK = 1_000_000


@dataclass(frozen=True)
class TheoreticalEncoderConfig:
    """Per-coordinate noise level and whether outputs clamp into range."""

    sigma_e: float = 0.01
    clip: bool = True

    def __post_init__(self):
        if self.sigma_e < 0:
            raise ValueError(f"sigma_e must be nonnegative, got {self.sigma_e}")


def sample_concept(cset: ConceptSet, rng: np.random.Generator) -> int:
    """Draw a concept id according to the set's priors."""
    u = rng.random()
    j = int(np.searchsorted(np.cumsum(cset.priors), u, side="right"))
    return min(j, cset.size - 1) + 1


def _encode_batch(
    space: SpaceSpec,
    protos: np.ndarray,
    js: np.ndarray,
    cfg: TheoreticalEncoderConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """Encode concept indices (0-based) into noisy points, shape (n, D)."""
    out = protos[js] + cfg.sigma_e * rng.standard_normal((js.size, space.n_dims))
    if cfg.clip:
        np.clip(out, space.lows, space.highs, out=out)
    return out


def encode_theoretical(
    space: SpaceSpec,
    cset: ConceptSet,
    j: int,
    cfg: TheoreticalEncoderConfig,
    rng: np.random.Generator,
) -> SemanticPoint:
    """Prototype of concept ``j`` plus N(0, sigma_e^2 I) noise.

    With ``cfg.clip`` the coordinates clamp into their dimension ranges;
    without it the raw Gaussian output is returned (useful for analytic
    checks, but it may leave the space).
    """
    cset.concept(j)
    flat = _encode_batch(
        space, prototype_matrix(cset), np.array([j - 1]), cfg, rng
    )[0]
    return SemanticPoint(tuple(tuple(flat[s]) for s in space.dim_slices))


def encoder_floor(
    space: SpaceSpec,
    cset: ConceptSet,
    cfg: TheoreticalEncoderConfig,
    n: int,
    seed: int,
) -> float:
    """Semantic error rate of the encoder alone (noiseless channel).

    Draws ``n`` prior-weighted concepts, encodes each, decodes by minimum
    distance, and returns the fraction decoded incorrectly.  This is the
    error floor the end-to-end system approaches at high SNR.
    """
    if n < 1:
        raise ValueError("sample count must be at least 1")
    rng = np.random.default_rng(seed)
    protos = prototype_matrix(cset)
    cum = np.cumsum(cset.priors)
    errors = 0
    remaining = n
    while remaining > 0:
        m = min(remaining, _FLOOR_CHUNK)
        js = np.minimum(
            np.searchsorted(cum, rng.random(m), side="right"), cset.size - 1
        )
        pts = _encode_batch(space, protos, js, cfg, rng)
        decoded = np.argmin(distortion_matrix(space, pts, protos), axis=1)
        errors += int(np.count_nonzero(decoded != js))
        remaining -= m
    return errors / n


def sample_in_tau_ball(
    space: SpaceSpec,
    cset: ConceptSet,
    j: int,
    fraction: float,
    rng: np.random.Generator,
) -> SemanticPoint:
    """Uniform point from the tau ball of concept ``j`` shrunk by ``fraction``.

    Models fine-tuned, conceptually unambiguous data: for fraction <= 1 every
    sample is guaranteed to decode back to ``j``.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    t = tau(space, cset, j)
    if not np.isfinite(t):
        raise ValueError("tau is infinite; ball sampling needs 2+ concepts")
    flat = sample_ball(space, cset, j, fraction * t, 1, rng)[0]
    return SemanticPoint(tuple(tuple(flat[s]) for s in space.dim_slices))
