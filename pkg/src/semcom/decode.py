"""Concept dictionaries and minimum-distance semantic decoding.

A concept set pairs prototype points with prior probabilities.  Decoding a
received point means finding the nearest prototype under the space's
distortion.  ``tau`` is the radius of the largest distortion ball around a
prototype that is guaranteed (by the triangle inequality) to decode
correctly: half the minimum pairwise prototype distortion.  A rejection
sampling oracle verifies that guarantee empirically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .space import (
    ContextSpec,
    SemanticPoint,
    SpaceSpec,
    contextual_distortion_matrix,
    distortion_matrix,
    validate_point,
)

__all__ = [
    "Concept",
    "ConceptSet",
    "DecodeResult",
    "prototype_matrix",
    "validate_concept_set",
    "nearest_concept",
    "tau",
    "verify_tau_by_sampling",
]

_PRIOR_SUM_TOL = 1e-9
# τ-ball sampling shrinks the radius by this relative margin so that boundary
# points (which may tie) are excluded.
TAU_SAFETY_MARGIN = 1e-9
_MIN_ACCEPT_RATE = 1e-6


@dataclass(frozen=True)
class Concept:
    """A named concept: integer id, prototype point, optional box region."""

    id: int
    name: str
    prototype: SemanticPoint
    region: Optional[tuple[tuple[tuple[float, float], ...], ...]] = None

    def __post_init__(self):
        if self.region is None:
            return
        region = tuple(
            tuple((float(lo), float(hi)) for lo, hi in dom) for dom in self.region
        )
        object.__setattr__(self, "region", region)
        if len(region) != len(self.prototype.coords):
            raise ValueError(f"concept {self.name!r}: region/prototype domain mismatch")
        for dom_box, dom_coords in zip(region, self.prototype.coords):
            if len(dom_box) != len(dom_coords):
                raise ValueError(
                    f"concept {self.name!r}: region/prototype dimension mismatch"
                )
            for (lo, hi), v in zip(dom_box, dom_coords):
                if not lo <= hi:
                    raise ValueError(f"concept {self.name!r}: empty region interval")
                if not lo <= v <= hi:
                    raise ValueError(
                        f"concept {self.name!r}: prototype outside its region"
                    )


@dataclass(frozen=True)
class ConceptSet:
    """Concepts with ids 1..J (in order) and a prior probability vector."""

    concepts: tuple[Concept, ...]
    priors: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "concepts", tuple(self.concepts))
        object.__setattr__(self, "priors", tuple(float(p) for p in self.priors))
        if not self.concepts:
            raise ValueError("concept set must contain at least one concept")
        if len(self.priors) != len(self.concepts):
            raise ValueError("priors length must match concept count")
        ids = [c.id for c in self.concepts]
        if ids != list(range(1, len(ids) + 1)):
            raise ValueError(f"concept ids must be 1..J in order, got {ids}")
        names = [c.name for c in self.concepts]
        if len(set(names)) != len(names):
            raise ValueError("duplicate concept names")
        if any(p < 0 for p in self.priors):
            raise ValueError("priors must be nonnegative")
        if abs(sum(self.priors) - 1.0) > _PRIOR_SUM_TOL:
            raise ValueError(f"priors must sum to 1, got {sum(self.priors)!r}")

    @property
    def size(self) -> int:
        return len(self.concepts)

    def concept(self, j: int) -> Concept:
        if not 1 <= j <= len(self.concepts):
            raise ValueError(f"unknown concept id {j}")
        return self.concepts[j - 1]


def prototype_matrix(cset: ConceptSet) -> np.ndarray:
    """Stack the prototype coordinates into a (J, D) array."""
    return np.stack([c.prototype.flat() for c in cset.concepts])


def validate_concept_set(space: SpaceSpec, cset: ConceptSet) -> None:
    """Check prototypes against the space and require pairwise distinctness."""
    for c in cset.concepts:
        validate_point(space, c.prototype)
    if cset.size > 1:
        d = distortion_matrix(space, prototype_matrix(cset), prototype_matrix(cset))
        np.fill_diagonal(d, np.inf)
        if d.min() <= 0.0:
            i, k = np.unravel_index(int(d.argmin()), d.shape)
            raise ValueError(
                f"prototypes of {cset.concepts[i].name!r} and "
                f"{cset.concepts[k].name!r} coincide under the space distortion"
            )


@dataclass(frozen=True)
class DecodeResult:
    """Nearest concept id, its distortion, and the gap to the runner-up."""

    index: int
    distance: float
    runner_up_gap: float


def _distances_to_prototypes(
    space: SpaceSpec, cset: ConceptSet, flat_points: np.ndarray, ctx: Optional[ContextSpec]
) -> np.ndarray:
    protos = prototype_matrix(cset)
    if ctx is None:
        return distortion_matrix(space, flat_points, protos)
    return contextual_distortion_matrix(space, ctx, flat_points, protos)


def nearest_concept(
    space: SpaceSpec,
    cset: ConceptSet,
    z: SemanticPoint,
    ctx: Optional[ContextSpec] = None,
) -> DecodeResult:
    """Minimum-distance decode of ``z``; ties break toward the lowest concept id."""
    validate_point(space, z)
    d = _distances_to_prototypes(space, cset, z.flat()[None, :], ctx)[0]
    best = int(np.argmin(d))  # argmin is stable: first (= lowest id) wins ties
    if cset.size == 1:
        gap = math.inf
    else:
        rest = np.delete(d, best)
        gap = float(rest.min() - d[best])
    return DecodeResult(index=best + 1, distance=float(d[best]), runner_up_gap=gap)


def tau(space: SpaceSpec, cset: ConceptSet, j: int) -> float:
    """Guaranteed-decode radius for concept ``j``.

    Half the minimum distortion from prototype j to any other prototype; any
    point strictly inside this ball decodes to j by the triangle inequality.
    Returns +inf for a single-concept set.
    """
    cset.concept(j)  # id check
    if cset.size == 1:
        return math.inf
    protos = prototype_matrix(cset)
    d = distortion_matrix(space, protos[j - 1 : j], protos)[0]
    d[j - 1] = np.inf
    return 0.5 * float(d.min())


def _ball_bounding_box(
    space: SpaceSpec, center: np.ndarray, radius: float
) -> tuple[np.ndarray, np.ndarray]:
    # Any point within distortion r of the center is within +-r per linear
    # coordinate; circular dimensions wrap, so they keep their full range.
    lo = np.maximum(space.lows, center - radius)
    hi = np.minimum(space.highs, center + radius)
    col = 0
    for dom in space.domains:
        for q in dom.dimensions:
            if q.kind == "circular":
                lo[col], hi[col] = q.lo, q.hi
            col += 1
    return lo, hi


def sample_ball(
    space: SpaceSpec,
    cset: ConceptSet,
    j: int,
    radius: float,
    n: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Uniform samples (n, D) from the distortion ball of ``radius`` around
    prototype ``j``, intersected with the space, by rejection from the
    bounding box.  Raises RuntimeError when the acceptance rate degenerates
    below 1e-6.
    """
    if not (np.isfinite(radius) and radius > 0):
        raise ValueError(f"ball radius must be finite and positive, got {radius}")
    center = cset.concept(j).prototype.flat()
    lo, hi = _ball_bounding_box(space, center, radius)
    out = np.empty((n, space.n_dims))
    got = 0
    proposed = 0
    batch = int(min(max(2 * n, 4096), 2_000_000))
    while got < n:
        cand = rng.random((batch, space.n_dims)) * (hi - lo) + lo
        keep = distortion_matrix(space, cand, center[None, :])[:, 0] <= radius
        accepted = cand[keep]
        proposed += batch
        take = min(n - got, accepted.shape[0])
        out[got : got + take] = accepted[:take]
        got += take
        if proposed >= 10_000_000 and got / proposed < _MIN_ACCEPT_RATE:
            raise RuntimeError(
                f"ball sampling acceptance rate {got / proposed:.2e} below "
                f"{_MIN_ACCEPT_RATE:.0e}; geometry is degenerate"
            )
    return out


def verify_tau_by_sampling(
    space: SpaceSpec,
    cset: ConceptSet,
    j: int,
    n: int,
    rng_seed: int,
    radius_scale: float = 1.0,
) -> tuple[bool, Optional[SemanticPoint]]:
    """Sampling oracle for the ``tau`` guarantee.

    Draws ``n`` points uniformly from the tau ball of concept ``j`` (radius
    shrunk by a 1e-9 relative margin) and checks that every one decodes to
    ``j``.  Returns (True, None) on success, otherwise (False, witness) where
    the witness is the failing point closest to the prototype.  The
    ``radius_scale`` hook exists for tests that deliberately inflate the ball.
    """
    t = tau(space, cset, j)
    if not np.isfinite(t):
        raise ValueError("tau is infinite; nothing to verify for a single concept")
    rng = np.random.default_rng(rng_seed)
    radius = t * (1.0 - TAU_SAFETY_MARGIN) * radius_scale
    samples = sample_ball(space, cset, j, radius, n, rng)
    d = _distances_to_prototypes(space, cset, samples, None)
    decoded = np.argmin(d, axis=1) + 1
    bad = np.flatnonzero(decoded != j)
    if bad.size == 0:
        return True, None
    worst = bad[np.argmin(d[bad, j - 1])]
    return False, SemanticPoint.from_flat(space, samples[worst])
