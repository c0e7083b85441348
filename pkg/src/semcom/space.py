"""Conceptual spaces: quality dimensions, domains, points, and semantic distortion.

A conceptual space is an ordered product of domains, each of which is an
ordered product of scalar quality dimensions.  Semantic distortion between
two points is the sum of per-domain distances, where each domain carries its
own distance rule (plain Euclidean, or the smoothed hue/saturation/brightness
color rule).  Context enters as salience weights across domains and monotone
sensitivity transforms within dimensions.

All types are immutable after construction and all operations are pure
functions, so everything here is safe for unrestricted parallel use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "QualityDimension",
    "DomainSpec",
    "SpaceSpec",
    "SemanticPoint",
    "PiecewiseLinearMap",
    "ContextSpec",
    "circular_distance",
    "smooth_circular_distance",
    "color_domain_distance",
    "semantic_distortion",
    "contextual_distortion",
    "distortion_matrix",
    "distortion_rows",
    "contextual_distortion_matrix",
    "contextual_distortion_rows",
    "validate_point",
    "validate_context",
]

_WEIGHT_SUM_TOL = 1e-9


@dataclass(frozen=True)
class QualityDimension:
    """One scalar axis of a domain, with a closed range and linear/circular kind."""

    name: str
    kind: str = "linear"  # "linear" | "circular"
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if self.kind not in ("linear", "circular"):
            raise ValueError(f"dimension {self.name!r}: unknown kind {self.kind!r}")
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError(f"dimension {self.name!r}: range must be finite")
        if not self.lo < self.hi:
            raise ValueError(
                f"dimension {self.name!r}: need lo < hi, got [{self.lo}, {self.hi}]"
            )

    @property
    def span(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class DomainSpec:
    """A named group of integral quality dimensions plus its distance rule.

    ``metric="euclidean"`` uses the 2-norm of per-dimension differences
    (circular dimensions contribute their wraparound difference).
    ``metric="color_msel"`` is the smoothed mean-squared hue/saturation/
    brightness rule and requires exactly three dimensions on [0, 1]: a
    circular hue followed by linear saturation and brightness, with
    smoothing sharpness ``rho > 0``.
    """

    name: str
    dimensions: tuple[QualityDimension, ...]
    metric: str = "euclidean"
    rho: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "dimensions", tuple(self.dimensions))
        if not self.dimensions:
            raise ValueError(f"domain {self.name!r}: needs at least one dimension")
        names = [d.name for d in self.dimensions]
        if len(set(names)) != len(names):
            raise ValueError(f"domain {self.name!r}: duplicate dimension names")
        if self.metric == "euclidean":
            if self.rho is not None:
                raise ValueError(f"domain {self.name!r}: rho only applies to color_msel")
        elif self.metric == "color_msel":
            if self.rho is None or not self.rho > 0:
                raise ValueError(f"domain {self.name!r}: color_msel requires rho > 0")
            if len(self.dimensions) != 3:
                raise ValueError(f"domain {self.name!r}: color_msel requires 3 dimensions")
            kinds = tuple(d.kind for d in self.dimensions)
            if kinds != ("circular", "linear", "linear"):
                raise ValueError(
                    f"domain {self.name!r}: color_msel needs (circular hue, linear "
                    f"saturation, linear brightness), got kinds {kinds}"
                )
            for d in self.dimensions:
                if (d.lo, d.hi) != (0.0, 1.0):
                    raise ValueError(
                        f"domain {self.name!r}: color_msel dimensions must range [0, 1]"
                    )
        else:
            raise ValueError(f"domain {self.name!r}: unknown metric {self.metric!r}")

    @property
    def n_dims(self) -> int:
        return len(self.dimensions)


@dataclass(frozen=True)
class SpaceSpec:
    """An ordered product of domains; the carrier of all semantic points."""

    domains: tuple[DomainSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "domains", tuple(self.domains))
        if not self.domains:
            raise ValueError("space needs at least one domain")
        names = [d.name for d in self.domains]
        if len(set(names)) != len(names):
            raise ValueError("duplicate domain names in space")

    @property
    def n_domains(self) -> int:
        return len(self.domains)

    @property
    def n_dims(self) -> int:
        return sum(d.n_dims for d in self.domains)

    @cached_property
    def dim_slices(self) -> tuple[slice, ...]:
        """Per-domain slices into the flat coordinate vector."""
        out, start = [], 0
        for dom in self.domains:
            out.append(slice(start, start + dom.n_dims))
            start += dom.n_dims
        return tuple(out)

    @cached_property
    def lows(self) -> np.ndarray:
        arr = np.array([q.lo for d in self.domains for q in d.dimensions])
        arr.flags.writeable = False
        return arr

    @cached_property
    def highs(self) -> np.ndarray:
        arr = np.array([q.hi for d in self.domains for q in d.dimensions])
        arr.flags.writeable = False
        return arr


@dataclass(frozen=True)
class SemanticPoint:
    """A point in a conceptual space: one coordinate vector per domain."""

    coords: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        object.__setattr__(
            self, "coords", tuple(tuple(float(v) for v in dom) for dom in self.coords)
        )

    @classmethod
    def from_flat(cls, space: SpaceSpec, values: Sequence[float]) -> "SemanticPoint":
        vals = np.asarray(values, dtype=float)
        if vals.shape != (space.n_dims,):
            raise ValueError(
                f"expected {space.n_dims} coordinates, got shape {vals.shape}"
            )
        return cls(tuple(tuple(vals[s]) for s in space.dim_slices))

    def flat(self) -> np.ndarray:
        return np.concatenate([np.asarray(c, dtype=float) for c in self.coords])


def validate_point(space: SpaceSpec, z: SemanticPoint) -> None:
    """Raise ValueError unless ``z`` is structurally valid and in range for ``space``."""
    if len(z.coords) != space.n_domains:
        raise ValueError(
            f"point has {len(z.coords)} domains, space has {space.n_domains}"
        )
    for dom, coords in zip(space.domains, z.coords):
        if len(coords) != dom.n_dims:
            raise ValueError(
                f"domain {dom.name!r}: point has {len(coords)} coordinates, "
                f"expected {dom.n_dims}"
            )
        for q, v in zip(dom.dimensions, coords):
            if not (q.lo <= v <= q.hi):
                raise ValueError(
                    f"domain {dom.name!r}, dimension {q.name!r}: value {v} "
                    f"outside [{q.lo}, {q.hi}]"
                )


# ---------------------------------------------------------------------------
# distance primitives
# ---------------------------------------------------------------------------

def circular_distance(h: float, h2: float) -> float:
    """Wraparound distance on the unit circle parameterized over [0, 1].

    Never exceeds 0.5 (half the circumference).
    """
    if not (0.0 <= h <= 1.0 and 0.0 <= h2 <= 1.0):
        raise ValueError(f"circular coordinates must lie in [0, 1], got {h}, {h2}")
    d = abs(h - h2)
    return min(d, 1.0 - d)


def smooth_circular_distance(h, h2, rho: float):
    """Soft-min approximation of :func:`circular_distance` with sharpness ``rho``.

    Equals -(1/rho) * log(0.5*exp(-rho*d) + 0.5*exp(-rho*(1-d))) with
    d = |h - h2|.  Lies within [min-form, min-form + ln(2)/rho] and converges
    to the exact wraparound distance as rho grows.  Note the known defect
    smooth(h, h) > 0; it is bounded by ln(2)/rho.
    """
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho}")
    h = np.asarray(h, dtype=float)
    h2 = np.asarray(h2, dtype=float)
    if np.any(h < 0) or np.any(h > 1) or np.any(h2 < 0) or np.any(h2 > 1):
        raise ValueError("circular coordinates must lie in [0, 1]")
    d = np.abs(h - h2)
    # log-sum-exp form keeps large rho stable
    val = -(np.logaddexp(-rho * d, -rho * (1.0 - d)) - math.log(2.0)) / rho
    return float(val) if val.ndim == 0 else val


def color_domain_distance(d1: Sequence[float], d2: Sequence[float], rho: float) -> float:
    """Smoothed MSE-like distance on an (hue, saturation, brightness) domain.

    Not a true metric: the smoothed hue term is positive even for identical
    points (bounded by (ln(2)/rho)**2 / 3).
    """
    a = np.asarray(d1, dtype=float)
    b = np.asarray(d2, dtype=float)
    if a.shape != (3,) or b.shape != (3,):
        raise ValueError("color domain points must be 3-vectors (h, s, b)")
    if np.any(a < 0) or np.any(a > 1) or np.any(b < 0) or np.any(b > 1):
        raise ValueError("color coordinates must lie in [0, 1]")
    g = smooth_circular_distance(a[0], b[0], rho)
    return ((a[1] - b[1]) ** 2 + (a[2] - b[2]) ** 2 + g**2) / 3.0


def _domain_distance(dom: DomainSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance within one domain for broadcastable coordinate arrays (..., k)."""
    if dom.metric == "euclidean":
        diff = a - b
        for i, q in enumerate(dom.dimensions):
            if q.kind == "circular":
                d = np.abs(diff[..., i])
                diff[..., i] = np.minimum(d, q.span - d)
        return np.sqrt(np.sum(diff * diff, axis=-1))
    # color_msel
    g = -(
        np.logaddexp(
            -dom.rho * np.abs(a[..., 0] - b[..., 0]),
            -dom.rho * (1.0 - np.abs(a[..., 0] - b[..., 0])),
        )
        - math.log(2.0)
    ) / dom.rho
    ds = a[..., 1] - b[..., 1]
    db = a[..., 2] - b[..., 2]
    return (ds * ds + db * db + g * g) / 3.0


# ---------------------------------------------------------------------------
# semantic distortion
# ---------------------------------------------------------------------------

def semantic_distortion(space: SpaceSpec, z1: SemanticPoint, z2: SemanticPoint) -> float:
    """Total semantic distortion: the sum of per-domain distances."""
    validate_point(space, z1)
    validate_point(space, z2)
    total = 0.0
    for dom, c1, c2 in zip(space.domains, z1.coords, z2.coords):
        total += float(
            _domain_distance(dom, np.asarray(c1, dtype=float), np.asarray(c2, dtype=float))
        )
    return total


def distortion_matrix(space: SpaceSpec, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """All-pairs distortion between flat coordinate arrays A (n, D) and B (m, D).

    Bulk companion of :func:`semantic_distortion` used by decoding and the
    Monte Carlo harness; performs no range validation.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    out = np.zeros((A.shape[0], B.shape[0]))
    for dom, s in zip(space.domains, space.dim_slices):
        out += _domain_distance(dom, A[:, None, s], B[None, :, s])
    return out


def distortion_rows(space: SpaceSpec, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Row-aligned distortion between equally shaped flat arrays (n, D) -> (n,)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    out = np.zeros(np.broadcast_shapes(A.shape[:-1], B.shape[:-1]))
    for dom, s in zip(space.domains, space.dim_slices):
        out += _domain_distance(dom, A[..., s], B[..., s])
    return out


# ---------------------------------------------------------------------------
# context: salience weights and sensitivity transforms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PiecewiseLinearMap:
    """Strictly increasing piecewise-linear map given by (x, y) knots."""

    knots: tuple[tuple[float, float], ...]

    def __post_init__(self):
        object.__setattr__(
            self, "knots", tuple((float(x), float(y)) for x, y in self.knots)
        )
        if len(self.knots) < 2:
            raise ValueError("piecewise-linear map needs at least two knots")
        xs = [k[0] for k in self.knots]
        ys = [k[1] for k in self.knots]
        if any(x2 <= x1 for x1, x2 in zip(xs, xs[1:])):
            raise ValueError("knot x values must be strictly increasing")
        if any(y2 <= y1 for y1, y2 in zip(ys, ys[1:])):
            raise ValueError("knot y values must be strictly increasing")

    @classmethod
    def identity(cls, lo: float, hi: float) -> "PiecewiseLinearMap":
        return cls(((lo, lo), (hi, hi)))

    @property
    def xs(self) -> np.ndarray:
        return np.array([k[0] for k in self.knots])

    @property
    def ys(self) -> np.ndarray:
        return np.array([k[1] for k in self.knots])

    def __call__(self, values):
        return np.interp(values, self.xs, self.ys)


@dataclass(frozen=True)
class ContextSpec:
    """Salience weights over domains plus optional per-dimension sensitivity maps.

    ``transforms`` is one tuple of maps per domain (one map per dimension);
    ``None`` means identity everywhere.
    """

    weights: tuple[float, ...]
    transforms: Optional[tuple[tuple[PiecewiseLinearMap, ...], ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if self.transforms is not None:
            object.__setattr__(
                self, "transforms", tuple(tuple(t) for t in self.transforms)
            )
        if any(w < 0 for w in self.weights):
            raise ValueError("salience weights must be nonnegative")
        if abs(sum(self.weights) - 1.0) > _WEIGHT_SUM_TOL:
            raise ValueError(
                f"salience weights must sum to 1, got {sum(self.weights)!r}"
            )


def validate_context(space: SpaceSpec, ctx: ContextSpec) -> None:
    """Raise ValueError unless ``ctx`` matches ``space`` structurally."""
    if len(ctx.weights) != space.n_domains:
        raise ValueError(
            f"context has {len(ctx.weights)} weights, space has "
            f"{space.n_domains} domains"
        )
    if ctx.transforms is None:
        return
    if len(ctx.transforms) != space.n_domains:
        raise ValueError("context transforms must cover every domain")
    for dom, maps in zip(space.domains, ctx.transforms):
        if len(maps) != dom.n_dims:
            raise ValueError(
                f"domain {dom.name!r}: {len(maps)} transforms for "
                f"{dom.n_dims} dimensions"
            )
        for q, t in zip(dom.dimensions, maps):
            k0, k1 = t.knots[0], t.knots[-1]
            if k0 != (q.lo, q.lo) or k1 != (q.hi, q.hi):
                raise ValueError(
                    f"domain {dom.name!r}, dimension {q.name!r}: transform must "
                    f"fix the range endpoints [{q.lo}, {q.hi}]"
                )


def _apply_transforms(space: SpaceSpec, ctx: ContextSpec, flat: np.ndarray) -> np.ndarray:
    if ctx.transforms is None:
        return flat
    out = np.array(flat, dtype=float, copy=True)
    col = 0
    for maps in ctx.transforms:
        for t in maps:
            out[..., col] = t(out[..., col])
            col += 1
    return out


def contextual_distortion(
    space: SpaceSpec, ctx: ContextSpec, z1: SemanticPoint, z2: SemanticPoint
) -> float:
    """Salience-weighted distortion on sensitivity-transformed coordinates."""
    validate_context(space, ctx)
    validate_point(space, z1)
    validate_point(space, z2)
    a = _apply_transforms(space, ctx, z1.flat())
    b = _apply_transforms(space, ctx, z2.flat())
    total = 0.0
    for w, dom, s in zip(ctx.weights, space.domains, space.dim_slices):
        total += w * float(_domain_distance(dom, a[s], b[s]))
    return total


def contextual_distortion_matrix(
    space: SpaceSpec, ctx: ContextSpec, A: np.ndarray, B: np.ndarray
) -> np.ndarray:
    """All-pairs contextual distortion; bulk companion of :func:`contextual_distortion`."""
    validate_context(space, ctx)
    A = _apply_transforms(space, ctx, np.atleast_2d(np.asarray(A, dtype=float)))
    B = _apply_transforms(space, ctx, np.atleast_2d(np.asarray(B, dtype=float)))
    out = np.zeros((A.shape[0], B.shape[0]))
    for w, dom, s in zip(ctx.weights, space.domains, space.dim_slices):
        out += w * _domain_distance(dom, A[:, None, s], B[None, :, s])
    return out


def contextual_distortion_rows(
    space: SpaceSpec, ctx: ContextSpec, A: np.ndarray, B: np.ndarray
) -> np.ndarray:
    """Row-aligned contextual distortion between equally shaped flat arrays."""
    validate_context(space, ctx)
    A = _apply_transforms(space, ctx, np.atleast_2d(np.asarray(A, dtype=float)))
    B = _apply_transforms(space, ctx, np.atleast_2d(np.asarray(B, dtype=float)))
    out = np.zeros(np.broadcast_shapes(A.shape[:-1], B.shape[:-1]))
    for w, dom, s in zip(ctx.weights, space.domains, space.dim_slices):
        out += w * _domain_distance(dom, A[..., s], B[..., s])
    return out
