"""Upper bounds on the probability of semantic error.

Two bounds are provided: a prior-weighted sum of per-concept exceedance
probabilities (each term asks whether encoder-plus-channel distortion can
leave the guaranteed-decode ball of radius tau_j), and a looser variant that
uses the smallest tau only.  Distortion components are described by small
distortion models (exponential rates, the Gaussian theoretical encoder, or
raw empirical samples).  When both components are exponential with distinct
rates, their sum is hypoexponential and the bounds are evaluated in closed
form; otherwise they are estimated by Monte Carlo with a 95% normal
confidence half-width.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .decode import ConceptSet, prototype_matrix
from .space import SpaceSpec, distortion_rows

__all__ = [
    "Exponential",
    "GaussianEncoder",
    "Empirical",
    "DistortionModel",
    "BoundReport",
    "hypoexp_pdf",
    "hypoexp_survival",
    "lemma1_bound",
    "lemma2_bound",
    "InfeasibleDesignError",
    "design_lambda2",
]

_Z95 = 1.959963984540054  # two-sided 95% normal quantile


@dataclass(frozen=True)
class Exponential:
    """Exponential distortion with rate ``rate`` (mean 1/rate)."""

    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError(f"exponential rate must be positive, got {self.rate}")

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.exponential(1.0 / self.rate, n)


@dataclass(frozen=True, eq=False)
class GaussianEncoder:
    """Distortion of a prototype perturbed by iid Gaussian coordinate noise.

    Each draw picks a concept by prior, adds N(0, sigma_e^2 I) noise to its
    prototype (no clipping), and records the distortion from the prototype.
    """

    sigma_e: float
    cset: ConceptSet
    space: SpaceSpec

    def __post_init__(self):
        if not self.sigma_e > 0:
            raise ValueError(f"sigma_e must be positive, got {self.sigma_e}")

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        protos = prototype_matrix(self.cset)
        js = np.searchsorted(np.cumsum(self.cset.priors), rng.random(n), side="right")
        js = np.minimum(js, self.cset.size - 1)
        base = protos[js]
        noisy = base + self.sigma_e * rng.standard_normal(base.shape)
        return distortion_rows(self.space, noisy, base)


@dataclass(frozen=True, eq=False)
class Empirical:
    """Distortion resampled (with replacement) from observed samples."""

    samples: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("empirical samples must be a nonempty 1-d array")
        if np.any(arr < 0):
            raise ValueError("empirical distortion samples must be nonnegative")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.samples[rng.integers(0, self.samples.size, n)]


DistortionModel = Union[Exponential, GaussianEncoder, Empirical]


@dataclass(frozen=True)
class BoundReport:
    """Bound value with per-concept terms and Monte Carlo error accounting.

    ``sample_count`` is 0 and ``confidence_halfwidth`` 0.0 when the value was
    obtained in closed form.
    """

    bound_value: float
    per_concept_terms: tuple[float, ...]
    sample_count: int
    confidence_halfwidth: float


# ---------------------------------------------------------------------------
# hypoexponential closed forms
# ---------------------------------------------------------------------------

def _check_rates(lam1: float, lam2: float) -> None:
    if not (lam1 > 0 and lam2 > 0):
        raise ValueError(f"rates must be positive, got {lam1}, {lam2}")
    if lam1 == lam2:
        raise ValueError("rates must be distinct (Erlang case not supported)")


def hypoexp_pdf(x, lam1: float, lam2: float):
    """Density of the sum of independent exp(lam1) and exp(lam2), lam1 != lam2."""
    _check_rates(lam1, lam2)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("hypoexponential density is defined for x >= 0")
    val = (lam1 * lam2 / (lam2 - lam1)) * (np.exp(-lam1 * x) - np.exp(-lam2 * x))
    return float(val) if val.ndim == 0 else val


def hypoexp_survival(tau_value, lam1: float, lam2: float):
    """P(exp(lam1) + exp(lam2) > tau_value); equals 1 at 0 and decays to 0."""
    _check_rates(lam1, lam2)
    t = np.asarray(tau_value, dtype=float)
    if np.any(t < 0):
        raise ValueError("survival is defined for tau >= 0")
    val = (lam2 * np.exp(-lam1 * t) - lam1 * np.exp(-lam2 * t)) / (lam2 - lam1)
    return float(val) if val.ndim == 0 else val


def _survival_near_equal_safe(t: float, lam1: float, lam2: float) -> float:
    # The closed form cancels catastrophically as lam2 -> lam1; switch to the
    # Erlang limit exp(-l t) (1 + l t) inside a tiny window.
    if abs(lam2 - lam1) > 1e-9 * lam1:
        return float(
            (lam2 * math.exp(-lam1 * t) - lam1 * math.exp(-lam2 * t)) / (lam2 - lam1)
        )
    lam = 0.5 * (lam1 + lam2)
    return math.exp(-lam * t) * (1.0 + lam * t)


# ---------------------------------------------------------------------------
# bounds
# ---------------------------------------------------------------------------

def _draw_pair_sum(
    enc: DistortionModel, ch: DistortionModel, n: int, seed: int
) -> np.ndarray:
    # Fixed draw order (encoder first) so that lemma1/lemma2 called with the
    # same models and seed see identical sums; that makes the documented
    # dominance lemma2 >= lemma1 hold deterministically, not just in law.
    rng = np.random.default_rng(seed)
    return enc.sample(n, rng) + ch.sample(n, rng)


def lemma1_bound(
    cset: ConceptSet,
    taus: Sequence[float],
    enc: DistortionModel,
    ch: DistortionModel,
    n: int = 1_000_000,
    seed: int = 0,
) -> BoundReport:
    """Prior-weighted bound Σ_j α_j P(enc + ch > tau_j).

    Exact via the hypoexponential survival when both models are exponential
    with distinct rates; Monte Carlo otherwise.
    """
    taus = [float(t) for t in taus]
    if len(taus) != cset.size:
        raise ValueError(f"expected {cset.size} tau values, got {len(taus)}")
    if any(not (math.isfinite(t) and t > 0) for t in taus):
        raise ValueError("all tau values must be finite and positive")
    alphas = np.asarray(cset.priors)

    if (
        isinstance(enc, Exponential)
        and isinstance(ch, Exponential)
        and enc.rate != ch.rate
    ):
        terms = np.array([hypoexp_survival(t, enc.rate, ch.rate) for t in taus])
        return BoundReport(
            bound_value=float(alphas @ terms),
            per_concept_terms=tuple(terms),
            sample_count=0,
            confidence_halfwidth=0.0,
        )

    if n < 1:
        raise ValueError("sample count must be at least 1")
    s = _draw_pair_sum(enc, ch, n, seed)
    indicators = s[:, None] > np.asarray(taus)[None, :]
    terms = indicators.mean(axis=0)
    weighted = indicators @ alphas
    half = _Z95 * float(weighted.std(ddof=1)) / math.sqrt(n) if n > 1 else math.inf
    return BoundReport(
        bound_value=float(weighted.mean()),
        per_concept_terms=tuple(float(t) for t in terms),
        sample_count=n,
        confidence_halfwidth=half,
    )


def lemma2_bound(
    tau_min: float,
    enc: DistortionModel,
    ch: DistortionModel,
    n: int = 1_000_000,
    seed: int = 0,
) -> BoundReport:
    """Prior-free bound P(enc + ch > tau_min) with tau_min = min_j tau_j."""
    if not (math.isfinite(tau_min) and tau_min >= 0):
        raise ValueError(f"tau_min must be finite and nonnegative, got {tau_min}")

    if (
        isinstance(enc, Exponential)
        and isinstance(ch, Exponential)
        and enc.rate != ch.rate
    ):
        p = hypoexp_survival(tau_min, enc.rate, ch.rate) if tau_min > 0 else 1.0
        return BoundReport(
            bound_value=float(p),
            per_concept_terms=(float(p),),
            sample_count=0,
            confidence_halfwidth=0.0,
        )

    if n < 1:
        raise ValueError("sample count must be at least 1")
    s = _draw_pair_sum(enc, ch, n, seed)
    p = float((s > tau_min).mean())
    half = _Z95 * math.sqrt(max(p * (1.0 - p), 0.0) / n)
    return BoundReport(
        bound_value=p,
        per_concept_terms=(p,),
        sample_count=n,
        confidence_halfwidth=half,
    )


# ---------------------------------------------------------------------------
# syntactic rate design
# ---------------------------------------------------------------------------

class InfeasibleDesignError(ValueError):
    """Raised when no channel rate can reach the requested bound target."""

    def __init__(self, target: float, floor: float):
        self.target = target
        self.floor = floor
        super().__init__(
            f"target {target} is not achievable: even a distortion-free channel "
            f"leaves a bound floor of {floor:.9g}"
        )


_BISECT_LO = 1e-6
_BISECT_HI = 1e6
_BISECT_RESIDUAL = 1e-10


def design_lambda2(
    cset: ConceptSet, taus: Sequence[float], lam1: float, target: float
) -> float:
    """Find the channel distortion rate meeting a bound target.

    Solves Σ_j α_j survival(tau_j; lam1, lam2) = target for lam2 by bisection
    over [1e-6, 1e6] (the weighted survival is strictly decreasing in lam2),
    stopping when the residual is at most 1e-10.  Targets at or below the
    lam2 -> inf floor Σ_j α_j exp(-lam1 tau_j) raise InfeasibleDesignError;
    targets >= 1 are rejected outright.
    """
    taus = [float(t) for t in taus]
    if len(taus) != cset.size:
        raise ValueError(f"expected {cset.size} tau values, got {len(taus)}")
    if any(not (math.isfinite(t) and t > 0) for t in taus):
        raise ValueError("all tau values must be finite and positive")
    if not lam1 > 0:
        raise ValueError(f"lam1 must be positive, got {lam1}")
    if not target < 1.0:
        raise ValueError(f"target must be strictly below 1, got {target}")
    alphas = np.asarray(cset.priors)
    floor = float(alphas @ np.exp(-lam1 * np.asarray(taus)))
    if target <= floor:
        raise InfeasibleDesignError(target, floor)

    def weighted_survival(lam2: float) -> float:
        return float(
            sum(a * _survival_near_equal_safe(t, lam1, lam2) for a, t in zip(alphas, taus))
        )

    lo, hi = _BISECT_LO, _BISECT_HI
    f_lo = weighted_survival(lo) - target
    f_hi = weighted_survival(hi) - target
    if f_lo < 0:
        raise ValueError(f"target {target} already met at lambda2={lo}")
    if f_hi > 0:
        raise ValueError(
            f"target {target} not reachable within lambda2 <= {hi} "
            f"(bound floor is {floor:.9g})"
        )
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        f_mid = weighted_survival(mid) - target
        if abs(f_mid) <= _BISECT_RESIDUAL:
            return mid
        if f_mid > 0:
            lo = mid
        else:
            hi = mid
    raise RuntimeError("bisection failed to reach the residual tolerance")
