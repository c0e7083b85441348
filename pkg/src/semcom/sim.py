"""End-to-end Monte Carlo harness.

A scenario bundles a conceptual space, a concept dictionary, the theoretical
encoder, and the traditional chain.  One trial draws a concept by prior,
encodes it, ships the point through the packet pipeline, and decodes the
received point by minimum distance; trials ride 20 to a packet.  Sweeps run
a trial budget at every SNR grid point, attach the two semantic-error bounds
evaluated on distortion samples harvested from the very same trials, and
emit fixed-format CSV plus a JSON document that embeds the scenario for
provenance.

Randomness is derived per (master seed, SNR index, packet index), so results
are bit-reproducible and independent of how packets are sharded across
workers; ``run_sweep`` accepts a packet range for exactly that purpose.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .decode import ConceptSet, prototype_matrix, validate_concept_set
from .encoders import TheoreticalEncoderConfig
from .phy import PhyConfig, _transmit_points
from .space import (
    ContextSpec,
    SemanticPoint,
    SpaceSpec,
    contextual_distortion_matrix,
    contextual_distortion_rows,
    distortion_matrix,
    distortion_rows,
    validate_context,
)

__all__ = [
    "ScenarioConfig",
    "TrialRecord",
    "SnrPointStats",
    "SweepReport",
    "run_trial",
    "run_packet",
    "run_sweep",
    "merge_reports",
    "RateReport",
    "rate_accounting",
    "sweep_to_csv",
    "sweep_to_json",
    "CSV_COLUMNS",
]

_Z95 = 1.959963984540054
_MIN_ERROR_EVENTS = 10  # rates with fewer error events are flagged
_PACKET_STREAM = 0
_OVERLAY_STREAM = 1
_CHUNK_PACKETS = 512

CSV_COLUMNS = (
    "ebn0_db",
    "semantic_error_rate",
    "packet_error_rate",
    "mean_total_distortion",
    "mean_encoder_distortion",
    "lemma1_bound",
    "lemma2_bound",
    "trials",
    "ci_semantic",
    "ci_packet",
)


# ---------------------------------------------------------------------------
# scenario
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioConfig:
    """Complete, hashable description of one simulation campaign.

    When ``context`` is set, decoding, the recorded distortions, and the
    bound radii all use the contextual distortion, so the bound overlays stay
    comparable with the error rates.
    """

    space: SpaceSpec
    concepts: ConceptSet
    encoder: TheoreticalEncoderConfig
    phy: PhyConfig
    ebn0_db: tuple[float, ...]
    trials_per_point: int
    master_seed: int = 0
    context: Optional[ContextSpec] = None
    name: str = "scenario"

    def __post_init__(self):
        object.__setattr__(self, "ebn0_db", tuple(float(v) for v in self.ebn0_db))
        if not self.ebn0_db:
            raise ValueError("SNR grid must not be empty")
        if any(b >= a for a, b in zip(self.ebn0_db[1:], self.ebn0_db)):
            raise ValueError("SNR grid must be strictly increasing")
        if self.trials_per_point < 1:
            raise ValueError("trials_per_point must be at least 1")
        validate_concept_set(self.space, self.concepts)
        if self.context is not None:
            validate_context(self.space, self.context)
        if self.phy.packet.dims_per_rep != self.space.n_dims:
            raise ValueError(
                f"packet carries {self.phy.packet.dims_per_rep} dims per rep "
                f"but the space has {self.space.n_dims}"
            )
        if np.any(self.space.lows != 0.0) or np.any(self.space.highs != 1.0):
            raise ValueError("the quantizer requires all dimension ranges to be [0, 1]")

    @property
    def packets_per_point(self) -> int:
        # whole packets only; the trial budget rounds up
        return -(-self.trials_per_point // self.phy.packet.reps_per_packet)

    def to_dict(self) -> dict:
        space = [
            {
                "name": d.name,
                "metric": d.metric,
                **({"rho": d.rho} if d.rho is not None else {}),
                "dimensions": [
                    {"name": q.name, "kind": q.kind, "range": [q.lo, q.hi]}
                    for q in d.dimensions
                ],
            }
            for d in self.space.domains
        ]
        concepts = [
            {
                "id": c.id,
                "name": c.name,
                "prototype": [list(dom) for dom in c.prototype.coords],
                **(
                    {"region": [[list(iv) for iv in dom] for dom in c.region]}
                    if c.region is not None
                    else {}
                ),
            }
            for c in self.concepts.concepts
        ]
        ctx = None
        if self.context is not None:
            ctx = {
                "weights": list(self.context.weights),
                "transforms": None
                if self.context.transforms is None
                else [
                    [[list(k) for k in t.knots] for t in maps]
                    for maps in self.context.transforms
                ],
            }
        return {
            "name": self.name,
            "space": {"domains": space},
            "concepts": {"priors": list(self.concepts.priors), "concept": concepts},
            "encoder": {"sigma_e": self.encoder.sigma_e, "clip": self.encoder.clip},
            "phy": {
                "quantizer": {"bits_per_dim": self.phy.quantizer.bits_per_dim},
                "codec": {
                    "constraint_length": self.phy.codec.constraint_length,
                    "generators": list(self.phy.codec.generators),
                },
                "modulation": {"scheme": self.phy.modulation.scheme},
                "channel": {
                    "model": self.phy.channel.model,
                    "k_db": self.phy.channel.k_db,
                    "fading": self.phy.channel.fading,
                },
                "packet": {
                    "reps_per_packet": self.phy.packet.reps_per_packet,
                    "dims_per_rep": self.phy.packet.dims_per_rep,
                },
            },
            "sweep": {
                "ebn0_db": list(self.ebn0_db),
                "trials_per_point": self.trials_per_point,
                "master_seed": self.master_seed,
            },
            "context": ctx,
        }

    @property
    def scenario_hash(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()


@dataclass(frozen=True)
class TrialRecord:
    """Outcome of one transmitted representation."""

    concept: int
    encoded: SemanticPoint
    received: SemanticPoint
    decoded: int
    enc_distortion: float
    channel_distortion: float
    total_distortion: float
    packet_error: bool


@dataclass(frozen=True)
class SnrPointStats:
    """Aggregates for one SNR grid point."""

    ebn0_db: float
    trials: int
    packets: int
    semantic_errors: int
    packet_errors: int
    mean_total_distortion: float
    mean_encoder_distortion: float
    lemma1_bound: float
    lemma2_bound: float
    overlay_samples: int

    @property
    def semantic_error_rate(self) -> float:
        return self.semantic_errors / self.trials if self.trials else 0.0

    @property
    def packet_error_rate(self) -> float:
        return self.packet_errors / self.packets if self.packets else 0.0

    @property
    def ci_semantic(self) -> float:
        return _binomial_halfwidth(self.semantic_error_rate, self.trials)

    @property
    def ci_packet(self) -> float:
        return _binomial_halfwidth(self.packet_error_rate, self.packets)

    @property
    def semantic_rate_flagged(self) -> bool:
        return self.semantic_errors < _MIN_ERROR_EVENTS

    @property
    def packet_rate_flagged(self) -> bool:
        return self.packet_errors < _MIN_ERROR_EVENTS


@dataclass(frozen=True)
class SweepReport:
    """Per-SNR statistics for one scenario (or one shard of it)."""

    scenario_hash: str
    ebn0_db: tuple[float, ...]
    points: tuple[SnrPointStats, ...]


def _binomial_halfwidth(p: float, n: int) -> float:
    if n <= 0:
        return math.inf
    return _Z95 * math.sqrt(max(p * (1.0 - p), 0.0) / n)


# ---------------------------------------------------------------------------
# trial machinery
# ---------------------------------------------------------------------------

def _packet_rng(master_seed: int, snr_index: int, packet_index: int) -> np.random.Generator:
    seq = np.random.SeedSequence(
        (master_seed, _PACKET_STREAM, snr_index, packet_index)
    )
    return np.random.Generator(np.random.PCG64(seq))


def _overlay_rng(master_seed: int, snr_index: int) -> np.random.Generator:
    seq = np.random.SeedSequence((master_seed, _OVERLAY_STREAM, snr_index))
    return np.random.Generator(np.random.PCG64(seq))


def _point_from_flat(space: SpaceSpec, flat: np.ndarray) -> SemanticPoint:
    return SemanticPoint(tuple(tuple(flat[s]) for s in space.dim_slices))


def _draw_packet_inputs(
    scenario: ScenarioConfig,
    protos: np.ndarray,
    cum_priors: np.ndarray,
    rngs: Sequence[np.random.Generator],
) -> tuple[np.ndarray, np.ndarray]:
    """Concept indices (C, R) and encoded points (C, R, D), one rng per packet.

    Draw order per packet: concept uniforms, then encoder noise; the channel
    consumes the same generator afterwards inside the transmit chain.
    """
    space, enc = scenario.space, scenario.encoder
    reps = scenario.phy.packet.reps_per_packet
    J = scenario.concepts.size
    js = np.empty((len(rngs), reps), dtype=np.int64)
    z = np.empty((len(rngs), reps, space.n_dims))
    for i, rng in enumerate(rngs):
        js[i] = np.minimum(
            np.searchsorted(cum_priors, rng.random(reps), side="right"), J - 1
        )
        z[i] = protos[js[i]] + enc.sigma_e * rng.standard_normal((reps, space.n_dims))
    if enc.clip:
        np.clip(z, space.lows, space.highs, out=z)
    return js, z


def _rows(scenario: ScenarioConfig, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    if scenario.context is None:
        return distortion_rows(scenario.space, A, B)
    return contextual_distortion_rows(scenario.space, scenario.context, A, B)


def _pairwise(scenario: ScenarioConfig, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    if scenario.context is None:
        return distortion_matrix(scenario.space, A, B)
    return contextual_distortion_matrix(scenario.space, scenario.context, A, B)


def _scenario_taus(scenario: ScenarioConfig) -> np.ndarray:
    protos = prototype_matrix(scenario.concepts)
    if scenario.concepts.size == 1:
        return np.array([math.inf])
    d = _pairwise(scenario, protos, protos)
    np.fill_diagonal(d, np.inf)
    return 0.5 * d.min(axis=1)


def run_packet(
    scenario: ScenarioConfig, ebn0_db: float, rng: np.random.Generator
) -> list[TrialRecord]:
    """Run one full packet (reps_per_packet trials) with the caller's rng."""
    space = scenario.space
    protos = prototype_matrix(scenario.concepts)
    cum = np.cumsum(scenario.concepts.priors)
    js, z = _draw_packet_inputs(scenario, protos, cum, [rng])
    zhat, perr = _transmit_points(z, scenario.phy, ebn0_db, [rng])
    enc_d = _rows(scenario, protos[js[0]], z[0])
    ch_d = _rows(scenario, z[0], zhat[0])
    tot_d = _rows(scenario, protos[js[0]], zhat[0])
    decoded = np.argmin(_pairwise(scenario, zhat[0], protos), axis=1)
    return [
        TrialRecord(
            concept=int(js[0, r]) + 1,
            encoded=_point_from_flat(space, z[0, r]),
            received=_point_from_flat(space, zhat[0, r]),
            decoded=int(decoded[r]) + 1,
            enc_distortion=float(enc_d[r]),
            channel_distortion=float(ch_d[r]),
            total_distortion=float(tot_d[r]),
            packet_error=bool(perr[0]),
        )
        for r in range(js.shape[1])
    ]


def run_trial(
    scenario: ScenarioConfig, ebn0_db: float, rng: np.random.Generator
) -> TrialRecord:
    """Run one trial; it rides in slot 0 of a freshly drawn packet."""
    return run_packet(scenario, ebn0_db, rng)[0]


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def _overlay_bounds(
    scenario: ScenarioConfig,
    snr_index: int,
    taus: np.ndarray,
    concept_labels: np.ndarray,
    enc_samples: np.ndarray,
    ch_samples: np.ndarray,
) -> tuple[float, float, int]:
    """Lemma 1/2 overlays from harvested distortion samples.

    Encoder and channel samples are re-paired independently per concept, and
    both overlays are evaluated on the same pairs, which makes
    lemma2 >= lemma1 hold sample-by-sample (tau_min <= tau_j).
    """
    alphas = np.asarray(scenario.concepts.priors)
    if not np.all(np.isfinite(taus)):
        return 0.0, 0.0, 0
    n = enc_samples.size
    rng = _overlay_rng(scenario.master_seed, snr_index)
    tau_min = float(taus.min())
    lemma1 = 0.0
    lemma2 = 0.0
    for j in range(alphas.size):
        pool = enc_samples[concept_labels == j]
        if pool.size == 0:
            pool = enc_samples  # no trials hit this concept; fall back to pooled law
        s = pool[rng.integers(0, pool.size, n)] + ch_samples[
            rng.integers(0, ch_samples.size, n)
        ]
        lemma1 += alphas[j] * float((s > taus[j]).mean())
        lemma2 += alphas[j] * float((s > tau_min).mean())
    return lemma1, lemma2, n


def _run_point(
    scenario: ScenarioConfig,
    snr_index: int,
    protos: np.ndarray,
    cum_priors: np.ndarray,
    taus: np.ndarray,
    first_packet: int,
    n_packets: int,
) -> SnrPointStats:
    ebn0 = scenario.ebn0_db[snr_index]
    reps = scenario.phy.packet.reps_per_packet
    sem_errors = 0
    pkt_errors = 0
    tot_sum = 0.0
    enc_sum = 0.0
    enc_parts: list[np.ndarray] = []
    ch_parts: list[np.ndarray] = []
    label_parts: list[np.ndarray] = []
    for start in range(first_packet, first_packet + n_packets, _CHUNK_PACKETS):
        stop = min(start + _CHUNK_PACKETS, first_packet + n_packets)
        rngs = [
            _packet_rng(scenario.master_seed, snr_index, p) for p in range(start, stop)
        ]
        js, z = _draw_packet_inputs(scenario, protos, cum_priors, rngs)
        zhat, perr = _transmit_points(z, scenario.phy, ebn0, rngs)
        flat_js = js.reshape(-1)
        flat_z = z.reshape(-1, z.shape[-1])
        flat_zhat = zhat.reshape(-1, zhat.shape[-1])
        enc_d = _rows(scenario, protos[flat_js], flat_z)
        ch_d = _rows(scenario, flat_z, flat_zhat)
        tot_d = _rows(scenario, protos[flat_js], flat_zhat)
        decoded = np.argmin(_pairwise(scenario, flat_zhat, protos), axis=1)
        sem_errors += int(np.count_nonzero(decoded != flat_js))
        pkt_errors += int(np.count_nonzero(perr))
        tot_sum += float(tot_d.sum())
        enc_sum += float(enc_d.sum())
        enc_parts.append(enc_d)
        ch_parts.append(ch_d)
        label_parts.append(flat_js)
    trials = n_packets * reps
    enc_samples = np.concatenate(enc_parts)
    ch_samples = np.concatenate(ch_parts)
    labels = np.concatenate(label_parts)
    lemma1, lemma2, n_overlay = _overlay_bounds(
        scenario, snr_index, taus, labels, enc_samples, ch_samples
    )
    return SnrPointStats(
        ebn0_db=ebn0,
        trials=trials,
        packets=n_packets,
        semantic_errors=sem_errors,
        packet_errors=pkt_errors,
        mean_total_distortion=tot_sum / trials,
        mean_encoder_distortion=enc_sum / trials,
        lemma1_bound=lemma1,
        lemma2_bound=lemma2,
        overlay_samples=n_overlay,
    )


def run_sweep(
    scenario: ScenarioConfig,
    first_packet: int = 0,
    num_packets: Optional[int] = None,
) -> SweepReport:
    """Run the scenario over its SNR grid.

    ``first_packet``/``num_packets`` select a shard of each point's packet
    budget; shards of the same scenario merge back (see
    :func:`merge_reports`) into the same counts as a single full run.
    """
    total = scenario.packets_per_point
    if num_packets is None:
        num_packets = total - first_packet
    if first_packet < 0 or num_packets < 1 or first_packet + num_packets > total:
        raise ValueError(
            f"invalid packet range [{first_packet}, {first_packet + num_packets}) "
            f"of {total}"
        )
    protos = prototype_matrix(scenario.concepts)
    cum = np.cumsum(scenario.concepts.priors)
    taus = _scenario_taus(scenario)
    points = tuple(
        _run_point(scenario, i, protos, cum, taus, first_packet, num_packets)
        for i in range(len(scenario.ebn0_db))
    )
    return SweepReport(
        scenario_hash=scenario.scenario_hash,
        ebn0_db=scenario.ebn0_db,
        points=points,
    )


def merge_reports(a: SweepReport, b: SweepReport) -> SweepReport:
    """Pool two shards of the same scenario (count-weighted, commutative)."""
    if a.scenario_hash != b.scenario_hash:
        raise ValueError("cannot merge reports from different scenarios")
    if a.ebn0_db != b.ebn0_db:
        raise ValueError("cannot merge reports with different SNR grids")
    points = []
    for pa, pb in zip(a.points, b.points):
        if pb.trials == 0:
            points.append(pa)
            continue
        if pa.trials == 0:
            points.append(pb)
            continue
        trials = pa.trials + pb.trials
        packets = pa.packets + pb.packets
        n_ov = pa.overlay_samples + pb.overlay_samples
        points.append(
            SnrPointStats(
                ebn0_db=pa.ebn0_db,
                trials=trials,
                packets=packets,
                semantic_errors=pa.semantic_errors + pb.semantic_errors,
                packet_errors=pa.packet_errors + pb.packet_errors,
                mean_total_distortion=(
                    pa.trials * pa.mean_total_distortion
                    + pb.trials * pb.mean_total_distortion
                )
                / trials,
                mean_encoder_distortion=(
                    pa.trials * pa.mean_encoder_distortion
                    + pb.trials * pb.mean_encoder_distortion
                )
                / trials,
                lemma1_bound=(
                    (pa.overlay_samples * pa.lemma1_bound + pb.overlay_samples * pb.lemma1_bound) / n_ov
                    if n_ov
                    else 0.0
                ),
                lemma2_bound=(
                    (pa.overlay_samples * pa.lemma2_bound + pb.overlay_samples * pb.lemma2_bound) / n_ov
                    if n_ov
                    else 0.0
                ),
                overlay_samples=n_ov,
            )
        )
    return SweepReport(scenario_hash=a.scenario_hash, ebn0_db=a.ebn0_db, points=tuple(points))


# ---------------------------------------------------------------------------
# rate accounting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RateReport:
    semantic_bits: int
    baseline_bits: int
    reduction_fraction: float


def rate_accounting(
    dims_per_rep: int = 4,
    bits_per_dim: int = 8,
    code_rate: float = 0.5,
    baseline_image_dims: Sequence[Sequence[int]] = ((112, 112, 3), (112, 112, 3)),
    baseline_bits_per_pixel: int = 8,
) -> RateReport:
    """Coded bits per semantic inference vs. shipping the raw pixels."""
    if dims_per_rep < 1 or bits_per_dim < 1:
        raise ValueError("representation geometry must be positive")
    if not 0 < code_rate <= 1:
        raise ValueError(f"code rate must lie in (0, 1], got {code_rate}")
    semantic = dims_per_rep * bits_per_dim / code_rate
    if semantic != int(semantic):
        raise ValueError("semantic bit count must be an integer")
    pixels = 0
    for dims in baseline_image_dims:
        n = 1
        for d in dims:
            if d < 1:
                raise ValueError("image dimensions must be positive")
            n *= int(d)
        pixels += n
    baseline = pixels * baseline_bits_per_pixel
    return RateReport(
        semantic_bits=int(semantic),
        baseline_bits=baseline,
        reduction_fraction=1.0 - semantic / baseline,
    )


# ---------------------------------------------------------------------------
# emission
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".9g")


def sweep_to_csv(report: SweepReport) -> str:
    """Fixed-column CSV, reals at 9 significant digits."""
    lines = [",".join(CSV_COLUMNS)]
    for p in report.points:
        lines.append(
            ",".join(
                (
                    _fmt(p.ebn0_db),
                    _fmt(p.semantic_error_rate),
                    _fmt(p.packet_error_rate),
                    _fmt(p.mean_total_distortion),
                    _fmt(p.mean_encoder_distortion),
                    _fmt(p.lemma1_bound),
                    _fmt(p.lemma2_bound),
                    str(p.trials),
                    _fmt(p.ci_semantic),
                    _fmt(p.ci_packet),
                )
            )
        )
    return "\n".join(lines) + "\n"


def sweep_to_json(report: SweepReport, scenario: Optional[ScenarioConfig] = None) -> str:
    """Structured report; includes the full scenario when provided."""
    doc = {
        "schema": "semcom-sweep-1",
        "scenario_hash": report.scenario_hash,
        "ebn0_db": list(report.ebn0_db),
        "points": [
            {
                "ebn0_db": p.ebn0_db,
                "trials": p.trials,
                "packets": p.packets,
                "semantic_errors": p.semantic_errors,
                "packet_errors": p.packet_errors,
                "semantic_error_rate": p.semantic_error_rate,
                "packet_error_rate": p.packet_error_rate,
                "mean_total_distortion": p.mean_total_distortion,
                "mean_encoder_distortion": p.mean_encoder_distortion,
                "lemma1_bound": p.lemma1_bound,
                "lemma2_bound": p.lemma2_bound,
                "overlay_samples": p.overlay_samples,
                "ci_semantic": p.ci_semantic,
                "ci_packet": p.ci_packet,
                "semantic_rate_flagged": p.semantic_rate_flagged,
                "packet_rate_flagged": p.packet_rate_flagged,
            }
            for p in report.points
        ],
    }
    if scenario is not None:
        doc["scenario"] = scenario.to_dict()
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
