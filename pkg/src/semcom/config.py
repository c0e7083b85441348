"""Scenario configuration files.

Scenarios are TOML documents with sections [space], [concepts], [encoder],
[phy], [sweep], and an optional [context].  Parsing is strict: unknown keys
anywhere are fatal, and every violation reports the dotted path of the
offending field so misconfigured runs fail loudly instead of producing
quietly wrong science.

The package bundles one ready-made scenario named ``vret`` (three phobia-level
concepts over an emotion x stimulus space with uniform priors); pass that
name anywhere a config path is accepted.
"""

from __future__ import annotations

import math
from importlib import resources
from pathlib import Path
from typing import Optional, Union

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .decode import Concept, ConceptSet, validate_concept_set
from .encoders import TheoreticalEncoderConfig
from .phy import ChannelSpec, ModulationSpec, PacketSpec, PhyConfig, QuantizerSpec
from .sim import ScenarioConfig
from .space import (
    ContextSpec,
    DomainSpec,
    PiecewiseLinearMap,
    QualityDimension,
    SemanticPoint,
    SpaceSpec,
)

__all__ = ["ConfigError", "parse_config", "load_space", "load_concepts", "bundled_config_path"]

_MODULATION_ALIASES = {
    "bpsk": "BPSK",
    "qam16": "QAM16",
    "16qam": "QAM16",
    "qam256": "QAM256",
    "256qam": "QAM256",
}


class ConfigError(ValueError):
    """A scenario file failed validation; the message names the field."""


def bundled_config_path(name: str) -> Path:
    """Filesystem path of a config shipped with the package."""
    candidate = resources.files("semcom").joinpath("configs", f"{name}.toml")
    with resources.as_file(candidate) as p:
        if not p.is_file():
            raise ConfigError(f"no bundled config named {name!r}")
        return Path(p)


def _resolve(path: Union[str, Path]) -> Path:
    p = Path(path)
    if p.is_file():
        return p
    if isinstance(path, str) and "/" not in path and "\\" not in path:
        stem = path[:-5] if path.endswith(".toml") else path
        try:
            return bundled_config_path(stem)
        except ConfigError:
            pass
    raise ConfigError(f"config file not found: {path}")


class _Section:
    """Wrapper over a TOML table that tracks key consumption."""

    def __init__(self, data: dict, path: str):
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a table")
        self.data = data
        self.path = path
        self.seen: set[str] = set()

    def _label(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def has(self, key: str) -> bool:
        return key in self.data

    def get(self, key: str, kind, default=None, required=False):
        self.seen.add(key)
        if key not in self.data:
            if required:
                raise ConfigError(f"{self._label(key)}: missing required key")
            return default
        value = self.data[key]
        if kind is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{self._label(key)}: expected a number")
            return float(value)
        if kind is int:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{self._label(key)}: expected an integer")
            return value
        if kind is bool:
            if not isinstance(value, bool):
                raise ConfigError(f"{self._label(key)}: expected a boolean")
            return value
        if kind is str:
            if not isinstance(value, str):
                raise ConfigError(f"{self._label(key)}: expected a string")
            return value
        if kind is list:
            if not isinstance(value, list):
                raise ConfigError(f"{self._label(key)}: expected an array")
            return value
        if kind is dict:
            if not isinstance(value, dict):
                raise ConfigError(f"{self._label(key)}: expected a table")
            return value
        raise AssertionError(f"unsupported kind {kind}")

    def table(self, key: str, required=False) -> Optional["_Section"]:
        value = self.get(key, dict, required=required)
        if value is None:
            return None
        return _Section(value, self._label(key))

    def table_list(self, key: str, required=False) -> list["_Section"]:
        value = self.get(key, list, required=required)
        if value is None:
            return []
        out = []
        for i, item in enumerate(value):
            if not isinstance(item, dict):
                raise ConfigError(f"{self._label(key)}[{i}]: expected a table")
            out.append(_Section(item, f"{self._label(key)}[{i}]"))
        return out

    def finish(self) -> None:
        unknown = set(self.data) - self.seen
        if unknown:
            key = sorted(unknown)[0]
            raise ConfigError(f"{self._label(key)}: unknown key")


def _number_list(sec: _Section, key: str, required=False) -> Optional[list[float]]:
    raw = sec.get(key, list, required=required)
    if raw is None:
        return None
    out = []
    for i, v in enumerate(raw):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{sec._label(key)}[{i}]: expected a number")
        out.append(float(v))
    return out


def _wrap(path: str, build):
    try:
        return build()
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# section loaders
# ---------------------------------------------------------------------------

def _load_dimension(sec: _Section) -> QualityDimension:
    name = sec.get("name", str, required=True)
    kind = sec.get("kind", str, default="linear")
    rng = _number_list(sec, "range") or [0.0, 1.0]
    if len(rng) != 2:
        raise ConfigError(f"{sec.path}.range: expected [lo, hi]")
    sec.finish()
    return _wrap(sec.path, lambda: QualityDimension(name=name, kind=kind, lo=rng[0], hi=rng[1]))


def _load_space(sec: _Section) -> SpaceSpec:
    domains = []
    for dom_sec in sec.table_list("domains", required=True):
        name = dom_sec.get("name", str, required=True)
        metric = dom_sec.get("metric", str, default="euclidean")
        rho = dom_sec.get("rho", float)
        dims = [_load_dimension(d) for d in dom_sec.table_list("dimensions", required=True)]
        dom_sec.finish()
        domains.append(
            _wrap(
                dom_sec.path,
                lambda name=name, metric=metric, rho=rho, dims=dims: DomainSpec(
                    name=name, dimensions=tuple(dims), metric=metric, rho=rho
                ),
            )
        )
    sec.finish()
    return _wrap(sec.path, lambda: SpaceSpec(domains=tuple(domains)))


def _load_prototype(sec: _Section, key: str, space: SpaceSpec) -> SemanticPoint:
    raw = sec.get(key, list, required=True)
    label = sec._label(key)
    if len(raw) != space.n_domains:
        raise ConfigError(
            f"{label}: expected {space.n_domains} per-domain coordinate lists"
        )
    coords = []
    for i, (dom, values) in enumerate(zip(space.domains, raw)):
        if not isinstance(values, list) or len(values) != dom.n_dims:
            raise ConfigError(
                f"{label}[{i}]: expected {dom.n_dims} coordinates for domain "
                f"{dom.name!r}"
            )
        for v in values:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"{label}[{i}]: expected numbers")
        coords.append(tuple(float(v) for v in values))
    return SemanticPoint(tuple(coords))


def _load_region(sec: _Section, space: SpaceSpec):
    raw = sec.get("region", list)
    if raw is None:
        return None
    label = sec._label("region")
    if len(raw) != space.n_domains:
        raise ConfigError(f"{label}: expected {space.n_domains} per-domain interval lists")
    region = []
    for i, (dom, intervals) in enumerate(zip(space.domains, raw)):
        if not isinstance(intervals, list) or len(intervals) != dom.n_dims:
            raise ConfigError(f"{label}[{i}]: expected {dom.n_dims} [lo, hi] intervals")
        dom_out = []
        for k, iv in enumerate(intervals):
            if not isinstance(iv, list) or len(iv) != 2:
                raise ConfigError(f"{label}[{i}][{k}]: expected [lo, hi]")
            dom_out.append((float(iv[0]), float(iv[1])))
        region.append(tuple(dom_out))
    return tuple(region)


def _load_concepts(sec: _Section, space: SpaceSpec) -> ConceptSet:
    concepts = []
    for c_sec in sec.table_list("concept", required=True):
        cid = c_sec.get("id", int, required=True)
        name = c_sec.get("name", str, required=True)
        proto = _load_prototype(c_sec, "prototype", space)
        region = _load_region(c_sec, space)
        c_sec.finish()
        concepts.append(
            _wrap(
                c_sec.path,
                lambda cid=cid, name=name, proto=proto, region=region: Concept(
                    id=cid, name=name, prototype=proto, region=region
                ),
            )
        )
    sec.seen.add("priors")
    raw_priors = sec.data.get("priors")
    if raw_priors is None or raw_priors == "uniform":
        priors = [1.0 / len(concepts)] * len(concepts)
    elif isinstance(raw_priors, list):
        priors = []
        for i, v in enumerate(raw_priors):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"{sec._label('priors')}[{i}]: expected a number")
            priors.append(float(v))
    else:
        raise ConfigError(f"{sec._label('priors')}: expected \"uniform\" or an array")
    sec.finish()
    return _wrap(
        f"{sec.path}.priors" if sec.path else "priors",
        lambda: ConceptSet(concepts=tuple(concepts), priors=tuple(priors)),
    )


def _load_encoder(sec: Optional[_Section]) -> TheoreticalEncoderConfig:
    if sec is None:
        return TheoreticalEncoderConfig()
    sigma = sec.get("sigma_e", float, default=0.01)
    clip = sec.get("clip", bool, default=True)
    sec.finish()
    return _wrap(sec.path, lambda: TheoreticalEncoderConfig(sigma_e=sigma, clip=clip))


def _load_phy(sec: Optional[_Section]) -> PhyConfig:
    if sec is None:
        return PhyConfig()
    q_sec = sec.table("quantizer")
    quantizer = QuantizerSpec()
    if q_sec is not None:
        bits = q_sec.get("bits_per_dim", int, default=8)
        q_sec.finish()
        quantizer = _wrap(q_sec.path, lambda: QuantizerSpec(bits_per_dim=bits))
    m_sec = sec.table("modulation")
    modulation = ModulationSpec()
    if m_sec is not None:
        scheme = m_sec.get("scheme", str, default="BPSK")
        scheme = _MODULATION_ALIASES.get(scheme.lower(), scheme)
        m_sec.finish()
        modulation = _wrap(m_sec.path, lambda: ModulationSpec(scheme=scheme))
    c_sec = sec.table("channel")
    channel = ChannelSpec()
    if c_sec is not None:
        model = c_sec.get("model", str, default="awgn").lower()
        k_db = c_sec.get("k_db", float, default=6.0)
        fading = c_sec.get("fading", str, default="block")
        c_sec.finish()
        channel = _wrap(
            c_sec.path, lambda: ChannelSpec(model=model, k_db=k_db, fading=fading)
        )
    p_sec = sec.table("packet")
    packet = PacketSpec()
    if p_sec is not None:
        reps = p_sec.get("reps_per_packet", int, default=20)
        dims = p_sec.get("dims_per_rep", int, default=4)
        p_sec.finish()
        packet = _wrap(
            p_sec.path, lambda: PacketSpec(reps_per_packet=reps, dims_per_rep=dims)
        )
    sec.finish()
    return _wrap(
        sec.path,
        lambda: PhyConfig(
            quantizer=quantizer, modulation=modulation, channel=channel, packet=packet
        ),
    )


def _load_context(sec: Optional[_Section], space: SpaceSpec) -> Optional[ContextSpec]:
    if sec is None:
        return None
    weights = _number_list(sec, "weights", required=True)
    transforms = None
    t_secs = sec.table_list("transform")
    if t_secs:
        dom_names = [d.name for d in space.domains]
        maps = [
            [PiecewiseLinearMap.identity(q.lo, q.hi) for q in d.dimensions]
            for d in space.domains
        ]
        for t_sec in t_secs:
            dom = t_sec.get("domain", str, required=True)
            dim = t_sec.get("dimension", str, required=True)
            knots = t_sec.get("knots", list, required=True)
            t_sec.finish()
            if dom not in dom_names:
                raise ConfigError(f"{t_sec.path}.domain: unknown domain {dom!r}")
            di = dom_names.index(dom)
            dim_names = [q.name for q in space.domains[di].dimensions]
            if dim not in dim_names:
                raise ConfigError(f"{t_sec.path}.dimension: unknown dimension {dim!r}")
            pairs = []
            for i, knot in enumerate(knots):
                if not isinstance(knot, list) or len(knot) != 2:
                    raise ConfigError(f"{t_sec.path}.knots[{i}]: expected [x, y]")
                pairs.append((float(knot[0]), float(knot[1])))
            maps[di][dim_names.index(dim)] = _wrap(
                f"{t_sec.path}.knots", lambda pairs=pairs: PiecewiseLinearMap(tuple(pairs))
            )
        transforms = tuple(tuple(m) for m in maps)
    sec.finish()
    return _wrap(
        sec.path,
        lambda: ContextSpec(weights=tuple(weights), transforms=transforms),
    )


def _load_sweep(sec: Optional[_Section]) -> dict:
    if sec is None:
        return {"ebn0_db": [0.0], "trials_per_point": 1000, "master_seed": 0}
    grid = _number_list(sec, "ebn0_db", required=True)
    trials = sec.get("trials_per_point", int, default=1000)
    seed = sec.get("master_seed", int, default=0)
    sec.finish()
    return {"ebn0_db": grid, "trials_per_point": trials, "master_seed": seed}


# ---------------------------------------------------------------------------
# public entry points
# ---------------------------------------------------------------------------

def _read_toml(path: Union[str, Path]) -> _Section:
    resolved = _resolve(path)
    try:
        with open(resolved, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{resolved}: invalid TOML: {exc}") from exc
    return _Section(data, "")


def load_space(path: Union[str, Path]) -> SpaceSpec:
    """Load only the [space] section of a scenario file."""
    root = _read_toml(path)
    space = _load_space(root.table("space", required=True))
    return space


def load_concepts(path: Union[str, Path]) -> tuple[SpaceSpec, ConceptSet]:
    """Load the [space] and [concepts] sections of a scenario file."""
    root = _read_toml(path)
    space = _load_space(root.table("space", required=True))
    cset = _load_concepts(root.table("concepts", required=True), space)
    _wrap("concepts", lambda: validate_concept_set(space, cset))
    return space, cset


def parse_config(path: Union[str, Path]) -> ScenarioConfig:
    """Load and fully validate a scenario file (or bundled config name)."""
    root = _read_toml(path)
    name = root.get("name", str, default=Path(str(path)).stem)
    space = _load_space(root.table("space", required=True))
    cset = _load_concepts(root.table("concepts", required=True), space)
    encoder = _load_encoder(root.table("encoder"))
    phy = _load_phy(root.table("phy"))
    sweep = _load_sweep(root.table("sweep"))
    context = _load_context(root.table("context"), space)
    root.finish()
    if not all(math.isfinite(v) for v in sweep["ebn0_db"]):
        raise ConfigError("sweep.ebn0_db: grid values must be finite")
    return _wrap(
        "scenario",
        lambda: ScenarioConfig(
            space=space,
            concepts=cset,
            encoder=encoder,
            phy=phy,
            ebn0_db=tuple(sweep["ebn0_db"]),
            trials_per_point=sweep["trials_per_point"],
            master_seed=sweep["master_seed"],
            context=context,
            name=name,
        ),
    )
