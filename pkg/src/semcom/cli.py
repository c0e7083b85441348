"""Command-line front end.

Subcommands: ``validate`` (parse and report), ``tau`` (guaranteed-decode
radii), ``bound`` (semantic-error bounds for chosen distortion models),
``design`` (solve for the channel distortion rate meeting a bound target),
``rate`` (semantic vs. baseline bit accounting), ``simulate`` (one SNR
point), and ``sweep`` (full grid, CSV + JSON artifacts).

Exit codes: 0 success, 2 configuration or usage error, 3 infeasible design
target.  Set SEMCOM_OUTPUT_DIR to change where artifacts land by default.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .bounds import (
    Empirical,
    Exponential,
    GaussianEncoder,
    InfeasibleDesignError,
    design_lambda2,
    lemma1_bound,
    lemma2_bound,
)
from .config import ConfigError, parse_config
from .decode import tau
from .sim import (
    ScenarioConfig,
    run_sweep,
    rate_accounting,
    sweep_to_csv,
    sweep_to_json,
)

__all__ = ["CliInvocation", "dispatch", "main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3

_OUTPUT_DIR_ENV = "SEMCOM_OUTPUT_DIR"


@dataclass(frozen=True)
class CliInvocation:
    """One parsed command-line request."""

    subcommand: str
    config_path: str
    output_path: Optional[str] = None
    seed_override: Optional[int] = None
    ebn0_override: Optional[tuple[float, ...]] = None
    trials_override: Optional[int] = None
    # bound options
    enc_model: Optional[str] = None
    ch_model: Optional[str] = None
    samples: int = 1_000_000
    bound_seed: int = 0
    # design options
    lambda1: float = 2.0
    target: float = 0.05
    # rate options
    baseline_dims: tuple[tuple[int, ...], ...] = ((112, 112, 3), (112, 112, 3))


def _fmt(x: float) -> str:
    return format(float(x), ".9g")


def _output_dir(invocation: CliInvocation) -> Path:
    if invocation.output_path is not None:
        return Path(invocation.output_path)
    return Path(os.environ.get(_OUTPUT_DIR_ENV, "."))


def _apply_overrides(scenario: ScenarioConfig, inv: CliInvocation) -> ScenarioConfig:
    changes = {}
    if inv.seed_override is not None:
        changes["master_seed"] = inv.seed_override
    if inv.ebn0_override is not None:
        changes["ebn0_db"] = inv.ebn0_override
    if inv.trials_override is not None:
        changes["trials_per_point"] = inv.trials_override
    return replace(scenario, **changes) if changes else scenario


def _parse_model(spec: str, scenario: ScenarioConfig):
    """Model syntax: exp:<rate>, gauss[:<sigma>], or empirical:<csv-of-samples-path>."""
    kind, _, arg = spec.partition(":")
    if kind == "exp":
        try:
            return Exponential(rate=float(arg))
        except ValueError as exc:
            raise ConfigError(f"bad exponential model {spec!r}: {exc}") from exc
    if kind == "gauss":
        sigma = scenario.encoder.sigma_e if not arg else float(arg)
        return GaussianEncoder(sigma_e=sigma, cset=scenario.concepts, space=scenario.space)
    if kind == "empirical":
        try:
            samples = np.loadtxt(arg, delimiter=",", ndmin=1)
        except OSError as exc:
            raise ConfigError(f"cannot read samples file {arg!r}: {exc}") from exc
        return Empirical(samples=samples)
    raise ConfigError(f"unknown distortion model {spec!r} (use exp:/gauss:/empirical:)")


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------

def _cmd_validate(scenario: ScenarioConfig, inv: CliInvocation) -> int:
    print(
        f"ok: scenario {scenario.name!r} with {scenario.concepts.size} concepts, "
        f"{len(scenario.ebn0_db)} SNR points, "
        f"{scenario.trials_per_point} trials/point"
    )
    print(f"scenario_hash: {scenario.scenario_hash}")
    return EXIT_OK


def _cmd_tau(scenario: ScenarioConfig, inv: CliInvocation) -> int:
    print("concept_id,name,tau")
    for c in scenario.concepts.concepts:
        t = tau(scenario.space, scenario.concepts, c.id)
        print(f"{c.id},{c.name},{_fmt(t)}")
    return EXIT_OK


def _cmd_bound(scenario: ScenarioConfig, inv: CliInvocation) -> int:
    enc = _parse_model(inv.enc_model or "gauss", scenario)
    ch = _parse_model(inv.ch_model or "exp:1.0", scenario)
    taus = [tau(scenario.space, scenario.concepts, c.id) for c in scenario.concepts.concepts]
    r1 = lemma1_bound(scenario.concepts, taus, enc, ch, n=inv.samples, seed=inv.bound_seed)
    r2 = lemma2_bound(min(taus), enc, ch, n=inv.samples, seed=inv.bound_seed)
    print("lemma,enc,ch,samples,seed,bound,halfwidth")
    print(
        f"1,{inv.enc_model or 'gauss'},{inv.ch_model or 'exp:1.0'},"
        f"{r1.sample_count},{inv.bound_seed},{_fmt(r1.bound_value)},"
        f"{_fmt(r1.confidence_halfwidth)}"
    )
    print(
        f"2,{inv.enc_model or 'gauss'},{inv.ch_model or 'exp:1.0'},"
        f"{r2.sample_count},{inv.bound_seed},{_fmt(r2.bound_value)},"
        f"{_fmt(r2.confidence_halfwidth)}"
    )
    return EXIT_OK


def _cmd_design(scenario: ScenarioConfig, inv: CliInvocation) -> int:
    taus = [tau(scenario.space, scenario.concepts, c.id) for c in scenario.concepts.concepts]
    try:
        lam2 = design_lambda2(scenario.concepts, taus, inv.lambda1, inv.target)
    except InfeasibleDesignError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        print(f"floor: {_fmt(exc.floor)}", file=sys.stderr)
        return EXIT_INFEASIBLE
    print("lambda1,target,lambda2")
    print(f"{_fmt(inv.lambda1)},{_fmt(inv.target)},{_fmt(lam2)}")
    return EXIT_OK


def _cmd_rate(scenario: ScenarioConfig, inv: CliInvocation) -> int:
    report = rate_accounting(
        dims_per_rep=scenario.phy.packet.dims_per_rep,
        bits_per_dim=scenario.phy.quantizer.bits_per_dim,
        code_rate=scenario.phy.codec.rate,
        baseline_image_dims=inv.baseline_dims,
    )
    print("semantic_bits,baseline_bits,reduction_fraction")
    print(
        f"{report.semantic_bits},{report.baseline_bits},"
        f"{_fmt(report.reduction_fraction)}"
    )
    return EXIT_OK


def _write_artifacts(
    scenario: ScenarioConfig, report, inv: CliInvocation, stem: str
) -> tuple[Path, Path]:
    outdir = _output_dir(inv)
    outdir.mkdir(parents=True, exist_ok=True)
    csv_path = outdir / f"{stem}.csv"
    json_path = outdir / f"{stem}.json"
    csv_path.write_text(sweep_to_csv(report))
    json_path.write_text(sweep_to_json(report, scenario))
    return csv_path, json_path


def _cmd_sweep(scenario: ScenarioConfig, inv: CliInvocation) -> int:
    report = run_sweep(scenario)
    csv_path, json_path = _write_artifacts(scenario, report, inv, f"{scenario.name}_sweep")
    sys.stdout.write(sweep_to_csv(report))
    print(f"wrote {csv_path} and {json_path}", file=sys.stderr)
    return EXIT_OK


def _cmd_simulate(scenario: ScenarioConfig, inv: CliInvocation) -> int:
    if len(scenario.ebn0_db) != 1:
        scenario = replace(scenario, ebn0_db=(scenario.ebn0_db[0],))
    report = run_sweep(scenario)
    csv_path, json_path = _write_artifacts(scenario, report, inv, f"{scenario.name}_point")
    sys.stdout.write(sweep_to_csv(report))
    print(f"wrote {csv_path} and {json_path}", file=sys.stderr)
    return EXIT_OK


_HANDLERS = {
    "validate": _cmd_validate,
    "tau": _cmd_tau,
    "bound": _cmd_bound,
    "design": _cmd_design,
    "rate": _cmd_rate,
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
}


def dispatch(invocation: CliInvocation) -> int:
    """Execute one parsed invocation; returns the process exit code."""
    try:
        scenario = parse_config(invocation.config_path)
        scenario = _apply_overrides(scenario, invocation)
        return _HANDLERS[invocation.subcommand](scenario, invocation)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semcom",
        description="Semantic communication link simulator and bound calculator",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument(
            "-c", "--config", required=True,
            help="scenario TOML path or bundled name (e.g. 'vret')",
        )
        p.add_argument("-o", "--output", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="master seed override")

    p = sub.add_parser("validate", help="parse and validate a scenario file")
    common(p)

    p = sub.add_parser("tau", help="print guaranteed-decode radii per concept")
    common(p)

    p = sub.add_parser("bound", help="evaluate the semantic-error bounds")
    common(p)
    p.add_argument("--enc", default="gauss", help="encoder model (exp:RATE | gauss[:SIGMA] | empirical:FILE)")
    p.add_argument("--ch", default="exp:1.0", help="channel model (same syntax)")
    p.add_argument("-n", "--samples", type=int, default=1_000_000)
    p.add_argument("--bound-seed", type=int, default=0)

    p = sub.add_parser("design", help="solve for the channel rate meeting a bound target")
    common(p)
    p.add_argument("--lambda1", type=float, required=True, help="encoder distortion rate")
    p.add_argument("--target", type=float, required=True, help="bound target in (0, 1)")

    p = sub.add_parser("rate", help="semantic vs. baseline rate accounting")
    common(p)
    p.add_argument(
        "--baseline", nargs="+", default=["112x112x3", "112x112x3"],
        help="baseline image shapes, e.g. 112x112x3",
    )

    p = sub.add_parser("simulate", help="run the first (or given) SNR point")
    common(p)
    p.add_argument("--ebn0", type=float, default=None, help="single Eb/N0 in dB")
    p.add_argument("--trials", type=int, default=None, help="trials override")

    p = sub.add_parser("sweep", help="run the full SNR grid and write CSV/JSON")
    common(p)
    p.add_argument(
        "--ebn0", type=float, nargs="+", default=None, help="SNR grid override (dB)"
    )
    p.add_argument("--trials", type=int, default=None, help="trials override")

    return parser


def _parse_baseline(specs: Sequence[str]) -> tuple[tuple[int, ...], ...]:
    out = []
    for s in specs:
        try:
            dims = tuple(int(p) for p in s.lower().split("x"))
        except ValueError as exc:
            raise ConfigError(f"bad baseline shape {s!r}") from exc
        if not dims or any(d < 1 for d in dims):
            raise ConfigError(f"bad baseline shape {s!r}")
        out.append(dims)
    return tuple(out)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        ebn0_override = None
        if getattr(args, "ebn0", None) is not None:
            grid = args.ebn0 if isinstance(args.ebn0, list) else [args.ebn0]
            if any(not math.isfinite(v) for v in grid):
                raise ConfigError("--ebn0 values must be finite")
            ebn0_override = tuple(grid)
        invocation = CliInvocation(
            subcommand=args.subcommand,
            config_path=args.config,
            output_path=args.output,
            seed_override=args.seed,
            ebn0_override=ebn0_override,
            trials_override=getattr(args, "trials", None),
            enc_model=getattr(args, "enc", None),
            ch_model=getattr(args, "ch", None),
            samples=getattr(args, "samples", 1_000_000),
            bound_seed=getattr(args, "bound_seed", 0),
            lambda1=getattr(args, "lambda1", 2.0),
            target=getattr(args, "target", 0.05),
            baseline_dims=_parse_baseline(getattr(args, "baseline", ["112x112x3", "112x112x3"])),
        )
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return dispatch(invocation)


if __name__ == "__main__":
    sys.exit(main())
