"""Command-line front end.

Usage examples::

    hbarpolar polar   --body ball.json --hbar 1
    hbarpolar mahler  --body ball.json --hbar 1 --samples 1e6 --seed 7
    hbarpolar theorem --n 1 --body interval.json --hbar 1
    hbarpolar sweep   --dims 1,2,3 --families ball,box --scales 0.5,1,2 --seed 0 --out runs.jsonl

Exit status: 0 success, 2 validation error, 3 numerical failure,
4 a checked inequality was violated.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import reports
from .blobs import claim3_check
from .exceptions import NumericalError, UnboundedBodyError, ValidationError
from .geometry import Ellipsoid, body_from_dict, body_to_dict, polar_dual
from .uncertainty import (
    CSV_COLUMNS,
    SweepConfig,
    donoho_stark_check,
    hardy_check,
    main_theorem_trial,
    summarize_sweep,
    theorem_sweep,
)
from .volumes import MIN_MC_SAMPLES, mahler_volume, volume
from .waves import coherent_state, state_from_dict

log = logging.getLogger("hbarpolar")

COMMANDS = ("polar", "volume", "mahler", "blob", "ds", "theorem", "sweep", "hardy")
EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_VIOLATION = 0, 2, 3, 4


@dataclass
class RunConfig:
    command: str
    body: str | None = None
    momentum_body: str | None = None
    state: str | None = None
    hbar: float | None = None
    samples: int = 10**6
    seed: int | None = None
    out: str | None = None
    format: str = "json"
    n: int | None = None
    method: str = "auto"
    dims: tuple = (1, 2, 3)
    families: tuple = ("ball", "box", "ellipsoid")
    scales: tuple = (0.5, 1.0, 2.0)
    states: tuple = ("coherent",)
    A: str | None = None
    B: str | None = None
    workers: int = 1
    extra: dict = field(default_factory=dict)

    def validate(self):
        if self.command not in COMMANDS:
            raise ValidationError(f"unknown command {self.command!r}")
        if self.format not in ("json", "csv"):
            raise ValidationError("format must be json or csv")
        if self.command in ("volume", "mahler", "ds", "theorem", "sweep") and self.samples < MIN_MC_SAMPLES:
            raise ValidationError(f"--samples must be at least {MIN_MC_SAMPLES}")
        if self.command == "sweep" and self.seed is None:
            raise ValidationError("sweep requires --seed")
        if self.hbar is not None and not self.hbar > 0:
            raise ValidationError("--hbar must be positive")
        needs_body = self.command in ("polar", "volume", "mahler", "blob", "ds", "theorem")
        if needs_body and not self.body:
            raise ValidationError(f"{self.command} requires --body")


def _read_json(path_or_literal: str):
    try:
        if os.path.exists(path_or_literal):
            return json.loads(Path(path_or_literal).read_text())
        return json.loads(path_or_literal)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read JSON from {path_or_literal!r}: {exc}") from None


def _load_body(path: str):
    doc = _read_json(path)
    return body_from_dict(doc), doc.get("hbar") if isinstance(doc, dict) else None


def _hbar(cfg: RunConfig, *candidates) -> float:
    if cfg.hbar is not None:
        return float(cfg.hbar)
    for c in candidates:
        if c is not None:
            return float(c)
    return 1.0


def _load_state(cfg: RunConfig, n: int, hbar: float):
    if cfg.state is None:
        return coherent_state(n, hbar)
    return state_from_dict(_read_json(cfg.state))


def _render(payload, cfg: RunConfig, columns=None) -> str:
    if cfg.format == "json":
        if isinstance(payload, list):
            return reports.dumps_lines(payload)
        return reports.dumps(payload) + "\n"
    rows = payload if isinstance(payload, list) else [payload]
    rows = [r.to_dict() if hasattr(r, "to_dict") else r for r in rows]
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    return reports.dumps_csv(rows, columns)


def _execute(cfg: RunConfig):
    """Return ``(text, violated)`` for a validated config."""
    c = cfg.command
    if c == "hardy":
        if cfg.A is None or cfg.B is None:
            raise ValidationError("hardy requires --A and --B")
        A = np.asarray(_read_json(cfg.A), dtype=float)
        B = np.asarray(_read_json(cfg.B), dtype=float)
        return _render(hardy_check(A, B, _hbar(cfg)), cfg), False

    if c == "sweep":
        config = SweepConfig(dims=cfg.dims, families=cfg.families, scales=cfg.scales, states=cfg.states,
                             samples=cfg.samples, seed=cfg.seed, hbar=_hbar(cfg), workers=cfg.workers)
        reps = theorem_sweep(config)
        summary = summarize_sweep(reps)
        for agg in summary.values():
            log.info("n=%d trials=%d upper_violations=%d lower_findings=%d max_Delta=%.6g",
                     agg["n"], agg["trials"], agg["upper_violations"], agg["lower_findings"], agg["max_Delta"])
        violated = any(a["upper_violations"] or a["errors"] for a in summary.values())
        return _render(reps, cfg, list(CSV_COLUMNS)), violated

    body, body_hbar = _load_body(cfg.body)
    hbar = _hbar(cfg, body_hbar)

    if c == "polar":
        return _render(body_to_dict(polar_dual(body, hbar), hbar), cfg), False
    if c == "volume":
        return _render(volume(body, cfg.method, cfg.samples, cfg.seed, cfg.workers), cfg), False
    if c == "mahler":
        rep = mahler_volume(body, hbar, cfg.samples, cfg.seed, cfg.method, cfg.workers)
        return _render(rep, cfg), not rep.within_bounds
    if c == "blob":
        if not isinstance(body, Ellipsoid):
            raise ValidationError("blob requires an ellipsoid body")
        rep = claim3_check(body, hbar, cfg.samples if cfg.samples else 1000,
                           0 if cfg.seed is None else cfg.seed)
        return _render(rep, cfg), not (rep.containment_pass and rep.tangency_pass)
    if c == "ds":
        P = _load_body(cfg.momentum_body)[0] if cfg.momentum_body else None
        rep = donoho_stark_check(_load_state(cfg, body.dim, hbar), body, P, hbar, cfg.samples, cfg.seed)
        return _render(rep, cfg), rep.satisfied is False
    if c == "theorem":
        if cfg.n is not None and cfg.n != body.dim:
            raise ValidationError(f"--n {cfg.n} does not match body dimension {body.dim}")
        rep = main_theorem_trial(_load_state(cfg, body.dim, hbar), body, hbar, cfg.samples, cfg.seed)
        if not rep.lower_ok:
            log.info("finding: Delta=%.6g below zero beyond 3 sigma", rep.Delta)
        return _render(rep, cfg), not rep.upper_ok
    raise ValidationError(f"unknown command {c!r}")


def run(cfg: RunConfig) -> int:
    """Run one command; writes the report to ``cfg.out`` or stdout."""
    try:
        cfg.validate()
        text, violated = _execute(cfg)
    except UnboundedBodyError as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    except ValidationError as exc:
        log.error("invalid input: %s", exc)
        return EXIT_VALIDATION
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)
    if violated:
        log.error("check failed: a bound was violated")
        return EXIT_VIOLATION
    return EXIT_OK


def _int_count(text: str) -> int:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if v != int(v):
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    return int(v)


def _list(conv):
    def parse(text: str):
        try:
            return tuple(conv(t) for t in text.split(",") if t.strip())
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad list: {text!r}") from None
    return parse


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hbarpolar", description="hbar-polar duality experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--hbar", type=float, default=None)
        p.add_argument("--samples", type=_int_count, default=10**6)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None, help="output file (default: stdout)")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--workers", type=int, default=1)

    for name, help_ in (("polar", "polar dual of a body"), ("volume", "volume of a body"),
                        ("mahler", "Mahler volume and bounds"), ("blob", "quantum blob of an ellipsoid"),
                        ("ds", "Donoho-Stark check"), ("theorem", "position+momentum concentration trial")):
        p = sub.add_parser(name, help=help_)
        common(p)
        p.add_argument("--body", required=True)
        if name in ("volume", "mahler"):
            p.add_argument("--method", choices=("auto", "exact", "monte_carlo"), default="auto")
        if name in ("ds", "theorem"):
            p.add_argument("--state", default=None, help="state file (default: coherent state)")
        if name == "ds":
            p.add_argument("--momentum-body", default=None, help="momentum body (default: polar dual)")
        if name == "theorem":
            p.add_argument("--n", type=int, default=None)
        if name == "blob":
            p.set_defaults(samples=1000)

    p = sub.add_parser("sweep", help="main-theorem sweep")
    common(p)
    p.add_argument("--dims", type=_list(int), default=(1, 2, 3))
    p.add_argument("--families", type=_list(str), default=("ball", "box", "ellipsoid"))
    p.add_argument("--scales", type=_list(float), default=(0.5, 1.0, 2.0))
    p.add_argument("--states", type=_list(str), default=("coherent",))

    p = sub.add_parser("hardy", help="Hardy ellipsoid inclusion")
    common(p)
    p.add_argument("--A", required=True, help="JSON matrix or file")
    p.add_argument("--B", required=True, help="JSON matrix or file")
    return parser


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    known = set(RunConfig.__dataclass_fields__)
    kwargs = {k: v for k, v in vars(ns).items() if k in known}
    return RunConfig(**kwargs)


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    return run(config_from_args(ns))


if __name__ == "__main__":
    sys.exit(main())
