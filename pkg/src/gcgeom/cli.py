"""Batch runner: load a structure, run named checks over a sample plan, write a JSON report."""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import catalog
from .calculus import Chart, FormulaField
from .catalog import Structure, _const_fields, _frame_from_pairs
from .checks import CHECKS, check_names, run_check
from .connections import bismut_torsion, generalized_bismut
from .reports import DEFAULT_TOL, SamplePlan
from .structures import GMetric, quaternion_matrices

SCHEMA_VERSION = 1
CONFIG_KEYS = {"structure", "checks", "points", "seed", "tolerance", "fiberSamples", "orientation"}
DEFAULT_CHECKS = ("theoremA",)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    structure: str | dict = "flat4"
    checks: list[str] = field(default_factory=lambda: list(DEFAULT_CHECKS))
    points: int = 16
    seed: int = 0
    tolerance: float = DEFAULT_TOL
    fiber_samples: int = 32
    orientation: str = "right"

    def plan(self) -> SamplePlan:
        return SamplePlan(points=self.points, seed=self.seed, tolerance=self.tolerance,
                          fiber_samples=self.fiber_samples, orientation=self.orientation)

    def to_dict(self) -> dict:
        return {
            "structure": self.structure,
            "checks": list(self.checks),
            "points": self.points,
            "seed": self.seed,
            "tolerance": self.tolerance,
            "fiberSamples": self.fiber_samples,
            "orientation": self.orientation,
        }


def _int(value, key: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(f"{key} must be an integer >= {minimum}")
    return value


def parse_config(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    cfg = RunConfig()
    if "structure" in raw:
        if not isinstance(raw["structure"], (str, dict)):
            raise ConfigError("structure must be a catalog id or an inline object")
        cfg.structure = raw["structure"]
    if "checks" in raw:
        checks = raw["checks"]
        if not isinstance(checks, list) or not all(isinstance(c, str) for c in checks) or not checks:
            raise ConfigError("checks must be a non-empty list of names")
        cfg.checks = list(checks)
    if "points" in raw:
        cfg.points = _int(raw["points"], "points", 1)
    if "seed" in raw:
        cfg.seed = _int(raw["seed"], "seed", 0)
    if "tolerance" in raw:
        tol = raw["tolerance"]
        if isinstance(tol, bool) or not isinstance(tol, (int, float)) or not math.isfinite(tol) or tol <= 0:
            raise ConfigError("tolerance must be a positive number")
        cfg.tolerance = float(tol)
    if "fiberSamples" in raw:
        cfg.fiber_samples = _int(raw["fiberSamples"], "fiberSamples", 1)
    if "orientation" in raw:
        if raw["orientation"] not in ("right", "left"):
            raise ConfigError("orientation must be 'right' or 'left'")
        cfg.orientation = raw["orientation"]
    return cfg


# inline structures ----------------------------------------------------------------------

def _polynomial(terms, dim: int, key: str):
    """[[coefficient, [e1, ..., e_dim]], ...] -> rule on coordinate jets."""
    if isinstance(terms, (int, float)) and not isinstance(terms, bool):
        terms = [[terms, [0] * dim]]
    if not isinstance(terms, list) or not terms:
        raise ConfigError(f"{key} must be a number or a non-empty list of [coefficient, exponents] terms")
    parsed = []
    for t in terms:
        if (not isinstance(t, list) or len(t) != 2 or isinstance(t[0], bool)
                or not isinstance(t[0], (int, float)) or not isinstance(t[1], list) or len(t[1]) != dim
                or not all(isinstance(e, int) and not isinstance(e, bool) and e >= 0 for e in t[1])):
            raise ConfigError(f"malformed term in {key}: {t!r}")
        parsed.append((float(t[0]), tuple(t[1])))

    def rule(x):
        out = 0.0
        for c, exps in parsed:
            term = c
            for xi, e in zip(x, exps):
                for _ in range(e):
                    term = term * xi
            out = out + term
        return out

    return rule


def inline_structure(spec: dict) -> Structure:
    """Conformally flat 4-metric f(x) delta with f = num/den, left/right quaternion structures.

    ``{"conformalFactor": {"num": terms, "den": terms}, "torsion": "auto" | "none",
    "chart": {"lower": [...], "upper": [...], "excludedRadius": r}, "label": str}``.
    With ``torsion = auto`` the twisting form is I+ dw_{I+} and D is the generalized Bismut connection.
    """
    allowed = {"conformalFactor", "torsion", "chart", "label"}
    if set(spec) - allowed:
        raise ConfigError(f"unknown inline structure keys: {', '.join(sorted(set(spec) - allowed))}")
    dim = 4
    factor = spec.get("conformalFactor", {"num": 1.0})
    if not isinstance(factor, dict) or "num" not in factor or set(factor) - {"num", "den"}:
        raise ConfigError("conformalFactor needs 'num' (and optionally 'den')")
    num = _polynomial(factor["num"], dim, "conformalFactor.num")
    den = _polynomial(factor.get("den", 1.0), dim, "conformalFactor.den")
    ch = spec.get("chart", {})
    if not isinstance(ch, dict) or set(ch) - {"lower", "upper", "excludedRadius"}:
        raise ConfigError("chart accepts lower, upper, excludedRadius")
    try:
        chart = Chart(dim, tuple(ch.get("lower", ())), tuple(ch.get("upper", ())),
                      float(ch.get("excludedRadius", 0.0)), "inline")
    except (TypeError, ValueError) as err:
        raise ConfigError(f"bad chart: {err}") from None
    g = FormulaField(dim, lambda x: [[(num(x) / den(x) if i == j else 0.0) for j in range(dim)] for i in range(dim)],
                     (dim, dim))
    plus = _const_fields(dim, quaternion_matrices("left"))
    minus = _const_fields(dim, quaternion_matrices("right"))
    metric = GMetric(g)
    torsion = spec.get("torsion", "auto")
    if torsion not in ("auto", "none"):
        raise ConfigError("torsion must be 'auto' or 'none'")
    h = bismut_torsion(g, plus[0]) if torsion == "auto" else None
    s = Structure(
        id=str(spec.get("label", "inline")),
        chart=chart,
        metric=metric,
        frame=_frame_from_pairs(g, plus, minus),
        connection=generalized_bismut(metric, h),
        h=h,
        triples=(tuple(plus), tuple(minus)),
        description="inline conformally flat structure",
    )
    try:
        s.self_check(chart.sample(np.random.default_rng(0), 8))
    except (ValueError, ZeroDivisionError, FloatingPointError) as err:
        raise ConfigError(f"inline structure is invalid: {err}") from None
    return s


def load_structure(ref: str | dict) -> Structure:
    if isinstance(ref, dict):
        return inline_structure(ref)
    try:
        return catalog.load(ref)
    except KeyError:
        raise ConfigError(f"unknown structure {ref!r}; known: {', '.join(catalog.catalog_ids())}") from None


# running ---------------------------------------------------------------------------

def run(cfg: RunConfig, timings: bool = False) -> tuple[int, dict]:
    unknown = [c for c in cfg.checks if c not in CHECKS]
    if unknown:
        raise ConfigError(f"unknown checks: {', '.join(unknown)}")
    s = load_structure(cfg.structure)
    plan = cfg.plan()
    entries = []
    for name in sorted(set(cfg.checks)):
        rep, ms = run_check(name, s, plan)
        d = rep.to_dict()
        entries.append({
            "name": name,
            "paperAnchor": CHECKS[name].anchor,
            "maxResidual": d["maxResidual"],
            "tolerance": d["tolerance"],
            "witness": d["witness"],
            "components": d["components"],
            "verdict": d["verdict"],
            "expectedFailure": name in s.expected_failures,
            "elapsedMs": round(ms, 3) if timings else None,
        })
    ok = all(e["verdict"] == "pass" for e in entries)
    report = {
        "schemaVersion": SCHEMA_VERSION,
        "structure": s.id,
        "config": cfg.to_dict(),
        "checks": entries,
        "verdict": "pass" if ok else "fail",
        "failing": [e["name"] for e in entries if e["verdict"] != "pass"],
    }
    return (0 if ok else 1), report


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=True) + "\n"


def list_checks() -> str:
    width = max(len(n) for n in CHECKS)
    return "\n".join(f"{n.ljust(width)}  {CHECKS[n].anchor}" for n in check_names()) + "\n"


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gcgeom", description="Run generalized-geometry checks on a structure.")
    p.add_argument("--config", type=Path, help="JSON config file")
    p.add_argument("--structure", help="catalog id (overrides the config)")
    p.add_argument("--check", action="append", dest="checks", metavar="NAME",
                   help="check to run (repeatable; overrides the config list)")
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--points", type=int)
    p.add_argument("--fiber-samples", type=int)
    p.add_argument("--orientation", choices=("right", "left"))
    p.add_argument("--report", type=Path, help="write the JSON report here (default: stdout)")
    p.add_argument("--timings", action="store_true", help="record wall-clock elapsedMs (breaks byte-identity)")
    p.add_argument("--list", action="store_true", help="list check names and exit")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 2
    if args.list:
        sys.stdout.write(list_checks())
        return 0
    try:
        raw = {}
        if args.config is not None:
            try:
                raw = json.loads(args.config.read_text())
            except OSError as err:
                raise ConfigError(f"cannot read config: {err}") from None
            except json.JSONDecodeError as err:
                raise ConfigError(f"malformed config JSON: {err}") from None
        overrides = {"structure": args.structure, "checks": args.checks, "seed": args.seed,
                     "tolerance": args.tol, "points": args.points, "fiberSamples": args.fiber_samples,
                     "orientation": args.orientation}
        if isinstance(raw, dict):
            raw = dict(raw, **{k: v for k, v in overrides.items() if v is not None})
        cfg = parse_config(raw)
        code, report = run(cfg, timings=args.timings)
    except ConfigError as err:
        sys.stderr.write(f"config error: {err}\n")
        return 2
    text = dumps(report)
    if args.report is not None:
        args.report.write_text(text)
    else:
        sys.stdout.write(text)
    for e in report["checks"]:
        flag = "PASS" if e["verdict"] == "pass" else "FAIL"
        extra = ""
        if e["verdict"] != "pass" and "failing" in e["witness"]:
            extra = f" failing: {', '.join(e['witness']['failing'])}"
        sys.stderr.write(f"{flag} {e['name']}: {e['maxResidual']:.3e}{extra}\n")
    return code
