"""Sample plans and residual reports shared by every check."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

DEFAULT_TOL = 1e-8


@dataclass(frozen=True)
class SamplePlan:
    points: int = 16
    seed: int = 0
    tolerance: float = DEFAULT_TOL
    fiber_samples: int = 32
    orientation: str = "right"

    def __post_init__(self):
        if self.points < 1:
            raise ValueError("a sample plan needs at least one point")
        if self.orientation not in ("right", "left"):
            raise ValueError("orientation must be 'right' or 'left'")

    def rng(self, salt: int = 0) -> np.random.Generator:
        return np.random.default_rng([self.seed, salt])


def fibonacci_sphere(count: int, poles: bool = True) -> np.ndarray:
    """Fibonacci-lattice points on the unit sphere, optionally with the 6 axis poles."""
    pts = []
    golden = math.pi * (3.0 - math.sqrt(5.0))
    for k in range(count):
        z = 1.0 - 2.0 * (k + 0.5) / count
        r = math.sqrt(max(0.0, 1.0 - z * z))
        phi = golden * k
        pts.append((r * math.cos(phi), r * math.sin(phi), z))
    if poles:
        for axis in range(3):
            for s in (1.0, -1.0):
                e = [0.0, 0.0, 0.0]
                e[axis] = s
                pts.append(tuple(e))
    return np.array(pts)


def _plain(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


@dataclass
class ResidualReport:
    """Worst residual of a check, the sample that produced it, and the verdict."""

    name: str
    max_residual: float = 0.0
    tolerance: float = DEFAULT_TOL
    witness: dict = field(default_factory=dict)
    components: dict = field(default_factory=dict)
    expect_pass: bool = True

    @property
    def passed(self) -> bool:
        return bool(self.max_residual <= self.tolerance)

    def update(self, residual: float, **witness) -> None:
        residual = float(residual)
        if not np.isfinite(residual):
            residual = math.inf
        if residual > self.max_residual or not self.witness:
            self.max_residual = max(residual, self.max_residual)
            self.witness = {k: _plain(v) for k, v in witness.items()}

    def absorb(self, other: "ResidualReport", key: str | None = None) -> None:
        """Fold a sub-report in by maximum, keeping its residual under ``components``."""
        self.components[key or other.name] = other.max_residual
        if other.max_residual > self.max_residual or not self.witness:
            self.max_residual = max(self.max_residual, other.max_residual)
            self.witness = dict(other.witness, part=key or other.name)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "maxResidual": float(self.max_residual),
            "tolerance": float(self.tolerance),
            "verdict": "pass" if self.passed else "fail",
            "witness": _plain(self.witness),
            "components": {k: float(v) for k, v in sorted(self.components.items())},
        }

    def __str__(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag} {self.name}: max residual {self.max_residual:.3e} (tol {self.tolerance:.1e})"


def rel(residual: float, scale: float) -> float:
    """Residual normalised by ``1 + scale``."""
    return float(residual) / (1.0 + float(scale))
