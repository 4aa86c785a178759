"""Built-in structures with known verdicts and negative-control perturbations."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import jets
from .calculus import Chart, ConstantField, Field, FormulaField, KForm, MapField, exterior_derivative
from .connections import GConnection, conjugated_connection, flat_gconnection, generalized_bismut
from .courant import closedness_residual, exp_b
from .structures import (
    GKQuadruple,
    GMetric,
    QuatFrame,
    cholesky_ok,
    gcs_from_quadruple,
    generalized_frame_from_tm,
    quaternion_matrices,
)

PERTURBATIONS = ("frameRotation", "metricBump", "bShift")


@dataclass(frozen=True)
class Structure:
    """A generalized almost hyperhermitian structure with its connection and metadata."""

    id: str
    chart: Chart
    metric: GMetric
    frame: QuatFrame
    connection: GConnection
    h: KForm | None = None
    triples: tuple | None = None          # ((I+, J+, K+), (I-, J-, K-)) on TM when known
    expected_failures: tuple[str, ...] = ()
    description: str = ""
    params: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.metric.dim

    def sample_points(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return self.chart.sample(rng, count)

    def self_check(self, points, tol: float = 1e-9) -> dict:
        """Frame relations, metric positivity and closedness of h at ``points``."""
        out = {"frame": 0.0, "metric": 0.0, "dh": 0.0}
        for p in points:
            out["frame"] = max(out["frame"], self.frame.relation_residual(p))
            if not cholesky_ok(self.metric.g(p)):
                out["metric"] = np.inf
        if self.h is not None:
            out["dh"] = closedness_residual(self.h, points)
        bad = {k: v for k, v in out.items() if v > tol}
        if bad:
            raise ValueError(f"catalog entry {self.id!r} fails its invariants: {bad}")
        return out


def _const_fields(dim: int, mats) -> list[Field]:
    return [ConstantField(dim, a) for a in mats]


def _frame_from_pairs(g: Field, plus, minus, b: KForm | None = None) -> QuatFrame:
    return QuatFrame(*[gcs_from_quadruple(GKQuadruple(g, a, c, b), 1) for a, c in zip(plus, minus)])


def flat_hyperkahler(n: int = 1) -> Structure:
    """R^{4n}, flat metric, constant left-quaternion structures, D flat."""
    if n < 1:
        raise ValueError("n must be positive")
    m = 4 * n
    g = ConstantField(m, np.eye(m))
    tm = _const_fields(m, quaternion_matrices("left", n))
    frame = generalized_frame_from_tm(*tm)
    chart = Chart(m, label=f"R^{m}")
    return Structure(
        id="flat4" if n == 1 else f"flat{m}",
        chart=chart,
        metric=GMetric(g),
        frame=frame,
        connection=flat_gconnection(m),
        triples=(tuple(tm), tuple(tm)),
        description="flat hyperkahler space with constant left-quaternion structures",
        params={"n": n},
    )


def _norm2(x):
    return sum(v * v for v in x)


def hopf_metric() -> Field:
    return FormulaField(4, lambda x: [[(1.0 / _norm2(x) if i == j else 0.0) for j in range(4)] for i in range(4)],
                        (4, 4))


def hopf_torsion() -> KForm:
    """h = I+ d w_{I+} for g = delta/|x|^2 in closed form."""

    def rule(x):
        r4 = _norm2(x) ** 2
        return [-2.0 * x[3] / r4, 2.0 * x[2] / r4, -2.0 * x[1] / r4, 2.0 * x[0] / r4]

    return KForm(3, FormulaField(4, rule, (4,)))


def hopf_hkt() -> Structure:
    """Quaternionic Hopf surface on its universal-cover chart R^4 minus the origin."""
    g = hopf_metric()
    plus = _const_fields(4, quaternion_matrices("left"))
    minus = _const_fields(4, quaternion_matrices("right"))
    frame = _frame_from_pairs(g, plus, minus)
    metric = GMetric(g)
    h = hopf_torsion()
    chart = Chart(4, excluded_radius=0.3, label="R^4 minus a ball")
    return Structure(
        id="hopf",
        chart=chart,
        metric=metric,
        frame=frame,
        connection=generalized_bismut(metric, h),
        h=h,
        triples=(tuple(plus), tuple(minus)),
        description="conformally flat metric delta/|x|^2 with left/right quaternion structures",
    )


# perturbations ------------------------------------------------------------------------

def _rotated_frame(frame: QuatFrame, theta: Field) -> QuatFrame:
    """Rotate J, K by the angle theta about I (pointwise)."""
    m2 = frame.I.shape[0]

    def j_rule(t, J, K):
        return J * t.cos() + K * t.sin()

    def k_rule(t, J, K):
        return K * t.cos() - J * t.sin()

    src = [theta, frame.J, frame.K]
    return QuatFrame(frame.I, MapField(j_rule, src, (m2, m2)), MapField(k_rule, src, (m2, m2)))


def frame_rotation(base: Structure, theta: Field | None = None, curl: float = 1.0) -> Structure:
    """Rotate the frame by theta (default x1 x2) about I and add rho (x) I/2 to the connection.

    The rotation alone is a gauge change (it shifts alpha by d theta); the added term
    rho = (curl/2)(x1 dx2 - x2 dx1) has d rho = curl dx1^dx2, so the curvature
    acquires a nonzero component along ad(I) and the curvature-type condition fails.
    """
    m = base.dim
    if theta is None:
        theta = FormulaField(m, lambda x: x[0] * x[1])
    frame = _rotated_frame(base.frame, theta)
    I = base.frame.I

    def rho_rule(x):
        out = [0.0] * m
        out[0] = -0.5 * curl * x[1]
        out[1] = 0.5 * curl * x[0]
        return out

    rho = FormulaField(m, rho_rule, (m,))

    def omega_rule(om, r, Ij):
        return om + jets.einsum("i,AB->iAB", r, Ij) * 0.5

    omega = MapField(omega_rule, [base.connection.omega, rho, I], base.connection.omega.shape)
    return replace(
        base,
        id=base.id + "+frameRotation",
        frame=frame,
        connection=GConnection(omega, base.connection.h, label="rotated"),
        expected_failures=("C1", "C2", "generalized-hyperkahler", "theoremA", "twistor-nijenhuis"),
        description=base.description + "; frame rotated by x1 x2 about I, connection shifted along I",
        params={**base.params, "curl": curl},
    )


def _bump(eps: float, m: int) -> Field:
    return FormulaField(m, lambda x: 1.0 + eps * x[0] * x[0] / (1.0 + _norm2(x)))


def metric_bump(base: Structure, eps: float = 0.5) -> Structure:
    """Scale the metric by phi = 1 + eps x1^2/(1 + |x|^2), keeping h and the TM structures.

    The frame is rebuilt for the new metric; the connection is the base one
    transported by the pairing isometry S = diag(phi^-1/2, phi^1/2), which carries
    the old frame onto the new one, so the quaternionic bundle stays parallel.
    """
    if not np.isfinite(eps):
        raise ValueError("bump amplitude must be finite")
    if eps == 0.0:
        return base
    if base.triples is None:
        raise ValueError("metricBump needs the TM structures of the base entry")
    m = base.dim
    phi = _bump(eps, m)
    g = MapField(lambda f, gj: gj * f, [phi, base.metric.g], (m, m))
    plus, minus = base.triples
    frame = _frame_from_pairs(g, plus, minus, base.metric.b)
    eye = np.eye(m)

    def s_rule(f):
        a, c = f.sqrt().reciprocal(), f.sqrt()
        z = jets.Jet.constant(f.basis, np.zeros((m, m)))
        return jets.block([[jets.einsum(",ij->ij", a, eye), z], [z, jets.einsum(",ij->ij", c, eye)]])

    S = MapField(s_rule, [phi], (2 * m, 2 * m))
    omega = conjugated_connection(base.connection.omega, S)
    return replace(
        base,
        id=base.id + "+metricBump",
        metric=GMetric(g, base.metric.b),
        frame=frame,
        connection=GConnection(omega, base.connection.h, label="bumped"),
        expected_failures=("generalized-hyperkahler",),
        description=base.description + "; metric scaled by a non-constant factor",
        params={**base.params, "eps": eps},
    )


def b_shift(base: Structure, b: KForm | None = None) -> Structure:
    """Transform by a non-closed 2-form b (default x2 dx1^dx3) and twist by -db.

    The transformed frame is integrable for the (-db)-twisted bracket and the
    connection becomes e^b D e^-b, but e^b is no longer a Courant automorphism.
    """
    m = base.dim
    if b is None:
        b = KForm.from_dict(m, 2, {(0, 2): lambda x: x[1]})
    db = exterior_derivative(b)
    h = -db if base.h is None else base.h - db
    E = exp_b(b)
    Einv = exp_b(b, -1.0)
    frame = QuatFrame(*[E @ U @ Einv for U in base.frame.elements])
    omega = conjugated_connection(base.connection.omega, E)
    return replace(
        base,
        id=base.id + "+bShift",
        metric=GMetric(base.metric.g, base.metric.b + b),
        frame=frame,
        connection=GConnection(omega, h, label="b-shifted"),
        h=h,
        expected_failures=("bracket-automorphism",),
        description=base.description + "; B-field transform by a non-closed 2-form",
        params={**base.params, "b": "x2 dx1^dx3"},
    )


_PERTURB: dict[str, Callable[..., Structure]] = {
    "frameRotation": frame_rotation,
    "metricBump": metric_bump,
    "bShift": b_shift,
}


def perturb(base: Structure, kind: str, **params) -> Structure:
    if kind not in _PERTURB:
        raise ValueError(f"unknown perturbation {kind!r}; known: {', '.join(PERTURBATIONS)}")
    return _PERTURB[kind](base, **params)


_BASES: dict[str, Callable[[], Structure]] = {"flat4": flat_hyperkahler, "hopf": hopf_hkt}


def catalog_ids() -> list[str]:
    out = list(_BASES)
    out += [f"flat4+{k}" for k in PERTURBATIONS]
    return sorted(out)


def load(structure_id: str) -> Structure:
    """Entry by stable string id, e.g. ``flat4``, ``hopf``, ``flat4+frameRotation``."""
    head, *mods = structure_id.split("+")
    if head not in _BASES:
        raise KeyError(f"unknown structure {structure_id!r}")
    s = _BASES[head]()
    for k in mods:
        if k not in _PERTURB:
            raise KeyError(f"unknown structure {structure_id!r}")
        s = perturb(s, k)
    return s
