"""Generalized metrics, generalized almost complex structures, Kähler quadruples, quaternionic frames.

Endomorphism fields of TM + T*M are (2m, 2m) matrix fields acting on ``[X; xi]``.
Maps TM -> T*M use the convention ``X -> i_X w``, i.e. the matrix of a 2-form
tensor ``w_ij`` is ``w.T``.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Sequence

import numpy as np

from . import jets
from .calculus import Chart, ConstantField, Field, KForm, MapField
from .courant import adjoint, exp_b_jet, gram
from .jets import Jet
from .reports import ResidualReport, SamplePlan, rel

PIVOT_TOL = 1e-10
UNIT_TOL = 1e-12


def _const(j: Jet, value) -> Jet:
    return Jet.constant(j.basis, np.asarray(value, dtype=float))


def _zero_b(dim: int) -> KForm:
    return KForm.zero(dim, 2)


def _opnorm(a: np.ndarray) -> float:
    return float(np.linalg.norm(a, 2)) if a.size else 0.0


def cholesky_ok(g: np.ndarray, pivot_tol: float = PIVOT_TOL) -> bool:
    """True when g is symmetric and its Cholesky pivots all exceed ``pivot_tol``."""
    if not np.allclose(g, g.T, atol=1e-12 * (1 + np.abs(g).max())):
        return False
    try:
        L = np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        return False
    return bool(np.min(np.diag(L)) ** 2 > pivot_tol)


def metric_blocks(gj: Jet, bj: Jet) -> Jet:
    """G = e^b [[0, g^-1], [g, 0]] e^-b from jets of g and the full tensor b."""
    m = gj.shape[0]
    ginv = gj.inv()
    zero = _const(gj, np.zeros((m, m)))
    core = jets.block([[zero, ginv], [gj, zero]])
    return exp_b_jet(bj) @ core @ exp_b_jet(bj, -1.0)


def graph_map_jet(gj: Jet, bj: Jet, sign: float) -> Jet:
    """pi_pm^-1 : X -> X + (b pm g) X as a (2m, m) jet."""
    m = gj.shape[0]
    eye = _const(gj, np.eye(m))
    return jets.concatenate([eye, bj.T + gj * sign], axis=0)


class GMetric:
    """Generalized metric built from a Riemannian metric g and a 2-form b."""

    def __init__(self, g: Field, b: KForm | None = None):
        m = g.dim
        if g.shape != (m, m):
            raise ValueError("metric field must have shape (m, m)")
        self.dim = m
        self.g = g
        self.b = b if b is not None else _zero_b(m)
        if self.b.degree != 2 or self.b.dim != m:
            raise ValueError("b must be a 2-form on the same chart")
        bt = self.b.tensor_field()
        self.b_tensor = bt
        self.G = MapField(metric_blocks, [g, bt], (2 * m, 2 * m))
        eye = np.eye(2 * m)
        self.P_plus = MapField(lambda G: (G + _const(G, eye)) * 0.5, [self.G], (2 * m, 2 * m))
        self.P_minus = MapField(lambda G: (_const(G, eye) - G) * 0.5, [self.G], (2 * m, 2 * m))
        self.pi_plus_inv = MapField(lambda gj, bj: graph_map_jet(gj, bj, 1.0), [g, bt], (2 * m, m))
        self.pi_minus_inv = MapField(lambda gj, bj: graph_map_jet(gj, bj, -1.0), [g, bt], (2 * m, m))
        self.g_inv = MapField(lambda gj: gj.inv(), [g], (m, m))

    def projector(self, sign: int) -> Field:
        return self.P_plus if sign > 0 else self.P_minus

    def graph_map(self, sign: int) -> Field:
        return self.pi_plus_inv if sign > 0 else self.pi_minus_inv

    def check(self, points) -> ResidualReport:
        """G^2 = Id, G self-adjoint, projector algebra, and definite signature on C+-."""
        rep = ResidualReport("generalized-metric")
        m = self.dim
        eye = np.eye(2 * m)
        Q = gram(m)
        rng = np.random.default_rng(0)
        for p in points:
            G = self.G(p)
            Pp, Pm = self.P_plus(p), self.P_minus(p)
            scale = _opnorm(G) ** 2
            rep.update(rel(_opnorm(G @ G - eye), scale), point=p, what="G^2-Id")
            rep.update(rel(_opnorm(adjoint(G) - G), scale), point=p, what="G*-G")
            rep.update(rel(_opnorm(Pp @ Pm), scale), point=p, what="P+P-")
            rep.update(rel(_opnorm(Pp @ Pp - Pp), scale), point=p, what="P+^2-P+")
            for sign, P in ((1, Pp), (-1, Pm)):
                vals = []
                for _ in range(16):
                    s = P @ rng.standard_normal(2 * m)
                    vals.append(sign * s @ Q @ s / (s @ s))
                if min(vals) <= 0:
                    rep.update(np.inf, point=p, what=f"signature on C{'+' if sign > 0 else '-'}")
        return rep


def make_gmetric(g: Field, b: KForm | None = None, points: Sequence | None = None,
                 pivot_tol: float = PIVOT_TOL) -> GMetric:
    """Validate g at ``points`` (Cholesky pivots) and build the generalized metric."""
    if points is not None:
        for p in points:
            gp = g(p)
            if not cholesky_ok(gp, pivot_tol):
                raise ValueError(f"metric is not positive definite at {tuple(np.round(p, 6))}")
    return GMetric(g, b)


def flat_metric(m: int) -> Field:
    return ConstantField(m, np.eye(m))


# generalized complex structures -------------------------------------------------

def gcs_residuals(J: np.ndarray) -> tuple[float, float]:
    """Normalised residuals of J^2 + Id and J* + J at one point."""
    n = J.shape[0]
    scale = _opnorm(J) ** 2
    return rel(_opnorm(J @ J + np.eye(n)), scale), rel(_opnorm(adjoint(J) + J), _opnorm(J))


def validate_gcs(J: Field, plan: SamplePlan | None = None, chart: Chart | None = None,
                 points: Sequence | None = None) -> ResidualReport:
    plan = plan or SamplePlan()
    if points is None:
        chart = chart or Chart(J.dim)
        points = chart.sample(plan.rng(202), plan.points)
    rep = ResidualReport("gcs", tolerance=plan.tolerance)
    sq = ResidualReport("square", tolerance=plan.tolerance)
    sk = ResidualReport("skew", tolerance=plan.tolerance)
    for p in points:
        a, b = gcs_residuals(J(p))
        sq.update(a, point=p)
        sk.update(b, point=p)
    rep.absorb(sq, "J^2+Id")
    rep.absorb(sk, "J*+J")
    return rep


def complex_type(Jt: Field) -> Field:
    """blockdiag(J, -J*) for an almost complex structure J on TM."""
    m = Jt.dim
    def rule(j):
        z = _const(j, np.zeros((m, m)))
        return jets.block([[j, z], [z, -j.T]])
    return MapField(rule, [Jt], (2 * m, 2 * m))


def symplectic_type(w: KForm) -> Field:
    """[[0, -w^-1], [w, 0]] for a nondegenerate 2-form w."""
    m = w.dim
    def rule(t):
        flat = t.T
        z = _const(t, np.zeros((m, m)))
        return jets.block([[z, -flat.inv()], [flat, z]])
    return MapField(rule, [w.tensor_field()], (2 * m, 2 * m))


def hermitian_tensor_jet(gj: Jet, Jj: Jet) -> Jet:
    """w_ij = g(J e_i, e_j)."""
    return Jj.T @ gj


def hermitian_form(g: Field, J: Field, points: Sequence | None = None, tol: float = 1e-10) -> KForm:
    """w(X,Y) = g(JX, Y); compatibility is checked at ``points`` when given."""
    if points is not None:
        for p in points:
            gp, Jp = g(p), J(p)
            res = np.abs(Jp.T @ gp @ Jp - gp).max() / (1 + np.abs(gp).max())
            if res > tol:
                raise ValueError(f"J is not g-compatible at {tuple(p)} (residual {res:.2e})")
    return KForm.from_tensor(2, MapField(hermitian_tensor_jet, [g, J], (g.dim,) * 2))


# Kähler quadruples --------------------------------------------------------------

@dataclass
class GKQuadruple:
    """Bihermitian data (g, b, J+, J-) of an almost generalized Kähler structure."""

    g: Field
    J_plus: Field
    J_minus: Field
    b: KForm | None = None
    metric: GMetric = dc_field(init=False)

    def __post_init__(self):
        m = self.g.dim
        for J in (self.J_plus, self.J_minus):
            if J.shape != (m, m) or J.dim != m:
                raise ValueError("J+- must be (m, m) matrix fields on the metric's chart")
        if self.b is None:
            self.b = _zero_b(m)
        self.metric = GMetric(self.g, self.b)

    @property
    def dim(self) -> int:
        return self.g.dim

    def omega(self, sign: int) -> KForm:
        return hermitian_form(self.g, self.J_plus if sign > 0 else self.J_minus)

    def check(self, points, tol: float = 1e-10) -> ResidualReport:
        rep = ResidualReport("quadruple", tolerance=tol)
        m = self.dim
        for p in points:
            gp = self.g(p)
            if not cholesky_ok(gp):
                rep.update(np.inf, point=p, what="metric not positive")
            for name, J in (("J+", self.J_plus), ("J-", self.J_minus)):
                Jp = J(p)
                rep.update(rel(_opnorm(Jp @ Jp + np.eye(m)), _opnorm(Jp) ** 2), point=p, what=f"{name}^2+Id")
                rep.update(rel(_opnorm(Jp.T @ gp @ Jp - gp), _opnorm(gp) * (1 + _opnorm(Jp) ** 2)),
                           point=p, what=f"{name} hermitian")
        return rep

    def validate(self, points, tol: float = 1e-10) -> None:
        rep = self.check(points, tol)
        if not rep.passed:
            raise ValueError(f"quadruple invariants fail: {rep.witness}")


def _projector_route(q: GKQuadruple, which: int) -> Field:
    """J1/J2 = pi+^-1 J+ pi P+ +- pi-^-1 J- pi P-."""
    m = q.dim
    gm = q.metric
    sign = 1.0 if which == 1 else -1.0

    def rule(Jp, Jm, Pp, Pm, ip, im):
        proj = jets.concatenate([_const(Jp, np.eye(m)), _const(Jp, np.zeros((m, m)))], axis=1)  # pi
        return ip @ Jp @ proj @ Pp + (im @ Jm @ proj @ Pm) * sign

    return MapField(rule, [q.J_plus, q.J_minus, gm.P_plus, gm.P_minus, gm.pi_plus_inv, gm.pi_minus_inv],
                    (2 * m, 2 * m))


def _block_route(q: GKQuadruple, which: int) -> Field:
    """1/2 e^b [[J+ +- J-, -(w+^-1 -+ w-^-1)], [w+ -+ w-, -(J+* +- J-*)]] e^-b."""
    m = q.dim
    s = 1.0 if which == 1 else -1.0

    def rule(gj, Jp, Jm, bj):
        wp = gj @ Jp  # X -> i_X w+
        wm = gj @ Jm
        top = jets.concatenate([Jp + Jm * s, -(wp.inv() - wm.inv() * s)], axis=1)
        bot = jets.concatenate([wp - wm * s, -(Jp.T + Jm.T * s)], axis=1)
        core = jets.concatenate([top, bot], axis=0) * 0.5
        return exp_b_jet(bj) @ core @ exp_b_jet(bj, -1.0)

    return MapField(rule, [q.g, q.J_plus, q.J_minus, q.metric.b_tensor], (2 * m, 2 * m))


def gcs_from_quadruple(q: GKQuadruple, which: int = 1, route: str = "projector") -> Field:
    """J1 (which=1) or J2 (which=2) from the quadruple, by projectors or by the explicit block matrix."""
    if which not in (1, 2):
        raise ValueError("which must be 1 or 2")
    if route == "projector":
        return _projector_route(q, which)
    if route == "block":
        return _block_route(q, which)
    raise ValueError(f"unknown construction route {route!r}")


def route_agreement(q: GKQuadruple, points) -> ResidualReport:
    rep = ResidualReport("quadruple-route-agreement")
    for which in (1, 2):
        a = gcs_from_quadruple(q, which, "projector")
        b = gcs_from_quadruple(q, which, "block")
        for p in points:
            A, B = a(p), b(p)
            rep.update(rel(_opnorm(A - B), _opnorm(A)), point=p, which=which)
    return rep


# quaternionic frames ------------------------------------------------------------

def _left_matrix(q) -> np.ndarray:
    a, b, c, d = q
    return np.array([[a, -b, -c, -d], [b, a, -d, c], [c, d, a, -b], [d, -c, b, a]], dtype=float)


def _right_matrix(q) -> np.ndarray:
    a, b, c, d = q
    return np.array([[a, -b, -c, -d], [b, a, d, -c], [c, -d, a, b], [d, c, -b, a]], dtype=float)


def quaternion_matrices(side: str = "left", n: int = 1) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Constant (I, J, K) on R^{4n} from left or right multiplication, with IJ = K.

    Right multiplication reverses products, so K is taken as I J (= minus right-k).
    """
    mat = _left_matrix if side == "left" else _right_matrix
    I1, J1 = mat((0, 1, 0, 0)), mat((0, 0, 1, 0))
    K1 = I1 @ J1
    eye = np.eye(n)
    return np.kron(eye, I1), np.kron(eye, J1), np.kron(eye, K1)


@dataclass
class QuatFrame:
    """Three endomorphism fields with IJ = -JI = K."""

    I: Field
    J: Field
    K: Field

    def __post_init__(self):
        shapes = {self.I.shape, self.J.shape, self.K.shape}
        if len(shapes) != 1:
            raise ValueError("frame elements must share one shape")

    @property
    def dim(self) -> int:
        return self.I.dim

    @property
    def elements(self) -> tuple[Field, Field, Field]:
        return (self.I, self.J, self.K)

    def at(self, p) -> np.ndarray:
        return np.stack([self.I(p), self.J(p), self.K(p)])

    def jet(self, p, order: int) -> list[Jet]:
        return [E.jet(p, order) for E in self.elements]

    def relation_residual(self, p) -> float:
        I, J, K = self.I(p), self.J(p), self.K(p)
        n = I.shape[0]
        eye = np.eye(n)
        scale = max(_opnorm(I), _opnorm(J), _opnorm(K)) ** 2
        errs = [I @ J - K, J @ I + K, I @ I + eye, J @ J + eye, K @ K + eye]
        return rel(max(_opnorm(e) for e in errs), scale)

    def rotated(self, R: np.ndarray) -> "QuatFrame":
        """Frame E'_a = sum_b R[b, a] E_b for a rotation R in SO(3)."""
        R = np.asarray(R, dtype=float)
        E = self.elements
        new = []
        for a in range(3):
            f = E[0] * float(R[0, a]) + E[1] * float(R[1, a]) + E[2] * float(R[2, a])
            new.append(f)
        return QuatFrame(*new)


def sphere_element(frame: QuatFrame, abc, tol: float = UNIT_TOL) -> Field:
    """u = a I + b J + c K for a unit (a, b, c)."""
    a, b, c = (float(v) for v in abc)
    if abs(a * a + b * b + c * c - 1.0) > tol:
        raise ValueError("sphere parameter must be a unit vector")
    return frame.I * a + frame.J * b + frame.K * c


def generalized_frame_from_tm(Ic: np.ndarray | Field, Jc, Kc) -> QuatFrame:
    """Generalized frame blockdiag(E, -E*) from an almost hypercomplex triple on TM."""
    out = []
    for E in (Ic, Jc, Kc):
        if not isinstance(E, Field):
            raise TypeError("frame elements must be fields")
        out.append(complex_type(E))
    return QuatFrame(*out)


def _standard_complex(m: int) -> np.ndarray:
    J0 = np.zeros((m, m))
    for k in range(0, m, 2):
        J0[k + 1, k], J0[k, k + 1] = 1.0, -1.0
    return J0


def _random_rotation(m: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((m, m)))
    return q * np.sign(np.diag(r))


def random_quadruple(m: int, rng: np.random.Generator, with_b: bool = True, amplitude: float = 0.2) -> GKQuadruple:
    """Random position-dependent bihermitian data: g = A^T A, J+- = A^-1 O J0 O^T A.

    A = I + P with |P| <= 1/2 on the unit box, so cond(g) <= 9 there.
    """
    from .calculus import PolynomialField, random_form, random_polynomial_field

    if m % 2:
        raise ValueError("almost complex structures need even dimension")
    pert = random_polynomial_field(m, (m, m), rng, degree=2, scale=amplitude)
    # |entry| <= sum of |coefficients| on the unit box; Frobenius bounds the operator norm
    bound = np.sqrt((np.abs(pert.coef).sum(axis=0) ** 2).sum())
    if bound > 0.5:
        pert = PolynomialField(m, pert.monomials, pert.coef * (0.5 / bound))
    A = MapField(lambda e: e + _const(e, np.eye(m)), [pert], (m, m))
    g = MapField(lambda a: a.T @ a, [A], (m, m))
    J0 = _standard_complex(m)

    def make_J():
        O = _random_rotation(m, rng)
        Jc = O @ J0 @ O.T
        return MapField(lambda a: a.inv() @ _const(a, Jc) @ a, [A], (m, m))

    b = random_form(m, 2, rng) if with_b else None
    return GKQuadruple(g, make_J(), make_J(), b)
