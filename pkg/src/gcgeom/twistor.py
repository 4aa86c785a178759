"""Twistor space Z = U x S^2 of a generalized almost quaternionic structure.

The fiber is charted stereographically.  Tangent directions of the sphere at n
are identified with elements of the structure bundle via n' -> n'.(I, J, K).
Generalized vectors on Z are handled in an adapted frame
(horizontal lifts h_i, fiber vectors d_s, d_t; dual coframe dx^i, theta^s, theta^t)
related to coordinates by T = blockdiag(F, F^-T).
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import jets
from .calculus import (
    Chart,
    ConstantField,
    DerivedField,
    Field,
    FormulaField,
    KForm,
    MapField,
    PullbackField,
)
from .connections import GConnection, torsion_frame
from .courant import GSection, courant_bracket, gram
from .integrability import (
    curvature_type_combination,
    curvature_type_residual,
    nijenhuis_frame_values,
    sphere_parameters,
    endo_jet_data,
    torsion_type_combination,
    torsion_type_residual,
)
from .jets import Jet
from .reports import ResidualReport, SamplePlan, fibonacci_sphere, rel
from .structures import QuatFrame

POLES = ("north", "south")


def _const(j: Jet, value) -> Jet:
    return Jet.constant(j.basis, np.asarray(value, dtype=float))


def cross_matrix(n):
    """[n x] as a matrix (array or jet input of shape (3,))."""
    if isinstance(n, Jet):
        z = _const(n[0], 0.0)
        return jets.array([[z, -n[2], n[1]], [n[2], z, -n[0]], [-n[1], n[0], z]], n[0])
    n = np.asarray(n, dtype=float)
    return np.array([[0.0, -n[2], n[1]], [n[2], 0.0, -n[0]], [-n[1], n[0], 0.0]])


@dataclass(frozen=True)
class TwistorChart:
    """Base chart times a stereographic chart of the sphere.

    ``north`` projects from the south pole (n = (2s, 2t, 1 - r^2)/(1 + r^2));
    ``south`` projects from the north pole (n = (2s, 2t, r^2 - 1)/(1 + r^2)).
    """

    base: Chart
    pole: str = "north"

    def __post_init__(self):
        if self.pole not in POLES:
            raise ValueError(f"pole must be one of {POLES}")

    @property
    def base_dim(self) -> int:
        return self.base.dim

    @property
    def dim(self) -> int:
        return self.base.dim + 2

    def _sign(self) -> float:
        return 1.0 if self.pole == "north" else -1.0

    def embed(self, s, t):
        """Unit vector n(s, t); works for numbers and jets."""
        r = s * s + t * t
        den = 1.0 / (1.0 + r)
        return [2.0 * s * den, 2.0 * t * den, self._sign() * (1.0 - r) * den]

    def fiber_coords(self, n) -> np.ndarray:
        n = np.asarray(n, dtype=float)
        den = 1.0 + self._sign() * n[2]
        if den <= 1e-12:
            raise ValueError(f"fiber point {tuple(n)} is the excluded pole of the {self.pole} chart")
        return n[:2] / den

    def point(self, x, n) -> np.ndarray:
        return np.concatenate([np.asarray(x, dtype=float), self.fiber_coords(n)])

    @staticmethod
    def best_for(n) -> "str":
        return "north" if n[2] >= 0 else "south"


# connection form ---------------------------------------------------------------------

def _skew_coefficients(W):
    """(alpha, beta, gamma) from a skew 3x3 matrix W = [w x] (array or jet)."""
    a = (W[2, 1] - W[1, 2]) * 0.5
    b = (W[0, 2] - W[2, 0]) * 0.5
    c = (W[1, 0] - W[0, 1]) * 0.5
    return a, b, c


class ConnectionForm:
    """w = (alpha, beta, gamma) with nabla_X E_a = sum_b (w(X) x e_a)_b E_b."""

    def __init__(self, nabla: GConnection, frame: QuatFrame):
        self.nabla = nabla
        self.frame = frame
        m = nabla.dim
        n = 2 * m
        self.dim = m
        derivs = [nabla.endo_derivative(E) for E in frame.elements]

        def coeffs(dI, dJ, dK, I, J, K):
            E = jets.stack([I, J, K])
            M = jets.stack([dI, dJ, dK])  # M[a, i] = nabla_i E_a
            C = jets.einsum("bAB,aiBA->iba", E, M) * (-1.0 / n)  # C[i, b, a]
            return C

        self.coefficients = MapField(coeffs, derivs + list(frame.elements), (m, 3, 3))

        def form(C):
            rows = []
            for i in range(m):
                a, b, c = _skew_coefficients(C[i])
                rows.append([a, b, c])
            return jets.array(rows, C)

        self.w = MapField(form, [self.coefficients], (m, 3))
        self._derivs = derivs

    def component(self, a: int) -> KForm:
        return KForm(1, self.w[:, a])

    @property
    def alpha(self) -> KForm:
        return self.component(0)

    @property
    def beta(self) -> KForm:
        return self.component(1)

    @property
    def gamma(self) -> KForm:
        return self.component(2)

    def preservation_residual(self, p) -> float:
        """How far nabla E_a is from the span of the frame (0 when nabla preserves Q)."""
        E = self.frame.at(p)
        C = self.coefficients(p)
        worst = 0.0
        for a, d in enumerate(self._derivs):
            M = d(p)
            recon = np.einsum("ib,bAB->iAB", C[:, :, a], E)
            worst = max(worst, np.abs(M - recon).max() / (1 + np.abs(M).max()))
        return worst

    def reconstruction_residual(self, p) -> float:
        """nabla_X E_a against the (alpha, beta, gamma) ansatz."""
        E = self.frame.at(p)
        w = self.w(p)
        worst = 0.0
        for a, d in enumerate(self._derivs):
            M = d(p)
            for i in range(self.dim):
                coef = np.cross(w[i], np.eye(3)[a])
                worst = max(worst, np.abs(M[i] - np.einsum("b,bAB->AB", coef, E)).max() / (1 + np.abs(M).max()))
        return worst


def connection_form(nabla: GConnection, frame: QuatFrame, points: Sequence | None = None,
                    tol: float = 1e-9) -> ConnectionForm:
    cf = ConnectionForm(nabla, frame)
    if points is not None:
        for p in points:
            r = cf.preservation_residual(p)
            if r > tol:
                raise ValueError(f"connection does not preserve the quaternionic bundle at {tuple(p)} ({r:.2e})")
    return cf


# the twistor structure ---------------------------------------------------------------

class TwistorSpace:
    """The generalized almost complex structure on Z for a connection preserving Q."""

    def __init__(self, nabla: GConnection, frame: QuatFrame, chart: TwistorChart | Chart,
                 orientation: str = "right", twist: bool | None = None):
        if isinstance(chart, Chart):
            chart = TwistorChart(chart)
        if orientation not in ("right", "left"):
            raise ValueError("orientation must be 'right' or 'left'")
        self.nabla = nabla
        self.frame = frame
        self.chart = chart
        self.orientation = orientation
        self.sign = 1.0 if orientation == "right" else -1.0
        m = nabla.dim
        M = m + 2
        self.m, self.M = m, M
        self.form = ConnectionForm(nabla, frame)
        if twist is None:
            twist = nabla.h is not None
        self.twist = bool(twist) and nabla.h is not None
        ch = chart

        self.n = FormulaField(M, lambda x: ch.embed(x[m], x[m + 1]), (3,))
        self.dn = DerivedField(lambda nj: nj.grad()[:, m:], [self.n], (3, 2))  # dn/dsigma

        def proj(dn):
            return (dn.T @ dn).inv() @ dn.T  # (2, 3): sphere tangent -> sigma

        self.P = MapField(proj, [self.dn], (2, 3))
        wZ = PullbackField(self.form.w, M)

        def lift_v(w, n, P):
            return jets.einsum("ib,sb->is", jets.einsum("ab,ib->ia", cross_matrix(n), w), P)  # P (n x w_i)

        self.v = MapField(lift_v, [wZ, self.n, self.P], (m, 2))
        self.T = MapField(self._t_rule, [self.v], (2 * M, 2 * M))
        self.T_inv = MapField(self._t_inv_rule, [self.v], (2 * M, 2 * M))
        frameZ = [PullbackField(E, M) for E in frame.elements]
        self.u = MapField(lambda n, I, J, K: I * n[0] + J * n[1] + K * n[2], [self.n] + frameZ, (2 * m, 2 * m))

        def vertical(n, dn, P):
            return P @ cross_matrix(n) @ dn * self.sign

        self.j = MapField(vertical, [self.n, self.dn, self.P], (2, 2))
        self.J_adapted = MapField(self._adapted_rule, [self.u, self.j], (2 * M, 2 * M))
        self.J = MapField(lambda t, ja, ti: t @ ja @ ti, [self.T, self.J_adapted, self.T_inv], (2 * M, 2 * M))
        if self.twist:
            self.h = PullbackField(_embed_h(nabla.h, m), M)
        else:
            self.h = None

    # frame change
    def _t_rule(self, v):
        m = self.m
        eye_m, eye_2 = _const(v, np.eye(m)), _const(v, np.eye(2))
        z_m2, z_2m = _const(v, np.zeros((m, 2))), _const(v, np.zeros((2, m)))
        F = jets.block([[eye_m, z_m2], [v.T, eye_2]])
        Fit = jets.block([[eye_m, v * -1.0], [z_2m, eye_2]])
        zero = _const(v, np.zeros((self.M, self.M)))
        return jets.block([[F, zero], [zero, Fit]])

    def _t_inv_rule(self, v):
        m = self.m
        eye_m, eye_2 = _const(v, np.eye(m)), _const(v, np.eye(2))
        z_m2, z_2m = _const(v, np.zeros((m, 2))), _const(v, np.zeros((2, m)))
        Finv = jets.block([[eye_m, z_m2], [v.T * -1.0, eye_2]])
        Ft = jets.block([[eye_m, v], [z_2m, eye_2]])
        zero = _const(v, np.zeros((self.M, self.M)))
        return jets.block([[Finv, zero], [zero, Ft]])

    def _adapted_rule(self, u, j):
        m, M = self.m, self.M
        out = _const(u, np.zeros((2 * M, 2 * M)))
        coef = out.coef.copy()
        hv, hf = list(range(m)), list(range(M, M + m))
        hidx = np.array(hv + hf)
        coef[(slice(None),) + np.ix_(hidx, hidx)] = u.coef
        vv, vf = [m, m + 1], [M + m, M + m + 1]
        coef[(slice(None),) + np.ix_(vv, vv)] = j.coef
        coef[(slice(None),) + np.ix_(vf, vf)] = -np.swapaxes(j.coef, -1, -2)
        return Jet(u.basis, coef)

    # index bookkeeping
    def horizontal_indices(self) -> np.ndarray:
        m, M = self.m, self.M
        return np.array(list(range(m)) + list(range(M, M + m)))

    def vertical_vector_indices(self) -> np.ndarray:
        return np.array([self.m, self.m + 1])

    def vertical_form_indices(self) -> np.ndarray:
        return np.array([self.M + self.m, self.M + self.m + 1])

    def point(self, x, n) -> np.ndarray:
        return self.chart.point(x, n)

    # sections
    def horizontal_lift(self, s: Field) -> GSection:
        """Lift of a base section: X -> X + v(X) on the fiber, xi -> pullback of xi."""
        m, M = self.m, self.M
        sZ = PullbackField(s, M)

        def adapted(sj):
            z = _const(sj, np.zeros(2))
            return jets.concatenate([sj[:m], z, sj[m:], z])

        ad = MapField(adapted, [sZ], (2 * M,))
        return GSection(self.T @ ad)

    def vertical_section(self, coeffs: Field, kind: str = "vector") -> GSection:
        """Section a^s d_s + a^t d_t (or a_s theta^s + a_t theta^t) from a field of shape (2,) on Z."""
        M = self.M

        def rule(c):
            zm = _const(c, np.zeros(self.m))
            z2 = _const(c, np.zeros(2))
            if kind == "vector":
                return jets.concatenate([zm, c, zm, z2])
            return jets.concatenate([zm, z2, zm, c])

        ad = MapField(rule, [coeffs], (2 * M,))
        return GSection(self.T @ ad)

    def validate(self, p) -> dict:
        """J^2 + Id and skewness residuals at a twistor point."""
        from .structures import gcs_residuals

        Jp = self.J(p)
        sq, sk = gcs_residuals(Jp)
        return {"square": sq, "skew": sk}

    # Nijenhuis tensor
    def nijenhuis_adapted(self, p) -> np.ndarray:
        """N[a, b] (adapted components) on adapted frame pairs."""
        Jv, dJ = endo_jet_data(self.J, p)
        h = self.h(p) if self.h is not None else None
        N = nijenhuis_frame_values(Jv, dJ, h)
        T = self.T(p)
        Ti = self.T_inv(p)
        return np.einsum("cC,ABC,Aa,Bb->abc", Ti, N, T, T), np.abs(Jv).max() ** 2 * (1 + np.abs(dJ).max())

    def sphere_tangent(self, p, sigma_dot: np.ndarray) -> np.ndarray:
        return self.dn(p) @ sigma_dot

    def to_sigma(self, p, n_dot: np.ndarray) -> np.ndarray:
        return self.P(p) @ n_dot


def _embed_h(h: Field, m: int) -> Field:
    """Pad a base 3-form tensor to the twistor chart (zero on fiber slots)."""
    M = m + 2

    def rule(hj):
        coef = np.zeros((hj.basis.size, M, M, M))
        coef[:, :m, :m, :m] = hj.coef
        return Jet(hj.basis, coef)

    return MapField(rule, [h], (M, M, M))


def frame_coefficients(E: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Coefficients c_a of A in the frame: c_a = -tr(E_a A)/n."""
    n = E.shape[-1]
    return -np.einsum("aij,...ji->...a", E, A) / n


# direct evaluation against the closed forms ------------------------------------------

@dataclass
class TwistorBlocks:
    """Nijenhuis blocks at one twistor point and their closed-form counterparts."""

    horizontal_pair_vertical: np.ndarray      # (2m, 2m, 3)  direct, as sphere tangent
    horizontal_pair_vertical_expected: np.ndarray
    horizontal_pair_horizontal: np.ndarray    # (2m, 2m, 2m)  <N, Z> for Z horizontal
    horizontal_pair_horizontal_expected: np.ndarray
    horizontal_vertical: np.ndarray           # (2m, 2, 2M) full components
    vertical_form_horizontal: np.ndarray      # (2, 2m, 2M) full components
    vertical_form_pairing: np.ndarray         # (2, 2m, 2m)  <N(theta^s, A), B>
    vertical_form_pairing_expected: np.ndarray
    vertical_pair: np.ndarray
    full: np.ndarray                          # N on all adapted frame pairs
    scale: float


def twistor_blocks(tw: TwistorSpace, x, n, torsion_twisted: bool | None = None) -> TwistorBlocks:
    m, M = tw.m, tw.M
    p = tw.point(x, n)
    N, scale = tw.nijenhuis_adapted(p)
    H = tw.horizontal_indices()
    VV = tw.vertical_vector_indices()
    VF = tw.vertical_form_indices()
    Q = gram(M)
    E = tw.frame.at(x)
    u = np.einsum("a,aij->ij", n, E)
    dn = tw.dn(p)
    # (a) two horizontal lifts
    NHH = N[np.ix_(H, H)]
    vert = np.einsum("as,ABs->ABa", dn, NHH[..., VV])
    Rf = tw.nabla.curvature_frame(x)
    comb = curvature_type_combination(Rf, u)
    vert_exp = frame_coefficients(E, -comb)
    pair = np.einsum("ABc,cD->ABD", NHH, Q)[..., H]  # <N(A,B), e_Z>
    if torsion_twisted is None:
        torsion_twisted = tw.twist
    T = torsion_frame(tw.nabla, x, torsion_twisted)
    hor_exp = torsion_type_combination(T, u)
    # (b), (c), (d)
    HV = N[np.ix_(H, VV)]
    VFH = N[np.ix_(VF, H)]
    # <N(theta^s, A), B> = -1/2 theta^s((comb(A, B)).u) for horizontal A, B
    sig = np.einsum("sa,ABa->sAB", tw.P(p), frame_coefficients(E, comb))
    vfh_pair = np.einsum("sAc,cD->sAD", VFH, Q)[..., H]
    VVall = np.concatenate([VV, VF])
    VP = N[np.ix_(VVall, VVall)]
    return TwistorBlocks(vert, vert_exp, pair, hor_exp, HV, VFH, vfh_pair, -0.5 * sig, VP, N, scale)


def twistor_nijenhuis_direct(tw: TwistorSpace, base_points: Sequence, plan: SamplePlan,
                             sign_flip: bool = False) -> ResidualReport:
    """Direct Nijenhuis residual of J on Z with the block comparisons against the closed forms."""
    m, M = tw.m, tw.M
    tol = plan.tolerance
    names = ("direct", "d:vertical-pair", "b:horizontal-vertical", "c:vertical-form-horizontal",
             "c:closed-form", "a:vertical-closed-form", "a:horizontal-closed-form")
    parts = {k: ResidualReport(k, tolerance=tol) for k in names}
    flip = -1.0 if sign_flip else 1.0
    VV = np.concatenate([tw.vertical_vector_indices(), tw.vertical_form_indices()])
    for x in base_points:
        for nv in sphere_parameters(plan):
            chart = TwistorChart(tw.chart.base, TwistorChart.best_for(nv))
            t = tw if chart.pole == tw.chart.pole else _rechart(tw, chart)
            B = twistor_blocks(t, x, nv)
            s = B.scale
            w = dict(point=x, u=nv)
            parts["direct"].update(rel(np.abs(B.full).max(), s), **w)
            parts["d:vertical-pair"].update(rel(np.abs(B.vertical_pair).max(), s), **w)
            parts["b:horizontal-vertical"].update(rel(np.abs(B.horizontal_vertical).max(), s), **w)
            VFH = B.vertical_form_horizontal
            # N(theta, A) has no vertical or vertical-dual components
            parts["c:vertical-form-horizontal"].update(rel(np.abs(VFH[..., VV]).max(), s), **w)
            parts["c:closed-form"].update(
                rel(np.abs(B.vertical_form_pairing - flip * B.vertical_form_pairing_expected).max(), s), **w)
            parts["a:vertical-closed-form"].update(
                rel(np.abs(B.horizontal_pair_vertical - flip * B.horizontal_pair_vertical_expected).max(), s), **w)
            parts["a:horizontal-closed-form"].update(
                rel(np.abs(B.horizontal_pair_horizontal - B.horizontal_pair_horizontal_expected).max(), s), **w)
    rep = ResidualReport("twistor-nijenhuis" + ("-flipped" if sign_flip else ""), tolerance=tol)
    for k, r in parts.items():
        rep.absorb(r, k)
    rep.max_residual = parts["direct"].max_residual
    rep.witness = dict(parts["direct"].witness)
    return rep


def _rechart(tw: TwistorSpace, chart: TwistorChart) -> TwistorSpace:
    cache = tw.__dict__.setdefault("_charts", {})
    if chart.pole not in cache:
        cache[chart.pole] = TwistorSpace(tw.nabla, tw.frame, chart, tw.orientation, tw.twist)
    return cache[chart.pole]


# bracket-level identities ------------------------------------------------------------

def lift_parallel_residual(tw: TwistorSpace, x, n) -> float:
    """|nabla_X u| along each lifted coordinate direction, from nabla E_a directly."""
    p = tw.point(x, n)
    dn = tw.dn(p)
    v = tw.v(p)  # (m, 2)
    E = tw.frame.at(x)
    dE = np.stack([d(x) for d in tw.form._derivs])  # (3, m, n, n)
    worst = 0.0
    for i in range(tw.m):
        ndot = dn @ v[i]
        total = np.einsum("a,aAB->AB", ndot, E) + np.einsum("a,aAB->AB", n, dE[:, i])
        worst = max(worst, np.abs(total).max())
    return worst


def brute_force_transport(nabla: GConnection, frame: QuatFrame, x0, direction, n0,
                          length: float = 0.1, steps: int = 200) -> tuple[np.ndarray, np.ndarray]:
    """Parallel-transport u along x0 + t*direction by RK4 on the full endomorphism.

    Returns the final unit vector recovered from u and the one from integrating
    n' = -w(X) x n; the two agree when the lift formula is right.
    """
    x0 = np.asarray(x0, dtype=float)
    X = np.asarray(direction, dtype=float)
    n_dim = 2 * nabla.dim
    cf = ConnectionForm(nabla, frame)

    def f_u(t, U):
        om = np.einsum("i,iAB->AB", X, nabla.omega(x0 + t * X))
        return -(om @ U - U @ om)

    def f_n(t, nv):
        return -np.cross(X @ cf.w(x0 + t * X), nv)

    def rk4(f, y, h, N):
        t = 0.0
        for _ in range(N):
            k1 = f(t, y)
            k2 = f(t + h / 2, y + h / 2 * k1)
            k3 = f(t + h / 2, y + h / 2 * k2)
            k4 = f(t + h, y + h * k3)
            y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += h
        return y

    h = length / steps
    U0 = np.einsum("a,aAB->AB", n0, frame.at(x0))
    U1 = rk4(f_u, U0, h, steps)
    n_from_u = frame_coefficients(frame.at(x0 + length * X), U1)
    n_from_lift = rk4(f_n, np.asarray(n0, dtype=float), h, steps)
    return n_from_u, n_from_lift


def _bracket(tw: TwistorSpace, a: Field, b: Field) -> GSection:
    return courant_bracket(a, b, tw.h)


def vertical_bracket_residuals(tw: TwistorSpace, base_section: Field, vertical: GSection, x, n) -> dict:
    """[X, JA] - J[X, A] and [JX, JA] - J[JX, A] for a lift X and a vertical vector field A."""
    p = tw.point(x, n)
    X = tw.horizontal_lift(base_section)
    JX = GSection(tw.J @ X)
    JA = GSection(tw.J @ vertical)
    Jp = tw.J(p)
    r3 = _bracket(tw, X, JA)(p) - Jp @ _bracket(tw, X, vertical)(p)
    r4 = _bracket(tw, JX, JA)(p) - Jp @ _bracket(tw, JX, vertical)(p)
    return {"lift-vertical": float(np.abs(r3).max()), "J-lift-vertical": float(np.abs(r4).max())}


def lifted_bracket_residuals(tw: TwistorSpace, s1: Field, s2: Field, x, n) -> dict:
    """Split [X^, Y^] into the lift of [X, Y] and the vertical vector R(X, Y).u."""
    m, M = tw.m, tw.M
    p = tw.point(x, n)
    br = _bracket(tw, tw.horizontal_lift(s1), tw.horizontal_lift(s2))(p)
    ad = tw.T_inv(p) @ br
    H = tw.horizontal_indices()
    base = courant_bracket(s1, s2, tw.nabla.h)(x)
    E = tw.frame.at(x)
    u = np.einsum("a,aij->ij", n, E)
    R = tw.nabla.curvature(x, s1(x), s2(x))
    expected = frame_coefficients(E, u @ R - R @ u)
    vertical = tw.dn(p) @ ad[tw.vertical_vector_indices()]
    return {
        "horizontal": float(np.abs(ad[H] - base).max()),
        "vertical": float(np.abs(vertical - expected).max()),
        "vertical-dual": float(np.abs(ad[tw.vertical_form_indices()]).max()),
        "scale": float(np.abs(expected).max()),
    }


# invariance checks -------------------------------------------------------------------

def _geometric_blocks(tw: TwistorSpace, x, n) -> np.ndarray:
    B = twistor_blocks(tw, x, n)
    return np.concatenate([B.horizontal_pair_vertical.ravel(), B.horizontal_pair_horizontal.ravel()])


def chart_independence_residual(tw: TwistorSpace, x, n) -> float:
    """Chart-free Nijenhuis data at one geometric point through both pole charts."""
    other = "south" if tw.chart.pole == "north" else "north"
    alt = TwistorSpace(tw.nabla, tw.frame, TwistorChart(tw.chart.base, other), tw.orientation, tw.twist)
    a, b = _geometric_blocks(tw, x, n), _geometric_blocks(alt, x, n)
    lift_a = tw.dn(tw.point(x, n)) @ tw.v(tw.point(x, n)).T
    lift_b = alt.dn(alt.point(x, n)) @ alt.v(alt.point(x, n)).T
    return float(max(np.abs(a - b).max(), np.abs(lift_a - lift_b).max()))


def rotation_invariance_residual(tw: TwistorSpace, R: np.ndarray, x, n) -> float:
    """Rotate the frame by a constant R in SO(3) and compare J at the matching fiber point."""
    R = np.asarray(R, dtype=float)
    rot = TwistorSpace(tw.nabla, tw.frame.rotated(R), tw.chart, tw.orientation, tw.twist)
    n2 = R.T @ np.asarray(n, dtype=float)
    p1, p2 = tw.point(x, n), rot.point(x, n2)
    H = tw.horizontal_indices()
    J1, J2 = tw.J_adapted(p1)[np.ix_(H, H)], rot.J_adapted(p2)[np.ix_(H, H)]
    lift1 = tw.dn(p1) @ tw.v(p1).T
    lift2 = R @ (rot.dn(p2) @ rot.v(p2).T)
    return float(max(np.abs(J1 - J2).max(), np.abs(lift1 - lift2).max()))


# the verdict -------------------------------------------------------------------------

@dataclass
class TheoremAReport:
    """Curvature/torsion type conditions against the direct Nijenhuis residual."""

    torsion_type: ResidualReport
    curvature_type: ResidualReport
    direct: ResidualReport
    orientation: str
    elapsed: float = 0.0

    @property
    def conditions_hold(self) -> bool:
        return self.torsion_type.passed and self.curvature_type.passed

    @property
    def integrable(self) -> bool:
        return self.direct.passed

    @property
    def agree(self) -> bool:
        return self.conditions_hold == self.integrable

    @property
    def passed(self) -> bool:
        return self.conditions_hold and self.integrable

    @property
    def max_residual(self) -> float:
        return max(self.torsion_type.max_residual, self.curvature_type.max_residual, self.direct.max_residual)

    def failing(self) -> list[str]:
        out = []
        if not self.torsion_type.passed:
            out.append("C1")
        if not self.curvature_type.passed:
            out.append("C2")
        if not self.direct.passed:
            out.append("direct")
        if not self.agree:
            out.append("disagreement")
        return out

    def summary(self) -> str:
        a = "pass" if self.conditions_hold else "fail"
        b = "pass" if self.integrable else "fail"
        tag = "agree" if self.agree else "DEFECT: verdicts disagree"
        return (f"theoremA[{self.orientation}] C1/C2 {a} "
                f"(C1 {self.torsion_type.max_residual:.2e}, C2 {self.curvature_type.max_residual:.2e}); "
                f"direct {b} ({self.direct.max_residual:.2e}); {tag}")


def theorem_a_verdict(nabla: GConnection, frame: QuatFrame, plan: SamplePlan, chart: Chart,
                      points: Sequence | None = None, orientation: str | None = None,
                      twist: bool | None = None) -> TheoremAReport:
    start = time.perf_counter()
    orientation = orientation or plan.orientation
    if points is None:
        points = chart.sample(plan.rng(17), plan.points)
    c1 = torsion_type_residual(nabla, frame, plan, chart, points)
    c2 = curvature_type_residual(nabla, frame, plan, chart, points)
    tw = TwistorSpace(nabla, frame, chart, orientation, twist)
    direct = twistor_nijenhuis_direct(tw, points, plan)
    return TheoremAReport(c1, c2, direct, orientation, time.perf_counter() - start)
