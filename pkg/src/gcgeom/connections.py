"""Affine and generalized connections, generalized torsion and curvature, the generalized Bismut connection.

Conventions
-----------
* Affine coefficients ``Gamma[k, i, j]`` with ``nabla_{d_i} d_j = Gamma[k, i, j] d_k``.
* A generalized connection is a field ``omega[i]`` of (2m, 2m) matrices and acts by
  ``nabla_X s = X^i (d_i s + omega[i] s)`` where X is the anchor (vector part) of the
  direction, so covector directions differentiate trivially.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import jets
from .calculus import (
    ConstantField,
    DerivedField,
    Field,
    KForm,
    MapField,
    exterior_derivative,
    random_polynomial_field,
)
from .courant import (
    GSection,
    TwistForm,
    _as_h_field,
    courant_bracket,
    exp_b,
    gram,
    pairing_values,
)
from .jets import Jet
from .reports import ResidualReport, rel
from .structures import GMetric, hermitian_form


def _const(j: Jet, value) -> Jet:
    return Jet.constant(j.basis, np.asarray(value, dtype=float))


# affine connections -------------------------------------------------------------

class AffineConnection:
    """Connection on TM given by its Christoffel field."""

    def __init__(self, gamma: Field, torsion: KForm | None = None, label: str = ""):
        m = gamma.dim
        if gamma.shape != (m, m, m):
            raise ValueError("Christoffel field must have shape (m, m, m)")
        self.dim = m
        self.gamma = gamma
        self.torsion_form = torsion
        self.label = label

    def matrices(self) -> Field:
        """A[i] = Gamma[:, i, :] (connection matrix in direction d_i)."""
        return MapField(lambda G: G.transpose(1, 0, 2), [self.gamma], self.gamma.shape)

    def torsion_tensor(self, p) -> np.ndarray:
        G = self.gamma(p)
        return G - G.transpose(0, 2, 1)

    def metric_derivative(self, g: Field, p) -> np.ndarray:
        """(nabla_i g)_{jk}."""
        gj = g.jet(p, 1)
        dg = np.moveaxis(gj.grad().value, -1, 0)
        G = self.gamma(p)
        gv = gj.value
        return dg - np.einsum("lij,lk->ijk", G, gv) - np.einsum("lik,jl->ijk", G, gv)

    def endo_derivative(self, E: Field, p) -> np.ndarray:
        """(nabla_i E)^k_j for an endomorphism field of TM."""
        ej = E.jet(p, 1)
        dE = np.moveaxis(ej.grad().value, -1, 0)
        A = self.gamma(p).transpose(1, 0, 2)
        Ev = ej.value
        return dE + np.einsum("ikl,lj->ikj", A, Ev) - np.einsum("kl,ilj->ikj", Ev, A)

    def plus_torsion(self, g: Field, H: Field, factor: float = 0.5) -> "AffineConnection":
        """Gamma^k_ij + factor g^{kl} H_{ijl}."""
        def rule(G, gj, Hj):
            return G + jets.einsum("kl,ijl->kij", gj.inv(), Hj) * factor
        return AffineConnection(MapField(rule, [self.gamma, g, H], self.gamma.shape))


def christoffel_jet(gj: Jet) -> Jet:
    """Levi-Civita symbols from a metric jet (output loses one order)."""
    dg = gj.grad()  # dg[a, b, c] = d_c g_ab
    low = (dg.transpose(0, 2, 1) + dg - dg.transpose(2, 0, 1)) * 0.5  # [l, i, j]
    return jets.einsum("kl,lij->kij", gj.inv(), low)


def levi_civita(g: Field, points: Sequence | None = None) -> AffineConnection:
    m = g.dim
    if points is not None:
        from .structures import cholesky_ok
        for p in points:
            if not cholesky_ok(g(p)):
                raise ValueError(f"metric is degenerate at {tuple(p)}")
    return AffineConnection(DerivedField(christoffel_jet, [g], (m, m, m)), label="levi-civita")


def bismut_torsion(g: Field, I: Field) -> KForm:
    """T(X,Y,Z) = dw(IX, IY, IZ) with w the hermitian form of (g, I)."""
    w = hermitian_form(g, I)
    dw = exterior_derivative(w).tensor_field()
    m = g.dim

    def rule(t, Ij):
        a = jets.einsum("ijk,ia->ajk", t, Ij)
        a = jets.einsum("ajk,jb->abk", a, Ij)
        return jets.einsum("abk,kc->abc", a, Ij)

    return KForm.from_tensor(3, MapField(rule, [dw, I], (m, m, m)))


def bismut_classical(g: Field, I: Field) -> AffineConnection:
    """Bismut connection of a hermitian structure: nabla^g + 1/2 g^-1 T with T = I dw."""
    T = bismut_torsion(g, I)
    nb = levi_civita(g).plus_torsion(g, T.tensor_field())
    nb.torsion_form = T
    nb.label = "bismut"
    return nb


def bismut_with_torsion(g: Field, H: Field | KForm, sign: float = 1.0) -> AffineConnection:
    """Metric connection nabla^g + 1/2 g^-1 (sign H) with totally skew torsion sign H."""
    Hf = H.tensor_field() if isinstance(H, KForm) else H
    return levi_civita(g).plus_torsion(g, Hf, 0.5 * sign)


# generalized connections --------------------------------------------------------

def _anchor_matrix(m: int) -> np.ndarray:
    return np.hstack([np.eye(m), np.zeros((m, m))])


class GConnection:
    """Connection on TM + T*M given by matrices omega[i] (direction d_i)."""

    def __init__(self, omega: Field, h: Field | KForm | TwistForm | None = None, label: str = ""):
        m = omega.dim
        if omega.shape != (m, 2 * m, 2 * m):
            raise ValueError("generalized connection matrices must have shape (m, 2m, 2m)")
        self.dim = m
        self.omega = omega
        self.h = _as_h_field(h) if h is not None else None
        self.label = label

    # pointwise data
    def at(self, p) -> np.ndarray:
        return self.omega(p)

    def frame_derivatives(self, p) -> np.ndarray:
        """W[A] = matrix of nabla_{e_A} on the coordinate frame of TM + T*M (zero for covector A)."""
        m = self.dim
        om = self.omega(p)
        return np.concatenate([om, np.zeros((m, 2 * m, 2 * m))])

    # section level
    def derivative(self, direction: Field, s: Field) -> GSection:
        """nabla_direction s as a section field."""
        m = self.dim

        def rule(d, sj, om):
            X = d[:m]
            ds = sj.grad()  # [A, i]
            return jets.einsum("Ai,i->A", ds, X) + jets.einsum("i,iAB->AB", X, om) @ sj

        return GSection(DerivedField(rule, [direction, s, self.omega], (2 * m,)))

    def endo_derivative(self, E: Field) -> Field:
        """(nabla_i E) = d_i E + [omega_i, E] for an endomorphism field, shape (m, 2m, 2m)."""
        m = self.dim

        def rule(ej, om):
            dE = ej.grad().transpose(2, 0, 1)
            return dE + jets.einsum("iAB,BC->iAC", om, ej) - jets.einsum("AB,iBC->iAC", ej, om)

        return DerivedField(rule, [E, self.omega], (m, 2 * m, 2 * m))

    def pairing_defect(self, p) -> float:
        """max_i |Q omega_i + omega_i^T Q| (zero iff the pairing is parallel)."""
        Q = gram(self.dim)
        om = self.omega(p)
        return float(max(np.abs(Q @ w + w.T @ Q).max() for w in om))

    def curvature_matrices(self, p) -> np.ndarray:
        """R[i, j] = d_i omega_j - d_j omega_i + [omega_i, omega_j]."""
        oj = self.omega.jet(p, 1)
        om = oj.value
        d = np.moveaxis(oj.grad().value, -1, 0)  # d[i, j] = d_i omega_j
        comm = np.einsum("iab,jbc->ijac", om, om)
        return d - d.transpose(1, 0, 2, 3) + comm - comm.transpose(1, 0, 2, 3)

    def curvature(self, p, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """R(x, y) for generalized vectors x, y at p (only anchors matter)."""
        m = self.dim
        R = self.curvature_matrices(p)
        return np.einsum("i,j,ijab->ab", x[:m], y[:m], R)

    def curvature_frame(self, p) -> np.ndarray:
        """R on coordinate frame pairs, shape (2m, 2m, 2m, 2m); zero on covector slots."""
        m = self.dim
        R = self.curvature_matrices(p)
        out = np.zeros((2 * m, 2 * m, 2 * m, 2 * m))
        out[:m, :m] = R
        return out

    def twisted(self, h) -> "GConnection":
        return GConnection(self.omega, h, self.label)


def extend_to_gconnection(nabla: AffineConnection) -> GConnection:
    """blockdiag(A_i, -A_i^T): nabla on vectors and its dual on covectors."""
    m = nabla.dim

    def rule(G):
        A = G.transpose(1, 0, 2)
        z = _const(A, np.zeros((m, m, m)))
        top = jets.concatenate([A, z], axis=2)
        bot = jets.concatenate([z, -A.transpose(0, 2, 1)], axis=2)
        return jets.concatenate([top, bot], axis=1)

    return GConnection(MapField(rule, [nabla.gamma], (m, 2 * m, 2 * m)), label="extended")


def flat_gconnection(m: int) -> GConnection:
    return GConnection(ConstantField(m, np.zeros((m, 2 * m, 2 * m))), label="flat")


def block_matrices_jet(A: Jet, L: Jet, U: Jet, B: Jet) -> Jet:
    top = jets.concatenate([A, U], axis=2)
    bot = jets.concatenate([L, B], axis=2)
    return jets.concatenate([top, bot], axis=1)


# generalized torsion ------------------------------------------------------------

def torsion_frame(nabla: GConnection, p, twisted: bool = False) -> np.ndarray:
    """Generalized torsion on the coordinate frame, T[A, B, C].

    With ``twisted`` the bracket is the h-twisted Courant bracket of the connection.
    """
    m = nabla.dim
    n = 2 * m
    Q = gram(m)
    W = nabla.frame_derivatives(p)  # W[A][:, B] = nabla_{e_A} e_B
    # <nabla_A e_B, e_C> = (W[A]^T Q)[B, C]
    P = np.einsum("aDb,DC->abC", W, Q)  # P[A, B, C] = <nabla_{e_A} e_B, e_C>
    T = P - P.transpose(1, 0, 2) + 0.5 * (P.transpose(1, 2, 0) - P.transpose(2, 1, 0))
    if twisted:
        if nabla.h is None:
            raise ValueError("twisted torsion needs a twisting form")
        h = nabla.h(p)
        br = np.zeros((n, n, n))
        br[:m, :m, m:] = h
        T = T - np.einsum("abD,DC->abC", br, Q)
    return T


def torsion_sections(nabla: GConnection, x: Field, y: Field, z: Field, p, twisted: bool = False) -> float:
    """Generalized torsion evaluated on arbitrary sections through brackets and derivatives."""
    h = nabla.h if twisted else None
    if twisted and h is None:
        raise ValueError("twisted torsion needs a twisting form")
    br = courant_bracket(x, y, h)
    a = nabla.derivative(x, y)(p) - nabla.derivative(y, x)(p) - br(p)
    zx, zy = nabla.derivative(z, x)(p), nabla.derivative(z, y)(p)
    return float(pairing_values(a, z(p)) + 0.5 * (pairing_values(zx, y(p)) - pairing_values(zy, x(p))))


def skewness_residual(T: np.ndarray) -> float:
    s = max(np.abs(T + T.transpose(1, 0, 2)).max(), np.abs(T + T.transpose(0, 2, 1)).max())
    return rel(s, np.abs(T).max())


def curvature_composition(nabla: GConnection, x: Field, y: Field, s: Field, p) -> np.ndarray:
    """R(x,y)s by composing covariant derivatives (independent of the matrix formula)."""
    xy = nabla.derivative(x, nabla.derivative(y, s))
    yx = nabla.derivative(y, nabla.derivative(x, s))
    br = nabla.derivative(courant_bracket(x, y), s)
    return xy(p) - yx(p) - br(p)


# generalized Bismut connection -------------------------------------------------

def bismut_matrices_jet(gj: Jet, hj: Jet | None) -> Jet:
    """omega_i = [[Gamma_i, g^-1 C_i g^-1], [C_i, -Gamma_i^T]] with C_i[c, b] = h_{ibc}/2 (b = 0)."""
    m = gj.shape[0]
    G = christoffel_jet(gj)
    gj = gj.truncate(G.order)
    A = G.transpose(1, 0, 2)
    if hj is None:
        C = _const(A, np.zeros((m, m, m)))
    else:
        C = hj.truncate(G.order).transpose(0, 2, 1) * 0.5
    ginv = gj.inv()
    U = jets.einsum("ab,ibc->iac", ginv, jets.einsum("ibc,cd->ibd", C, ginv))
    return block_matrices_jet(A, C, U, -A.transpose(0, 2, 1))


def _bismut_unshifted(g: Field, hf: Field | None) -> Field:
    m = g.dim
    if hf is None:
        return DerivedField(lambda gj: bismut_matrices_jet(gj, None), [g], (m, 2 * m, 2 * m))
    return DerivedField(lambda gj, hj: bismut_matrices_jet(gj, hj), [g, hf], (m, 2 * m, 2 * m))


def conjugated_connection(omega: Field, E: Field) -> Field:
    """Matrices of E nabla E^-1: E omega_i E^-1 - (d_i E) E^-1."""
    m = omega.dim

    def rule(om, ej):
        einv = ej.inv()
        dE = ej.grad().transpose(2, 0, 1)
        return jets.einsum("AB,iBC->iAC", ej, jets.einsum("iAB,BC->iAC", om, einv)) \
            - jets.einsum("iAB,BC->iAC", dE, einv)

    return DerivedField(rule, [omega, E], omega.shape)


def generalized_bismut(metric: GMetric, h=None, points: Sequence | None = None) -> GConnection:
    """Generalized Bismut connection D of (g, b) twisted by a closed 3-form h.

    For b != 0 the b = 0 connection built with h + db is conjugated by e^b, which
    intertwines the h + db twisted bracket with the h twisted one.
    """
    m = metric.dim
    hf = _as_h_field(h)
    if h is not None and points is not None:
        tw = h if isinstance(h, TwistForm) else TwistForm(h) if isinstance(h, KForm) else None
        if tw is not None:
            tw.require_closed(points)
    b = metric.b
    b_zero = isinstance(b.components, ConstantField) and not np.any(b.components.value)
    if b_zero:
        return GConnection(_bismut_unshifted(metric.g, hf), hf, label="generalized-bismut")
    db = exterior_derivative(b).tensor_field()
    heff = db if hf is None else hf + db
    base = _bismut_unshifted(metric.g, heff)
    omega = conjugated_connection(base, exp_b(b))
    return GConnection(omega, hf, label="generalized-bismut")


def generalized_bismut_bracket(metric: GMetric, h, x: Field, y: Field) -> GSection:
    """D_x y from twisted Courant brackets of the C+- projections.

    D_x y = [x^-, y^+]^+ + [x^+, y^-]^- + [C x^-, y^-]^- + [C x^+, y^+]^+, with C the
    reflection X + xi -> X - xi conjugated by e^b.
    """
    m = metric.dim
    hf = _as_h_field(h)
    refl = np.diag(np.concatenate([np.ones(m), -np.ones(m)]))
    b = metric.b
    C = MapField(lambda e, f: e @ _const(e, refl) @ f, [exp_b(b), exp_b(b, -1.0)], (2 * m, 2 * m))
    Pp, Pm = metric.P_plus, metric.P_minus
    xp, xm = GSection(Pp @ x), GSection(Pm @ x)
    yp, ym = GSection(Pp @ y), GSection(Pm @ y)
    parts = [
        Pp @ courant_bracket(xm, yp, hf),
        Pm @ courant_bracket(xp, ym, hf),
        Pm @ courant_bracket(GSection(C @ xm), ym, hf),
        Pp @ courant_bracket(GSection(C @ xp), yp, hf),
    ]
    out = parts[0]
    for q in parts[1:]:
        out = out + q
    return GSection(out)


# block decomposition -----------------------------------------------------------

@dataclass
class BlockForm:
    """Blocks of omega_i in the TM + T*M splitting at one point."""

    nabla1: np.ndarray  # [i, k, j] = Gamma^k_ij
    upper_right: np.ndarray
    lower_left: np.ndarray
    nabla2: np.ndarray

    def residuals(self) -> dict:
        A = self.nabla1
        scale = 1 + max(np.abs(A).max(), np.abs(self.lower_left).max(), np.abs(self.nabla2).max())
        return {
            "upper_right": float(np.abs(self.upper_right).max()) / scale,
            "nabla1_torsion": float(np.abs(A - A.transpose(2, 1, 0)).max()) / scale,
            "nabla2_dual": float(np.abs(self.nabla2 + A.transpose(0, 2, 1)).max()) / scale,
        }


def block_decompose(nabla: GConnection, p) -> BlockForm:
    m = nabla.dim
    om = nabla.omega(p)
    return BlockForm(om[:, :m, :m], om[:, :m, m:], om[:, m:, :m], om[:, m:, m:])


def lemma_connection(gamma: Field, ell: Field) -> GConnection:
    """[[nabla1, 0], [L, dual]] with L_i[c, b] = ell[i, b, c]."""
    m = gamma.dim

    def rule(G, l):
        A = G.transpose(1, 0, 2)
        z = _const(A, np.zeros((m, m, m)))
        return block_matrices_jet(A, l.transpose(0, 2, 1), z, -A.transpose(0, 2, 1))

    return GConnection(MapField(rule, [gamma, ell], (m, 2 * m, 2 * m)), label="lemma")


def random_torsion_free(m: int, rng: np.random.Generator, degree: int = 2) -> GConnection:
    """Random generalized torsion-free pairing-compatible connection.

    nabla1 symmetric, L from a tensor skew in its last two slots with zero cyclic sum.
    """
    raw_g = random_polynomial_field(m, (m, m, m), rng, degree, 0.5)
    raw_l = random_polynomial_field(m, (m, m, m), rng, degree, 0.5)

    def sym(G):
        return (G + G.transpose(0, 2, 1)) * 0.5

    def cyclic_free(l):
        s = (l - l.transpose(0, 2, 1)) * 0.5
        cyc = (s + s.transpose(1, 2, 0) + s.transpose(2, 0, 1)) * (1.0 / 3.0)
        return s - cyc

    gamma = MapField(sym, [raw_g], (m, m, m))
    ell = MapField(cyclic_free, [raw_l], (m, m, m))
    return lemma_connection(gamma, ell)
