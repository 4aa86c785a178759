"""Sections of TM + T*M, the split pairing, the (twisted) Courant bracket, b-transforms.

A generalized vector at a point is stored as the 2m-vector ``[X; xi]``.
"""

from __future__ import annotations

import numpy as np

from . import jets
from .calculus import (
    Chart,
    ChartError,
    ConstantField,
    DerivedField,
    Field,
    KForm,
    MapField,
    exterior_derivative,
    random_polynomial_field,
)
from .jets import Jet
from .reports import ResidualReport, SamplePlan, rel


def gram(m: int) -> np.ndarray:
    """Gram matrix of the pairing in the frame {d_1..d_m, dx^1..dx^m}."""
    q = np.zeros((2 * m, 2 * m))
    q[:m, m:] = 0.5 * np.eye(m)
    q[m:, :m] = 0.5 * np.eye(m)
    return q


def gram_inverse(m: int) -> np.ndarray:
    q = np.zeros((2 * m, 2 * m))
    q[:m, m:] = 2.0 * np.eye(m)
    q[m:, :m] = 2.0 * np.eye(m)
    return q


def adjoint(a):
    """Pairing adjoint Q^-1 A^T Q of an endomorphism (array or jet)."""
    m = a.shape[-1] // 2
    if isinstance(a, Jet):
        return Jet.constant(a.basis, gram_inverse(m)) @ a.T @ Jet.constant(a.basis, gram(m))
    a = np.asarray(a)
    return gram_inverse(m) @ a.T @ gram(m)


def adjoint_field(a: Field) -> Field:
    return MapField(adjoint, [a], a.shape)


class GSection(Field):
    """A section X + xi of the generalized tangent bundle."""

    def __init__(self, inner: Field):
        if len(inner.shape) != 1 or inner.shape[0] % 2:
            raise ValueError("a generalized section needs shape (2m,)")
        m = inner.shape[0] // 2
        if inner.dim != m:
            raise ChartError(f"section of length {2 * m} does not match chart dimension {inner.dim}")
        super().__init__(inner.dim, inner.shape)
        self.inner = inner

    def _jet(self, p, order):
        return self.inner.jet(p, order)

    @property
    def m(self) -> int:
        return self.dim

    @property
    def vec(self) -> Field:
        return self.inner[: self.dim]

    @property
    def form(self) -> Field:
        return self.inner[self.dim :]

    @classmethod
    def of(cls, s) -> "GSection":
        return s if isinstance(s, GSection) else cls(s)

    @classmethod
    def from_parts(cls, vec: Field | None = None, form: Field | KForm | None = None,
                   dim: int | None = None) -> "GSection":
        if isinstance(form, KForm):
            if form.degree != 1:
                raise ValueError("the form part must be a 1-form")
            form = form.components
        if dim is None:
            dim = (vec or form).dim
        vec = vec if vec is not None else ConstantField(dim, np.zeros(dim))
        form = form if form is not None else ConstantField(dim, np.zeros(dim))
        if vec.dim != form.dim:
            raise ChartError("vector and form parts live on different charts")
        if vec.shape != (dim,) or form.shape != (dim,):
            raise ValueError("parts must both have shape (m,)")
        return cls(MapField(lambda x, f: jets.concatenate([x, f]), [vec, form], (2 * dim,)))

    @classmethod
    def constant(cls, value) -> "GSection":
        value = np.asarray(value, dtype=float)
        return cls(ConstantField(value.shape[0] // 2, value))

    @classmethod
    def frame(cls, m: int) -> list["GSection"]:
        """Coordinate frame d_1..d_m, dx^1..dx^m."""
        return [cls(ConstantField(m, e)) for e in np.eye(2 * m)]

    def apply(self, endo: Field) -> "GSection":
        """Pointwise image under an endomorphism field."""
        return GSection(endo @ self.inner)

    def scale(self, f: Field) -> "GSection":
        return GSection(MapField(lambda a, s: a * s, [f, self.inner], self.shape))

    def plus(self, other: Field) -> "GSection":
        return GSection(self.inner + other)

    def minus(self, other: Field) -> "GSection":
        return GSection(self.inner - other)


def random_section(m: int, rng: np.random.Generator, degree: int = 2, scale: float = 1.0) -> GSection:
    return GSection(random_polynomial_field(m, (2 * m,), rng, degree, scale))


def _check_same(s1: Field, s2: Field):
    if s1.dim != s2.dim or s1.shape != s2.shape:
        raise ChartError("sections live on different charts")


def pairing_values(a, b):
    """Pointwise pairing of two 2m-vectors (arrays or jets)."""
    m = a.shape[-1] // 2
    return ((a[:m] * b[m:]).sum() + (a[m:] * b[:m]).sum()) * 0.5


def pairing(s1: Field, s2: Field, p) -> float:
    _check_same(s1, s2)
    return float(pairing_values(np.asarray(s1(p)), np.asarray(s2(p))))


def pairing_field(s1: Field, s2: Field) -> Field:
    _check_same(s1, s2)
    return MapField(pairing_values, [s1, s2], ())


class TwistForm:
    """A 3-form used to twist the bracket, with its sampled closedness verdict."""

    def __init__(self, h: KForm, points=None, tolerance: float = 1e-10):
        if h.degree != 3:
            raise ValueError("twisting form must have degree 3")
        self.h = h
        self.dim = h.dim
        self.closed_residual = None
        self.closed_flag = None
        if points is not None:
            self.closed_residual = closedness_residual(h, points)
            self.closed_flag = self.closed_residual <= tolerance

    def tensor_field(self) -> Field:
        return self.h.tensor_field()

    def require_closed(self, points, tolerance: float = 1e-9) -> None:
        res = closedness_residual(self.h, points)
        self.closed_residual, self.closed_flag = res, res <= tolerance
        if not self.closed_flag:
            raise ValueError(f"twisting form is not closed (|dh| = {res:.3e})")


def closedness_residual(w: KForm, points) -> float:
    if w.degree >= w.dim:
        return 0.0
    dw = exterior_derivative(w)
    worst = 0.0
    for p in points:
        worst = max(worst, rel(np.max(np.abs(dw.components(p))), np.max(np.abs(w.components(p)))))
    return worst


def _as_h_field(h) -> Field | None:
    if h is None:
        return None
    if isinstance(h, TwistForm):
        return h.tensor_field()
    if isinstance(h, KForm):
        if h.degree != 3:
            raise ValueError("twisting form must have degree 3")
        return h.tensor_field()
    if isinstance(h, Field):
        return h
    raise TypeError("unsupported twisting form")


def _half_bracket(a: Jet, b: Jet) -> Jet:
    """Part of the bracket whose antisymmetrisation gives the untwisted bracket."""
    m = a.shape[0] // 2
    X, Y, eta = a[:m], b[:m], b[m:]
    vec = jets.einsum("ij,j->i", Y.grad(), X)
    # (L_X eta)_i - 1/2 d_i(eta(X))
    form = jets.einsum("ik,k->i", eta.grad(), X) + jets.einsum("ki,k->i", X.grad(), eta)
    form = form - (X * eta).sum().grad() * 0.5
    return jets.concatenate([vec, form])


def courant_bracket_jet(a: Jet, b: Jet, h: Jet | None = None) -> Jet:
    """Courant bracket of two section jets; the output has one order less.

    Written as P(a,b) - P(b,a) so that swapping the arguments negates the
    result exactly in floating point.
    """
    out = _half_bracket(a, b) - _half_bracket(b, a)
    if h is not None:
        m = a.shape[0] // 2
        X, Y = a[:m], b[:m]
        tw = (twist_term(X, Y, h) - twist_term(Y, X, h)) * 0.5
        out = out + jets.concatenate([Jet.constant(tw.basis, np.zeros(m)), tw])
    return out


def twist_term(X: Jet, Y: Jet, h: Jet) -> Jet:
    """i_Y i_X h as a covector jet."""
    return jets.einsum("l,lj->j", Y, jets.einsum("k,klj->lj", X, h))


def dorfman_bracket_jet(a: Jet, b: Jet, h: Jet | None = None) -> Jet:
    """Non-skew Dorfman bracket: the Courant bracket plus d<a,b>."""
    out = courant_bracket_jet(a, b, h)
    m = a.shape[0] // 2
    corr = pairing_values(a, b).grad()
    zero = Jet.constant(corr.basis, np.zeros(m))
    return out + jets.concatenate([zero, corr])


def courant_bracket(s1: Field, s2: Field, h=None) -> GSection:
    """[s1, s2] (or [s1, s2]_h) as a re-differentiable section field."""
    _check_same(s1, s2)
    hf = _as_h_field(h)
    if hf is None:
        return GSection(DerivedField(courant_bracket_jet, [s1, s2], s1.shape))
    if hf.dim != s1.dim:
        raise ChartError("twisting form lives on a different chart")

    def rule(a, b, hj):
        return courant_bracket_jet(a, b, hj.truncate(a.order - 1))

    return GSection(DerivedField(rule, [s1, s2, hf], s1.shape))


def dorfman_bracket(s1: Field, s2: Field, h=None) -> GSection:
    _check_same(s1, s2)
    hf = _as_h_field(h)
    if hf is None:
        return GSection(DerivedField(dorfman_bracket_jet, [s1, s2], s1.shape))

    def rule(a, b, hj):
        return dorfman_bracket_jet(a, b, hj.truncate(a.order - 1))

    return GSection(DerivedField(rule, [s1, s2, hf], s1.shape))


# b-transforms ------------------------------------------------------------------

def _b_tensor_field(b) -> Field:
    if isinstance(b, KForm):
        if b.degree != 2:
            raise ValueError("b-transform needs a 2-form")
        return b.tensor_field()
    if isinstance(b, Field) and len(b.shape) == 2:
        return b
    raise ValueError("b-transform needs a 2-form")


def exp_b_jet(bt: Jet, sign: float = 1.0) -> Jet:
    """Matrix of X + xi -> X + xi + sign * i_X b from the full tensor b_ij."""
    m = bt.shape[0]
    eye = Jet.constant(bt.basis, np.eye(m))
    zero = Jet.constant(bt.basis, np.zeros((m, m)))
    return jets.block([[eye, zero], [bt.T * sign, eye]])


def exp_b(b, sign: float = 1.0) -> Field:
    """e^{sign b} as a (2m, 2m) endomorphism field."""
    bf = _b_tensor_field(b)
    m = bf.dim
    return MapField(lambda t: exp_b_jet(t, sign), [bf], (2 * m, 2 * m))


def b_transform(b, s: Field, sign: float = 1.0) -> GSection:
    return GSection(exp_b(b, sign) @ s)


def conjugate_endo(b, a: Field) -> Field:
    """e^b A e^{-b} pointwise."""
    return exp_b(b) @ a @ exp_b(b, -1.0)


def bracket_automorphism_defect(b, s1: Field, s2: Field, p, h=None) -> np.ndarray:
    """e^b[s1,s2]_h - [e^b s1, e^b s2]_h at p."""
    lhs = b_transform(b, courant_bracket(s1, s2, h))
    rhs = courant_bracket(b_transform(b, s1), b_transform(b, s2), h)
    return lhs(p) - rhs(p)


def bracket_automorphism_residual(b, plan: SamplePlan | None = None, chart: Chart | None = None,
                                  random_pairs: int = 4) -> ResidualReport:
    """Worst normalised bracket-automorphism defect of e^b over frame and random section pairs."""
    plan = plan or SamplePlan()
    bf = _b_tensor_field(b)
    m = bf.dim
    chart = chart or Chart(m)
    rng = plan.rng(101)
    points = chart.sample(rng, plan.points)
    frame = GSection.frame(m)
    pairs = [(f"e{i}", f"e{j}", frame[i], frame[j]) for i in range(m) for j in range(i + 1, m)]
    for k in range(random_pairs):
        pairs.append((f"r{k}a", f"r{k}b", random_section(m, rng), random_section(m, rng)))
    report = ResidualReport("bracket-automorphism", tolerance=plan.tolerance)
    eb = exp_b(bf)
    for la, lb, s1, s2 in pairs:
        lhs = GSection(eb @ courant_bracket(s1, s2))
        rhs = courant_bracket(GSection(eb @ s1), GSection(eb @ s2))
        for p in points:
            diff = lhs(p) - rhs(p)
            scale = max(np.linalg.norm(s1(p)), np.linalg.norm(s2(p)))
            report.update(rel(np.linalg.norm(diff), scale), point=p, sections=[la, lb],
                          raw=float(np.linalg.norm(diff)))
    return report
