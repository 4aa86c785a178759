"""Integrability functionals: Nijenhuis tensors, the torsion and curvature type conditions,
and the generalized Kähler / HKT / generalized hyperkähler checks."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .calculus import Chart, Field, KForm, MapField, exterior_derivative
from .connections import GConnection, bismut_torsion, torsion_frame
from .courant import _as_h_field, courant_bracket, gram
from .reports import ResidualReport, SamplePlan, fibonacci_sphere, rel
from .structures import GMetric, QuatFrame, hermitian_form


def _points(plan: SamplePlan, chart: Chart | None, dim: int, salt: int) -> np.ndarray:
    chart = chart or Chart(dim)
    return chart.sample(plan.rng(salt), plan.points)


def _opnorm(a: np.ndarray) -> float:
    return float(np.linalg.norm(a, 2))


# pointwise bracket on value/derivative data ----------------------------------------

def bracket_values(a, da, b, db, h=None):
    """Courant bracket from values a (..., 2m) and first partials da (..., 2m, m).

    ``da[..., A, i]`` is the i-th partial of component A; arrays broadcast.
    """
    m = da.shape[-1]
    X, xi, Y, eta = a[..., :m], a[..., m:], b[..., :m], b[..., m:]
    dX, dxi, dY, deta = da[..., :m, :], da[..., m:, :], db[..., :m, :], db[..., m:, :]
    vec = np.einsum("...j,...ij->...i", X, dY) - np.einsum("...j,...ij->...i", Y, dX)

    def half(V, dV, w, dw):
        return (np.einsum("...k,...ik->...i", V, dw) - 0.5 * np.einsum("...k,...ki->...i", V, dw)
                + 0.5 * np.einsum("...k,...ki->...i", w, dV))

    form = half(X, dX, eta, deta) - half(Y, dY, xi, dxi)
    if h is not None:
        form = form + 0.5 * (np.einsum("...k,...l,kli->...i", X, Y, h) - np.einsum("...k,...l,kli->...i", Y, X, h))
    return np.concatenate([vec, form], axis=-1)


def endo_jet_data(J: Field, p) -> tuple[np.ndarray, np.ndarray]:
    """Value J (n, n) and partials dJ (n, n, m) at p."""
    j = J.jet(p, 1)
    return j.value, j.grad().value


def nijenhuis_frame_values(Jv: np.ndarray, dJ: np.ndarray, h: np.ndarray | None = None) -> np.ndarray:
    """Generalized Nijenhuis tensor on coordinate frame pairs, N[A, B] in R^{2m}."""
    n = Jv.shape[0]
    eye = np.eye(n)
    zero = np.zeros((n, n, dJ.shape[-1]))
    # section e_A: value eye[A], derivative 0 ; section J e_A: value J[:, A], derivative dJ[:, A, :]
    cols = Jv.T  # cols[A] = J e_A
    dcols = dJ.transpose(1, 0, 2)  # dcols[A] = d(J e_A)
    JA, dJA = cols[:, None, :], dcols[:, None, :, :]
    JB, dJB = cols[None, :, :], dcols[None, :, :, :]
    EA, EB = eye[:, None, :], eye[None, :, :]
    dE = zero[:, None, :, :]
    t1 = bracket_values(JA, dJA, JB, dJB, h)
    t2 = bracket_values(JA, dJA, EB, dE, h)
    t3 = bracket_values(EA, dE, JB, dJB, h)
    t4 = bracket_values(EA, dE, EB, dE, h)
    return t1 - np.einsum("ij,abj->abi", Jv, t2 + t3) - t4


def nijenhuis_generalized(J: Field, h, s1: Field, s2: Field, p) -> np.ndarray:
    """N_h(s1, s2) at p from four twisted Courant brackets of section fields."""
    hf = _as_h_field(h)
    Js1, Js2 = J @ s1, J @ s2
    out = courant_bracket(Js1, Js2, hf)(p)
    out = out - J(p) @ (courant_bracket(Js1, s2, hf)(p) + courant_bracket(s1, Js2, hf)(p))
    return out - courant_bracket(s1, s2, hf)(p)


def is_generalized_complex(J: Field, h=None, plan: SamplePlan | None = None, chart: Chart | None = None,
                           points: Sequence | None = None) -> ResidualReport:
    plan = plan or SamplePlan()
    hf = _as_h_field(h)
    if points is None:
        points = _points(plan, chart, J.dim, 301)
    rep = ResidualReport("generalized-nijenhuis", tolerance=plan.tolerance)
    for p in points:
        Jv, dJ = endo_jet_data(J, p)
        hv = hf(p) if hf is not None else None
        N = nijenhuis_frame_values(Jv, dJ, hv)
        norms = np.linalg.norm(N, axis=-1)
        a, b = np.unravel_index(np.argmax(norms), norms.shape)
        scale = np.abs(Jv).max() ** 2 * (np.abs(dJ).max() + (np.abs(hv).max() if hv is not None else 0.0))
        rep.update(rel(norms[a, b], scale), point=p, sections=[int(a), int(b)])
    return rep


def classical_nijenhuis(J: Field, p) -> np.ndarray:
    """N[k, i, j] of an endomorphism field of TM on coordinate vectors."""
    Jv, dJ = endo_jet_data(J, p)
    # dJ[k, j, l] = d_l J^k_j
    a = np.einsum("li,kjl->kij", Jv, dJ) - np.einsum("lj,kil->kij", Jv, dJ)
    b = np.einsum("kl,lji->kij", Jv, dJ) - np.einsum("kl,lij->kij", Jv, dJ)
    return a - b


# type conditions --------------------------------------------------------------------

def torsion_type_combination(T: np.ndarray, u: np.ndarray) -> np.ndarray:
    """T(X,Y,Z) - T(X,uY,uZ) - T(uX,Y,uZ) - T(uX,uY,Z) on frame triples."""
    t1 = np.einsum("aDE,Db,Ec->abc", T, u, u)
    t2 = np.einsum("DbE,Da,Ec->abc", T, u, u)
    t3 = np.einsum("DEc,Da,Eb->abc", T, u, u)
    return T - t1 - t2 - t3


def dot(A: np.ndarray, u: np.ndarray) -> np.ndarray:
    """A.u = uA - Au (batched over leading axes of A)."""
    return u @ A - A @ u


def curvature_type_combination(R: np.ndarray, u: np.ndarray) -> np.ndarray:
    """(R(X^Y - uX^uY) + u R(uX^Y + X^uY)).u on frame pairs; R has shape (n, n, n, n)."""
    Ruu = np.einsum("DEij,Da,Eb->abij", R, u, u)
    RuX = np.einsum("Dbij,Da->abij", R, u)
    RuY = np.einsum("aEij,Eb->abij", R, u)
    M = R - Ruu + np.einsum("ik,abkj->abij", u, RuX + RuY)
    return dot(M, u)


def sphere_parameters(plan: SamplePlan) -> np.ndarray:
    return fibonacci_sphere(plan.fiber_samples, poles=True)


def _frame_values(frame: QuatFrame, p) -> np.ndarray:
    return frame.at(p)


def torsion_type_residual(nabla: GConnection, frame: QuatFrame, plan: SamplePlan | None = None,
                          chart: Chart | None = None, points: Sequence | None = None,
                          twisted: bool | None = None) -> ResidualReport:
    """Condition (C1) over frame triples, sampled points and sampled u on the sphere.

    ``twisted=None`` uses the twisted bracket exactly when the connection carries h.
    """
    plan = plan or SamplePlan()
    if points is None:
        points = _points(plan, chart, nabla.dim, 302)
    if twisted is None:
        twisted = nabla.h is not None
    rep = ResidualReport("torsion-type", tolerance=plan.tolerance)
    abc = sphere_parameters(plan)
    for p in points:
        T = torsion_frame(nabla, p, twisted)
        E = _frame_values(frame, p)
        scale = np.abs(T).max()
        for v in abc:
            u = np.einsum("a,aij->ij", v, E)
            comb = torsion_type_combination(T, u)
            idx = np.unravel_index(np.argmax(np.abs(comb)), comb.shape)
            rep.update(rel(abs(comb[idx]), scale), point=p, u=v, sections=[int(i) for i in idx])
    return rep


def curvature_type_residual(nabla: GConnection, frame: QuatFrame, plan: SamplePlan | None = None,
                            chart: Chart | None = None, points: Sequence | None = None) -> ResidualReport:
    """Condition (C2): operator norm of the combination over frame pairs, points and sampled u."""
    plan = plan or SamplePlan()
    if points is None:
        points = _points(plan, chart, nabla.dim, 303)
    rep = ResidualReport("curvature-type", tolerance=plan.tolerance)
    abc = sphere_parameters(plan)
    for p in points:
        R = nabla.curvature_frame(p)
        E = _frame_values(frame, p)
        scale = np.abs(R).max()
        for v in abc:
            u = np.einsum("a,aij->ij", v, E)
            comb = curvature_type_combination(R, u)
            norms = np.linalg.norm(comb, ord=2, axis=(-2, -1))
            a, b = np.unravel_index(np.argmax(norms), norms.shape)
            rep.update(rel(norms[a, b], scale), point=p, u=v, sections=[int(a), int(b)])
    return rep


# classical structure checks ---------------------------------------------------------

def torsion_of(g: Field, J: Field) -> KForm:
    """J dw_J, i.e. dw(J., J., J.)."""
    return bismut_torsion(g, J)


def three_form_type(T: np.ndarray, J: np.ndarray) -> np.ndarray:
    return torsion_type_combination(T, J)


def check_generalized_kahler(g: Field, b: KForm | None, J_plus: Field, J_minus: Field, h=None,
                             plan: SamplePlan | None = None, chart: Chart | None = None,
                             points: Sequence | None = None) -> ResidualReport:
    """Integrability of J+-, the equality h + db = J+ dw+ = -J- dw-, and the type of that torsion."""
    plan = plan or SamplePlan()
    m = g.dim
    if points is None:
        points = _points(plan, chart, m, 304)
    hf = _as_h_field(h)
    dbf = exterior_derivative(b).tensor_field() if b is not None else None
    Tp = torsion_of(g, J_plus).tensor_field()
    Tm = torsion_of(g, J_minus).tensor_field()
    parts = {k: ResidualReport(k, tolerance=plan.tolerance)
             for k in ("nijenhuis J+", "nijenhuis J-", "h+db = J+dw+", "h+db = -J-dw-", "type J+", "type J-")}
    for p in points:
        tp, tm = Tp(p), Tm(p)
        hv = np.zeros((m, m, m)) if hf is None else hf(p)
        if dbf is not None:
            hv = hv + dbf(p)
        scale = max(np.abs(tp).max(), np.abs(tm).max(), np.abs(hv).max())
        for key, J in (("nijenhuis J+", J_plus), ("nijenhuis J-", J_minus)):
            Jv, dJ = endo_jet_data(J, p)
            parts[key].update(rel(np.abs(classical_nijenhuis(J, p)).max(), np.abs(Jv).max() ** 2 * np.abs(dJ).max()),
                              point=p)
        parts["h+db = J+dw+"].update(rel(np.abs(hv - tp).max(), scale), point=p)
        parts["h+db = -J-dw-"].update(rel(np.abs(hv + tm).max(), scale), point=p)
        parts["type J+"].update(rel(np.abs(three_form_type(tp, J_plus(p))).max(), scale), point=p)
        parts["type J-"].update(rel(np.abs(three_form_type(tp, J_minus(p))).max(), scale), point=p)
    rep = ResidualReport("generalized-kahler", tolerance=plan.tolerance)
    for k, r in parts.items():
        rep.absorb(r, k)
    return rep


def quaternion_residual(I: np.ndarray, J: np.ndarray, K: np.ndarray) -> float:
    eye = np.eye(I.shape[0])
    errs = [I @ J - K, J @ I + K, I @ I + eye, J @ J + eye, K @ K + eye]
    return rel(max(_opnorm(e) for e in errs), max(_opnorm(I), _opnorm(J), _opnorm(K)) ** 2)


def check_hkt(g: Field, I: Field, J: Field, K: Field, plan: SamplePlan | None = None,
              chart: Chart | None = None, points: Sequence | None = None) -> ResidualReport:
    """Pairwise residuals of I dw_I, J dw_J, K dw_K."""
    plan = plan or SamplePlan()
    m = g.dim
    if points is None:
        points = _points(plan, chart, m, 305)
    for p in points:
        if quaternion_residual(I(p), J(p), K(p)) > 1e-9:
            raise ValueError(f"(I, J, K) violates the quaternion relations at {tuple(p)}")
    Ts = [torsion_of(g, E).tensor_field() for E in (I, J, K)]
    rep = ResidualReport("hkt", tolerance=plan.tolerance)
    names = ("I", "J", "K")
    pairs = [(0, 1), (1, 2), (0, 2)]
    subs = {f"{names[a]}dw-{names[b]}dw": ResidualReport("pair", tolerance=plan.tolerance) for a, b in pairs}
    for p in points:
        vals = [T(p) for T in Ts]
        scale = max(np.abs(v).max() for v in vals)
        for a, b in pairs:
            subs[f"{names[a]}dw-{names[b]}dw"].update(rel(np.abs(vals[a] - vals[b]).max(), scale), point=p)
    for k, r in subs.items():
        rep.absorb(r, k)
    return rep


# generalized hyperkähler --------------------------------------------------------------

def induced_structures(metric: GMetric, U: Field) -> tuple[Field, Field]:
    """(U+, U-) on TM with U+- = pi U pi+-^-1."""
    m = metric.dim

    def rule(u, inv):
        return u[:m, :] @ inv

    return (MapField(rule, [U, metric.pi_plus_inv], (m, m)),
            MapField(rule, [U, metric.pi_minus_inv], (m, m)))


def check_generalized_hyperkahler(metric: GMetric, frame: QuatFrame, h=None, plan: SamplePlan | None = None,
                                  chart: Chart | None = None, points: Sequence | None = None,
                                  direct_nijenhuis: bool = True) -> ResidualReport:
    """Quaternion relations, commutation with G, generalized Kähler for each element, T+ = -T-, dT = 0."""
    plan = plan or SamplePlan()
    m = metric.dim
    if points is None:
        points = _points(plan, chart, m, 306)
    rep = ResidualReport("generalized-hyperkahler", tolerance=plan.tolerance)
    quat = ResidualReport("quaternion", tolerance=plan.tolerance)
    comm = ResidualReport("commute-G", tolerance=plan.tolerance)
    for p in points:
        I, J, K = frame.at(p)
        quat.update(quaternion_residual(I, J, K), point=p)
        G = metric.G(p)
        comm.update(rel(max(_opnorm(E @ G - G @ E) for E in (I, J, K)), _opnorm(G) * _opnorm(I)), point=p)
    rep.absorb(quat, "quaternion relations")
    rep.absorb(comm, "commute with G")
    names = ("I", "J", "K")
    torsions = []
    for name, U in zip(names, frame.elements):
        Up, Um = induced_structures(metric, U)
        sub = check_generalized_kahler(metric.g, metric.b, Up, Um, h, plan, points=points)
        rep.absorb(sub, f"kahler {name}")
        torsions.append((torsion_of(metric.g, Up), torsion_of(metric.g, Um)))
        if direct_nijenhuis:
            GU = metric.G @ U
            rep.absorb(is_generalized_complex(U, h, plan, points=points), f"nijenhuis {name}")
            rep.absorb(is_generalized_complex(GU, h, plan, points=points), f"nijenhuis G{name}")
    tpm = ResidualReport("T+=-T-", tolerance=plan.tolerance)
    strong = ResidualReport("dT=0", tolerance=plan.tolerance)
    for Tp, Tm in torsions:
        dTp = exterior_derivative(Tp)
        for p in points:
            a, b = Tp.components(p), Tm.components(p)
            tpm.update(rel(np.abs(a + b).max(), max(np.abs(a).max(), np.abs(b).max())), point=p)
            strong.update(rel(np.abs(dTp.components(p)).max(), np.abs(a).max()), point=p)
    rep.absorb(tpm, "T+ = -T-")
    rep.absorb(strong, "strong (dT = 0)")
    return rep
