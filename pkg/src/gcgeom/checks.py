"""Named checks run against catalog structures (shared by the CLI and the test suites)."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .calculus import (
    Chart,
    FormulaField,
    KForm,
    coordinate_lie_derivative,
    exterior_derivative,
    lie_bracket,
    lie_derivative_form,
    random_form,
    random_polynomial_field,
)
from .catalog import Structure
from .connections import (
    bismut_classical,
    bismut_with_torsion,
    block_decompose,
    curvature_composition,
    generalized_bismut,
    generalized_bismut_bracket,
    random_torsion_free,
    skewness_residual,
    torsion_frame,
)
from .courant import GSection, bracket_automorphism_residual, courant_bracket, random_section
from .integrability import (
    check_generalized_hyperkahler,
    check_hkt,
    curvature_type_residual,
    torsion_type_residual,
)
from .reports import ResidualReport, SamplePlan, rel
from .structures import GKQuadruple, route_agreement
from .twistor import (
    TwistorSpace,
    chart_independence_residual,
    lift_parallel_residual,
    lifted_bracket_residuals,
    vertical_bracket_residuals,
    rotation_invariance_residual,
    theorem_a_verdict,
    twistor_nijenhuis_direct,
)


def _points(s: Structure, plan: SamplePlan, salt: int) -> np.ndarray:
    return s.chart.sample(plan.rng(salt), plan.points)


# structure-independent identities -----------------------------------------------------

def calculus_identities(dim: int, plan: SamplePlan, chart: Chart | None = None) -> ResidualReport:
    """d^2 = 0, the Cartan formula against the coordinate Lie derivative, and Jacobi."""
    chart = chart or Chart(dim)
    rng = plan.rng(201)
    rep = ResidualReport("calculus-identities", tolerance=plan.tolerance)
    parts = {k: ResidualReport(k, tolerance=plan.tolerance) for k in ("d^2", "cartan", "jacobi")}
    for p in chart.sample(rng, plan.points):
        k = int(rng.integers(0, dim - 1))
        w = random_form(dim, k, rng)
        ddw = exterior_derivative(exterior_derivative(w))(p)
        parts["d^2"].update(rel(np.abs(ddw).max(), np.abs(w(p)).max()), point=p, degree=k)
        k = int(rng.integers(1, dim))
        w = random_form(dim, k, rng)
        X = random_polynomial_field(dim, (dim,), rng)
        ref = coordinate_lie_derivative(X, w, p)
        got = lie_derivative_form(X, w).tensor_field()(p)
        parts["cartan"].update(rel(np.abs(got - ref).max(), np.abs(ref).max()), point=p, degree=k)
        X, Y, Z = (random_polynomial_field(dim, (dim,), rng) for _ in range(3))
        br = lie_bracket
        jac = br(X, br(Y, Z))(p) + br(Y, br(Z, X))(p) + br(Z, br(X, Y))(p)
        scale = max(np.abs(F(p)).max() for F in (X, Y, Z))
        parts["jacobi"].update(rel(np.abs(jac).max(), scale ** 3), point=p)
    for k, r in parts.items():
        rep.absorb(r, k)
    return rep


def courant_algebra(dim: int, h: KForm | None, plan: SamplePlan, chart: Chart | None = None) -> ResidualReport:
    """Exact skew-symmetry and [a,b]_h - [a,b] = i_Y i_X h on random sections."""
    chart = chart or Chart(dim)
    rng = plan.rng(202)
    if h is None:
        h = exterior_derivative(random_form(dim, 2, rng))
    ht = h.tensor_field()
    rep = ResidualReport("courant-algebra", tolerance=plan.tolerance)
    skew = ResidualReport("skew", tolerance=0.0)
    twist = ResidualReport("twist", tolerance=plan.tolerance)
    for p in chart.sample(rng, plan.points):
        a, b = random_section(dim, rng), random_section(dim, rng)
        ab, ba = courant_bracket(a, b)(p), courant_bracket(b, a)(p)
        skew.update(np.abs(ab + ba).max(), point=p)
        diff = courant_bracket(a, b, h)(p) - ab
        X, Y = a(p)[:dim], b(p)[:dim]
        ref = np.einsum("i,j,ijk->k", X, Y, ht(p))
        err = max(np.abs(diff[:dim]).max(), np.abs(diff[dim:] - ref).max())
        twist.update(rel(err, np.abs(ref).max()), point=p)
    rep.absorb(skew, "skew")
    rep.absorb(twist, "twist")
    rep.tolerance = plan.tolerance
    if skew.max_residual > 0.0:
        rep.max_residual = np.inf
    return rep


def lemma_blocks(dim: int, plan: SamplePlan, count: int = 10) -> ResidualReport:
    """Block form of random torsion-free pairing-compatible connections."""
    rng = plan.rng(203)
    chart = Chart(dim)
    rep = ResidualReport("lemma-blocks", tolerance=plan.tolerance)
    for trial in range(count):
        nabla = random_torsion_free(dim, rng)
        for p in chart.sample(rng, max(1, plan.points // 4)):
            res = block_decompose(nabla, p).residuals()
            T = torsion_frame(nabla, p)
            res["torsion"] = rel(np.abs(T).max(), np.abs(nabla.omega(p)).max())
            for k, v in res.items():
                rep.update(v, point=p, trial=trial, part=k)
    return rep


def bismut_shift_block(s: Structure, plan: SamplePlan) -> ResidualReport:
    """Off-diagonal blocks of the generalized Bismut matrices: C_i and g^-1 C_i g^-1, C_i = h_i/2."""
    rep = ResidualReport("bismut-blocks", tolerance=plan.tolerance)
    m = s.dim
    h = s.h
    if h is None:
        h = KForm.from_dict(m, 3, {(0, 1, 2): 1.0})
    D = generalized_bismut(type(s.metric)(s.metric.g), h)
    ht = h.tensor_field()
    for p in _points(s, plan, 204):
        om = D.omega(p)
        gi = np.linalg.inv(s.metric.g(p))
        C = 0.5 * ht(p).transpose(0, 2, 1)  # C_i[c, b] = h_{ibc}/2
        lower = om[:, m:, :m]
        upper = om[:, :m, m:]
        err = max(np.abs(lower - C).max(), np.abs(upper - gi @ C @ gi).max())
        rep.update(rel(err, np.abs(C).max()), point=p)
        if np.abs(C).max() == 0.0:
            rep.update(np.inf, point=p, reason="expected a nonzero block")
    return rep


# structure checks ------------------------------------------------------------------

def bracket_automorphism(s: Structure, plan: SamplePlan) -> ResidualReport:
    return bracket_automorphism_residual(s.metric.b, plan, s.chart)


def generalized_metric(s: Structure, plan: SamplePlan) -> ResidualReport:
    rep = s.metric.check(_points(s, plan, 205))
    rep.tolerance = plan.tolerance
    return rep


def gcs_routes(s: Structure, plan: SamplePlan) -> ResidualReport:
    rep = ResidualReport("gcs-routes", tolerance=plan.tolerance)
    if s.triples is None:
        return rep
    pts = _points(s, plan, 206)
    for a, c in zip(*s.triples):
        rep.absorb(route_agreement(GKQuadruple(s.metric.g, a, c, s.metric.b), pts))
    rep.tolerance = plan.tolerance
    return rep


def bismut_classical_report(s: Structure, plan: SamplePlan) -> ResidualReport:
    """nabla^B g = 0, nabla^B I = 0 and torsion(nabla^B) = I dw for each left structure."""
    rep = ResidualReport("bismut-classical", tolerance=plan.tolerance)
    if s.triples is None:
        return rep
    g = s.metric.g
    for name, I in zip("IJK", s.triples[0]):
        nb = bismut_classical(g, I)
        T = nb.torsion_form.tensor_field()
        for p in _points(s, plan, 207):
            gp = g(p)
            scale = np.abs(nb.gamma(p)).max()
            rep.update(rel(np.abs(nb.metric_derivative(g, p)).max(), scale * np.abs(gp).max()),
                       point=p, structure=name, part="metric")
            rep.update(rel(np.abs(nb.endo_derivative(I, p)).max(), scale), point=p, structure=name, part="complex")
            tor = np.einsum("lk,lij->ijk", gp, nb.torsion_tensor(p))  # lowered on the last slot
            rep.update(rel(np.abs(tor - T(p)).max(), np.abs(T(p)).max()), point=p, structure=name, part="torsion")
    return rep


def generalized_bismut_report(s: Structure, plan: SamplePlan) -> ResidualReport:
    """Matrix form against the bracket form, DG = 0, pairing compatibility, and D+- = Bismut(+-H)."""
    metric, h = s.metric, s.h
    m = s.dim
    D = generalized_bismut(metric, h)
    rep = ResidualReport("prop11-agreement", tolerance=plan.tolerance)
    parts = {k: ResidualReport(k, tolerance=plan.tolerance) for k in ("bracket", "DG", "pairing", "D+-")}
    frame = GSection.frame(m)
    pts = _points(s, plan, 208)
    H = exterior_derivative(metric.b).tensor_field()
    if h is not None:
        H = h.tensor_field() + H
    dG = D.endo_derivative(metric.G)
    rng = plan.rng(209)
    pairs = [(frame[a], frame[b]) for a in range(m) for b in range(2 * m)]
    pairs += [(random_section(m, rng), random_section(m, rng)) for _ in range(2)]
    brackets = [(x, y, generalized_bismut_bracket(metric, h, x, y), D.derivative(x, y)) for x, y in pairs]
    conn = {sign: bismut_with_torsion(metric.g, H, sign) for sign in (1.0, -1.0)}
    for p in pts:
        om = D.omega(p)
        scale = np.abs(om).max()
        for _, _, a, b in brackets:
            va, vb = a(p), b(p)
            parts["bracket"].update(rel(np.abs(va - vb).max(), np.abs(vb).max() + scale), point=p)
        parts["DG"].update(rel(np.abs(dG(p)).max(), scale), point=p)
        parts["pairing"].update(rel(D.pairing_defect(p), scale), point=p)
        for sign, nb in conn.items():
            pi = metric.graph_map(sign)
            pj = pi.jet(p, 1)
            piv, dpi = pj.value, np.moveaxis(pj.grad().value, -1, 0)
            A = nb.gamma(p).transpose(1, 0, 2)
            err = np.einsum("iAB,Bj->iAj", om, piv) + dpi - np.einsum("Ak,ikj->iAj", piv, A)
            parts["D+-"].update(rel(np.abs(err).max(), scale), point=p, sign=sign)
    for k, r in parts.items():
        rep.absorb(r, k)
    return rep


def torsion_skewness(s: Structure, plan: SamplePlan) -> ResidualReport:
    rep = ResidualReport("torsion-skewness", tolerance=plan.tolerance)
    D = s.connection
    for p in _points(s, plan, 210):
        for twisted in ((False, True) if D.h is not None else (False,)):
            rep.update(skewness_residual(torsion_frame(D, p, twisted)), point=p, twisted=twisted)
    return rep


def curvature_tensoriality(s: Structure, plan: SamplePlan) -> ResidualReport:
    """R(fx, y)s = R(x, fy)s = R(x, y)(fs) = f R(x, y)s with f = x1."""
    rep = ResidualReport("curvature-tensoriality", tolerance=plan.tolerance)
    D = s.connection
    m = s.dim
    rng = plan.rng(211)
    f = FormulaField(m, lambda x: x[0])
    x, y, z = (random_section(m, rng, scale=0.5) for _ in range(3))
    fx, fy, fz = (GSection(sec * f) for sec in (x, y, z))
    for p in _points(s, plan, 212)[:max(2, plan.points // 4)]:
        base = curvature_composition(D, x, y, z, p)
        ref = p[0] * base
        scale = np.abs(base).max()
        for name, val in (("x", curvature_composition(D, fx, y, z, p)),
                          ("y", curvature_composition(D, x, fy, z, p)),
                          ("s", curvature_composition(D, x, y, fz, p))):
            rep.update(rel(np.abs(val - ref).max(), scale), point=p, slot=name)
        mat = D.curvature(p, x(p), y(p)) @ z(p)
        rep.update(rel(np.abs(mat - base).max(), scale), point=p, slot="matrix")
    return rep


def generalized_hyperkahler(s: Structure, plan: SamplePlan) -> ResidualReport:
    pts = _points(s, plan, 213)[:max(2, plan.points // 2)]
    return check_generalized_hyperkahler(s.metric, s.frame, s.h, plan, s.chart, pts)


def hkt(s: Structure, plan: SamplePlan) -> ResidualReport:
    if s.triples is None:
        return ResidualReport("hkt", tolerance=plan.tolerance)
    pts = _points(s, plan, 214)[:max(2, plan.points // 2)]
    return check_hkt(s.metric.g, *s.triples[0], plan, s.chart, pts)


def torsion_type(s: Structure, plan: SamplePlan) -> ResidualReport:
    return torsion_type_residual(s.connection, s.frame, plan, s.chart, _points(s, plan, 17))


def curvature_type(s: Structure, plan: SamplePlan) -> ResidualReport:
    return curvature_type_residual(s.connection, s.frame, plan, s.chart, _points(s, plan, 17))


def twistor_nijenhuis(s: Structure, plan: SamplePlan) -> ResidualReport:
    tw = TwistorSpace(s.connection, s.frame, s.chart, plan.orientation)
    return twistor_nijenhuis_direct(tw, _points(s, plan, 17), plan)


def twistor_closed_forms(s: Structure, plan: SamplePlan) -> ResidualReport:
    """Direct Nijenhuis blocks against their closed forms (the residual is the worst mismatch)."""
    tw = TwistorSpace(s.connection, s.frame, s.chart, plan.orientation)
    full = twistor_nijenhuis_direct(tw, _points(s, plan, 17)[:max(2, plan.points // 4)], plan)
    rep = ResidualReport("twistor-closed-forms", tolerance=plan.tolerance)
    for k, v in full.components.items():
        if "closed-form" in k or k in ("d:vertical-pair", "c:vertical-form-horizontal"):
            rep.update(v, part=k)
            rep.components[k] = v
    return rep


def twistor_brackets(s: Structure, plan: SamplePlan) -> ResidualReport:
    """Lift parallelism, vertical bracket identities, the lifted-bracket split and invariances."""
    tw = TwistorSpace(s.connection, s.frame, s.chart, plan.orientation)
    rng = plan.rng(215)
    m = s.dim
    rep = ResidualReport("twistor-brackets", tolerance=plan.tolerance)
    parts = {k: ResidualReport(k, tolerance=plan.tolerance)
             for k in ("lift", "lift-vertical", "J-lift-vertical", "lift-bracket", "chart", "rotation")}
    theta = 0.9
    R = np.array([[1, 0, 0], [0, np.cos(theta), -np.sin(theta)], [0, np.sin(theta), np.cos(theta)]])
    for x in _points(s, plan, 216)[:max(2, plan.points // 4)]:
        n = rng.standard_normal(3)
        n /= np.linalg.norm(n)
        if tw.chart.pole == "north" and n[2] < 0:
            n = -n
        w = dict(point=x, u=n)
        parts["lift"].update(lift_parallel_residual(tw, x, n), **w)
        s1, s2 = random_section(m, rng), random_section(m, rng)
        A = tw.vertical_section(random_polynomial_field(m + 2, (2,), rng))
        vb = vertical_bracket_residuals(tw, s1, A, x, n)
        parts["lift-vertical"].update(vb["lift-vertical"], **w)
        parts["J-lift-vertical"].update(vb["J-lift-vertical"], **w)
        lb = lifted_bracket_residuals(tw, s1, s2, x, n)
        parts["lift-bracket"].update(rel(max(lb["horizontal"], lb["vertical"], lb["vertical-dual"]),
                                         lb["scale"]), **w)
        parts["chart"].update(chart_independence_residual(tw, x, n), **w)
        parts["rotation"].update(rotation_invariance_residual(tw, R, x, n), **w)
    for k, r in parts.items():
        rep.absorb(r, k)
    return rep


def theorem_a(s: Structure, plan: SamplePlan) -> ResidualReport:
    res = theorem_a_verdict(s.connection, s.frame, plan, s.chart, _points(s, plan, 17))
    rep = ResidualReport("theoremA", tolerance=plan.tolerance)
    rep.absorb(res.torsion_type, "C1")
    rep.absorb(res.curvature_type, "C2")
    rep.absorb(res.direct, "direct")
    rep.witness = dict(rep.witness, failing=res.failing(), agree=res.agree, orientation=res.orientation)
    return rep


# registry -----------------------------------------------------------------------------

@dataclass(frozen=True)
class Check:
    name: str
    anchor: str
    run: Callable[[Structure, SamplePlan], ResidualReport]


CHECKS: dict[str, Check] = {c.name: c for c in (
    Check("bismut-classical", "Bismut connection preserves g and I with torsion I dw",
          bismut_classical_report),
    Check("bismut-blocks", "generalized Bismut off-diagonal blocks are h/2 and its g-raised form",
          bismut_shift_block),
    Check("bracket-automorphism", "e^b preserves the Courant bracket iff b is closed", bracket_automorphism),
    Check("C1", "torsion-type condition on the generalized torsion", torsion_type),
    Check("C2", "curvature-type condition on the generalized curvature", curvature_type),
    Check("calculus-identities", "d^2 = 0, Cartan formula and Jacobi identity",
          lambda s, plan: calculus_identities(s.dim, plan, s.chart)),
    Check("courant-algebra", "Courant bracket skew-symmetry and the i_Y i_X h twist",
          lambda s, plan: courant_algebra(s.dim, s.h, plan, s.chart)),
    Check("curvature-tensoriality", "generalized curvature is a tensor", curvature_tensoriality),
    Check("gcs-routes", "generalized Kahler pair from bihermitian data by two constructions", gcs_routes),
    Check("generalized-hyperkahler", "integrability of the generalized hyperkahler frame",
          generalized_hyperkahler),
    Check("generalized-metric", "generalized metric squares to the identity with definite eigenbundles",
          generalized_metric),
    Check("hkt", "hyperkahler-with-torsion condition on the left structures", hkt),
    Check("lemma-blocks", "block form of torsion-free pairing-compatible connections",
          lambda s, plan: lemma_blocks(s.dim, plan)),
    Check("prop11-agreement", "generalized Bismut connection: bracket form against matrix form",
          generalized_bismut_report),
    Check("theoremA", "twistor structure integrable iff torsion- and curvature-type conditions hold",
          theorem_a),
    Check("torsion-skewness", "generalized torsion is totally skew", torsion_skewness),
    Check("twistor-brackets", "lifted brackets, vertical bracket identities and invariance of the twistor structure",
          twistor_brackets),
    Check("twistor-closed-forms", "twistor Nijenhuis blocks against their curvature and torsion closed forms",
          twistor_closed_forms),
    Check("twistor-nijenhuis", "direct Nijenhuis tensor of the twistor structure", twistor_nijenhuis),
)}


def check_names() -> list[str]:
    return sorted(CHECKS)


def run_check(name: str, s: Structure, plan: SamplePlan) -> tuple[ResidualReport, float]:
    if name not in CHECKS:
        raise KeyError(f"unknown check {name!r}")
    start = time.perf_counter()
    rep = CHECKS[name].run(s, plan)
    return rep, (time.perf_counter() - start) * 1000.0
