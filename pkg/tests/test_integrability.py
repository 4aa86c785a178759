import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gcgeom import calculus as c
from gcgeom import connections as N
from gcgeom import courant as C
from gcgeom import integrability as G
from gcgeom import structures as S
from gcgeom.catalog import flat_hyperkahler, frame_rotation, hopf_metric, hopf_torsion
from gcgeom.reports import SamplePlan

seeds = st.integers(min_value=0, max_value=2**31 - 1)
PLAN = SamplePlan(points=4)
HOPF_CHART = c.Chart(4, excluded_radius=0.3)


def _const_triple(side):
    return [c.ConstantField(4, a) for a in S.quaternion_matrices(side)]


def _hopf_j1():
    Ip, Im = _const_triple("left")[0], _const_triple("right")[0]
    return S.gcs_from_quadruple(S.GKQuadruple(hopf_metric(), Ip, Im), 1)


def test_constant_structures_are_integrable():
    J = c.ConstantField(4, S.quaternion_matrices("left")[0])
    assert G.is_generalized_complex(S.complex_type(J), plan=PLAN).max_residual == 0.0
    w = c.KForm.from_dict(4, 2, {(0, 1): 1.0, (2, 3): 2.0})
    assert G.is_generalized_complex(S.symplectic_type(w), plan=PLAN).max_residual == 0.0


def test_b_transform_of_complex_type_stays_integrable():
    # no (3,0)-forms in real dimension 4, so any b keeps a complex type integrable
    J1 = S.complex_type(c.ConstantField(4, S.quaternion_matrices("left")[0]))
    b = c.KForm.from_dict(4, 2, {(0, 2): lambda x: x[1]})
    assert G.is_generalized_complex(C.conjugate_endo(b, J1), plan=PLAN).passed


def test_b_transform_integrability_follows_db():
    J1 = S.symplectic_type(c.KForm.from_dict(4, 2, {(0, 1): 1.0, (2, 3): 1.0}))
    closed = c.KForm.from_dict(4, 2, {(0, 1): 0.5, (1, 3): -1.0})
    assert G.is_generalized_complex(C.conjugate_endo(closed, J1), plan=PLAN).passed
    b = c.KForm.from_dict(4, 2, {(0, 2): lambda x: x[1]})
    Jb = C.conjugate_endo(b, J1)
    assert not G.is_generalized_complex(Jb, plan=PLAN).passed
    assert G.is_generalized_complex(Jb, -c.exterior_derivative(b), plan=PLAN).passed


def test_hopf_structure_needs_its_twist():
    J1 = _hopf_j1()
    assert G.is_generalized_complex(J1, hopf_torsion(), PLAN, HOPF_CHART).passed
    rep = G.is_generalized_complex(J1, None, PLAN, HOPF_CHART)
    assert rep.max_residual > 1e-3


def test_frame_nijenhuis_matches_section_brackets(rng):
    q = S.random_quadruple(4, rng)
    J = S.gcs_from_quadruple(q, 1)
    h = c.KForm.from_dict(4, 3, {(0, 1, 2): 0.3})
    p = c.Chart(4).sample(rng, 1)[0]
    Jv, dJ = G.endo_jet_data(J, p)
    table = G.nijenhuis_frame_values(Jv, dJ, h(p))
    F = C.GSection.frame(4)
    for a, b in [(0, 1), (2, 5), (6, 7)]:
        assert np.allclose(G.nijenhuis_generalized(J, h, F[a], F[b], p), table[a, b], atol=1e-10)


@settings(max_examples=8, deadline=None)
@given(seeds)
def test_generalized_nijenhuis_is_tensorial(seed):
    rng = np.random.default_rng(seed)
    J = S.gcs_from_quadruple(S.random_quadruple(4, rng), 2)
    h = c.KForm.from_dict(4, 3, {(1, 2, 3): float(rng.normal())})
    s1, s2 = C.random_section(4, rng), C.random_section(4, rng)
    f = c.random_polynomial_field(4, (), rng, 2)
    p = c.Chart(4).sample(rng, 1)[0]
    base = G.nijenhuis_generalized(J, h, s1, s2, p)
    scaled = G.nijenhuis_generalized(J, h, s1.scale(f), s2, p)
    assert np.allclose(scaled, f(p) * base, atol=1e-8 * (1 + np.abs(base).max()))


def test_classical_nijenhuis_agrees_with_complex_type(rng):
    q = S.random_quadruple(4, rng, with_b=False)
    p = c.Chart(4).sample(rng, 1)[0]
    Ncl = G.classical_nijenhuis(q.J_plus, p)
    assert np.abs(Ncl).max() > 1e-3
    Jv, dJ = G.endo_jet_data(S.complex_type(q.J_plus), p)
    table = G.nijenhuis_frame_values(Jv, dJ)
    assert np.allclose(table[:4, :4, :4], Ncl.transpose(1, 2, 0), atol=1e-10)


@settings(max_examples=10, deadline=None)
@given(seeds)
def test_type_combinations_are_even_in_u(seed):
    rng = np.random.default_rng(seed)
    frame = S.generalized_frame_from_tm(*_const_triple("left"))
    v = rng.standard_normal(3)
    v /= np.linalg.norm(v)
    u = np.einsum("a,aij->ij", v, frame.at((0.0,) * 4))
    T = rng.standard_normal((8, 8, 8))
    assert np.allclose(G.torsion_type_combination(T, u), G.torsion_type_combination(T, -u))
    R = rng.standard_normal((8, 8, 8, 8))
    a = np.linalg.norm(G.curvature_type_combination(R, u), 2, axis=(-2, -1))
    b = np.linalg.norm(G.curvature_type_combination(R, -u), 2, axis=(-2, -1))
    assert np.allclose(a, b)


def test_type_conditions_on_flat_connection():
    frame = S.generalized_frame_from_tm(*_const_triple("left"))
    D = N.flat_gconnection(4)
    plan = SamplePlan(points=2, fiber_samples=8)
    assert G.torsion_type_residual(D, frame, plan).max_residual == 0.0
    assert G.curvature_type_residual(D, frame, plan).max_residual == 0.0


def test_torsion_type_detects_rotated_frame():
    s = frame_rotation(flat_hyperkahler())
    rep = G.torsion_type_residual(s.connection, s.frame, SamplePlan(points=2, fiber_samples=8))
    assert rep.max_residual > 1e-2
    assert len(rep.witness["u"]) == 3 and len(rep.witness["sections"]) == 3


def test_generalized_kahler_check_on_hopf():
    Ip, Im = _const_triple("left")[0], _const_triple("right")[0]
    g = hopf_metric()
    rep = G.check_generalized_kahler(g, None, Ip, Im, hopf_torsion(), PLAN, HOPF_CHART)
    assert rep.passed, rep
    bad = G.check_generalized_kahler(g, None, Ip, Im, None, PLAN, HOPF_CHART)
    assert not bad.passed
    assert bad.components["nijenhuis J+"] < 1e-12


def test_hkt_on_hopf_and_quaternion_guard():
    g = hopf_metric()
    for side in ("left", "right"):
        I, J, K = _const_triple(side)
        assert G.check_hkt(g, I, J, K, PLAN, HOPF_CHART).passed
    I, J, K = _const_triple("left")
    with pytest.raises(ValueError):
        G.check_hkt(g, I, J, -K, PLAN, HOPF_CHART)


def test_generalized_hyperkahler_on_hopf():
    g = hopf_metric()
    metric = S.GMetric(g)
    frame = S.QuatFrame(*[S.gcs_from_quadruple(S.GKQuadruple(g, a, b), 1)
                          for a, b in zip(_const_triple("left"), _const_triple("right"))])
    plan = SamplePlan(points=3)
    rep = G.check_generalized_hyperkahler(metric, frame, hopf_torsion(), plan, HOPF_CHART)
    assert rep.passed, rep
    assert not G.check_generalized_hyperkahler(metric, frame, None, plan, HOPF_CHART).passed
