import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from gcgeom import calculus as c
from gcgeom import courant as C
from gcgeom import structures as S
from gcgeom.catalog import hopf_metric
from gcgeom.reports import SamplePlan

seeds = st.integers(min_value=0, max_value=2**31 - 1)


def _points(rng, m, count=4):
    return c.Chart(m).sample(rng, count)


def test_flat_generalized_metric_is_swap():
    gm = S.GMetric(S.flat_metric(2))
    G = gm.G((0.3, -0.1))
    assert np.allclose(G, [[0, 0, 1, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, 1, 0, 0]])


def test_flat_projectors_and_graphs():
    gm = S.GMetric(S.flat_metric(2))
    p = (0.0, 0.0)
    Pp, Pm = gm.P_plus(p), gm.P_minus(p)
    assert np.allclose(Pp + Pm, np.eye(4))
    assert np.allclose(Pp @ Pm, 0)
    X = np.array([1.0, 2.0])
    assert np.allclose(gm.pi_plus_inv(p) @ X, [1, 2, 1, 2])
    assert np.allclose(gm.pi_minus_inv(p) @ X, [1, 2, -1, -2])


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_generalized_metric_invariants(seed):
    rng = np.random.default_rng(seed)
    q = S.random_quadruple(4, rng)
    rep = q.metric.check(_points(rng, 4))
    assert rep.passed, rep


def test_degenerate_metric_rejected():
    g = c.FormulaField(2, lambda x: [[x[0], 0.0], [0.0, 1.0]], (2, 2))
    with pytest.raises(ValueError):
        S.make_gmetric(g, points=[(0.0, 0.5)])
    S.make_gmetric(g, points=[(1.0, 0.5)])


def test_complex_type_block_form():
    J = c.ConstantField(2, [[0.0, -1.0], [1.0, 0.0]])
    J1 = S.complex_type(J)((0.0, 0.0))
    assert np.allclose(J1[:2, :2], J.value)
    assert np.allclose(J1[2:, 2:], -J.value.T)
    assert np.allclose(J1[:2, 2:], 0) and np.allclose(J1[2:, :2], 0)
    assert S.validate_gcs(S.complex_type(J), SamplePlan(points=3)).passed


def test_symplectic_type_block_form():
    w = c.KForm.from_dict(2, 2, {(0, 1): 1.0})
    J = S.symplectic_type(w)((0.0, 0.0))
    flat = w((0.0, 0.0)).T
    assert np.allclose(J[2:, :2], flat)
    assert np.allclose(J[:2, 2:], -np.linalg.inv(flat))
    assert S.validate_gcs(S.symplectic_type(w), SamplePlan(points=3)).passed


def test_equal_structures_give_symplectic_j2():
    J = c.ConstantField(2, [[0.0, -1.0], [1.0, 0.0]])
    g = S.flat_metric(2)
    q = S.GKQuadruple(g, J, J)
    p = (0.2, 0.4)
    J1 = S.gcs_from_quadruple(q, 1)(p)
    J2 = S.gcs_from_quadruple(q, 2)(p)
    assert np.allclose(J1, S.complex_type(J)(p))
    w = S.hermitian_form(g, J)(p)
    assert np.allclose(J2[:2, :2], 0) and np.allclose(J2[2:, 2:], 0)
    assert np.allclose(J2[2:, :2], w.T)


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_quadruple_structures_multiply_to_metric(seed):
    rng = np.random.default_rng(seed)
    q = S.random_quadruple(4, rng)
    J1, J2 = S.gcs_from_quadruple(q, 1), S.gcs_from_quadruple(q, 2)
    for p in _points(rng, 4, 3):
        a, b, G = J1(p), J2(p), q.metric.G(p)
        assert np.allclose(-a @ b, G, atol=1e-9)
        assert np.allclose(a @ b, b @ a, atol=1e-9)
        for J in (a, b):
            sq, sk = S.gcs_residuals(J)
            assert sq < 1e-10 and sk < 1e-10
    assert S.route_agreement(q, _points(rng, 4, 3)).max_residual < 1e-10


def test_validate_gcs_rejects_generalized_metric():
    gm = S.GMetric(S.flat_metric(2))
    rep = S.validate_gcs(gm.G, SamplePlan(points=2))
    assert not rep.passed
    assert rep.components["J^2+Id"] > 0.1


def test_hermitian_form_of_standard_plane():
    J = c.ConstantField(2, [[0.0, -1.0], [1.0, 0.0]])
    w = S.hermitian_form(S.flat_metric(2), J)
    assert np.allclose(w.components((0.5, 0.5)), [1.0])


def test_hermitian_form_rejects_incompatible_j():
    J = c.ConstantField(2, [[0.0, -2.0], [0.5, 0.0]])
    with pytest.raises(ValueError):
        S.hermitian_form(S.flat_metric(2), J, points=[(0.0, 0.0)])


def test_hopf_hermitian_form_matches_symbolic():
    x = sp.symbols("x0:4")
    r2 = sum(v**2 for v in x)
    I = S.quaternion_matrices("left")[0]
    sym = sp.Matrix(4, 4, lambda i, j: sp.Integer(int(I[j, i])) / r2)
    f = sp.lambdify(x, sym)
    w = S.hermitian_form(hopf_metric(), c.ConstantField(4, I))
    for p in [(1.0, 0.0, 0.0, 0.0), (0.3, -0.7, 0.2, 0.5)]:
        assert np.allclose(w(p), np.array(f(*p), dtype=float), atol=1e-14)


def test_quaternion_matrices_relations():
    for side in ("left", "right"):
        I, J, K = S.quaternion_matrices(side)
        assert S.QuatFrame(*(c.ConstantField(4, a) for a in (I, J, K))).relation_residual((0,) * 4) < 1e-15
    Il, Jl, _ = S.quaternion_matrices("left")
    Ir, Jr, _ = S.quaternion_matrices("right")
    assert np.allclose(Il @ Ir, Ir @ Il) and np.allclose(Jl @ Ir, Ir @ Jl)


def test_sphere_element_is_complex_and_requires_unit_vector():
    I, J, K = (c.ConstantField(4, a) for a in S.quaternion_matrices("left"))
    frame = S.generalized_frame_from_tm(I, J, K)
    u = S.sphere_element(frame, (0.6, 0.0, 0.8))((0.0,) * 4)
    assert np.allclose(u @ u, -np.eye(8))
    with pytest.raises(ValueError):
        S.sphere_element(frame, (1.0, 1.0, 0.0))
    with pytest.raises(TypeError):
        S.generalized_frame_from_tm(np.eye(4), J, K)


@settings(max_examples=20, deadline=None)
@given(st.floats(-np.pi, np.pi), st.floats(0.0, np.pi))
def test_sphere_elements_square_to_minus_one(phi, theta):
    I, J, K = (c.ConstantField(4, a) for a in S.quaternion_matrices("right"))
    frame = S.generalized_frame_from_tm(I, J, K)
    v = (np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta))
    u = S.sphere_element(frame, v)((0.1, 0.2, 0.3, 0.4))
    assert np.allclose(u @ u, -np.eye(8), atol=1e-12)


def test_frame_rotation_preserves_relations(rng):
    I, J, K = (c.ConstantField(4, a) for a in S.quaternion_matrices("left"))
    frame = S.generalized_frame_from_tm(I, J, K)
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    R = q * np.sign(np.linalg.det(q))
    assert frame.rotated(R).relation_residual((0.0,) * 4) < 1e-12


def test_eigenbundle_signature():
    rng = np.random.default_rng(3)
    q = S.random_quadruple(4, rng)
    p = _points(rng, 4, 1)[0]
    Q = C.gram(4)
    for sign in (1, -1):
        P = q.metric.projector(sign)(p)
        s = P @ rng.standard_normal(8)
        assert sign * (s @ Q @ s) > 0
        pi = q.metric.graph_map(sign)(p)
        X = rng.standard_normal(4)
        assert np.allclose(P @ (pi @ X), pi @ X, atol=1e-10)
