import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gcgeom import calculus as c
from gcgeom import connections as N
from gcgeom import courant as C
from gcgeom import structures as S
from gcgeom.catalog import hopf_hkt, hopf_metric, hopf_torsion
from gcgeom.checks import generalized_bismut_report
from gcgeom.reports import SamplePlan

seeds = st.integers(min_value=0, max_value=2**31 - 1)
HOPF_POINTS = [(1.0, 0.0, 0.0, 0.0), (0.4, -0.3, 0.8, 0.2), (-0.6, 0.5, 0.1, -0.9)]


def _conformal_christoffel(p):
    """g = exp(2f) delta with f = -log|x|."""
    p = np.asarray(p, dtype=float)
    df = -p / (p @ p)
    eye = np.eye(4)
    return np.einsum("ki,j->kij", eye, df) + np.einsum("kj,i->kij", eye, df) - np.einsum("ij,k->kij", eye, df)


def test_levi_civita_of_flat_metric_vanishes():
    lc = N.levi_civita(S.flat_metric(3))
    assert np.allclose(lc.gamma((0.3, 0.1, -2.0)), 0)


def test_levi_civita_of_hopf_metric():
    lc = N.levi_civita(hopf_metric())
    G = lc.gamma((1.0, 0.0, 0.0, 0.0))
    assert G[0, 0, 0] == pytest.approx(-1.0)
    assert G[0, 1, 1] == pytest.approx(1.0)
    assert G[1, 0, 1] == pytest.approx(-1.0)
    for p in HOPF_POINTS:
        assert np.allclose(lc.gamma(p), _conformal_christoffel(p), atol=1e-13)


def test_levi_civita_rejects_degenerate_metric():
    g = c.FormulaField(2, lambda x: [[x[0] * x[0], 0.0], [0.0, 1.0]], (2, 2))
    with pytest.raises(ValueError):
        N.levi_civita(g, points=[(0.0, 1.0)])


def test_levi_civita_is_metric_and_torsion_free(rng):
    q = S.random_quadruple(4, rng)
    lc = N.levi_civita(q.g)
    for p in c.Chart(4).sample(rng, 3):
        assert np.abs(lc.metric_derivative(q.g, p)).max() < 1e-12
        assert np.abs(lc.torsion_tensor(p)).max() < 1e-12


def test_bismut_connection_of_hopf_preserves_g_and_i():
    g = hopf_metric()
    I = c.ConstantField(4, S.quaternion_matrices("left")[0])
    nb = N.bismut_classical(g, I)
    for p in HOPF_POINTS:
        assert np.abs(nb.metric_derivative(g, p)).max() < 1e-12
        assert np.abs(nb.endo_derivative(I, p)).max() < 1e-12
        assert np.allclose(nb.torsion_form(p), hopf_torsion()(p), atol=1e-13)


def test_extension_preserves_pairing_iff_metric(rng):
    q = S.random_quadruple(4, rng)
    ext = N.extend_to_gconnection(N.levi_civita(q.g))
    p = c.Chart(4).sample(rng, 1)[0]
    assert ext.pairing_defect(p) < 1e-13
    s1, s2 = C.random_section(4, rng), C.random_section(4, rng)
    X = C.random_section(4, rng)
    lhs = np.array(C.pairing_field(s1, s2).jet(p, 1).grad().value) @ X(p)[:4]
    rhs = C.pairing(ext.derivative(X, s1), s2, p) + C.pairing(s1, ext.derivative(X, s2), p)
    assert lhs == pytest.approx(rhs, abs=1e-10)


@settings(max_examples=10, deadline=None)
@given(seeds)
def test_torsion_frame_matches_section_formula_and_is_skew(seed):
    rng = np.random.default_rng(seed)
    q = S.random_quadruple(4, rng)
    h = c.KForm.from_dict(4, 3, {(0, 1, 2): float(rng.normal()), (0, 2, 3): float(rng.normal())})
    D = N.generalized_bismut(q.metric, h)
    p = c.Chart(4).sample(rng, 1)[0]
    T = N.torsion_frame(D, p)
    assert N.skewness_residual(T) < 1e-10
    F = C.GSection.frame(4)
    for a, b, d in [(0, 1, 5), (2, 6, 7), (4, 1, 3)]:
        assert N.torsion_sections(D, F[a], F[b], F[d], p) == pytest.approx(T[a, b, d], abs=1e-10)


@settings(max_examples=10, deadline=None)
@given(seeds)
def test_torsion_is_tensorial(seed):
    rng = np.random.default_rng(seed)
    q = S.random_quadruple(4, rng, with_b=False)
    D = N.generalized_bismut(q.metric)
    x, y, z = (C.random_section(4, rng) for _ in range(3))
    f = c.random_polynomial_field(4, (), rng, 2)
    p = c.Chart(4).sample(rng, 1)[0]
    base = N.torsion_sections(D, x, y, z, p)
    fv = f(p)
    for args in ((x.scale(f), y, z), (x, y.scale(f), z), (x, y, z.scale(f))):
        assert N.torsion_sections(D, *args, p) == pytest.approx(fv * base, abs=1e-9 * (1 + abs(base)))


def test_torsion_free_lemma_connections(rng):
    for _ in range(4):
        D = N.random_torsion_free(3, rng)
        p = c.Chart(3).sample(rng, 1)[0]
        assert np.abs(N.torsion_frame(D, p)).max() < 1e-12
        res = N.block_decompose(D, p).residuals()
        assert res["upper_right"] == 0.0
        assert res["nabla1_torsion"] < 1e-13 and res["nabla2_dual"] < 1e-13


@settings(max_examples=8, deadline=None)
@given(seeds)
def test_curvature_composition_and_antisymmetry(seed):
    rng = np.random.default_rng(seed)
    q = S.random_quadruple(4, rng, with_b=False)
    D = N.generalized_bismut(q.metric)
    x, y, s = (C.random_section(4, rng) for _ in range(3))
    p = c.Chart(4).sample(rng, 1)[0]
    R = D.curvature(p, x(p), y(p))
    assert np.allclose(R @ s(p), N.curvature_composition(D, x, y, s, p), atol=1e-9)
    assert np.allclose(D.curvature(p, y(p), x(p)), -R, atol=1e-12)
    f = c.random_polynomial_field(4, (), rng, 2)
    assert np.allclose(N.curvature_composition(D, x, y, s.scale(f), p), f(p) * (R @ s(p)), atol=1e-8)
    Q = C.gram(4)
    assert np.abs(Q @ R + R.T @ Q).max() < 1e-10


def test_generalized_bismut_lower_block_on_flat_space():
    h = c.KForm.from_dict(4, 3, {(0, 1, 2): 1.0, (1, 2, 3): -0.5})
    D = N.generalized_bismut(S.GMetric(S.flat_metric(4)), h)
    p = (0.2, 0.1, 0.0, -0.3)
    blk = N.block_decompose(D, p)
    H = h(p)
    # D_{d_i} d_b has covector part 1/2 h(d_i, d_b, .)
    assert np.allclose(blk.lower_left, 0.5 * H.transpose(0, 2, 1))
    assert np.allclose(blk.nabla1, 0) and np.allclose(blk.nabla2, 0)
    # flat g: the vector part g^-1 C g^-1 repeats the covector block
    assert np.allclose(blk.upper_right, blk.lower_left)


def test_generalized_bismut_preserves_eigenbundles(rng):
    q = S.random_quadruple(4, rng)
    h = c.KForm.from_dict(4, 3, {(0, 1, 3): 0.7})
    D = N.generalized_bismut(q.metric, h)
    X = C.random_section(4, rng)
    p = c.Chart(4).sample(rng, 1)[0]
    assert D.pairing_defect(p) < 1e-12
    for sign in (1, -1):
        s = C.random_section(4, rng).apply(q.metric.projector(sign))
        out = D.derivative(X, s)(p)
        assert np.abs(q.metric.projector(-sign)(p) @ out).max() < 1e-10


def test_generalized_bismut_matches_bracket_formula():
    s = hopf_hkt()
    rep = generalized_bismut_report(s, SamplePlan(points=3))
    assert rep.passed, rep
    assert set(rep.components) >= {"bracket", "pairing"}


def test_conjugation_by_constant_identity_is_noop(rng):
    q = S.random_quadruple(4, rng, with_b=False)
    D = N.generalized_bismut(q.metric)
    E = c.ConstantField(4, np.eye(8))
    p = c.Chart(4).sample(rng, 1)[0]
    assert np.allclose(N.conjugated_connection(D.omega, E)(p), D.omega(p))
