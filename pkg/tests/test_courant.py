import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from gcgeom import calculus as c
from gcgeom import courant as C
from gcgeom.reports import SamplePlan

seeds = st.integers(min_value=0, max_value=2**31 - 1)


def test_pairing_examples():
    F = C.GSection.frame(3)
    p = (0.1, 0.2, 0.3)
    assert C.pairing(F[0], F[3], p) == pytest.approx(0.5)
    s = C.GSection(F[0] + F[3])
    assert C.pairing(s, s, p) == pytest.approx(1.0)
    X = C.GSection.from_parts(vec=c.vector_field(3, lambda x: [x[0], 1.0, x[2]]))
    Y = C.GSection.from_parts(vec=c.vector_field(3, lambda x: [x[1], 0.0, 2.0]))
    assert C.pairing(X, Y, p) == 0.0


def test_pairing_chart_mismatch():
    with pytest.raises(c.ChartError):
        C.pairing(C.GSection.frame(2)[0], C.GSection.frame(3)[0], (0.0, 0.0))


def test_gram_signature_is_split():
    for m in (1, 2, 4):
        ev = np.linalg.eigvalsh(C.gram(m))
        assert (ev > 0).sum() == m and (ev < 0).sum() == m


def test_bracket_of_d1_with_x1_dx2():
    F = C.GSection.frame(3)
    s = C.GSection.from_parts(form=c.FormulaField(3, lambda x: [0.0, x[0], 0.0], (3,)))
    out = C.courant_bracket(F[0], s)((0.3, -0.2, 0.7))
    assert np.allclose(out, [0, 0, 0, 0, 1, 0])


def test_twisted_bracket_of_coordinate_vectors():
    F = C.GSection.frame(3)
    h = c.KForm.from_dict(3, 3, {(0, 1, 2): 1.0})
    assert np.allclose(C.courant_bracket(F[0], F[1], h)((0.0, 0.0, 0.0)), [0, 0, 0, 0, 0, 1])
    with pytest.raises(ValueError):
        C.courant_bracket(F[0], F[1], c.KForm.zero(3, 2))


def test_bracket_matches_symbolic_expansion(rng):
    m = 2
    x = sp.symbols("x0:2")
    s1 = C.random_section(m, rng)
    s2 = C.random_section(m, rng)

    def sym(field):
        return [sum(float(cf[i]) * sp.Mul(*[x[v] for v in mono]) for mono, cf in zip(field.inner.monomials, field.inner.coef))
                for i in range(2 * m)]

    a, b = sym(s1), sym(s2)
    X, xi, Y, eta = a[:m], a[m:], b[:m], b[m:]
    vec = [sum(X[j] * sp.diff(Y[i], x[j]) - Y[j] * sp.diff(X[i], x[j]) for j in range(m)) for i in range(m)]

    def lie_form(V, w):
        return [sum(V[j] * sp.diff(w[i], x[j]) + w[j] * sp.diff(V[j], x[i]) for j in range(m)) for i in range(m)]

    fn = sum(X[k] * eta[k] - Y[k] * xi[k] for k in range(m))
    LX, LY = lie_form(X, eta), lie_form(Y, xi)
    form = [LX[i] - LY[i] - sp.Rational(1, 2) * sp.diff(fn, x[i]) for i in range(m)]
    p = rng.uniform(-1, 1, m)
    ref = [float(e.subs(dict(zip(x, p)))) for e in vec + form]
    assert np.allclose(C.courant_bracket(s1, s2)(p), ref, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_bracket_skew_and_self_bracket_zero(seed):
    rng = np.random.default_rng(seed)
    s1, s2 = C.random_section(3, rng), C.random_section(3, rng)
    p = rng.uniform(-1, 1, 3)
    assert np.array_equal(C.courant_bracket(s1, s2)(p), -C.courant_bracket(s2, s1)(p))
    assert np.max(np.abs(C.courant_bracket(s1, s1)(p))) <= 1e-12


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_twist_adds_contraction(seed):
    rng = np.random.default_rng(seed)
    m = 3
    s1, s2 = C.random_section(m, rng), C.random_section(m, rng)
    h = c.random_form(m, 3, rng)
    p = rng.uniform(-1, 1, m)
    diff = C.courant_bracket(s1, s2, h)(p) - C.courant_bracket(s1, s2)(p)
    X, Y = s1(p)[:m], s2(p)[:m]
    ref = np.einsum("k,l,klj->j", X, Y, h(p))
    assert np.max(np.abs(diff[:m])) == 0.0
    assert np.max(np.abs(diff[m:] - ref)) <= 1e-12 * (1 + np.abs(ref).max())


def test_dorfman_differs_by_exact_term(rng):
    m = 2
    s1, s2 = C.random_section(m, rng), C.random_section(m, rng)
    p = rng.uniform(-1, 1, m)
    diff = C.dorfman_bracket(s1, s2)(p) - C.courant_bracket(s1, s2)(p)
    grad = C.pairing_field(s1, s2).jet(p, 1).grad().value
    assert np.allclose(diff, np.concatenate([np.zeros(m), grad]))


def test_b_transform_example_and_degree_check():
    b = c.KForm.from_dict(3, 2, {(0, 1): 1.0})
    F = C.GSection.frame(3)
    assert np.allclose(C.b_transform(b, F[0])((0.0, 0.0, 0.0)), [1, 0, 0, 0, 1, 0])
    with pytest.raises(ValueError):
        C.b_transform(c.KForm.zero(3, 1), F[0])


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_b_transform_is_isometry_and_invertible(seed):
    rng = np.random.default_rng(seed)
    m = 3
    b = c.random_form(m, 2, rng)
    s1, s2 = C.random_section(m, rng), C.random_section(m, rng)
    p = rng.uniform(-1, 1, m)
    t1, t2 = C.b_transform(b, s1), C.b_transform(b, s2)
    assert C.pairing(t1, t2, p) == pytest.approx(C.pairing(s1, s2, p), abs=1e-12)
    back = C.b_transform(b, t1, sign=-1.0)
    assert np.allclose(back(p), s1(p), atol=1e-12)


def test_conjugate_endo_matches_matrix_product(rng):
    m = 2
    b = c.random_form(m, 2, rng)
    A = c.ConstantField(m, rng.standard_normal((4, 4)))
    p = rng.uniform(-1, 1, m)
    eb = C.exp_b(b)(p)
    assert np.allclose(C.conjugate_endo(b, A)(p), eb @ A(p) @ np.linalg.inv(eb))


def test_adjoint_against_pairing(rng):
    A = rng.standard_normal((6, 6))
    u, v = rng.standard_normal(6), rng.standard_normal(6)
    assert C.pairing_values(A @ u, v) == pytest.approx(C.pairing_values(u, C.adjoint(A) @ v))


@pytest.mark.parametrize("entries", [{(0, 1): 1.0}, {(0, 2): 2.0, (1, 2): -0.5},
                                     {(0, 1): lambda x: x[2]}])  # last one is non-closed in 3D
def test_bracket_automorphism_iff_closed(entries):
    b = c.KForm.from_dict(3, 2, entries)
    rep = C.bracket_automorphism_residual(b, SamplePlan(points=6, seed=3))
    closed = C.closedness_residual(b, [np.array([0.1, 0.2, 0.3])]) == 0.0
    assert rep.passed == closed


def test_bracket_defect_equals_minus_contraction_of_db():
    b = c.KForm.from_dict(3, 2, {(0, 2): lambda x: x[1]})
    F = C.GSection.frame(3)
    defect = C.bracket_automorphism_defect(b, F[0], F[2], (0.0, 0.0, 0.0))
    db = c.exterior_derivative(b)((0.0, 0.0, 0.0))
    ref = -np.einsum("k,l,klj->j", np.eye(3)[0], np.eye(3)[2], db)
    assert np.allclose(defect, np.concatenate([np.zeros(3), ref]))
    assert np.allclose(defect[3:], [0.0, -1.0, 0.0])


def test_zero_b_is_automorphism():
    rep = C.bracket_automorphism_residual(c.KForm.zero(3, 2), SamplePlan(points=4))
    assert rep.max_residual == 0.0


def test_twist_form_closedness(rng):
    closed = C.TwistForm(c.KForm.from_dict(4, 3, {(0, 1, 2): 1.0}), points=[(0.1, 0.2, 0.3, 0.4)])
    assert closed.closed_flag
    bad = C.TwistForm(c.KForm.from_dict(4, 3, {(0, 1, 2): lambda x: x[3]}))
    with pytest.raises(ValueError):
        bad.require_closed([(0.1, 0.2, 0.3, 0.4)])
    with pytest.raises(ValueError):
        C.TwistForm(c.KForm.zero(4, 2))
