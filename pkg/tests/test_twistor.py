import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gcgeom import calculus as c
from gcgeom import connections as N
from gcgeom import courant as C
from gcgeom import twistor as T
from gcgeom.catalog import flat_hyperkahler, frame_rotation, hopf_hkt
from gcgeom.reports import SamplePlan

X_HOPF = np.array([0.7, -0.4, 0.5, 0.3])
N_SAMPLE = np.array([0.48, -0.6, 0.64])


@pytest.fixture(scope="module")
def hopf():
    return hopf_hkt()


@pytest.fixture(scope="module")
def hopf_tw(hopf):
    return T.TwistorSpace(hopf.connection, hopf.frame, hopf.chart)


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.sampled_from(T.POLES))
def test_stereographic_round_trip(s, t, pole):
    ch = T.TwistorChart(c.Chart(4), pole)
    n = np.array(ch.embed(s, t))
    assert np.linalg.norm(n) == pytest.approx(1.0)
    assert np.allclose(ch.fiber_coords(n), [s, t], atol=1e-9 * (1 + s * s + t * t))


def test_excluded_pole_and_chart_choice():
    north = T.TwistorChart(c.Chart(4), "north")
    with pytest.raises(ValueError):
        north.fiber_coords((0.0, 0.0, -1.0))
    assert np.allclose(north.fiber_coords((0.0, 0.0, 1.0)), 0)
    assert T.TwistorChart.best_for((0.0, 0.6, -0.8)) == "south"
    assert T.TwistorChart.best_for((0.6, 0.0, 0.8)) == "north"
    with pytest.raises(ValueError):
        T.TwistorChart(c.Chart(4), "east")


def test_cross_matrix(rng):
    n, w = rng.standard_normal(3), rng.standard_normal(3)
    assert np.allclose(T.cross_matrix(n) @ w, np.cross(n, w))


def test_frame_coefficients_recover_sphere_point(hopf):
    E = hopf.frame.at(X_HOPF)
    u = np.einsum("a,aij->ij", N_SAMPLE, E)
    assert np.allclose(T.frame_coefficients(E, u), N_SAMPLE)


def test_connection_form_of_flat_structure_vanishes():
    s = flat_hyperkahler()
    cf = T.connection_form(s.connection, s.frame, points=[np.zeros(4)])
    assert np.allclose(cf.w(np.array([0.1, 0.2, 0.3, 0.4])), 0)


def test_connection_form_reconstructs_frame_derivatives(hopf):
    cf = T.connection_form(hopf.connection, hopf.frame, points=[X_HOPF])
    assert cf.preservation_residual(X_HOPF) < 1e-12
    assert cf.reconstruction_residual(X_HOPF) < 1e-12
    for a, form in enumerate((cf.alpha, cf.beta, cf.gamma)):
        assert np.allclose(form.components(X_HOPF), cf.w(X_HOPF)[:, a])


def test_connection_form_rejects_non_preserving_connection(rng):
    s = flat_hyperkahler()
    # not hermitian for the constant triple
    g = c.FormulaField(4, lambda x: [[(1.0 + x[0] * x[0] if i == j == 0 else float(i == j)) for j in range(4)]
                                     for i in range(4)], (4, 4))
    D = N.extend_to_gconnection(N.levi_civita(g))
    with pytest.raises(ValueError):
        T.connection_form(D, s.frame, points=[np.array([0.5, 0.2, 0.1, 0.0])])


@pytest.mark.parametrize("orientation", ["right", "left"])
@pytest.mark.parametrize("pole", T.POLES)
def test_twistor_structure_is_generalized_almost_complex(hopf, orientation, pole):
    tw = T.TwistorSpace(hopf.connection, hopf.frame, T.TwistorChart(hopf.chart, pole), orientation)
    n = N_SAMPLE if pole == "north" else -N_SAMPLE
    res = tw.validate(tw.point(X_HOPF, n))
    assert res["square"] < 1e-12 and res["skew"] < 1e-12


def test_twistor_space_argument_checks(hopf):
    with pytest.raises(ValueError):
        T.TwistorSpace(hopf.connection, hopf.frame, hopf.chart, "up")


def test_horizontal_lift_keeps_u_parallel(hopf_tw):
    assert T.lift_parallel_residual(hopf_tw, X_HOPF, N_SAMPLE) < 1e-12


def test_lift_matches_brute_force_transport():
    s = frame_rotation(flat_hyperkahler())
    direction = np.array([0.3, 0.1, -0.2, 0.4])
    n_u, n_lift = T.brute_force_transport(s.connection, s.frame, X_HOPF, direction, N_SAMPLE, 0.5, 100)
    assert np.allclose(n_u, n_lift, atol=1e-9)
    assert not np.allclose(n_lift, N_SAMPLE, atol=1e-3)


def test_lifted_section_has_projected_anchor(hopf_tw, rng):
    s = C.random_section(4, rng)
    p = hopf_tw.point(X_HOPF, N_SAMPLE)
    lifted = hopf_tw.horizontal_lift(s)(p)
    base = s(X_HOPF)
    assert np.allclose(lifted[:4], base[:4])
    assert np.allclose(lifted[6:10], base[4:])


def test_vertical_bracket_identities(hopf_tw, rng):
    s = C.random_section(4, rng)
    A = hopf_tw.vertical_section(c.random_polynomial_field(6, (2,), rng))
    res = T.vertical_bracket_residuals(hopf_tw, s, A, X_HOPF, N_SAMPLE)
    assert res["lift-vertical"] < 1e-9 and res["J-lift-vertical"] < 1e-9


def test_lifted_bracket_splits_into_lift_and_curvature(hopf_tw, rng):
    s1, s2 = C.random_section(4, rng), C.random_section(4, rng)
    res = T.lifted_bracket_residuals(hopf_tw, s1, s2, X_HOPF, N_SAMPLE)
    assert max(res["horizontal"], res["vertical"], res["vertical-dual"]) < 1e-9 * (1 + res["scale"])


def test_chart_and_rotation_invariance(hopf_tw):
    assert T.chart_independence_residual(hopf_tw, X_HOPF, N_SAMPLE) < 1e-9
    th = 0.7
    R = np.array([[np.cos(th), -np.sin(th), 0], [np.sin(th), np.cos(th), 0], [0, 0, 1.0]])
    assert T.rotation_invariance_residual(hopf_tw, R, X_HOPF, N_SAMPLE) < 1e-12


def test_nijenhuis_blocks_match_closed_forms_when_nonzero():
    s = frame_rotation(flat_hyperkahler())
    tw = T.TwistorSpace(s.connection, s.frame, s.chart)
    x = np.array([0.4, -0.3, 0.2, 0.6])
    B = T.twistor_blocks(tw, x, N_SAMPLE)
    assert np.abs(B.horizontal_pair_vertical_expected).max() > 0.1
    assert np.allclose(B.horizontal_pair_vertical, B.horizontal_pair_vertical_expected, atol=1e-12)
    assert np.allclose(B.horizontal_pair_horizontal, B.horizontal_pair_horizontal_expected, atol=1e-12)
    assert np.allclose(B.vertical_form_pairing, B.vertical_form_pairing_expected, atol=1e-12)
    assert np.abs(B.vertical_pair).max() < 1e-12


def test_direct_nijenhuis_on_hopf(hopf, hopf_tw):
    plan = SamplePlan(points=2, fiber_samples=4)
    rep = T.twistor_nijenhuis_direct(hopf_tw, hopf.chart.sample(plan.rng(1), 2), plan)
    assert rep.passed, rep
    assert set(rep.components) >= {"direct", "a:vertical-closed-form", "c:closed-form"}


def test_verdicts_for_flat_and_rotated_structures():
    plan = SamplePlan(points=2, fiber_samples=4)
    flat = flat_hyperkahler()
    good = T.theorem_a_verdict(flat.connection, flat.frame, plan, flat.chart)
    assert good.passed and good.agree and good.failing() == []
    rot = frame_rotation(flat)
    bad = T.theorem_a_verdict(rot.connection, rot.frame, plan, rot.chart)
    assert bad.agree and not bad.passed
    assert "C2" in bad.failing() and "direct" in bad.failing()
    assert "agree" in bad.summary()
