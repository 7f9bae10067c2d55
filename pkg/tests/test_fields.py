import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from degsob.errors import DefinitenessError, EvaluationError, ParameterError
from degsob.fields import (Ball, BoxDomain, clipped_ball_volume, check_ellipticity, cone_bump,
                           constant_diag_matrix, constant_weight, dense_matrix,
                           diag_power_matrix, disk_rect_area, gradient_mismatch, identity_matrix,
                           monomial, op_norm_weight, polynomial_family, power_weight, sine_mode,
                           smooth_bump, sqrtQ_apply, WeightField)


def test_box_basics():
    B = BoxDomain((0, 0), (1, 2))
    assert B.dim == 2 and B.volume == 2.0
    assert B.diameter == pytest.approx(math.sqrt(5))
    assert B.contains([[0.5, 1.0], [1.5, 1.0]]).tolist() == [True, False]
    assert B.grid(3).shape == (9, 2)
    assert B.boundary_distance(np.array([[0.25, 1.0]]))[0] == pytest.approx(0.25)
    assert B.intersect(BoxDomain((2, 2), (3, 3))) is None


def test_ball_inside_and_dilate():
    b = Ball((0.5, 0.5), 0.2)
    assert b.inside(BoxDomain.unit(2))
    assert not b.dilate(3).inside(BoxDomain.unit(2))
    assert b.euclidean_volume == pytest.approx(math.pi * 0.04)


@pytest.mark.parametrize("f", [
    monomial((2, 1)),
    smooth_bump((0.5, 0.5), 0.3),
    cone_bump((0.5, 0.5), 4),
    sine_mode(3, 2),
    *polynomial_family(2, 3),
])
def test_analytic_gradients_match_differences(f):
    assert gradient_mismatch(f, BoxDomain.unit(2), rng=1) < 1e-5


def test_example_fields_gradients():
    from degsob.counterexamples import ExampleAParams, build_example_a
    ex = build_example_a(ExampleAParams(indices=(30,)))
    assert gradient_mismatch(ex.family[30], BoxDomain.unit(2), rng=2) < 1e-5


def test_support_masks_values():
    f = smooth_bump((0.5,), 0.1)
    assert f(np.array([[0.7]]))[0] == 0.0
    assert f(np.array([[0.5]]))[0] == pytest.approx(1.0)


def test_constant_weight_masses():
    w = constant_weight(2.0, 2)
    dom = BoxDomain.unit(2)
    assert w.closed_form_ball_mass(Ball((0.5, 0.5), 0.1), dom) == pytest.approx(2 * math.pi * 0.01)
    corner = w.closed_form_ball_mass(Ball((0.0, 0.0), 0.3), dom)
    assert corner == pytest.approx(2 * math.pi * 0.09 / 4, rel=1e-12)


def test_power_weight_interval_mass():
    w = power_weight(0.5)
    dom = BoxDomain.unit(1)
    assert w.closed_form_ball_mass(Ball((0.2,), 0.2), dom) == pytest.approx(oracles.power_mass(0.5, 0, 0.4))
    assert math.isinf(power_weight(-1.0).closed_form_ball_mass(Ball((0.1,), 0.2), dom))
    assert w.power(-1.0).closed_form_ball_mass(Ball((0.5,), 0.1), dom) == pytest.approx(
        oracles.power_mass(-0.5, 0.4, 0.6))


@pytest.mark.parametrize("c,rho", [((0.5, 0.5), 0.3), ((0.1, 0.2), 0.35), ((0.0, 0.0), 0.5),
                                   ((0.9, 0.5), 0.6), ((0.5, 0.5), 2.0)])
def test_disk_rect_area_oracle(c, rho):
    got = disk_rect_area(np.array(c), rho, np.zeros(2), np.ones(2))
    assert got == pytest.approx(oracles.disk_rect_area(c, rho, (0, 0), (1, 1)), abs=1e-10)


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0.01, 1.5))
def test_disk_rect_area_bounds(x, y, rho):
    a = disk_rect_area(np.array([x, y]), rho, np.zeros(2), np.ones(2))
    assert -1e-12 <= a <= min(1.0, math.pi * rho * rho) + 1e-12


@pytest.mark.parametrize("center,frac", [((0, 0, 0), 1 / 8), ((0.5, 0.5, 0), 1 / 2), ((0.5, 0.5, 0.5), 1)])
def test_clipped_ball_volume_3d(center, frac):
    r = 0.4
    got = clipped_ball_volume(Ball(center, r), BoxDomain.unit(3))
    assert got == pytest.approx(frac * oracles.ball_volume(3, r), rel=1e-12)


def test_weight_scaling_keeps_power_form():
    w = power_weight(0.5).scaled(3.0)
    assert w.power_of[0] == 3.0
    assert w(np.array([[0.25]]))[0] == pytest.approx(1.5)


def test_matrix_definiteness_error():
    Q = dense_matrix(lambda x: np.tile(np.array([[1.0, 0.0], [0.0, -1.0]]).ravel(), (len(x), 1)), 2)
    with pytest.raises(DefinitenessError):
        sqrtQ_apply(Q, np.array([0.5, 0.5]), np.array([1.0, 0.0]))


def test_matrix_nonfinite_entry():
    Q = diag_power_matrix(2, -1.0)
    with pytest.raises(EvaluationError) as e:
        Q.matrix(np.array([[0.0, 0.5]]))
    assert e.value.point is not None


def test_diag_power_declares_degenerate_face():
    Q = diag_power_matrix(3, 2.0)
    assert Q.degenerate[0].axis == 0 and Q.degenerate[0].exponent == 1.0
    assert op_norm_weight(Q, 2, np.array([0.1, 0.5, 0.5])) == pytest.approx(1.0)


def test_ellipticity_failure_names_side():
    Q = diag_power_matrix(2, 2.0)
    cert = check_ellipticity(Q, constant_weight(1.0, 2), constant_weight(1.0, 2), 2.0,
                             np.array([[0.5, 0.5]]))
    assert not cert.passed and cert.failed_side == "lower"
    assert cert.witness == (0.5, 0.5)


def test_ellipticity_empty_samples():
    with pytest.raises(ParameterError):
        check_ellipticity(identity_matrix(2), constant_weight(1, 2), constant_weight(1, 2), 2,
                          np.empty((0, 2)))


diag = st.lists(st.floats(0.01, 10.0), min_size=2, max_size=3)


@given(diag, st.sampled_from([1.5, 2.0, 3.0]), st.integers(0, 2 ** 16))
def test_op_norm_weight_matches_sampled_sup(d, p, seed):
    Q = constant_diag_matrix(d)
    x = np.full(len(d), 0.5)
    xi = np.random.default_rng(seed).normal(size=(1000, len(d)))
    xi /= np.linalg.norm(xi, axis=1, keepdims=True)
    # include the coordinate axes so the sup is attained
    xi = np.vstack([xi, np.eye(len(d))])
    xs = np.tile(x, (len(xi), 1))
    sampled = float((np.linalg.norm(Q.sqrt_apply(xs, xi), axis=1) ** p).max())
    assert op_norm_weight(Q, p, x) == pytest.approx(sampled, rel=1e-6)


@given(diag, st.sampled_from([1.5, 2.0, 3.0]))
def test_ellipticity_self_consistent(d, p):
    Q = constant_diag_matrix(d)
    n = len(d)
    lo, hi = min(d) ** (p / 2), max(d) ** (p / 2)
    w = WeightField(lambda x: np.full(len(x), lo), n, const=lo)
    tau = WeightField(lambda x: np.full(len(x), hi), n, const=hi)
    pts = np.random.default_rng(0).random((50, n))
    assert check_ellipticity(Q, w, tau, p, pts).passed


@given(st.floats(-5, 5).filter(lambda c: abs(c) > 1e-3))
def test_field_scaling_and_sum(c):
    f = sine_mode(2, 2)
    g = monomial((1, 1))
    x = np.random.default_rng(3).random((20, 2))
    assert np.allclose((f * c)(x), c * f(x))
    assert np.allclose((f + g).grad(x), f.grad(x) + g.grad(x))
    assert np.allclose((f - g)(x), f(x) - g(x))
