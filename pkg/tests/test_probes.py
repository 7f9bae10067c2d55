import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from degsob.counterexamples import ExampleBParams, build_example_b
from degsob.cover import euclidean, finite_overlap_cover
from degsob.errors import ParameterError, PreconditionError
from degsob.fields import (Ball, BoxDomain, cone_bump, constant, identity_matrix, monomial,
                           polynomial_family, power_weight, sine_mode, smooth_bump)
from degsob.probes import (classify, compat_ratio, extract_subsequence, global_sobolev_ratio,
                           interpolation_bound, interpolation_lambda, part_ii, poincare_ratio,
                           poincare_vanishing_probe, sobolev_ratio, sobolev_sweep)
from degsob.quadrature import qh1p_norm, v_average, weighted_lp_norm

U1, U2, U3 = BoxDomain.unit(1), BoxDomain.unit(2), BoxDomain.unit(3)
RADII = [0.2, 0.1, 0.05, 0.025, 0.0125, 0.00625]


@pytest.mark.parametrize("vals,verdict", [
    ([1, 0.5, 0.2, 0.04], "vanishing"),
    ([1, 0.9, 0.8, 0.7], "bounded"),
    ([1, 1.05, 1.1], "bounded"),
    ([1, 2, 4, 8], "diverging"),
    ([1, 2, math.inf], "diverging"),
])
def test_classify(vals, verdict):
    assert classify(vals) == verdict


def test_poincare_linear_oracle():
    got = poincare_ratio(monomial((1,)), Ball((0.5,), 0.1), domain=U1)
    assert got == pytest.approx(oracles.poincare_linear_1d(0.5, 0.1), rel=1e-10)


def test_poincare_constant_is_zero():
    assert poincare_ratio(constant(3.0, 2), Ball((0.5, 0.5), 0.1)) == pytest.approx(0.0, abs=1e-12)
    assert poincare_ratio(constant(0.0, 2), Ball((0.5, 0.5), 0.1)) == 0.0


def test_poincare_away_from_singular_face():
    from degsob.counterexamples import build_example_a
    ex = build_example_a()
    r = poincare_ratio(ex.u, Ball((0.05, 0.5), 0.02), Q=ex.Q, domain=U2)
    assert 0 < r < math.inf


def test_poincare_probe_slope_one():
    rep = poincare_vanishing_probe(polynomial_family(2, 2), BoxDomain((0.4, 0.4), (0.6, 0.6)), RADII,
                                   identity_matrix(2), family_name="polynomials")
    assert rep.verdict == "vanishing"
    assert rep.extra["slope"] == pytest.approx(1.0, abs=0.1)


def test_poincare_probe_constants_all_zero():
    rep = poincare_vanishing_probe([constant(1.0, 2)], BoxDomain((0.4, 0.4), (0.6, 0.6)), RADII[:3])
    assert max(rep.values) < 1e-12


def test_poincare_probe_radius_precondition():
    with pytest.raises(PreconditionError):
        poincare_vanishing_probe([monomial((1, 0))], BoxDomain((0.25, 0.25), (0.75, 0.75)), [0.3])


smooth = st.sampled_from([sine_mode(2, 2), monomial((2, 1)), smooth_bump((0.5, 0.45), 0.3)])


@given(smooth, st.floats(0.01, 100), st.sampled_from([-1.0, 1.0]), st.sampled_from([1.5, 2.0]))
def test_poincare_ratio_scale_free(f, c, sign, p):
    B = Ball((0.5, 0.5), 0.15)
    a = poincare_ratio(f, B, p=p, domain=U2, tol=1e-11)
    b = poincare_ratio(f * (sign * c), B, p=p, domain=U2, tol=1e-11)
    assert b == pytest.approx(a, rel=1e-10)


@given(smooth, st.floats(-10, 10), st.sampled_from([1.5, 2.0]))
def test_poincare_oscillation_shift_invariant(f, c, p):
    # the oscillation ||f - f_B|| is shift invariant; the full norm in the
    # denominator is not, so the ratio is compared through its numerator
    B = Ball((0.5, 0.5), 0.15)
    Q = identity_matrix(2)

    def numer(g):
        return poincare_ratio(g, B, p=p, domain=U2, tol=1e-11) * qh1p_norm(g, Q, p=p, region=B, domain=U2, tol=1e-11).total

    assert numer(f.shifted(c)) == pytest.approx(numer(f), rel=1e-9, abs=1e-12)


def test_compat_constant_is_r_power():
    from degsob.fields import constant_weight
    rep = compat_ratio(constant_weight(1.0, 2), radii=RADII, p=2.0)
    assert rep.values == [r ** 2 for r in RADII] and rep.extra["closed_form"]
    assert rep.verdict == "vanishing"


def test_compat_inverse_sqrt_vanishes():
    rep = compat_ratio(power_weight(-0.5), radii=(0.1, 0.05, 0.025, 0.0125, 0.00625),
                       K=BoxDomain((0.0,), (0.5,)), p=2.0)
    assert rep.verdict == "vanishing"
    assert rep.slope == pytest.approx(1.5, abs=0.05)


def test_compat_near_nonintegrable_decays_slowly():
    rep = compat_ratio(power_weight(-0.99), radii=(0.1, 0.05, 0.025, 0.0125, 0.00625),
                       K=BoxDomain((0.0,), (0.5,)), p=1.0)
    assert all(b < a for a, b in zip(rep.values, rep.values[1:]))
    assert rep.slope == pytest.approx(0.01, abs=0.005)


def test_sobolev_precondition():
    with pytest.raises(PreconditionError):
        sobolev_ratio(cone_bump((0.5, 0.5), 2), Ball((0.5, 0.5), 0.25))
    with pytest.raises(ParameterError):
        sobolev_ratio(cone_bump((0.5, 0.5), 8), Ball((0.5, 0.5), 0.25), sigma=0.5)


def test_sobolev_zero_field():
    f = cone_bump((0.5, 0.5), 8) * 0.0
    assert sobolev_ratio(f, Ball((0.5, 0.5), 0.25)) == 0.0
    assert global_sobolev_ratio(f) == 0.0


@given(st.floats(0.01, 100), st.sampled_from([1.0, 1.5, 2.0]))
def test_sobolev_ratio_scale_free(c, sigma):
    f = cone_bump((0.5, 0.5), 8)
    B = Ball((0.5, 0.5), 0.25)
    assert sobolev_ratio(f * c, B, sigma=sigma, tol=1e-11) == pytest.approx(
        sobolev_ratio(f, B, sigma=sigma, tol=1e-11), rel=1e-10)


def _cone_sweep(sigma):
    c = np.full(3, 0.5)
    B = Ball(c, 0.25)
    ks = [4, 8, 16, 32]
    return sobolev_sweep([cone_bump(c, k) for k in ks], ks,
                         lambda f: sobolev_ratio(f, B, p=2.0, sigma=sigma, domain=U3))


def test_sobolev_critical_gain_bounded_3d():
    rep = _cone_sweep(3.0)
    assert rep.verdict == "bounded"


def test_sobolev_excess_gain_blows_up_3d():
    rep = _cone_sweep(10.0)
    assert rep.verdict == "diverging"
    assert rep.slope == pytest.approx(1 / 2 - 3 / 20, abs=0.1)  # ratio ~ k^{(n-p)/p - n/(p sigma)}


def test_part_ii_zero_for_equal_vectors():
    a = np.array([1.0, 2.0])
    assert part_ii(a, a, np.array([0.1, 0.2]), 2.0) == 0.0


def _sine_trace():
    E = BoxDomain((0.25, 0.25), (0.75, 0.75))
    cv = finite_overlap_cover(euclidean(U2, 2), E, 0.1, 2.0)
    fam = [sine_mode(k, 2) for k in range(1, 13)]
    return extract_subsequence(fam, E, cv, p=2.0, eps=0.1)


def test_subsequence_sines():
    tr = _sine_trace()
    assert len(tr.selected) >= 2 and tr.selected == sorted(tr.selected)
    assert tr.ii_bound <= 0.1 ** 2 and tr.passed and tr.C == 4.0
    assert tr.to_json() == _sine_trace().to_json()


def test_subsequence_converging_constants():
    E = BoxDomain((0.25,), (0.75,))
    cv = finite_overlap_cover(euclidean(U1, 1), E, 0.05, 2.0)
    fam = [constant(1.0 / n, 1) for n in range(1, 41)]
    tr = extract_subsequence(fam, E, cv, p=2.0, eps=0.02)
    assert tr.passed and tr.selected[-1] == 39 and len(tr.selected) > 10


def test_subsequence_tents_pass_locally():
    ex = build_example_b(ExampleBParams(p=2.0, indices=(10, 20, 50, 100, 200, 500, 1000), dim=1))
    E = BoxDomain((0.25,), (0.75,))
    cv = finite_overlap_cover(euclidean(U1, 1), E, 0.05, 2.0)
    fam = [ex.family[j] for j in ex.params.indices]
    tr = extract_subsequence(fam, E, cv, p=2.0, eps=0.1, Q=ex.Q1)
    assert tr.passed and len(tr.selected) >= 6
    # on the whole interval the same members stay far apart
    a, b = (fam[i] for i in tr.selected[-2:])
    assert weighted_lp_norm(a - b, p=2.0, region=U1, domain=U1) > 0.9


def test_subsequence_single_member():
    E = BoxDomain((0.25,), (0.75,))
    cv = finite_overlap_cover(euclidean(U1, 1), E, 0.1)
    tr = extract_subsequence([constant(1.0, 1)], E, cv)
    assert tr.passed and tr.selected == [0]


def test_interpolation_lambda_and_errors():
    assert interpolation_lambda(2.0, 1.0, 3.0) == pytest.approx(0.25)
    with pytest.raises(ParameterError):
        interpolation_lambda(4.0, 1.0, 3.0)


def test_interpolation_power_and_constant():
    from degsob.fields import ScalarField, Face
    g = ScalarField(lambda x: x[:, 0] ** -0.3, 1, singular=(Face(0, 0.0, -0.3),))
    assert interpolation_bound(g, q=2.0, lower=1.0, upper=3.0) < 1.0
    assert interpolation_bound(constant(2.0, 1), q=2.0) == pytest.approx(1.0, abs=1e-12)


@given(st.lists(st.floats(-3, 3), min_size=3, max_size=8), st.floats(1.2, 2.8))
def test_interpolation_holder(knots, q):
    from degsob.fields import ScalarField
    xs = np.linspace(0, 1, len(knots))
    ys = np.array(knots)
    g = ScalarField(lambda x: np.interp(x[:, 0], xs, ys), 1,
                    seams=tuple((0, float(t)) for t in xs[1:-1]))
    assert interpolation_bound(g, q=q, lower=1.0, upper=3.0) <= 1 + 1e-8
