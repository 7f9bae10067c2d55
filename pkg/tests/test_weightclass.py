import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from degsob.errors import ParameterError
from degsob.fields import BoxDomain, constant_weight, exp_inverse_weight, power_weight
from degsob.weightclass import (BallFamily, ap_constant, balance_check, balance_tables,
                                balance_vanishing_limit, check_admissible, default_family,
                                doubling_constant, q_search, stable_under_refinement)

U1, U2, U3 = BoxDomain.unit(1), BoxDomain.unit(2), BoxDomain.unit(3)


def test_refinement_rule():
    assert stable_under_refinement([5, 4.0, 4.1])
    assert not stable_under_refinement([1, 2, 4])
    assert not stable_under_refinement([1, math.inf])


def test_family_levels_and_modes():
    fam = BallFamily(U1, 4, start=2)
    C, R, lev = fam.members()
    assert len(C) == 15 * 4 and lev.min() >= 1 and lev.max() == 4
    Ci, Ri, _ = BallFamily(U1, 4, mode="interior", dilation=2).members()
    assert np.all(2 * Ri < np.minimum(Ci[:, 0], 1 - Ci[:, 0]))
    with pytest.raises(ParameterError):
        BallFamily(U1, 4, mode="bogus")


def test_ap_constant_of_constant_is_one():
    est = ap_constant(constant_weight(1.0, 1), 2.0)
    assert est.value == pytest.approx(1.0, abs=1e-9) and est.passed


def test_ap_sqrt_weight():
    est = ap_constant(power_weight(0.5), 2.0)
    assert est.value == pytest.approx(oracles.ap_sqrt_corner(), rel=0.03)
    assert est.passed


def test_ap_divergent_dual():
    est = ap_constant(power_weight(1.0), 2.0)
    assert not est.passed and est.extra["divergent"] and math.isinf(est.value)
    assert est.witness[0][0] - est.witness[1] <= 0


def test_ap_needs_p_above_one():
    with pytest.raises(ParameterError):
        ap_constant(constant_weight(1.0, 1), 1.0)


@given(st.floats(1e-3, 1e3), st.sampled_from([0.25, 0.5, -0.5]), st.sampled_from([1.5, 2.0, 3.0]))
def test_ap_scale_invariant(c, e, p):
    fam = BallFamily(U1, 5, start=3)
    a = ap_constant(power_weight(e), p, fam).value
    b = ap_constant(power_weight(e).scaled(c), p, fam).value
    assert b == pytest.approx(a, rel=1e-10)
    assert a >= 1 - 1e-9


def test_doubling_lebesgue_2d_interior():
    est = doubling_constant(constant_weight(1.0, 2), default_family(U2, "interior", 2.0))
    assert est.value == pytest.approx(4.0, rel=0.02) and est.passed


def test_doubling_power_weight_1d():
    est = doubling_constant(power_weight(1.0))
    assert est.passed and 2.0 <= est.value <= 4.0


def test_doubling_fails_for_exp_inverse():
    fam = BallFamily(U1, 7, start=3, mode="interior", dilation=2)
    est = doubling_constant(exp_inverse_weight(1), fam)
    assert not est.passed


def test_balance_sobolev_exponent_is_one():
    est = balance_check(constant_weight(1.0, 3), constant_weight(1.0, 3), 2.0, 6.0, domain=U3)
    assert est.value == pytest.approx(1.0, abs=1e-6) and est.passed


def test_balance_beyond_sobolev_exponent_fails():
    est = balance_check(constant_weight(1.0, 3), constant_weight(1.0, 3), 2.0, 6.5, domain=U3)
    assert not est.passed


@pytest.mark.parametrize("w", [constant_weight(1.0, 1), power_weight(0.5), power_weight(1.0)])
def test_balance_q_equals_p_exact(w):
    T = balance_tables(w, w, domain=U1, depth=6)
    from degsob.weightclass import balance_from_tables
    assert balance_from_tables(T, 2.0, 2.0).value == 1.0


def test_q_search_3d_and_capped_1d():
    q, est, info = q_search(constant_weight(1.0, 3), constant_weight(1.0, 3), 2.0, domain=U3)
    assert q == 6.0 and not info["capped"]
    q1, _, info1 = q_search(constant_weight(1.0, 1), constant_weight(1.0, 1), 2.0, domain=U1)
    assert q1 == 10.0 and info1["capped"]


def test_vanishing_limit_1d():
    E = BoxDomain((0.25,), (0.75,))
    cur = balance_vanishing_limit(constant_weight(1.0, 1), constant_weight(1.0, 1), 2.0, E, q=4.0)
    assert cur.passed and all(b < a for a, b in zip(cur.values, cur.values[1:]))


def test_admissible_lebesgue_1d():
    rep = check_admissible(constant_weight(1.0, 1), constant_weight(1.0, 1), 2.0, U1)
    d = rep.to_dict()
    assert rep.admissible and d["q"] > 2 and set(d) >= {"doubling_constant", "ap_constant", "balance_constant"}
    assert rep.to_json() == check_admissible(constant_weight(1.0, 1), constant_weight(1.0, 1), 2.0, U1).to_json()
