import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from degsob import _kernels
from degsob.cover import (coverage_grid, euclidean, finite_overlap_cover, geometric_doubling_probe,
                          packing_bound, power_euclidean, verify_quasimetric)
from degsob.errors import ParameterError, RadiusError
from degsob.fields import BoxDomain

K2 = BoxDomain((0.25, 0.25), (0.75, 0.75))
SPACE2 = euclidean(BoxDomain.unit(2), 2)


def test_euclidean_is_a_metric():
    v = verify_quasimetric(SPACE2)
    assert v.passed and v.symmetric and v.positive and v.worst_ratio <= 1 + 1e-12


def test_power_distance_sharp_constant():
    sq = power_euclidean(2.0, dim=2)
    assert sq.kappa == 2.0 and verify_quasimetric(sq).passed


def test_wrong_kappa_is_falsified():
    bad = power_euclidean(2.0, dim=2, kappa=1.0)
    v = verify_quasimetric(bad)
    assert not v.passed and v.witness is not None
    assert v.worst_ratio == pytest.approx(2.0, rel=1e-6)


def test_kappa_below_one_rejected():
    with pytest.raises(ParameterError):
        power_euclidean(2.0, dim=2, kappa=0.5)


def test_doubling_counts_respect_volume_bound():
    rep = geometric_doubling_probe(SPACE2, K2, [1, 2, 4], trials=10)
    assert rep.consistent
    assert rep.counts[0] == 1 and rep.counts[-1] > rep.counts[1]
    assert rep.bounds == [packing_bound(SPACE2, t) for t in (1, 2, 4)]


def test_doubling_radius_too_large():
    with pytest.raises(RadiusError):
        geometric_doubling_probe(SPACE2, K2, [2], r=0.3)


@pytest.mark.parametrize("r", [0.05, 0.025])
def test_cover_of_square(r):
    cv = finite_overlap_cover(SPACE2, K2, r, c0=2.0)
    assert cv.covers(coverage_grid(K2, 200))
    d = np.linalg.norm(cv.centers[:, None] - cv.centers[None], axis=2)
    np.fill_diagonal(d, np.inf)
    assert d.min() >= r
    assert 1 <= cv.overlap <= 25


def test_overlap_independent_of_radius():
    P = [finite_overlap_cover(SPACE2, K2, r, 2.0).overlap for r in (0.05, 0.025)]
    assert max(P) <= 2 * min(P)


def test_overlap_monotone_in_c0():
    P = [finite_overlap_cover(SPACE2, K2, 0.05, c0).overlap for c0 in (1.0, 1.5, 2.0, 3.0, 4.0)]
    assert P == sorted(P)


def test_power_metric_cover_1d():
    sp = power_euclidean(2.0, BoxDomain.unit(1), 1)
    K = BoxDomain((0.3,), (0.7,))
    cv = finite_overlap_cover(sp, K, 0.01)
    assert cv.covers(K.grid(200))
    rho = (cv.centers[:, None, 0] - cv.centers[None, :, 0]) ** 2
    np.fill_diagonal(rho, np.inf)
    assert rho.min() >= 0.01


def test_point_set_cover():
    pts = np.array([[0.5, 0.5]])
    cv = finite_overlap_cover(SPACE2, pts, 0.1)
    assert cv.count == 1 and cv.overlap == 1


def test_cover_radius_error_names_center():
    with pytest.raises(RadiusError) as e:
        finite_overlap_cover(SPACE2, K2, 0.2, c0=2.0)
    assert e.value.center is not None


def test_cover_csv(tmp_path):
    cv = finite_overlap_cover(SPACE2, K2, 0.1)
    path = tmp_path / "cover.csv"
    cv.to_csv(path)
    rows = path.read_text().splitlines()
    assert rows[0] == "index,x0,x1,r,c0,P,N" and len(rows) == cv.count + 1


@settings(max_examples=8)
@given(st.floats(0.04, 0.1), st.floats(0.5, 3.0))
def test_cover_invariants_random(r, alpha):
    sp = power_euclidean(alpha, BoxDomain.unit(2), 2)
    rr = r ** alpha
    cv = finite_overlap_cover(sp, K2, rr, 1.0, check_grid=60)
    assert cv.covers(coverage_grid(K2, 60))
    rho = np.linalg.norm(cv.centers[:, None] - cv.centers[None], axis=2) ** alpha
    np.fill_diagonal(rho, np.inf)
    assert rho.min() >= rr


@pytest.mark.parametrize("use_numba", [False, True])
@given(seed=st.integers(0, 10_000), radius=st.floats(0.05, 0.4), alpha=st.sampled_from([0.5, 1.0, 2.0]))
def test_kernel_backends_agree(use_numba, seed, radius, alpha):
    rng = np.random.default_rng(seed)
    cands = rng.random((300, 2))
    seeds = rng.random((3, 2))
    ref = _kernels.greedy_net_numpy(cands, radius, alpha, seeds)
    impl = _kernels.greedy_net_numba if use_numba else _kernels.greedy_net_numpy
    assert np.array_equal(impl(cands, radius, alpha, seeds), ref)
    cnt = _kernels.count_within_numba if use_numba else _kernels.count_within_numpy
    assert np.array_equal(cnt(cands, cands[ref], radius, alpha),
                          _kernels.count_within_numpy(cands, cands[ref], radius, alpha))
