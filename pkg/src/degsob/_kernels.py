"""Hot loops for nets, packings and overlap counts.

Every kernel exists twice: a numba ``@njit`` version and a pure-numpy
version with the same signature and the same floating-point operations.
The numba path is used when numba imports and ``DEGSOB_NUMBA`` is not set
to ``0``; ``DEGSOB_NUMBA=0`` forces the numpy path.

Distances are power-Euclidean, ``rho(x, y) = |x - y|**alpha``, evaluated
from the squared Euclidean distance by :func:`rho_from_sq` so both paths
round identically for ``alpha`` in {1, 2}.
"""
import os

import numpy as np

try:
    import numba
    from numba import njit
    HAVE_NUMBA = True
    if "NUMBA_THREADING_LAYER" not in os.environ:
        # an old system TBB otherwise triggers a warning on every first call
        numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("DEGSOB_NUMBA", "1") != "0"


def rho_from_sq(d2, alpha):
    if alpha == 1.0:
        return np.sqrt(d2)
    if alpha == 2.0:
        return d2
    return d2 ** (0.5 * alpha)


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------

def greedy_net_numpy(cands, radius, alpha, seeds):
    """Scan ``cands`` in order, keeping a point when its distance to every
    kept point (seeds included) is at least ``radius``.

    Returns the indices of the accepted candidates.
    """
    cands = np.ascontiguousarray(cands, dtype=np.float64)
    n = cands.shape[1]
    kept = np.empty((len(seeds) + len(cands), n))
    kept[: len(seeds)] = seeds
    nk = len(seeds)
    out = []
    for i in range(len(cands)):
        x = cands[i]
        if nk:
            diff = kept[:nk] - x
            d2 = np.einsum("ij,ij->i", diff, diff)
            if rho_from_sq(d2, alpha).min() < radius:
                continue
        kept[nk] = x
        nk += 1
        out.append(i)
    return np.asarray(out, dtype=np.int64)


def count_within_numpy(points, centers, radius, alpha, chunk=4096):
    """For each point, the number of centers at distance < ``radius``."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    centers = np.ascontiguousarray(centers, dtype=np.float64)
    counts = np.zeros(len(points), dtype=np.int64)
    for start in range(0, len(points), chunk):
        blk = points[start:start + chunk]
        d2 = ((blk[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        counts[start:start + chunk] = (rho_from_sq(d2, alpha) < radius).sum(axis=1)
    return counts


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def _rho_nb(d2, alpha):
        if alpha == 1.0:
            return np.sqrt(d2)
        if alpha == 2.0:
            return d2
        return d2 ** (0.5 * alpha)

    @njit(cache=True)
    def _greedy_net_nb(cands, radius, alpha, seeds):
        m, n = cands.shape
        ns = seeds.shape[0]
        kept = np.empty((ns + m, n))
        for i in range(ns):
            for k in range(n):
                kept[i, k] = seeds[i, k]
        nk = ns
        out = np.empty(m, dtype=np.int64)
        nout = 0
        for i in range(m):
            ok = True
            for j in range(nk):
                d2 = 0.0
                for k in range(n):
                    t = kept[j, k] - cands[i, k]
                    d2 += t * t
                if _rho_nb(d2, alpha) < radius:
                    ok = False
                    break
            if ok:
                for k in range(n):
                    kept[nk, k] = cands[i, k]
                nk += 1
                out[nout] = i
                nout += 1
        return out[:nout]

    @njit(cache=True, parallel=True)
    def _count_within_nb(points, centers, radius, alpha):
        p, n = points.shape
        counts = np.zeros(p, dtype=np.int64)
        for i in numba.prange(p):
            c = 0
            for j in range(centers.shape[0]):
                d2 = 0.0
                for k in range(n):
                    t = points[i, k] - centers[j, k]
                    d2 += t * t
                if _rho_nb(d2, alpha) < radius:
                    c += 1
            counts[i] = c
        return counts

    def greedy_net_numba(cands, radius, alpha, seeds):
        cands = np.ascontiguousarray(cands, dtype=np.float64)
        seeds = np.ascontiguousarray(seeds, dtype=np.float64).reshape(-1, cands.shape[1])
        return _greedy_net_nb(cands, float(radius), float(alpha), seeds)

    def count_within_numba(points, centers, radius, alpha):
        points = np.ascontiguousarray(points, dtype=np.float64)
        centers = np.ascontiguousarray(centers, dtype=np.float64)
        return _count_within_nb(points, centers, float(radius), float(alpha))

else:  # pragma: no cover
    greedy_net_numba = greedy_net_numpy
    count_within_numba = count_within_numpy


def greedy_net(cands, radius, alpha, seeds=None):
    cands = np.asarray(cands, dtype=np.float64)
    if seeds is None:
        seeds = np.empty((0, cands.shape[1]))
    impl = greedy_net_numba if USE_NUMBA else greedy_net_numpy
    return impl(cands, radius, alpha, np.asarray(seeds, dtype=np.float64))


def count_within(points, centers, radius, alpha):
    impl = count_within_numba if USE_NUMBA else count_within_numpy
    return impl(points, centers, radius, alpha)
