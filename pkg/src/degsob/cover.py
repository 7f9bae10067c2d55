"""Quasimetric spaces, geometric doubling probes and finite-overlap covers.

Spaces built by :func:`euclidean` and :func:`power_euclidean` carry the
exponent ``alpha`` of ``rho(x, y) = |x - y| ** alpha``; their rho-balls are
Euclidean balls of radius ``r ** (1 / alpha)``, which is what lets the net
and overlap kernels in :mod:`degsob._kernels` work on raw coordinates.
"""
import csv
from dataclasses import dataclass, field
import math
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .errors import ParameterError, PreconditionError, RadiusError
from .fields import Ball, BoxDomain, as_points


@dataclass(frozen=True, eq=False)
class QuasiMetricSpace:
    """A distance ``rho`` on a box domain with declared constant ``kappa``.

    ``distance(x, y)`` takes two ``(k, n)`` arrays and returns ``(k,)``.
    """

    distance: Callable
    kappa: float
    domain: BoxDomain
    alpha: Optional[float] = None
    name: str = "quasimetric"

    def __post_init__(self):
        if not self.kappa >= 1:
            raise ParameterError(f"kappa must be >= 1, got {self.kappa}")

    @property
    def dim(self):
        return self.domain.dim

    def __call__(self, x, y):
        return self.distance(as_points(x, self.dim), as_points(y, self.dim))

    def _need_alpha(self):
        if self.alpha is None:
            raise PreconditionError(f"{self.name}: operation needs a power-Euclidean space")

    def euclidean_radius(self, r):
        """Euclidean radius of a rho-ball of radius ``r``."""
        self._need_alpha()
        return r ** (1.0 / self.alpha)

    def openness_radius(self, x):
        """``delta(x)``: the closed rho-ball ``B(x, r)`` lies in the domain for ``r < delta(x)``."""
        self._need_alpha()
        return self.domain.boundary_distance(x) ** self.alpha

    def disjoint_separation(self, s):
        """Distance at or above which two rho-balls of radius ``s`` are disjoint."""
        if self.alpha is None:
            return 2.0 * self.kappa * s
        return 2.0 ** self.alpha * s

    def ball(self, center, r):
        """The rho-ball as a Euclidean :class:`Ball`."""
        return Ball(center, self.euclidean_radius(r))


def euclidean(domain=None, dim=2):
    domain = domain or BoxDomain.unit(dim)

    def dist(x, y):
        return np.linalg.norm(x - y, axis=1)

    return QuasiMetricSpace(dist, 1.0, domain, alpha=1.0, name="euclidean")


def power_euclidean(alpha, domain=None, dim=2, kappa=None):
    """``|x - y| ** alpha``; the sharp constant is ``max(1, 2 ** (alpha - 1))``.

    Pass ``kappa`` to declare a different (possibly wrong) constant.
    """
    if alpha <= 0:
        raise ParameterError("alpha must be positive")
    domain = domain or BoxDomain.unit(dim)
    if kappa is None:
        kappa = max(1.0, 2.0 ** (alpha - 1.0))

    def dist(x, y):
        return _kernels.rho_from_sq(((x - y) ** 2).sum(axis=1), alpha)

    return QuasiMetricSpace(dist, kappa, domain, alpha=float(alpha), name=f"euclidean^{alpha:g}")


# ---------------------------------------------------------------------------
# axiom check
# ---------------------------------------------------------------------------

@dataclass
class QuasiMetricVerdict:
    passed: bool
    kappa: float
    worst_ratio: float
    witness: Optional[tuple]
    symmetric: bool
    positive: bool
    n_triples: int

    def to_dict(self):
        return {
            "passed": bool(self.passed),
            "kappa": self.kappa,
            "worst_ratio": self.worst_ratio,
            "witness": None if self.witness is None else [list(map(float, p)) for p in self.witness],
            "symmetric": bool(self.symmetric),
            "positive": bool(self.positive),
            "n_triples": self.n_triples,
        }


def sample_triples(domain, n=2000, rng=None):
    """Random triples plus collinear ones with ``z`` at the midpoint of ``x, y``.

    Midpoint triples are where power distances with ``alpha > 1`` are tight.
    """
    rng = np.random.default_rng(rng)
    lo, w = domain.lo, domain.widths
    a = lo + w * rng.random((n, 3, domain.dim))
    half = n // 2
    a[half:, 2] = 0.5 * (a[half:, 0] + a[half:, 1])
    return a


def verify_quasimetric(space, samples=None, rng=0, slack=1e-12):
    """Falsification test of the quasimetric axioms with the declared kappa."""
    T = sample_triples(space.domain, rng=rng) if samples is None else np.asarray(samples, float)
    x, y, z = T[:, 0], T[:, 1], T[:, 2]
    dxy, dyx = space(x, y), space(y, x)
    symmetric = bool(np.array_equal(dxy, dyx))
    distinct = np.any(x != y, axis=1)
    positive = bool(np.all(space(x, x) == 0) and np.all(dxy[distinct] > 0))
    denom = space(x, z) + space(z, y)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(denom > 0, dxy / denom, 0.0)
    i = int(np.argmax(ratio))
    worst = float(ratio[i])
    passed = symmetric and positive and worst <= space.kappa + slack
    witness = (x[i], y[i], z[i]) if worst > space.kappa + slack else None
    return QuasiMetricVerdict(passed, space.kappa, worst, witness, symmetric, positive, len(T))


# ---------------------------------------------------------------------------
# geometric doubling
# ---------------------------------------------------------------------------

@dataclass
class DoublingReport:
    K: BoxDomain
    r: float
    ratios: list
    counts: list
    bounds: list
    trials: int
    note: str = ("a sampling probe only fails to falsify independence of K; "
                 "it does not certify it")

    @property
    def consistent(self):
        return all(c <= b for c, b in zip(self.counts, self.bounds))

    def to_dict(self):
        return {
            "K": [list(self.K.lower), list(self.K.upper)],
            "r": self.r,
            "pairs": [[self.r, self.r / t] for t in self.ratios],
            "ratios": list(self.ratios),
            "counts": [int(c) for c in self.counts],
            "bounds": [float(b) for b in self.bounds],
            "trials": self.trials,
            "consistent": self.consistent,
            "note": self.note,
        }


def packing_bound(space, ratio):
    """Volume bound ``(1 + (r/s)**(1/alpha))**n`` on disjoint s-balls centred in an r-ball."""
    space._need_alpha()
    return (1.0 + ratio ** (1.0 / space.alpha)) ** space.dim


def _ball_candidates(center, R, pitch, rng):
    k = int(math.ceil(2 * R / pitch)) + 1
    axes = [np.linspace(c - R, c + R, k) for c in center]
    g = np.stack([a.ravel() for a in np.meshgrid(*axes, indexing="ij")], axis=1)
    g = g[np.linalg.norm(g - center, axis=1) < R]
    return g[rng.permutation(len(g))]


def geometric_doubling_probe(space, K, ratios, r=None, trials=20, rng=0, resolution=8):
    """Pack disjoint s-balls with centers inside sampled r-balls.

    For each ``r / s`` the count is maximised over ``trials`` random centers
    and candidate orders.  Candidates sit on a grid of pitch ``S/resolution``
    (``S`` the Euclidean radius of an s-ball).
    """
    space._need_alpha()
    rng = np.random.default_rng(rng)
    corners = K.corners()
    delta = float(space.openness_radius(corners).min())
    delta = min(delta, float(space.openness_radius(K.center).min()))
    if r is None:
        r = 0.5 * delta
    if r >= delta:
        raise RadiusError(f"r={r} exceeds the openness radius {delta:.4g} on K")
    counts, bounds = [], []
    centers = K.lo + K.widths * rng.random((trials, K.dim))
    R = space.euclidean_radius(r)
    for t in ratios:
        if t < 1:
            raise ParameterError("ratios r/s must be >= 1")
        s = r / t
        sep = space.disjoint_separation(s)
        pitch = space.euclidean_radius(s) / resolution
        best = 0
        for x0 in centers:
            cands = _ball_candidates(x0, R, pitch, rng)
            kept = _kernels.greedy_net(cands, sep, space.alpha)
            best = max(best, len(kept))
        counts.append(best)
        bounds.append(packing_bound(space, t))
    return DoublingReport(K, float(r), list(ratios), counts, bounds, trials)


# ---------------------------------------------------------------------------
# finite-overlap cover
# ---------------------------------------------------------------------------

@dataclass
class BallCover:
    centers: np.ndarray
    radius: float
    c0: float
    overlap: int
    witness: Optional[np.ndarray]
    space: QuasiMetricSpace = field(repr=False)
    K: object = None

    @property
    def count(self):
        return len(self.centers)

    def balls(self, dilation=1.0):
        return [self.space.ball(c, self.radius * dilation) for c in self.centers]

    def covers(self, points):
        """Whether every point lies in some ``B(x_j, r)``."""
        pts = as_points(points, self.space.dim)
        hits = _kernels.count_within(pts, self.centers, self.radius, self.space.alpha)
        return bool(np.all(hits >= 1))

    def to_dict(self):
        return {
            "centers": self.centers.tolist(),
            "r": self.radius,
            "c0": self.c0,
            "P": int(self.overlap),
            "N": self.count,
            "witness": None if self.witness is None else self.witness.tolist(),
        }

    def to_csv(self, path):
        n = self.centers.shape[1]
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["index"] + [f"x{i}" for i in range(n)] + ["r", "c0", "P", "N"])
            for i, c in enumerate(self.centers):
                wr.writerow([i] + [repr(float(v)) for v in c]
                            + [repr(self.radius), repr(self.c0), self.overlap, self.count])


def _grid_with_pitch(K, pitch, cap):
    k = [max(2, int(math.ceil(w / pitch)) + 1) for w in K.widths]
    while np.prod(k, dtype=float) > cap:
        k = [max(2, int(v * 0.8)) for v in k]
    axes = [np.linspace(a, b, m) for a, b, m in zip(K.lower, K.upper, k)]
    return np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)


def coverage_grid(K, k=200, cap=2_000_000):
    """The ``k**n`` check grid on K, thinned for large n to stay under ``cap`` points."""
    if isinstance(K, BoxDomain):
        k = min(k, int(cap ** (1.0 / K.dim)))
        return K.grid(k)
    return as_points(K)


def finite_overlap_cover(space, K, r, c0=1.0, check_grid=200, cap=2_000_000):
    """Greedy maximal r-separated net of ``K`` with overlap constant ``P``.

    ``K`` is a sub-box or a finite point set.  Candidates are scanned in
    lexicographic grid order; a completion pass over the ``check_grid**n``
    grid adds any point left uncovered, which keeps separation.  ``P`` is
    the maximum number of dilated balls ``B(x_j, c0 r)`` containing a point
    of a grid of pitch ``r_E/20`` restricted to the union of the r-balls.
    """
    space._need_alpha()
    if not r > 0:
        raise ParameterError("r must be positive")
    if c0 < 1:
        raise ParameterError("c0 must be >= 1")
    a = space.alpha
    rE = space.euclidean_radius(r)
    if isinstance(K, BoxDomain):
        cands = _grid_with_pitch(K, rE / 20, cap)
    else:
        cands = as_points(K, space.dim)
    idx = _kernels.greedy_net(cands, r, a)
    centers = cands[idx]
    check = coverage_grid(K, check_grid, cap)
    hit = _kernels.count_within(check, centers, r, a)
    missing = check[hit == 0]
    if len(missing):
        extra = _kernels.greedy_net(missing, r, a, seeds=centers)
        centers = np.vstack([centers, missing[extra]])

    delta = space.openness_radius(centers)
    bad = np.nonzero(c0 * r >= delta)[0]
    if len(bad):
        c = centers[bad[0]]
        raise RadiusError(f"closed ball B({c.tolist()}, {c0}*{r}) leaves the domain", center=tuple(c))

    lo = centers.min(axis=0) - rE
    hi = centers.max(axis=0) + rE
    box = BoxDomain(lo, hi)
    sample = _grid_with_pitch(box, rE / 20, cap)
    inside = _kernels.count_within(sample, centers, r, a) >= 1
    sample = sample[inside]
    over = _kernels.count_within(sample, centers, c0 * r, a)
    j = int(np.argmax(over))
    return BallCover(centers, float(r), float(c0), int(over[j]), sample[j], space, K)
