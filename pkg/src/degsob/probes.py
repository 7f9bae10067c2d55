"""Numerical probes of local Poincare and Sobolev properties and of the
compactness mechanism (ball averages on a finite-overlap cover).

Every probe works over a finite, named test family; a report can falsify
a property or fail to falsify it, never prove it.
"""
import csv
from dataclasses import dataclass, field
import itertools
import json
import math
from typing import Optional

import numpy as np

from .errors import DegenerateBallError, ParameterError, PreconditionError
from .fields import Ball, BoxDomain, constant_weight, identity_matrix, region_inside
from .quadrature import ball_mass, qh1p_norm, v_average, weighted_lp, weighted_lp_norm

VANISH_FACTOR = 0.05
PLATEAU_RTOL = 0.10


def classify(values):
    """``vanishing`` / ``bounded`` / ``diverging`` from a sweep.

    vanishing: the last three values strictly decrease and the final one is
    below 5% of the first.  bounded: finite, and the last step either does
    not increase or changes by at most 10%.  Anything else diverges.
    """
    v = [float(x) for x in values]
    if len(v) >= 3 and v[-3] > v[-2] > v[-1] and v[-1] < VANISH_FACTOR * v[0]:
        return "vanishing"
    if not all(math.isfinite(x) for x in v):
        return "diverging"
    if len(v) < 2 or v[-1] <= v[-2] or abs(v[-1] - v[-2]) <= PLATEAU_RTOL * abs(v[-2]):
        return "bounded"
    return "diverging"


def loglog_slope(xs, ys):
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    ok = (xs > 0) & (ys > 0)
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(xs[ok]), np.log(ys[ok]), 1)[0])


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else "inf"


@dataclass
class ProbeReport:
    name: str
    parameter: str
    params: list
    values: list
    verdict: str
    errors: list = field(default_factory=list)
    family: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def slope(self):
        return loglog_slope(self.params, self.values)

    def to_dict(self):
        out = {
            "name": self.name,
            "parameter": self.parameter,
            "params": [float(p) for p in self.params],
            "values": [_num(v) for v in self.values],
            "verdict": self.verdict,
            "errors": [float(e) for e in self.errors],
            "family": self.family,
        }
        out.update(self.extra)
        return out

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), sort_keys=True, **kw)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow([self.parameter, "value", "error"])
            errs = self.errors or [0.0] * len(self.values)
            for p, v, e in zip(self.params, self.values, errs):
                wr.writerow([repr(float(p)), repr(float(v)), repr(float(e))])


def _defaults(f, Q, v, m):
    n = f.dim
    return (Q or identity_matrix(n), v or constant_weight(1.0, n), m or constant_weight(1.0, n))


# ---------------------------------------------------------------------------
# Poincare
# ---------------------------------------------------------------------------

def poincare_ratio(f, ball, c0=1.0, Q=None, v=None, m=None, p=2.0, domain=None, tol=1e-9):
    """``||f - f_B||_{L^p_v(B)} / ||(f, grad f)||_{QH^{1,p}(c0 B)}``; zero when the norm is."""
    Q, v, m = _defaults(f, Q, v, m)
    domain = domain or BoxDomain.unit(f.dim)
    fB = v_average(f, v, m, ball, domain, tol)
    num = weighted_lp_norm(f.shifted(-fB), v, m, p, ball, domain, tol)
    den = qh1p_norm(f, Q, v, m, p, ball.dilate(c0), domain, tol).total
    if den == 0:
        return 0.0
    return num / den


def poincare_vanishing_probe(family, K, radii, Q=None, v=None, m=None, p=2.0, c0=1.0,
                             per_axis=3, domain=None, family_name="", tol=1e-9):
    """Sweep ``r``: max Poincare ratio over grid centers in ``K`` and the family."""
    if not family:
        raise ParameterError("empty test family")
    domain = domain or BoxDomain.unit(K.dim)
    radii = sorted(radii, reverse=True)
    centers = K.grid(per_axis)
    delta = float(domain.boundary_distance(centers).min())
    if c0 * radii[0] >= delta:
        raise PreconditionError(f"radius {radii[0]} with c0={c0} leaves the domain (delta={delta:.4g})")
    vals = []
    for r in radii:
        best = 0.0
        for c in centers:
            B = Ball(c, r)
            for f in family:
                best = max(best, poincare_ratio(f, B, c0, Q, v, m, p, domain, tol))
        vals.append(best)
    slope = loglog_slope(radii, vals)
    return ProbeReport("poincare", "r", radii, vals, classify(vals), family=family_name,
                       extra={"slope": _num(slope) if vals[-1] > 0 else 0.0,
                              "K": [list(K.lower), list(K.upper)], "c0": c0, "p": p})


# ---------------------------------------------------------------------------
# compatibility of v and mu
# ---------------------------------------------------------------------------

def compat_ratio(v, m=None, radii=(0.1, 0.05, 0.025, 0.0125), K=None, c0=1.0, p=2.0,
                 domain=None, per_axis=5, tol=1e-9):
    """Curve ``r -> sup_x r^p v(B(x, r)) / mu(B(x, c0 r))`` over grid centers in ``K``."""
    n = v.dim
    m = m or constant_weight(1.0, n)
    domain = domain or BoxDomain.unit(n)
    K = K or BoxDomain((0.25,) * n, (0.75,) * n)
    radii = sorted(radii, reverse=True)
    vals = []
    closed = v.const is not None and m.const is not None
    centers = K.grid(per_axis)
    for r in radii:
        if closed:
            vals.append(r ** p * v.const / (m.const * c0 ** n))
            continue
        best = 0.0
        for c in centers:
            mu = ball_mass(constant_weight(1.0, n), Ball(c, c0 * r), domain, m, tol)
            if mu <= 0:
                raise DegenerateBallError(f"zero mu-mass at {c.tolist()}, r={r:g}", Ball(c, c0 * r))
            best = max(best, r ** p * ball_mass(v, Ball(c, r), domain, None, tol) / mu)
        vals.append(best)
    return ProbeReport("compat", "r", radii, vals, classify(vals), family=v.name,
                       extra={"closed_form": closed, "p": p, "c0": c0})


# ---------------------------------------------------------------------------
# Sobolev
# ---------------------------------------------------------------------------

def _lp_sigma(f, v, m, p, sigma, region, domain, tol):
    return weighted_lp(f, v, m, p * sigma, region, domain, tol)[0]


def sobolev_ratio(f, ball, Q=None, v=None, m=None, p=2.0, sigma=1.0, domain=None, tol=1e-9):
    """``||f||_{L^{p sigma}_v(B)} / ||(f, grad f)||_{QH^{1,p}}`` for ``f`` supported in ``B``."""
    if sigma < 1:
        raise ParameterError("sigma must be >= 1")
    if f.support is None or not region_inside(f.support, ball):
        raise PreconditionError(f"{f.name or 'field'} is not supported in {ball}")
    Q, v, m = _defaults(f, Q, v, m)
    domain = domain or BoxDomain.unit(f.dim)
    lhs = _lp_sigma(f, v, m, p, sigma, ball, domain, tol)
    if lhs == 0:
        return 0.0
    return lhs / qh1p_norm(f, Q, v, m, p, ball, domain, tol).total


def global_sobolev_ratio(f, Q=None, v=None, m=None, p=2.0, sigma=1.0, domain=None, tol=1e-9):
    """The Sobolev ratio with the ball replaced by the whole domain."""
    if sigma < 1:
        raise ParameterError("sigma must be >= 1")
    Q, v, m = _defaults(f, Q, v, m)
    domain = domain or BoxDomain.unit(f.dim)
    lhs = _lp_sigma(f, v, m, p, sigma, domain, domain, tol)
    if lhs == 0:
        return 0.0
    return lhs / qh1p_norm(f, Q, v, m, p, domain, domain, tol).total


def sobolev_sweep(fields, params, ratio, parameter="k", name="sobolev", family=""):
    """Apply ``ratio`` to each field and classify the resulting curve."""
    vals = [ratio(f) for f in fields]
    return ProbeReport(name, parameter, list(params), vals, classify(vals), family=family,
                       extra={"growth": _num(vals[-1] / vals[0]) if vals[0] > 0 else "inf"})


# ---------------------------------------------------------------------------
# subsequence extraction
# ---------------------------------------------------------------------------

@dataclass
class SubsequenceTrace:
    cover: object
    selected: list
    averages: np.ndarray
    masses: np.ndarray
    ii_bound: float
    lp_bound: float
    eps: float
    p: float
    M: float
    P: int
    C: float
    rhs: float
    passed: bool
    violating_pair: Optional[tuple] = None
    measured_constant: float = 0.0

    def to_dict(self):
        return {
            "selected": list(map(int, self.selected)),
            "averages": self.averages.tolist(),
            "ball_masses": self.masses.tolist(),
            "ii_bound": self.ii_bound,
            "eps_p": self.eps ** self.p,
            "lp_bound": self.lp_bound,
            "rhs": self.rhs,
            "C": self.C,
            "M": self.M,
            "P": int(self.P),
            "N": int(self.cover.count) if self.cover is not None else 0,
            "r": float(self.cover.radius) if self.cover is not None else None,
            "passed": bool(self.passed),
            "violating_pair": None if self.violating_pair is None else list(self.violating_pair),
            "measured_constant": self.measured_constant,
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), sort_keys=True, **kw)


def part_ii(a, b, masses, p):
    """``sum_j v(B_j)^{1-p} |v(B_j) (a_j - b_j)|^p`` for average vectors ``a, b``."""
    return float(np.sum(masses ** (1.0 - p) * np.abs(masses * (a - b)) ** p))


def _greedy_cluster(A, masses, p, eps):
    """Largest set whose members sit within ``eps/2`` of a common member.

    The quantity ``part_ii(.)**(1/p)`` is a weighted l^p distance, so the
    triangle inequality keeps every pair of the cluster below ``eps``.
    Ties go to the earliest anchor.
    """
    k = len(A)
    D = np.array([[part_ii(A[i], A[j], masses, p) ** (1.0 / p) for j in range(k)] for i in range(k)])
    best = None
    for c in range(k):
        members = [i for i in np.argsort(D[c], kind="stable") if D[c, i] < eps / 2]
        if best is None or len(members) > len(best):
            best = members
    return sorted(int(i) for i in best)


def extract_subsequence(family, E, cover, v=None, m=None, p=2.0, eps=0.1, Q=None,
                        domain=None, C=None, tol=1e-8):
    """Select members whose cover-ball v-averages are mutually close.

    The selection has pairwise ``part_ii < eps**p`` by construction; the
    L^p_v(E) distances of every selected pair are then checked against
    ``C eps^p (1 + 2^p M^p P)`` with ``C = 2^p`` unless given.
    """
    n = E.dim
    v = v or constant_weight(1.0, n)
    m = m or constant_weight(1.0, n)
    Q = Q or identity_matrix(n)
    domain = domain or BoxDomain.unit(n)
    C = 2.0 ** p if C is None else float(C)
    balls = cover.balls()
    masses = np.array([ball_mass(v, B, domain, m, tol) for B in balls])
    if len(family) < 2:
        A = np.array([[v_average(f, v, m, B, domain, tol) for B in balls] for f in family]).reshape(len(family), len(balls))
        return SubsequenceTrace(cover, list(range(len(family))), A, masses, 0.0, 0.0, eps, p,
                                0.0, cover.overlap, C, 0.0, True)
    M = max(qh1p_norm(f, Q, v, m, p, domain, domain, tol).total for f in family)
    A = np.array([[v_average(f, v, m, B, domain, tol) for B in balls] for f in family])
    sel = _greedy_cluster(A, masses, p, eps)
    ii = max((part_ii(A[i], A[j], masses, p) for i, j in itertools.combinations(sel, 2)), default=0.0)
    rhs = C * eps ** p * (1.0 + 2.0 ** p * M ** p * cover.overlap)
    worst, pair = 0.0, None
    for i, j in itertools.combinations(sel, 2):
        d = weighted_lp_norm(family[i] - family[j], v, m, p, E, domain, tol) ** p
        if d > worst:
            worst, pair = d, (i, j)
    passed = worst <= rhs
    measured = worst / (eps ** p * (1.0 + 2.0 ** p * M ** p * cover.overlap))
    return SubsequenceTrace(cover, sel, A, masses, ii, worst, eps, p, M, cover.overlap, C, rhs,
                            passed, None if passed else pair, measured)


# ---------------------------------------------------------------------------
# interpolation
# ---------------------------------------------------------------------------

def interpolation_lambda(q, lower, upper):
    """``lambda`` with ``1/q = lambda/lower + (1 - lambda)/upper``."""
    if not (1 <= lower < q < upper):
        raise ParameterError(f"need 1 <= lower < q < upper, got {lower}, {q}, {upper}")
    return (1.0 / q - 1.0 / upper) / (1.0 / lower - 1.0 / upper)


def interpolation_bound(u, w=None, q=2.0, lower=1.0, upper=3.0, v=None, m=None, region=None,
                        tol=1e-10):
    """``||g||_q / (||g||_lower^lam ||g||_upper^(1-lam))`` for ``g = u - w``; at most 1."""
    g = u if w is None else u - w
    region = region or BoxDomain.unit(u.dim)
    lam = interpolation_lambda(q, lower, upper)
    nq = weighted_lp_norm(g, v, m, q, region, region, tol)
    if nq == 0:
        return 0.0
    n1 = weighted_lp_norm(g, v, m, lower, region, region, tol)
    nu = weighted_lp_norm(g, v, m, upper, region, region, tol)
    return nq / (n1 ** lam * nu ** (1.0 - lam))
