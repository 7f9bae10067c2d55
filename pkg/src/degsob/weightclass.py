"""Doubling, Muckenhoupt A_p and balance-condition estimators for weight pairs.

Every constant is a maximum over a finite dyadic ball family, reported
together with its trend as the family is refined.  A verdict is positive
only when the last two refinement levels agree to within 10%.
"""
import csv
from dataclasses import dataclass, field
import json
import math
from typing import Optional

import numpy as np

from .errors import DegenerateBallError, DivergenceVerdict, EvaluationError, ParameterError
from .fields import Ball, BoxDomain, constant_weight
from .quadrature import ball_mass

DEFAULT_LEVEL = {1: 9, 2: 5, 3: 3, 4: 2}
BALANCE_LEVEL = {1: 6, 2: 3, 3: 2, 4: 2}
REFINE_RTOL = 0.10


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else "inf"


def stable_under_refinement(seq, rtol=REFINE_RTOL):
    """Finite, and the last two entries within ``rtol`` of each other."""
    seq = [float(s) for s in seq]
    if len(seq) < 2 or not all(math.isfinite(s) for s in seq[-2:]):
        return False
    a, b = seq[-2], seq[-1]
    return abs(b - a) <= rtol * abs(a)


def _trailing_zeros(i):
    i = np.asarray(i, dtype=np.int64)
    tz = np.zeros_like(i)
    v = i.copy()
    while np.any((v % 2 == 0) & (v > 0)):
        even = (v % 2 == 0) & (v > 0)
        tz[even] += 1
        v[even] //= 2
    return tz


@dataclass(frozen=True)
class BallFamily:
    """Dyadic centers ``lo + w * i / 2**level`` and radii ``h * 2**-k``.

    ``h`` is the shortest box width, ``k = 1..level``.  A ball belongs to
    refinement level ``max(center level, k)``.  ``mode="interior"`` keeps
    only balls whose ``dilation``-fold enlargement closes inside the box;
    ``"intersect"`` keeps all and masses are taken over ``ball ∩ domain``.
    """

    domain: BoxDomain
    level: int
    start: int = 3
    mode: str = "intersect"
    dilation: float = 1.0

    def __post_init__(self):
        if self.mode not in ("intersect", "interior"):
            raise ParameterError(f"unknown family mode {self.mode!r}")
        if self.level < 1:
            raise ParameterError("family level must be >= 1")

    @property
    def levels(self):
        return list(range(min(self.start, self.level), self.level + 1))

    def members(self):
        """``(centers, radii, levels)`` arrays, lexicographic in center then radius."""
        dom, L, n = self.domain, self.level, self.domain.dim
        idx = np.arange(1, 2 ** L)
        clev = L - _trailing_zeros(idx)
        grids = np.meshgrid(*([idx] * n), indexing="ij")
        I = np.stack([g.ravel() for g in grids], axis=1)
        CL = np.stack([g.ravel() for g in np.meshgrid(*([clev] * n), indexing="ij")], axis=1).max(axis=1)
        centers = dom.lo + dom.widths * I / 2.0 ** L
        h = float(dom.widths.min())
        ks = np.arange(1, L + 1)
        C = np.repeat(centers, len(ks), axis=0)
        R = np.tile(h * 2.0 ** -ks, len(centers))
        lev = np.maximum(np.repeat(CL, len(ks)), np.tile(ks, len(centers)))
        if self.mode == "interior":
            dist = dom.boundary_distance(C)
            keep = self.dilation * R < dist
            C, R, lev = C[keep], R[keep], lev[keep]
        return C, R, lev

    def describe(self):
        return {"kind": "dyadic", "level": self.level, "levels": self.levels,
                "mode": self.mode, "dilation": self.dilation,
                "domain": [list(self.domain.lower), list(self.domain.upper)]}


def default_family(domain, mode="intersect", dilation=1.0, level=None):
    level = level or DEFAULT_LEVEL.get(domain.dim, 2)
    return BallFamily(domain, level, start=min(3, level - 1) if level > 1 else 1,
                      mode=mode, dilation=dilation)


class MassTable:
    """Cached ``weight(D(x, r) ∩ domain)``; divergent masses are ``inf``."""

    def __init__(self, weight, domain, m=None, tol=1e-9):
        self.weight, self.domain, self.m, self.tol = weight, domain, m, tol
        self._cache = {}

    def __call__(self, center, r):
        key = (tuple(float(c) for c in center), float(r))
        if key not in self._cache:
            try:
                val = ball_mass(self.weight, Ball(key[0], key[1]), self.domain, self.m, self.tol)
            except (DivergenceVerdict, EvaluationError):
                val = math.inf
            self._cache[key] = float(val)
        return self._cache[key]

    def many(self, centers, radii):
        return np.array([self(c, r) for c, r in zip(centers, radii)])


@dataclass
class ClassEstimate:
    """A sup over a ball family with its refinement trend."""

    name: str
    value: float
    levels: list
    per_level: list
    passed: bool
    witness: Optional[tuple]
    family: dict
    n_balls: int
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        out = {
            "name": self.name,
            "value": _num(self.value),
            "levels": list(self.levels),
            "per_level": [_num(v) for v in self.per_level],
            "passed": bool(self.passed),
            "witness": None if self.witness is None
            else {"center": [float(c) for c in self.witness[0]], "r": float(self.witness[1])},
            "family": self.family,
            "n_balls": self.n_balls,
        }
        out.update(self.extra)
        return out


def _sup_by_level(values, lev, levels):
    out = []
    for L in levels:
        sel = values[lev <= L]
        out.append(float(sel.max()) if len(sel) else float("nan"))
    return out


def _finish(name, values, C, R, lev, family, passed_extra=True, **extra):
    values = np.asarray(values, dtype=np.float64)
    per = _sup_by_level(values, lev, family.levels)
    i = int(np.argmax(values))
    value = float(values[i])
    passed = passed_extra and stable_under_refinement(per)
    return ClassEstimate(name, value, family.levels, per, passed, (C[i], R[i]),
                         family.describe(), len(values), dict(extra))


def doubling_constant(tau, family=None, domain=None, m=None, tol=1e-9):
    """``max tau(D(x, 2r)) / tau(D(x, r))`` over the family."""
    if family is None:
        family = default_family(domain or BoxDomain.unit(tau.dim))
    C, R, lev = family.members()
    M = MassTable(tau, family.domain, m, tol)
    num = M.many(C, 2 * R)
    den = M.many(C, R)
    if np.any(den <= 0):
        j = int(np.nonzero(den <= 0)[0][0])
        raise DegenerateBallError(f"zero {tau.name}-mass on D({C[j].tolist()}, {R[j]:g})",
                                  Ball(C[j], R[j]))
    with np.errstate(invalid="ignore"):
        ratio = np.where(np.isinf(den), np.nan, num / den)
    ratio = np.where(np.isnan(ratio), np.inf, ratio)
    return _finish("doubling", ratio, C, R, lev, family)


def ap_constant(w, p, family=None, domain=None, tol=1e-9):
    """``max (avg_D w)(avg_D w^{1/(1-p)})^{p-1}`` over the family.

    A divergent dual integral makes the ball's value infinite and the
    verdict negative; the first such ball is the witness.
    """
    if not p > 1:
        raise ParameterError("A_p needs p > 1")
    if family is None:
        family = default_family(domain or BoxDomain.unit(w.dim))
    C, R, lev = family.members()
    dom = family.domain
    vol = MassTable(constant_weight(1.0, w.dim), dom, None, tol).many(C, R)
    Mw = MassTable(w, dom, None, tol).many(C, R)
    Md = MassTable(w.power(1.0 / (1.0 - p)), dom, None, tol).many(C, R)
    with np.errstate(invalid="ignore", over="ignore"):
        vals = (Mw / vol) * (Md / vol) ** (p - 1.0)
    vals = np.where(np.isnan(vals), np.inf, vals)
    finite = np.isfinite(vals)
    if np.any(vals[finite] < 1.0 - 1e-6):
        j = int(np.argmin(np.where(finite, vals, np.inf)))
        raise EvaluationError(f"A_p product {vals[j]:.9g} < 1 contradicts Jensen; "
                              "quadrature is unreliable on this ball", point=C[j])
    est = _finish("ap", vals, C, R, lev, family, p=float(p))
    if not np.all(finite):
        j = int(np.nonzero(~finite)[0][0])
        est.witness = (C[j], R[j])
        est.extra["divergent"] = True
    return est


# ---------------------------------------------------------------------------
# balance condition
# ---------------------------------------------------------------------------

@dataclass
class BalanceTables:
    """Mass ratios for nested pairs ``D(x, s) ⊂ D(x, r)``, ``s = r 2^-i``."""

    centers: np.ndarray
    r: np.ndarray
    s: np.ndarray
    i: np.ndarray
    tau_ratio: np.ndarray
    w_ratio: np.ndarray
    family: BallFamily
    depth: int


def balance_tables(w, tau, family=None, domain=None, depth=10, m=None, tol=1e-9):
    if family is None:
        dom = domain or BoxDomain.unit(w.dim)
        L = BALANCE_LEVEL.get(dom.dim, 2)
        family = BallFamily(dom, L, start=L)
    C, R, _ = family.members()
    Mw = MassTable(w, family.domain, m, tol)
    Mt = MassTable(tau, family.domain, m, tol)
    rows = []
    for c, r in zip(C, R):
        wr, tr = Mw(c, r), Mt(c, r)
        for i in range(depth + 1):
            s = r * 2.0 ** -i
            rows.append((c, r, s, i, Mt(c, s) / tr, Mw(c, s) / wr))
    if any(row[5] <= 0 for row in rows):
        bad = next(row for row in rows if row[5] <= 0)
        raise DegenerateBallError(f"zero w-mass on D({list(bad[0])}, {bad[2]:g})", Ball(bad[0], bad[2]))
    cols = list(zip(*rows))
    return BalanceTables(np.array(cols[0]), np.array(cols[1]), np.array(cols[2]),
                         np.array(cols[3]), np.array(cols[4]), np.array(cols[5]), family, depth)


def balance_from_tables(T, p, q, slope_tol=0.005):
    """Balance constant for exponents ``(p, q)`` from precomputed mass ratios.

    Refinement runs over the depth ``i`` of ``s / r = 2^-i``.  Besides the
    10% rule the tail growth rate ``d log2 C_i / d i`` must stay below
    ``slope_tol``; a slowly diverging sup passes the 10% rule alone.
    """
    if not np.all(T.s <= T.r):
        raise ParameterError("balance pairs need s <= r")
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        vals = (T.s / T.r) * T.tau_ratio ** (1.0 / q) / T.w_ratio ** (1.0 / p)
    vals = np.where(np.isnan(vals), np.inf, vals)
    per = [float(vals[T.i <= i].max()) for i in range(T.depth + 1)]
    tail = np.array(per[len(per) // 2:])
    slope = float(np.polyfit(np.arange(len(tail)), np.log2(tail), 1)[0]) if np.all(np.isfinite(tail)) else math.inf
    passed = stable_under_refinement(per) and slope <= slope_tol
    j = int(np.argmax(vals))
    return ClassEstimate("balance", float(vals[j]), list(range(T.depth + 1)), per, passed,
                         (T.centers[j], T.s[j]), T.family.describe(), len(vals),
                         {"p": float(p), "q": float(q), "tail_slope": _num(slope),
                          "witness_r": float(T.r[j])})


def balance_check(w, tau, p, q, family=None, domain=None, depth=10, m=None, tol=1e-9):
    """``max (s/r)(tau_s/tau_r)^{1/q} / (w_s/w_r)^{1/p}`` over nested pairs."""
    if not (p >= 1 and q > 0):
        raise ParameterError("need p >= 1 and q > 0")
    T = balance_tables(w, tau, family, domain, depth, m, tol)
    return balance_from_tables(T, p, q)


def q_search(w, tau, p, family=None, domain=None, k_max=80, depth=10, tables=None):
    """Scan ``q = p + 0.1 k`` upward; return the largest passing q and its estimate."""
    T = tables or balance_tables(w, tau, family, domain, depth)
    best, best_est, tried = None, None, []
    for k in range(1, k_max + 1):
        q = round(p + 0.1 * k, 10)
        est = balance_from_tables(T, p, q)
        tried.append((q, est.passed))
        if not est.passed:
            break
        best, best_est = q, est
    capped = best is not None and len(tried) == k_max and tried[-1][1]
    return best, best_est, {"tried": [[q, bool(ok)] for q, ok in tried], "capped": bool(capped)}


# ---------------------------------------------------------------------------
# vanishing limit
# ---------------------------------------------------------------------------

@dataclass
class VanishingCurve:
    s: list
    values: list
    passed: bool
    threshold: float
    p: float
    q: Optional[float]

    def to_dict(self):
        return {"s": list(self.s), "values": [_num(v) for v in self.values],
                "passed": bool(self.passed), "threshold": self.threshold,
                "p": self.p, "q": self.q}

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["s", "value"])
            for s, v in zip(self.s, self.values):
                wr.writerow([repr(float(s)), repr(float(v))])


def balance_vanishing_limit(w, tau, p, E, domain=None, q=None, halvings=12, per_axis=9,
                            threshold=1e-3, m=None, tol=1e-9):
    """Curve ``s -> sup_{x in E} s (tau(D(x,s)) / w(D(x,s)))^{1/p}``.

    ``s`` starts at half the distance from ``E`` to the boundary and is
    halved ``halvings`` times.  Passes when the curve strictly decreases
    and ends below ``threshold`` times its first value.
    """
    domain = domain or BoxDomain.unit(E.dim)
    if q is not None and not q > p:
        raise ParameterError("the vanishing limit needs q > p")
    r0 = float(np.min(np.concatenate([E.lo - domain.lo, domain.hi - E.hi])))
    if r0 <= 0:
        raise ParameterError("E must lie compactly inside the domain")
    xs = E.grid(per_axis)
    Mw, Mt = MassTable(w, domain, m, tol), MassTable(tau, domain, m, tol)
    ss, vals = [], []
    for k in range(halvings + 1):
        s = 0.5 * r0 * 2.0 ** -k
        wv, tv = Mw.many(xs, np.full(len(xs), s)), Mt.many(xs, np.full(len(xs), s))
        if np.any(wv <= 0):
            raise DegenerateBallError(f"zero w-mass at s={s:g}")
        ss.append(s)
        vals.append(float(np.max(s * (tv / wv) ** (1.0 / p))))
    dec = all(b < a for a, b in zip(vals, vals[1:]))
    passed = dec and vals[-1] < threshold * vals[0]
    return VanishingCurve(ss, vals, passed, threshold, float(p), None if q is None else float(q))


# ---------------------------------------------------------------------------
# admissibility
# ---------------------------------------------------------------------------

@dataclass
class AdmissibilityReport:
    p: float
    q: Optional[float]
    doubling: ClassEstimate
    ap: ClassEstimate
    balance: Optional[ClassEstimate]
    q_search: dict
    w_le_tau: bool

    @property
    def admissible(self):
        return bool(self.w_le_tau and self.doubling.passed and self.ap.passed
                     and self.balance is not None and self.balance.passed)

    def to_dict(self):
        return {
            "p": self.p,
            "q": self.q,
            "doubling_constant": self.doubling.to_dict(),
            "ap_constant": self.ap.to_dict(),
            "balance_constant": None if self.balance is None else self.balance.to_dict(),
            "q_search": self.q_search,
            "w_le_tau": bool(self.w_le_tau),
            "admissible": self.admissible,
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), sort_keys=True, **kw)


def check_admissible(w, tau, p, domain=None, family=None, k_max=80, depth=10, samples=2000, rng=0):
    """Run the doubling, A_p and balance checks and the ``q > p`` search."""
    domain = domain or BoxDomain.unit(w.dim)
    pts = domain.lo + domain.widths * np.random.default_rng(rng).random((samples, domain.dim))
    le = bool(np.all(w(pts) <= tau(pts) * (1 + 1e-12)))
    dbl = doubling_constant(tau, family, domain)
    ap = ap_constant(w, p, family, domain)
    q, bal, info = q_search(w, tau, p, None, domain, k_max, depth)
    if bal is None:
        bal = balance_check(w, tau, p, round(p + 0.1, 10), None, domain, depth)
    return AdmissibilityReport(float(p), q, dbl, ap, bal, info, le)
