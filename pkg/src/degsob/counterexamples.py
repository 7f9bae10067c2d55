"""The two explicit families showing that local Poincare/Sobolev hypotheses
do not give a global embedding on the unit cube.

Example A: ``u = (x1^-beta - 2) psi(x^)`` has finite degenerate Sobolev norm
for ``Q = Diag[x1^2, 1, ...]`` but ``u`` is not in ``L^q`` once
``beta q >= 1``; the ramps ``u_j`` approximate it by compactly supported
Lipschitz functions.

Example B: ``v_j`` (square-root-type tents on ``(1/j, 3/j)``) are bounded
in the one-dimensional weighted norm with ``q(t) = t^{2p}`` and have
``L^p`` mass bounded below, but converge to zero pointwise, so no
subsequence converges in ``L^p``.  The index written ``n`` inside the
tent formulas is taken to be ``j``.

Both families are built from :class:`Profile`, a piecewise function of
``x1`` whose branches use local coordinates anchored at their breakpoints,
so seam values are evaluated without cancellation.
"""
from dataclasses import dataclass, field
import itertools
import math
from typing import Callable, Tuple

import numpy as np

from .errors import DivergenceVerdict, ParameterError
from .fields import (BoxDomain, Face, ScalarField, diag_power_matrix,
                     power_weight, smooth_bump)
from .probes import ProbeReport, classify, global_sobolev_ratio
from .quadrature import integrate, qh1p_norm, weighted_lp_norm

PSI_RADIUS = 0.45


# ---------------------------------------------------------------------------
# piecewise profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Branch:
    """``f(s)`` on ``lo < t <= hi`` with local coordinate ``s = sign (t - anchor)``.

    ``df(s)`` is ``df/ds``.
    """

    lo: float
    hi: float
    f: Callable
    df: Callable
    anchor: float = 0.0
    sign: float = 1.0


def _zero(s):
    return np.zeros_like(np.asarray(s, dtype=float))


@dataclass(frozen=True)
class Profile:
    """Piecewise function of one variable; zero outside its branches.

    ``seams`` holds ``(t, s_left, s_right)``: the breakpoint and its exact
    local coordinate in the branch to each side.
    """

    branches: Tuple[Branch, ...]
    seams: Tuple[Tuple[float, float, float], ...]

    def _select(self, t, which):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for b in self.branches:
            m = (t > b.lo) & (t <= b.hi)
            if np.any(m):
                s = b.sign * (t[m] - b.anchor)
                out[m] = b.f(s) if which == "f" else b.sign * b.df(s)
        if which == "f":
            # a point exactly on a seam takes the left branch at its exact offset
            for ts, sl, _ in self.seams:
                m = t == ts
                if np.any(m):
                    left = next((b for b in self.branches if b.hi == ts), None)
                    out[m] = 0.0 if left is None else left.f(np.array([sl]))[0]
        return out

    def __call__(self, t):
        return self._select(t, "f")

    def deriv(self, t):
        return self._select(t, "df")

    def seam_jumps(self):
        """``|left branch - right branch|`` at every seam, from exact local coordinates."""
        out = []
        for k, (t, sl, sr) in enumerate(self.seams):
            left = next((b for b in self.branches if b.hi == t), None)
            right = next((b for b in self.branches if b.lo == t), None)
            fl = 0.0 if left is None else float(left.f(np.array([sl]))[0])
            fr = 0.0 if right is None else float(right.f(np.array([sr]))[0])
            out.append(abs(fl - fr))
        return out


def psi_bump(dim, radius=PSI_RADIUS):
    """Peak-1 smooth bump in ``n - 1`` variables, centred in the unit cube."""
    return smooth_bump(np.full(dim, 0.5), radius)


def lift(profile, psi, support_x1, singular=(), name=""):
    """``profile(x1) * psi(x^)`` as an n-dimensional field with analytic gradient."""
    n = psi.dim + 1
    c, R = psi.support.c, psi.support.radius

    def value(x):
        return profile(x[:, 0]) * psi(x[:, 1:])

    def gradient(x):
        g = np.empty_like(x)
        ps = psi(x[:, 1:])
        g[:, 0] = profile.deriv(x[:, 0]) * ps
        g[:, 1:] = profile(x[:, 0])[:, None] * psi.grad(x[:, 1:])
        return g

    support = BoxDomain((support_x1[0],) + tuple(c - R), (support_x1[1],) + tuple(c + R))
    seams = tuple((0, t) for t, _, _ in profile.seams)
    return ScalarField(value, n, gradient, support, seams, tuple(singular), name)


def on_interval(profile, support, singular=(), name=""):
    """The profile as a one-dimensional field."""
    return ScalarField(lambda x: profile(x[:, 0]), 1, lambda x: profile.deriv(x[:, 0])[:, None],
                       BoxDomain((support[0],), (support[1],)),
                       tuple((0, t) for t, _, _ in profile.seams), tuple(singular), name)


# ---------------------------------------------------------------------------
# Example A
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExampleAParams:
    n: int = 2
    p: float = 2.0
    q: float = 4.0
    beta: float = 0.3
    indices: Tuple[int, ...] = (21, 30, 50, 100, 200, 500, 1000)
    psi_radius: float = PSI_RADIUS

    def __post_init__(self):
        if self.n < 2:
            raise ParameterError("Example A needs n >= 2")
        if not self.p > 1:
            raise ParameterError("Example A needs p > 1")
        if not self.q > self.p:
            raise ParameterError("Example A needs q > p")
        if not (self.beta * self.q >= 1 - 1e-12 and self.beta * self.p < 1):
            raise ParameterError(f"beta={self.beta} must lie in [1/q, 1/p) = [{1 / self.q:g}, {1 / self.p:g})")
        if not 0 < self.psi_radius < 0.5:
            raise ParameterError("psi radius must lie in (0, 1/2) to keep compact support")
        jmin = 2.0 ** (1 + 1 / self.beta)
        bad = [j for j in self.indices if not j > jmin]
        if bad:
            raise ParameterError(f"indices {bad} violate j > 2^(1+1/beta) = {jmin:.4g}")

    @property
    def x_end(self):
        return 2.0 ** (-1.0 / self.beta)


def profile_a(beta):
    xe = 2.0 ** (-1.0 / beta)
    br = Branch(0.0, xe, lambda s: s ** -beta - 2.0, lambda s: -beta * s ** (-beta - 1.0))
    return Profile((br,), ((xe, xe, 0.0),))


def profile_a_j(beta, j):
    xe = 2.0 ** (-1.0 / beta)
    slope = ((j / 2.0) ** beta - 2.0) * j
    ramp = Branch(1.0 / j, 2.0 / j, lambda s: slope * s, lambda s: np.full_like(s, slope), anchor=1.0 / j)
    body = Branch(2.0 / j, xe, lambda s: s ** -beta - 2.0, lambda s: -beta * s ** (-beta - 1.0))
    return Profile((ramp, body), ((1.0 / j, 0.0, 0.0), (2.0 / j, 1.0 / j, 2.0 / j), (xe, xe, 0.0)))


@dataclass
class ExampleA:
    params: ExampleAParams
    Q: object
    u: ScalarField
    family: dict
    psi: ScalarField
    profiles: dict = field(default_factory=dict)

    @property
    def domain(self):
        return BoxDomain.unit(self.params.n)


def build_example_a(params=None):
    """``Q = Diag[x1^2, 1, ...]``, the limit ``u`` and the approximants ``u_j``."""
    P = params or ExampleAParams()
    psi = psi_bump(P.n - 1, P.psi_radius)
    Q = diag_power_matrix(P.n, 2.0, 0)
    prof = profile_a(P.beta)
    u = lift(prof, psi, (0.0, P.x_end), (Face(0, 0.0, -P.beta),), "u")
    fam, profs = {}, {"u": prof}
    for j in P.indices:
        pj = profile_a_j(P.beta, j)
        profs[j] = pj
        fam[j] = lift(pj, psi, (1.0 / j, P.x_end), (), f"u_{j}")
    return ExampleA(P, Q, u, fam, psi, profs)


def verify_a_cauchy(ex, tol=1e-9):
    """Curve ``j -> ||u - u_j||`` in the degenerate norm (v = m = 1)."""
    P, dom = ex.params, ex.domain
    js = list(P.indices)
    totals, lp, gp, errs = [], [], [], []
    for j in js:
        rep = qh1p_norm(ex.u - ex.family[j], ex.Q, p=P.p, region=dom, domain=dom, tol=tol)
        totals.append(rep.total)
        lp.append(rep.lp_part)
        gp.append(rep.grad_part)
        errs.append(rep.lp_error + rep.grad_error)
    pair = [qh1p_norm(ex.family[a] - ex.family[b], ex.Q, p=P.p, region=dom, domain=dom, tol=tol).total
            for a, b in zip(js, js[1:])]
    j0 = next((js[i] for i in range(len(js))
               if all(x > y for x, y in zip(totals[i:], totals[i + 1:]))), None)
    ratio = totals[-1] / totals[0]
    rep = ProbeReport("example-a-cauchy", "j", js, totals, classify(totals), errs,
                      family="u_j ramps",
                      extra={"lp_parts": lp, "grad_parts": gp, "pairwise": pair,
                             "monotone_from": j0, "final_over_initial": ratio,
                             "decay_target": 1e-3, "decay_reached": ratio < 1e-3})
    return rep


def verify_a_divergence(ex, halvings=60, fit_last=20, tol=1e-11):
    """Partial integrals ``F(eps) = ∫_{x1 > eps} |u|^q`` on ``eps = x_end 2^-k``.

    The growth exponent is fitted on the slab increments
    ``F(eps/2) - F(eps) = ∫_{eps/2 < x1 < eps} |u|^q``, each integrated
    directly, which removes the constant offset of ``F``.  The expected
    exponent is ``1 - beta q``; at ``beta q = 1`` the increments tend to a
    constant and ``F`` grows like ``log(1/eps)``.
    """
    P = ex.params
    q = P.q
    c, R = ex.psi.support.c, ex.psi.support.radius
    lo_hat, hi_hat = tuple(c - R), tuple(c + R)
    u = ex.u

    def slab(a, b):
        box = BoxDomain((a,) + lo_hat, (b,) + hi_hat)
        return integrate(lambda x: np.abs(u(x)) ** q, box, tol=tol).value

    eps = [P.x_end * 2.0 ** -k for k in range(halvings + 1)]
    incr = [slab(eps[k + 1], eps[k]) for k in range(halvings)]
    F = list(np.cumsum(incr))
    e_tail = np.log(eps[1:][-fit_last:])
    fit = float(np.polyfit(e_tail, np.log(incr[-fit_last:]), 1)[0])
    try:
        weighted_lp_norm(u, p=q, region=ex.domain, domain=ex.domain)
        raised = False
    except DivergenceVerdict:
        raised = True
    expected = 1.0 - P.beta * q
    log_case = abs(P.beta * q - 1.0) < 1e-12
    extra = {"expected_exponent": expected, "fitted_exponent": fit, "increments": incr,
             "log_case": log_case, "divergence_verdict_raised": raised,
             "psi_q_norm_q": integrate(lambda y: ex.psi(y) ** q, BoxDomain(lo_hat, hi_hat), tol=tol).value}
    if log_case:
        extra["increment_limit"] = math.log(2.0) * extra["psi_q_norm_q"]
    return ProbeReport("example-a-divergence", "eps", eps[1:], F, "diverging" if raised else classify(F),
                       family="u", extra=extra)


# ---------------------------------------------------------------------------
# Example B
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExampleBParams:
    p: float = 2.0
    indices: Tuple[int, ...] = (10, 20, 50, 100, 200, 500, 1000)
    dim: int = 2
    psi_radius: float = PSI_RADIUS

    def __post_init__(self):
        if not self.p > 1:
            raise ParameterError("Example B needs p > 1")
        for n in self.indices:
            a = 1.0 / n + n ** -(self.p + 2)
            b = 3.0 / n - n ** -(self.p + 2)
            if not (a < 2.0 / n < b < 1.0):
                raise ParameterError(f"index {n} too small: need 1/n + n^-(p+2) < 2/n < 3/n - n^-(p+2) < 1")
        if self.dim < 1:
            raise ParameterError("dim must be >= 1")


def profile_b(n, p):
    """The tent ``v_j`` with index ``n``; left half anchored at ``1/n``, right at ``3/n``."""
    k = n ** (2.0 / p)
    d = float(n) ** -(p + 2)
    inv = 1.0 / n
    f = lambda s: k * s ** (1.0 / p) - inv
    df = lambda s: (k / p) * s ** (1.0 / p - 1.0)
    left = Branch(inv + d, 2.0 / n, f, df, anchor=inv, sign=1.0)
    right = Branch(2.0 / n, 3.0 / n - d, f, df, anchor=3.0 / n, sign=-1.0)
    seams = ((inv + d, 0.0, d), (2.0 / n, inv, inv), (3.0 / n - d, d, 0.0))
    return Profile((left, right), seams)


def b_support(n, p):
    d = float(n) ** -(p + 2)
    return 1.0 / n + d, 3.0 / n - d


def b_singular(n, p):
    return (Face(0, 1.0 / n, 1.0 / p), Face(0, 3.0 / n, 1.0 / p))


@dataclass
class ExampleB:
    params: ExampleBParams
    weight: object
    family: dict
    lifted: dict
    Q: object
    Q1: object
    profiles: dict


def build_example_b(params=None):
    """Weight ``t^{2p}``, tents ``v_j``, lifts ``v_j(x1) psi(x^)`` and ``Diag[x1^{2p}, 1, ...]``."""
    P = params or ExampleBParams()
    p = P.p
    fam, lifted, profs = {}, {}, {}
    psi = psi_bump(P.dim - 1, P.psi_radius) if P.dim > 1 else None
    for n in P.indices:
        prof = profile_b(n, p)
        profs[n] = prof
        sup = b_support(n, p)
        fam[n] = on_interval(prof, sup, b_singular(n, p), f"v_{n}")
        if psi is not None:
            lifted[n] = lift(prof, psi, sup, b_singular(n, p), f"u_{n}")
    Q = diag_power_matrix(P.dim, 2 * p, 0) if P.dim > 1 else None
    return ExampleB(P, power_weight(2 * p), fam, lifted, Q, diag_power_matrix(1, 2 * p, 0), profs)


# In the tent formulas substitute u = n (t - 1/n) on the left half (and
# u = 3 - n t on the right).  Each half of ∫ v^s becomes
#   n^{s/p - 1} ∫_{n^{-(p+1)}}^1 (u^{1/p} - n^{-(1+1/p)})^s du,
# and the weighted gradient term becomes
#   p^{-p} n^{p - p^2} ∫_{n^{-(p+1)}}^1 u^{1-p} [(1+u)^{p^2} + (3-u)^{p^2}] du.
# Both integrals are O(1) on [n^{-(p+1)}, 1] for every n.

def tent_power_integral(n, p, s=None, tol=1e-12):
    """``∫_0^1 v_n^s dt`` (default ``s = p``) in scaled coordinates."""
    s = p if s is None else s
    a = float(n) ** -(p + 1)
    c = float(n) ** -(1 + 1 / p)
    val = integrate(lambda u: np.maximum(u[:, 0] ** (1 / p) - c, 0.0) ** s,
                    BoxDomain((a,), (1.0,)), (Face(0, 0.0, 1 / p),), tol=tol).value
    return 2.0 * n ** (s / p - 1.0) * val


def tent_gradient_integral(n, p, tol=1e-12):
    """``∫_0^1 |sqrt(t^{2p}) v_n'|^p dt`` in scaled coordinates."""
    a = float(n) ** -(p + 1)
    pp = p * p
    val = integrate(lambda u: u[:, 0] ** (1 - p) * ((1 + u[:, 0]) ** pp + (3 - u[:, 0]) ** pp),
                    BoxDomain((a,), (1.0,)), (Face(0, 0.0, 1 - p),), tol=tol).value
    return p ** -p * n ** (p - pp) * val


def verify_b_bounds(ex, tol=1e-12, limit_tol=1e-3):
    """Curve ``j -> ∫ v_j^p``: at most 1 from ``j0`` on, tail at least ``2^{1-p} - tol``."""
    p = ex.params.p
    js = list(ex.params.indices)
    vals = [tent_power_integral(n, p, tol=tol) for n in js]
    j0 = next((js[i] for i in range(len(js)) if all(v <= 1.0 for v in vals[i:])), None)
    floor = 2.0 ** (1 - p)
    tail = min(vals[-3:])
    pointwise = [float(ex.family[n](np.array([[0.5]]))[0]) for n in js]
    passed = j0 is not None and tail >= floor - limit_tol
    return ProbeReport("example-b-bounds", "j", js, vals, "bounded" if passed else "diverging",
                       family="v_j tents",
                       extra={"j0": j0, "lower_limit": floor, "tail_min": tail, "upper": 1.0,
                              "pointwise_at_half": pointwise, "passed": passed})


def verify_b_gradient_bound(ex, tol=1e-12):
    """Curve ``j -> ∫ t^{p^2} |v_j'|^p``; bounded when it plateaus or decreases."""
    p = ex.params.p
    js = list(ex.params.indices)
    vals = [tent_gradient_integral(n, p, tol=tol) for n in js]
    verdict = classify(vals)
    passed = verdict in ("bounded", "vanishing")
    return ProbeReport("example-b-gradient", "j", js, vals, verdict, family="v_j tents",
                       extra={"sup": max(vals), "passed": passed})


def disjoint_indices(count=20, start=4):
    """``start * 3^k``: consecutive supports ``(1/j, 3/j)`` touch at most at an endpoint."""
    return [start * 3 ** k for k in range(count)]


def verify_b_noncompact(p=2.0, indices=None, eps=0.1, large_from=3, tol=1e-12, slack=5e-3):
    """Pairwise ``||v_j - v_k||_p^p`` for pairwise disjoint supports.

    With disjoint supports the p-th powers add, so each distance is the sum
    of two tent masses.  A subsequence that is ``eps``-Cauchy would need
    some pair closer than ``eps``; none is.
    """
    idx = list(indices or disjoint_indices())
    for a, b in zip(idx, idx[1:]):
        if not 3.0 / b <= 1.0 / a and not 3.0 / a <= 1.0 / b:
            raise ParameterError(f"indices {a}, {b} do not have disjoint supports")
    mass = {n: tent_power_integral(n, p, tol=tol) for n in idx}
    pairs, dists = [], []
    for a, b in itertools.combinations(idx, 2):
        pairs.append((a, b))
        dists.append(mass[a] + mass[b])
    large = [d for (a, b), d in zip(pairs, dists) if a >= idx[large_from] and b >= idx[large_from]]
    bound = 2.0 * 2.0 ** (1 - p) - slack
    min_large = min(large) if large else float("nan")
    min_dist = min(d ** (1.0 / p) for d in dists)
    cauchy_pair = min_dist < eps
    return ProbeReport("example-b-noncompact", "pair", list(range(len(pairs))), dists,
                       "bounded", family="disjoint v_j",
                       extra={"indices": idx, "pairs": [list(x) for x in pairs],
                              "min_large_pair": min_large, "lower_bound": bound,
                              "min_distance": min_dist, "eps": eps,
                              "eps_cauchy_subsequence": bool(cauchy_pair),
                              "passed": bool(min_large >= bound and not cauchy_pair)})


def lifted_sobolev_growth(ex, sigma, tol=1e-9):
    """``j -> global_sobolev_ratio(u_j)`` on the unit cube with ``Q = Diag[x1^{2p}, 1, ...]``."""
    P = ex.params
    dom = BoxDomain.unit(P.dim)
    js = list(P.indices)
    vals = [global_sobolev_ratio(ex.lifted[n], ex.Q, p=P.p, sigma=sigma, domain=dom, tol=tol) for n in js]
    return ProbeReport("example-b-global-sobolev", "j", js, vals, classify(vals),
                       family="v_j(x1) psi(x^)",
                       extra={"sigma": sigma, "growth": vals[-1] / vals[0],
                              "predicted_exponent": (sigma - 1) / (P.p * sigma)})
