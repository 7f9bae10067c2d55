"""Domains, scalar fields with gradients, weights and matrix fields.

All fields are vectorized: they take an ``(k, n)`` array of points and
return ``(k,)`` values (``(k, n)`` gradients, ``(k, n, n)`` matrices).
A single point may be passed as a 1-d array.

Singular behaviour is *declared*, never detected.  A :class:`Face`
``(axis, at, exponent)`` states that a quantity behaves like
``|x[axis] - at| ** exponent`` near the hyperplane ``x[axis] = at``; a
:class:`Point` states the same for ``|x - at| ** exponent``.  Quadrature
uses these declarations to grade meshes and to decide divergence.
"""
from dataclasses import dataclass
import math
from typing import Callable, Optional, Tuple, Union

import numpy as np

from .errors import DefinitenessError, EvaluationError, ParameterError

DEFINITENESS_FLOOR = 1e-12


def as_points(x, dim=None):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :] if dim is None or x.shape[0] == dim else x[:, None]
    elif x.ndim == 0:
        x = x.reshape(1, 1)
    return x


# ---------------------------------------------------------------------------
# regions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box ``prod_i (lower[i], upper[i])``."""

    lower: Tuple[float, ...]
    upper: Tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(a) for a in np.atleast_1d(self.lower))
        hi = tuple(float(b) for b in np.atleast_1d(self.upper))
        if len(lo) != len(hi) or len(lo) < 1:
            raise ParameterError("lower and upper must have the same positive length")
        if not all(a < b for a, b in zip(lo, hi)):
            raise ParameterError(f"degenerate box: lower={lo}, upper={hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def unit(cls, n=1):
        return cls((0.0,) * n, (1.0,) * n)

    @property
    def dim(self):
        return len(self.lower)

    @property
    def lo(self):
        return np.array(self.lower)

    @property
    def hi(self):
        return np.array(self.upper)

    @property
    def widths(self):
        return self.hi - self.lo

    @property
    def volume(self):
        return float(np.prod(self.widths))

    @property
    def diameter(self):
        return float(np.linalg.norm(self.widths))

    @property
    def center(self):
        return 0.5 * (self.lo + self.hi)

    def contains(self, x, closed=False):
        x = as_points(x, self.dim)
        if closed:
            return np.all((x >= self.lo) & (x <= self.hi), axis=1)
        return np.all((x > self.lo) & (x < self.hi), axis=1)

    def contains_box(self, other):
        return all(a <= c and d <= b for a, b, c, d in
                   zip(self.lower, self.upper, other.lower, other.upper))

    def intersect(self, other):
        lo = np.maximum(self.lo, other.lo)
        hi = np.minimum(self.hi, other.hi)
        if np.any(lo >= hi):
            return None
        return BoxDomain(lo, hi)

    def corners(self):
        axes = [(a, b) for a, b in zip(self.lower, self.upper)]
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def grid(self, k):
        """``k**n`` points including the faces, lexicographic order."""
        axes = [np.linspace(a, b, k) for a, b in zip(self.lower, self.upper)]
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def boundary_distance(self, x):
        x = as_points(x, self.dim)
        return np.minimum(x - self.lo, self.hi - x).min(axis=1)


@dataclass(frozen=True)
class Ball:
    """Euclidean ball ``{y : |y - center| < radius}``."""

    center: Tuple[float, ...]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0:
            raise ParameterError(f"ball radius must be positive, got {self.radius}")

    @property
    def dim(self):
        return len(self.center)

    @property
    def c(self):
        return np.array(self.center)

    def dilate(self, factor):
        return Ball(self.center, self.radius * factor)

    def bounding_box(self):
        return BoxDomain(self.c - self.radius, self.c + self.radius)

    def inside(self, domain):
        """True when the closed ball lies in the open box."""
        return bool(np.all(self.c - self.radius > domain.lo) and np.all(self.c + self.radius < domain.hi))

    def contains(self, x, closed=False):
        d = np.linalg.norm(as_points(x, self.dim) - self.c, axis=1)
        return d <= self.radius if closed else d < self.radius

    @property
    def euclidean_volume(self):
        n = self.dim
        return math.pi ** (n / 2) / math.gamma(n / 2 + 1) * self.radius ** n


Region = Union[BoxDomain, Ball]


def region_inside(inner, outer):
    """Whether region ``inner`` is contained in the closure of ``outer``."""
    tol = 1e-12
    if isinstance(inner, BoxDomain):
        if isinstance(outer, BoxDomain):
            return outer.contains_box(inner)
        d = np.linalg.norm(inner.corners() - outer.c, axis=1)
        return bool(np.all(d <= outer.radius * (1 + tol)))
    if isinstance(outer, Ball):
        return bool(np.linalg.norm(inner.c - outer.c) + inner.radius <= outer.radius * (1 + tol))
    return outer.contains_box(inner.bounding_box())


# ---------------------------------------------------------------------------
# singular loci
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Face:
    """Quantity behaves like ``|x[axis] - at| ** exponent`` near the face."""

    axis: int
    at: float
    exponent: float

    @property
    def locus(self):
        return ("face", self.axis, float(self.at))

    def with_exponent(self, e):
        return Face(self.axis, self.at, e)


@dataclass(frozen=True)
class Point:
    """Quantity behaves like ``|x - at| ** exponent`` near the point."""

    at: Tuple[float, ...]
    exponent: float

    def __post_init__(self):
        object.__setattr__(self, "at", tuple(float(a) for a in np.atleast_1d(self.at)))

    @property
    def locus(self):
        return ("point", self.at)

    def with_exponent(self, e):
        return Point(self.at, e)


def combine_singular(*groups):
    """Sum exponents of coinciding loci; keep distinct loci separately."""
    out = {}
    for group in groups:
        for s in group:
            if s.locus in out:
                out[s.locus] = out[s.locus].with_exponent(out[s.locus].exponent + s.exponent)
            else:
                out[s.locus] = s
    return tuple(out.values())


def scale_singular(sing, factor):
    return tuple(s.with_exponent(s.exponent * factor) for s in sing)


def merge_singular(*groups):
    """Union of loci keeping the most singular exponent per locus."""
    out = {}
    for group in groups:
        for s in group:
            if s.locus not in out or s.exponent < out[s.locus].exponent:
                out[s.locus] = s
    return tuple(out.values())


# ---------------------------------------------------------------------------
# scalar fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ScalarField:
    """An explicit locally Lipschitz function standing in for a pair (f, grad f).

    ``value`` and ``gradient`` are vectorized callables.  When ``gradient``
    is omitted, centered finite differences with step ``fd_step`` are used;
    they are never taken across a declared seam.  ``support`` (a box or a
    ball) forces the value and gradient to vanish outside it.  ``seams``
    lists ``(axis, coordinate)`` hyperplanes where the gradient jumps.
    """

    value: Callable
    dim: int
    gradient: Optional[Callable] = None
    support: Optional[Region] = None
    seams: Tuple[Tuple[int, float], ...] = ()
    singular: Tuple = ()
    name: str = ""
    fd_step: float = 1e-6

    @property
    def analytic_gradient(self):
        return self.gradient is not None

    def _mask(self, x):
        if self.support is None:
            return None
        return self.support.contains(x, closed=True)

    def __call__(self, x):
        x = as_points(x, self.dim)
        out = np.asarray(self.value(x), dtype=np.float64).reshape(len(x))
        mask = self._mask(x)
        if mask is not None:
            out = np.where(mask, out, 0.0)
        return out

    def grad(self, x):
        x = as_points(x, self.dim)
        if self.gradient is not None:
            g = np.asarray(self.gradient(x), dtype=np.float64).reshape(len(x), self.dim)
        else:
            g = self._fd_gradient(x)
        mask = self._mask(x)
        if mask is not None:
            g = np.where(mask[:, None], g, 0.0)
        return g

    def _fd_gradient(self, x):
        h = self.fd_step
        g = np.empty_like(x)
        for a in range(self.dim):
            lo_step = np.full(len(x), h)
            hi_step = np.full(len(x), h)
            for axis, at in self.seams:
                if axis != a:
                    continue
                d = x[:, a] - at
                # one-sided differences on the near side of a seam
                hi_step = np.where((d < 0) & (-d < h), 0.0, hi_step)
                lo_step = np.where((d >= 0) & (d < h), 0.0, lo_step)
            xp = x.copy()
            xm = x.copy()
            xp[:, a] += hi_step
            xm[:, a] -= lo_step
            g[:, a] = (self.value(xp) - self.value(xm)) / (hi_step + lo_step)
        return g

    # arithmetic -----------------------------------------------------------

    def _combine(self, other, sign, name):
        if self.dim != other.dim:
            raise ParameterError("fields of different dimension")
        if self.support is not None and other.support is not None:
            a, b = _as_box(self.support), _as_box(other.support)
            support = BoxDomain(np.minimum(a.lo, b.lo), np.maximum(a.hi, b.hi))
        else:
            support = None
        f, g = self, other
        grad = None
        if f.gradient is not None and g.gradient is not None:
            grad = lambda x: f.grad(x) + sign * g.grad(x)
        return ScalarField(
            value=lambda x: f(x) + sign * g(x),
            dim=self.dim,
            gradient=grad,
            support=support,
            seams=tuple(dict.fromkeys(self.seams + other.seams)),
            singular=merge_singular(self.singular, other.singular),
            name=name,
        )

    def __add__(self, other):
        return self._combine(other, 1.0, f"({self.name}+{other.name})")

    def __sub__(self, other):
        return self._combine(other, -1.0, f"({self.name}-{other.name})")

    def __mul__(self, c):
        c = float(c)
        f = self
        grad = (lambda x: c * f.grad(x)) if f.gradient is not None else None
        return ScalarField(lambda x: c * f(x), self.dim, grad, self.support,
                           self.seams, self.singular, f"{c:g}*{self.name}")

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def shifted(self, c):
        f = self
        grad = f.grad if f.gradient is not None else None
        return ScalarField(lambda x: f(x) + c, self.dim, grad, None,
                           self.seams, self.singular, f"{self.name}+{c:g}")


def _as_box(region):
    return region if isinstance(region, BoxDomain) else region.bounding_box()


def constant(c, dim):
    return ScalarField(lambda x: np.full(len(x), float(c)), dim,
                       lambda x: np.zeros_like(x), name=f"const({c:g})")


def monomial(powers):
    """``prod_i x_i ** powers[i]`` with integer powers."""
    powers = tuple(int(k) for k in powers)
    dim = len(powers)

    def value(x):
        return np.prod(x ** np.array(powers, dtype=float), axis=1)

    def gradient(x):
        g = np.empty_like(x)
        for a, k in enumerate(powers):
            if k == 0:
                g[:, a] = 0.0
                continue
            pw = np.array(powers, dtype=float)
            pw[a] -= 1
            g[:, a] = k * np.prod(x ** pw, axis=1)
        return g

    name = "*".join(f"x{i + 1}^{k}" for i, k in enumerate(powers) if k) or "1"
    return ScalarField(value, dim, gradient, name=name)


def polynomial_family(dim, degree=3):
    """All non-constant monomials of total degree at most ``degree``."""
    out = []
    for total in range(1, degree + 1):
        for powers in np.ndindex(*([total + 1] * dim)):
            if sum(powers) == total:
                out.append(monomial(powers))
    return out


def smooth_bump(center, radius, dim=None):
    """``exp(1 - 1/(1 - |x-c|^2/R^2))`` inside the ball, peak 1, C-infinity."""
    center = np.atleast_1d(np.asarray(center, dtype=float))
    dim = dim or len(center)
    R = float(radius)

    def value(x):
        z = ((x - center) ** 2).sum(axis=1) / R ** 2
        out = np.zeros(len(x))
        m = z < 1
        out[m] = np.exp(1.0 - 1.0 / (1.0 - z[m]))
        return out

    def gradient(x):
        z = ((x - center) ** 2).sum(axis=1) / R ** 2
        g = np.zeros_like(x)
        m = z < 1
        fz = np.exp(1.0 - 1.0 / (1.0 - z[m]))
        dfdz = -fz / (1.0 - z[m]) ** 2
        g[m] = (dfdz * 2.0 / R ** 2)[:, None] * (x[m] - center)
        return g

    return ScalarField(value, dim, gradient, support=Ball(center, R),
                       name=f"bump(c={tuple(np.round(center, 6))},R={R:g})")


def cone_bump(center, k, dim=None):
    """``max(0, 1 - k|x - center|)``: Lipschitz, supported in radius ``1/k``."""
    center = np.atleast_1d(np.asarray(center, dtype=float))
    dim = dim or len(center)
    k = float(k)

    def value(x):
        return np.maximum(0.0, 1.0 - k * np.linalg.norm(x - center, axis=1))

    def gradient(x):
        d = x - center
        r = np.linalg.norm(d, axis=1)
        g = np.zeros_like(x)
        m = (r < 1.0 / k) & (r > 0)
        g[m] = -k * d[m] / r[m, None]
        return g

    return ScalarField(value, dim, gradient, support=Ball(center, 1.0 / k),
                       name=f"cone(k={k:g})")


def sine_mode(mode, dim, axis=0):
    """``sin(mode*pi*x[axis]) / mode``."""
    w = mode * math.pi

    def value(x):
        return np.sin(w * x[:, axis]) / mode

    def gradient(x):
        g = np.zeros_like(x)
        g[:, axis] = math.pi * np.cos(w * x[:, axis])
        return g

    return ScalarField(value, dim, gradient, name=f"sin({mode}pi x{axis + 1})/{mode}")


def gradient_mismatch(f, domain, n_points=100, rng=None, h=1e-6):
    """Max relative mismatch between ``f.grad`` and centered differences
    at random interior points at least ``10*h`` away from seams."""
    rng = np.random.default_rng(rng)
    pts = []
    lo, hi = domain.lo, domain.hi
    while len(pts) < n_points:
        x = lo + (hi - lo) * rng.uniform(0.02, 0.98, size=domain.dim)
        if any(abs(x[a] - at) < 10 * h for a, at in f.seams):
            continue
        if f.support is not None:
            bnd = _support_boundary_distance(f.support, x)
            if bnd < 10 * h:
                continue
        pts.append(x)
    x = np.array(pts)
    ga = f.grad(x)
    gf = np.empty_like(x)
    for a in range(domain.dim):
        xp, xm = x.copy(), x.copy()
        xp[:, a] += h
        xm[:, a] -= h
        gf[:, a] = (f(xp) - f(xm)) / (2 * h)
    num = np.linalg.norm(ga - gf, axis=1)
    den = np.maximum(np.linalg.norm(ga, axis=1), 1.0)
    return float((num / den).max())


def _support_boundary_distance(support, x):
    if isinstance(support, Ball):
        return abs(np.linalg.norm(x - support.c) - support.radius)
    return float(np.min(np.abs(np.concatenate([x - support.lo, support.hi - x]))))


# ---------------------------------------------------------------------------
# weights
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class WeightField:
    """A nonnegative weight with declared singular loci.

    ``closed_form_ball_mass(ball, domain)`` returns the mass of
    ``ball ∩ domain`` or ``None`` when no closed form applies.
    """

    value: Callable
    dim: int
    singular: Tuple = ()
    closed_form_ball_mass: Optional[Callable] = None
    name: str = ""
    const: Optional[float] = None
    power_of: Optional[tuple] = None

    def __call__(self, x):
        x = as_points(x, self.dim)
        return np.asarray(self.value(x), dtype=np.float64).reshape(len(x))

    def power(self, s):
        """The weight ``self ** s``; closed forms survive for constants and powers."""
        s = float(s)
        base = self
        if self.const is not None:
            return constant_weight(self.const ** s, self.dim)
        if self.power_of is not None:
            coef, e, axis, at = self.power_of
            out = power_weight(e * s, self.dim, axis, at)
            return out if coef == 1.0 else out.scaled(coef ** s)
        return WeightField(lambda x: base(x) ** s, self.dim,
                           scale_singular(self.singular, s), None,
                           f"({self.name})^{s:g}")

    def scaled(self, c):
        c = float(c)
        base = self
        mass = None
        if self.closed_form_ball_mass is not None:
            def mass(ball, domain):
                m = base.closed_form_ball_mass(ball, domain)
                return None if m is None else c * m
        if self.const is not None:
            return constant_weight(c * self.const, self.dim)
        pw = None
        if self.power_of is not None:
            pw = (c * self.power_of[0],) + tuple(self.power_of[1:])
        return WeightField(lambda x: c * base(x), self.dim, self.singular,
                           mass, f"{c:g}*{self.name}", power_of=pw)


def constant_weight(c=1.0, dim=1):
    c = float(c)

    def mass(ball, domain):
        if domain.dim == 1:
            a = max(ball.center[0] - ball.radius, domain.lower[0])
            b = min(ball.center[0] + ball.radius, domain.upper[0])
            return c * max(b - a, 0.0)
        if ball.inside(domain):
            return c * ball.euclidean_volume
        if domain.dim <= 3:
            return c * clipped_ball_volume(ball, domain)
        return None

    name = "lebesgue" if c == 1.0 else f"const({c:g})"
    return WeightField(lambda x: np.full(len(x), c), dim, (), mass, name, const=c)


def _prim_sqrt(t, rho):
    """Antiderivative of ``sqrt(rho^2 - t^2)``."""
    s = np.sqrt(np.maximum(rho * rho - t * t, 0.0))
    return 0.5 * (t * s + rho * rho * np.arcsin(np.clip(t / rho, -1.0, 1.0)))


def _quadrant_area(x, y, rho):
    """Area of ``{|z| < rho, z1 < x, z2 < y}``, vectorized in ``x, y, rho``."""
    X = np.clip(x, -rho, rho)
    P0 = _prim_sqrt(-rho, rho)
    full = 2.0 * (_prim_sqrt(X, rho) - P0)
    t0 = np.sqrt(np.maximum(rho * rho - y * y, 0.0))
    upper = y >= 0
    a_end = np.minimum(X, -t0)
    A = np.where(upper, 2.0 * (_prim_sqrt(a_end, rho) - P0), 0.0)
    b_end = np.clip(X, -t0, t0)
    B = y * (b_end + t0) + _prim_sqrt(b_end, rho) - _prim_sqrt(-t0, rho)
    c_end = np.maximum(X, t0)
    C = np.where(upper, 2.0 * (_prim_sqrt(c_end, rho) - _prim_sqrt(t0, rho)), 0.0)
    out = np.where(y >= rho, full, np.where(y <= -rho, 0.0, A + B + C))
    return np.where(rho > 0, out, 0.0)


def disk_rect_area(center, rho, lo, hi):
    """Exact area of a disk (radius ``rho``, may be an array) meeting a rectangle."""
    rho = np.asarray(rho, dtype=np.float64)
    x1, x2 = lo[0] - center[0], hi[0] - center[0]
    y1, y2 = lo[1] - center[1], hi[1] - center[1]
    safe = np.where(rho > 0, rho, 1.0)
    q = (_quadrant_area(x2, y2, safe) - _quadrant_area(x1, y2, safe)
         - _quadrant_area(x2, y1, safe) + _quadrant_area(x1, y1, safe))
    return np.where(rho > 0, np.maximum(q, 0.0), 0.0)


def clipped_ball_volume(ball, domain, nodes=64):
    """Lebesgue measure of ``ball ∩ domain`` for ``n <= 3``.

    Exact in 1-d and 2-d.  In 3-d the slice areas are exact and the x3
    integral uses Gauss-Legendre panels broken where the slice changes shape.
    """
    n, c, R = ball.dim, ball.c, ball.radius
    lo, hi = domain.lo, domain.hi
    if n == 1:
        return max(min(c[0] + R, hi[0]) - max(c[0] - R, lo[0]), 0.0)
    if n == 2:
        return float(disk_rect_area(c, R, lo, hi))
    if n != 3:
        raise ParameterError("clipped_ball_volume supports n <= 3")
    z0, z1 = max(c[2] - R, lo[2]), min(c[2] + R, hi[2])
    if z1 <= z0:
        return 0.0
    d = [abs(c[0] - lo[0]), abs(c[0] - hi[0]), abs(c[1] - lo[1]), abs(c[1] - hi[1])]
    d += [math.hypot(a - c[0], b - c[1]) for a in (lo[0], hi[0]) for b in (lo[1], hi[1])]
    cuts = [z0, z1]
    for di in d:
        if di < R:
            h = math.sqrt(R * R - di * di)
            cuts += [c[2] - h, c[2] + h]
    cuts = np.unique(np.clip(cuts, z0, z1))
    t, w = np.polynomial.legendre.leggauss(nodes)
    a, b = cuts[:-1, None], cuts[1:, None]
    z = 0.5 * (a + b) + 0.5 * (b - a) * t
    rho = np.sqrt(np.maximum(R * R - (z - c[2]) ** 2, 0.0))
    area = disk_rect_area(c[:2], rho, lo[:2], hi[:2])
    return float((0.5 * (b - a) * w * area).sum())


def power_weight(exponent, dim=1, axis=0, at=0.0):
    """``|x[axis] - at| ** exponent``; closed-form interval masses in 1-d."""
    e = float(exponent)

    def value(x):
        return np.abs(x[:, axis] - at) ** e

    mass = None
    if dim == 1:
        def mass(ball, domain):
            a = max(ball.center[0] - ball.radius, domain.lower[0])
            b = min(ball.center[0] + ball.radius, domain.upper[0])
            if b <= a:
                return 0.0
            return _power_interval_mass(a - at, b - at, e)

    sing = (Face(axis, at, e),) if e != 0 else ()
    return WeightField(value, dim, sing, mass, f"|x{axis + 1}-{at:g}|^{e:g}",
                       power_of=(1.0, e, axis, float(at)))


def _power_interval_mass(a, b, e):
    """``∫_a^b |t|^e dt`` for ``a < b``; ``inf`` when non-integrable at 0."""
    def prim(t):
        return math.copysign(abs(t) ** (e + 1) / (e + 1), t)

    if a < 0 < b or a == 0 or b == 0:
        if e <= -1:
            return math.inf
    if e == -1:
        return math.log(abs(b) / abs(a)) if a > 0 else math.log(abs(a) / abs(b))
    return prim(b) - prim(a)


def exp_inverse_weight(dim=1, axis=0, sign=1.0):
    """``exp(sign / x[axis])``: non-doubling near the face ``x[axis] = 0``."""
    return WeightField(lambda x: np.exp(sign / x[:, axis]), dim, (), None,
                       f"exp({sign:+g}/x{axis + 1})")


def radial_power_weight(exponent, center, dim=None):
    center = np.atleast_1d(np.asarray(center, dtype=float))
    dim = dim or len(center)
    e = float(exponent)
    return WeightField(lambda x: np.linalg.norm(x - center, axis=1) ** e, dim,
                       (Point(center, e),), None, f"|x-c|^{e:g}")


# ---------------------------------------------------------------------------
# matrix fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MatrixField:
    """``x -> Q(x)``, symmetric nonnegative definite.

    With ``diagonal=True`` the callable returns the ``(k, n)`` diagonal and
    no eigen-decomposition is performed.  ``degenerate`` lists faces where
    the normal diagonal entry of ``sqrt(Q)`` behaves like
    ``dist ** exponent``; it is used only for mesh grading.
    """

    entries: Callable
    dim: int
    diagonal: bool = False
    degenerate: Tuple[Face, ...] = ()
    name: str = ""

    def _raw(self, x):
        x = as_points(x, self.dim)
        a = np.asarray(self.entries(x), dtype=np.float64)
        if not np.all(np.isfinite(a)):
            bad = np.argwhere(~np.isfinite(a.reshape(len(x), -1)).all(axis=1))[0, 0]
            raise EvaluationError(f"non-finite matrix entry at x={x[bad]}", x[bad])
        return x, a

    def matrix(self, x):
        x, a = self._raw(x)
        if self.diagonal:
            out = np.zeros((len(x), self.dim, self.dim))
            idx = np.arange(self.dim)
            out[:, idx, idx] = a.reshape(len(x), self.dim)
            return out
        a = a.reshape(len(x), self.dim, self.dim)
        return 0.5 * (a + np.swapaxes(a, 1, 2))

    def eigh(self, x):
        """Ascending eigenvalues and eigenvectors (columns)."""
        x, a = self._raw(x)
        if self.diagonal:
            d = a.reshape(len(x), self.dim)
            order = np.argsort(d, axis=1)
            lam = np.take_along_axis(d, order, axis=1)
            vec = np.zeros((len(x), self.dim, self.dim))
            vec[np.arange(len(x))[:, None], order, np.arange(self.dim)[None, :]] = 1.0
            return lam, vec
        a = a.reshape(len(x), self.dim, self.dim)
        return np.linalg.eigh(0.5 * (a + np.swapaxes(a, 1, 2)))

    def eigvalsh(self, x):
        x, a = self._raw(x)
        if self.diagonal:
            return np.sort(a.reshape(len(x), self.dim), axis=1)
        a = a.reshape(len(x), self.dim, self.dim)
        return np.linalg.eigvalsh(0.5 * (a + np.swapaxes(a, 1, 2)))

    def op_norm(self, x):
        return self.eigvalsh(x)[:, -1]

    def _check_definite(self, lam, x):
        scale = np.maximum(np.abs(lam).max(axis=1), 1.0)
        bad = lam[:, 0] < -DEFINITENESS_FLOOR * scale
        if np.any(bad):
            i = int(np.argmax(bad))
            raise DefinitenessError(
                f"negative eigenvalue {lam[i, 0]:.3e} at x={as_points(x, self.dim)[i]}",
                as_points(x, self.dim)[i])

    def sqrt_apply(self, x, xi):
        x = as_points(x, self.dim)
        xi = np.broadcast_to(np.asarray(xi, dtype=np.float64), x.shape)
        if self.diagonal:
            _, d = self._raw(x)
            d = d.reshape(len(x), self.dim)
            self._check_definite(np.sort(d, axis=1), x)
            return np.sqrt(np.maximum(d, 0.0)) * xi
        lam, vec = self.eigh(x)
        self._check_definite(lam, x)
        coef = np.einsum("kji,kj->ki", vec, xi) * np.sqrt(np.maximum(lam, 0.0))
        return np.einsum("kij,kj->ki", vec, coef)


def identity_matrix(dim):
    return MatrixField(lambda x: np.ones((len(x), dim)), dim, True, (), "identity")


def constant_diag_matrix(diag):
    d = np.asarray(diag, dtype=float)
    return MatrixField(lambda x: np.broadcast_to(d, (len(x), len(d))).copy(), len(d), True,
                       (), f"diag{tuple(d)}")


def diag_power_matrix(dim, power, axis=0):
    """``Diag[x_axis ** power, 1, ..., 1]``."""
    power = float(power)

    def entries(x):
        d = np.ones((len(x), dim))
        d[:, axis] = np.abs(x[:, axis]) ** power
        return d

    return MatrixField(entries, dim, True, (Face(axis, 0.0, power / 2),),
                       f"Diag[x{axis + 1}^{power:g},1..]")


def dense_matrix(fn, dim, name="dense"):
    return MatrixField(fn, dim, False, (), name)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def op_norm_weight(Q, p, x):
    """``v0(x) = ||Q(x)||_op ** (p/2)``."""
    lam = Q.op_norm(x)
    out = lam ** (p / 2)
    return out if np.ndim(x) > 1 else float(out[0])


def sqrtQ_apply(Q, x, xi):
    out = Q.sqrt_apply(x, xi)
    return out if np.ndim(x) > 1 else out[0]


@dataclass(frozen=True)
class EllipticityCertificate:
    p: float
    passed: bool
    lower_margin: float
    upper_margin: float
    c2: Optional[float]
    n_samples: int
    witness: Optional[Tuple[float, ...]] = None
    failed_side: Optional[str] = None

    def to_dict(self):
        return {
            "p": self.p, "passed": self.passed, "lower_margin": self.lower_margin,
            "upper_margin": self.upper_margin, "c2": self.c2, "n_samples": self.n_samples,
            "witness": list(self.witness) if self.witness is not None else None,
            "failed_side": self.failed_side,
        }


def check_ellipticity(Q, w, tau, p, samples, v=None, rtol=1e-12):
    """Check ``w|xi|^p <= |sqrt(Q) xi|^p <= tau|xi|^p`` for all xi at each sample.

    Over all directions this is equivalent to
    ``w <= lambda_min^(p/2)`` and ``lambda_max^(p/2) <= tau``.
    """
    samples = as_points(samples, Q.dim)
    if len(samples) == 0:
        raise ParameterError("empty sample set")
    lam = Q.eigvalsh(samples)
    Q._check_definite(lam, samples)
    lam = np.maximum(lam, 0.0)
    low = lam[:, 0] ** (p / 2)
    high = lam[:, -1] ** (p / 2)
    wv, tv = w(samples), tau(samples)
    if not (np.all(np.isfinite(wv)) and np.all(np.isfinite(tv))):
        raise EvaluationError("non-finite weight value in ellipticity check")
    lower_gap = low - wv
    upper_gap = tv - high
    tol_l = rtol * np.maximum(np.abs(low), 1.0)
    tol_u = rtol * np.maximum(np.abs(high), 1.0)
    bad_l = lower_gap < -tol_l
    bad_u = upper_gap < -tol_u
    witness, side = None, None
    if np.any(bad_l):
        i = int(np.argmin(lower_gap))
        witness, side = tuple(samples[i]), "lower"
    elif np.any(bad_u):
        i = int(np.argmin(upper_gap))
        witness, side = tuple(samples[i]), "upper"
    c2 = None
    if v is not None:
        vv = v(samples)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(high > 0, high / vv, 0.0)
        c2 = float(np.max(ratio))
    return EllipticityCertificate(
        p=float(p), passed=witness is None,
        lower_margin=float(lower_gap.min()), upper_margin=float(upper_gap.min()),
        c2=c2, n_samples=len(samples), witness=witness, failed_side=side)
