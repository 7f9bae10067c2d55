"""Reference values computed without the package: closed forms and scipy.integrate.quad."""
import math

import numpy as np
from scipy import integrate as si

QUAD = dict(epsabs=0.0, epsrel=1e-12, limit=500)


def quad(f, a, b, **kw):
    opts = dict(QUAD)
    opts.update(kw)
    return si.quad(f, a, b, **opts)[0]


# --- the 1-d bump exp(1 - 1/(1 - ((y - c)/R)^2)) ---------------------------

def bump(y, c=0.5, R=0.45):
    z = ((y - c) / R) ** 2
    return math.exp(1.0 - 1.0 / (1.0 - z)) if z < 1 else 0.0


def dbump(y, c=0.5, R=0.45):
    z = ((y - c) / R) ** 2
    if z >= 1:
        return 0.0
    return bump(y, c, R) * (-1.0 / (1.0 - z) ** 2) * 2.0 * (y - c) / R ** 2


def bump_power(q, c=0.5, R=0.45):
    return quad(lambda y: bump(y, c, R) ** q, c - R, c + R)


def dbump_power(q, c=0.5, R=0.45):
    return quad(lambda y: abs(dbump(y, c, R)) ** q, c - R, c + R)


# --- Example A, n = 2, p = 2 --------------------------------------------------
# u - u_j = g(x1) psi(x2) with g = x^-b - 2 on (0, 1/j], minus the ramp on
# (1/j, 2/j], zero beyond.  For Q = Diag[x1^2, 1]:
#   ||u - u_j||_2^2           = G * |psi|_2^2
#   ||sqrt(Q) grad(u-u_j)||^2 = X * |psi|_2^2 + G * |psi'|_2^2
# with G = ∫ g^2 and X = ∫ x^2 g'^2.

def example_a_norm(j, beta, R=0.45):
    slope = ((j / 2.0) ** beta - 2.0) * j
    g1 = lambda x: x ** -beta - 2.0
    g2 = lambda x: x ** -beta - 2.0 - slope * (x - 1.0 / j)
    d1 = lambda x: -beta * x ** (-beta - 1.0)
    d2 = lambda x: -beta * x ** (-beta - 1.0) - slope
    G = quad(lambda x: g1(x) ** 2, 0.0, 1.0 / j) + quad(lambda x: g2(x) ** 2, 1.0 / j, 2.0 / j)
    X = quad(lambda x: (x * d1(x)) ** 2, 0.0, 1.0 / j) + quad(lambda x: (x * d2(x)) ** 2, 1.0 / j, 2.0 / j)
    psi2, dpsi2 = bump_power(2, R=R), dbump_power(2, R=R)
    return math.sqrt(G * psi2) + math.sqrt(X * psi2 + G * dpsi2)


def example_a_leading_rate(beta):
    """``||u - u_j|| ~ C j^-(1/2 - beta)``: both parts are dominated by ∫_0^{2/j} x^{-2 beta}."""
    return -(0.5 - beta)


def example_a_slab_exponent(beta, q):
    """``d/d eps ∫_eps x^{-beta q} dx`` scales like eps^{1 - beta q}."""
    return 1.0 - beta * q


def example_a_log_increment(q, R=0.45):
    """At ``beta q = 1`` the slab ``(eps/2, eps)`` carries ``log 2 * |psi|_q^q`` in the limit."""
    return math.log(2.0) * bump_power(q, R=R)


# --- Example B ----------------------------------------------------------------

def tent_p2_mass(n):
    """``∫ v_n^2`` for p = 2 in closed form.

    Each half is ``∫_d^{1/n} (n sqrt(s) - 1/n)^2 ds`` with ``d = n^-4``;
    antiderivative ``n^2 s^2/2 - (4/3) s^{3/2} + s/n^2``.
    """
    F = lambda s: n * n * s * s / 2.0 - 4.0 / 3.0 * s ** 1.5 + s / n ** 2
    return 2.0 * (F(1.0 / n) - F(float(n) ** -4))


def tent_mass_quad(n, p):
    """``∫ v_n^p`` by quad in the original variable (moderate n only)."""
    a, b = 1.0 / n + float(n) ** -(p + 2), 3.0 / n - float(n) ** -(p + 2)
    k = n ** (2.0 / p)
    left = lambda t: max(k * (t - 1.0 / n) ** (1.0 / p) - 1.0 / n, 0.0) ** p
    right = lambda t: max(k * (3.0 / n - t) ** (1.0 / p) - 1.0 / n, 0.0) ** p
    return quad(left, a, 2.0 / n) + quad(right, 2.0 / n, b)


def tent_gradient_logquad(n, p):
    """``∫ t^{p^2} |v_n'|^p`` with ``s = e^y`` on each half."""
    k = n ** (2.0 / p) / p
    d = float(n) ** -(p + 2)

    def half(shift, sign):
        # |v'| = k s^{1/p - 1}, t = shift + sign*s
        f = lambda y: (shift + sign * math.exp(y)) ** (p * p) * (k * math.exp(y) ** (1.0 / p - 1.0)) ** p * math.exp(y)
        return quad(f, math.log(d), math.log(1.0 / n))

    return half(1.0 / n, 1.0) + half(3.0 / n, -1.0)


def tent_mass_limit(p):
    return 2.0 ** (1.0 - p)


def tent_peak(n, p):
    return n ** (1.0 / p) - 1.0 / n


# --- weights and geometry -----------------------------------------------------

def ap_sqrt_corner():
    """A_2 product of ``t^{1/2}`` on ``[0, h]``: (2/3)(2) = 4/3 for any h."""
    return 4.0 / 3.0


def power_mass(e, a, b):
    return (b ** (e + 1) - a ** (e + 1)) / (e + 1)


def disk_rect_area(c, rho, lo, hi):
    """Area of a disk ∩ rectangle by integrating chord lengths."""
    def chord(x):
        h2 = rho * rho - (x - c[0]) ** 2
        if h2 <= 0:
            return 0.0
        h = math.sqrt(h2)
        return max(0.0, min(c[1] + h, hi[1]) - max(c[1] - h, lo[1]))
    a, b = max(c[0] - rho, lo[0]), min(c[0] + rho, hi[0])
    if b <= a:
        return 0.0
    return quad(chord, a, b, epsrel=1e-11)


def ball_volume(n, r):
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1) * r ** n


def poincare_linear_1d(c=0.5, r=0.1):
    """Ratio for ``f = t`` on ``(c - r, c + r)``, v = m = 1, Q = 1, c0 = 1, p = 2."""
    num = math.sqrt(2 * r ** 3 / 3)
    den = math.sqrt(((c + r) ** 3 - (c - r) ** 3) / 3) + math.sqrt(2 * r)
    return num / den
