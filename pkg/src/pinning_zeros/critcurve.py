"""The critical curve ``C_alpha``, region classification and the limit law of zeros.

The curve is ``h(theta) = -Log(1 - (1 - e^{-i theta})^alpha)`` for
``theta in [0, 2 pi)``, read in the cylinder ``Im h in (-pi, pi]``.  It
bounds the localized region (to its right) from the delocalized one.

Double precision (numpy, vectorized) is used throughout except for
``pole_location`` and ``free_energy``, which also accept ``mpc`` input.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import gmpy2
import numpy as np
from scipy import integrate, optimize

from .numerics import DomainError, complex_pow, context, principal_log, to_mpc, to_mpfr

CRITICAL_TOL = 1e-9


def _wrap_im(h):
    """Move ``Im h`` into ``(-pi, pi]``."""
    h = np.asarray(h, dtype=complex)
    im = np.mod(h.imag + np.pi, 2 * np.pi) - np.pi
    im = np.where(im == -np.pi, np.pi, im)
    return h.real + 1j * im


def _one_minus_exp(th):
    """``1 - e^{-i theta}`` without cancellation at small ``theta``."""
    return 2 * np.sin(th / 2) ** 2 + 1j * np.sin(th)


def curve_point(alpha, theta):
    """``-Log(1 - (1 - e^{-i theta})^alpha)`` with ``Im`` in ``(-pi, pi]``."""
    th = np.asarray(theta, dtype=float)
    u = _one_minus_exp(th) ** alpha
    h = -np.log(1 - u + 0j)
    out = _wrap_im(h)
    # the theta = pi endpoint lies on the cut of Log: the convention Log(x<0) = log|x| + i pi
    # gives h = ... - i pi, which the cylinder identifies with + i pi
    return out if out.ndim else complex(out)


def curve_xy(alpha, theta):
    """Real and imaginary parts of the curve on ``0 < theta <= pi`` in closed form.

    The exponent in the closed form is ``alpha`` itself; with it the
    expressions coincide with ``curve_point``.
    """
    th = np.asarray(theta, dtype=float)
    a = float(alpha)
    sn = np.sin(th / 2)
    r = 2.0 ** a * sn ** a
    phase = a * (np.pi - th) / 2
    num = r * np.sin(phase)
    den = 1 - r * np.cos(phase)
    f1 = -0.5 * np.log(2.0 ** (2 * a) * np.sin(phase) ** 2 * sn ** (2 * a) + den ** 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = num / den
        f2 = np.where(den == 0, np.pi / 2, np.arctan(t) + np.where(den < 0, np.pi, 0.0))
    if f1.ndim == 0:
        return float(f1), float(f2)
    return f1, f2


def strip_width(alpha) -> float:
    """``-log(2^alpha - 1)``, the largest real part on the curve."""
    return -math.log(2.0 ** alpha - 1)


def curve_derivative(alpha, theta):
    """``dh/dtheta`` along the curve."""
    th = np.asarray(theta, dtype=float)
    q = _one_minus_exp(th)
    u = q ** alpha
    du = alpha * q ** (alpha - 1) * 1j * np.exp(-1j * th)
    return du / (1 - u)


def _speed_in_t(alpha, t):
    """``|dh/dtheta| dtheta/dt`` under ``theta = t^(1/alpha)``: smooth at ``t = 0``."""
    t = np.asarray(t, dtype=float)
    th = t ** (1 / alpha)
    with np.errstate(divide="ignore", invalid="ignore"):
        jac = th / (alpha * t)
        v = np.abs(curve_derivative(alpha, th)) * jac
    # limit t -> 0: |h'| ~ alpha theta^(alpha-1), jac = theta^(1-alpha)/alpha
    return np.where(t == 0, 1.0, v)


def arclength(alpha, theta) -> float:
    """Arclength of the curve from the origin to ``h(theta)``, ``0 <= theta <= pi``."""
    if not (0 <= theta <= math.pi + 1e-15):
        raise DomainError("theta must lie in [0, pi]")
    if theta == 0:
        return 0.0
    val, _ = integrate.quad(lambda t: float(_speed_in_t(alpha, t)), 0, theta ** alpha,
                            epsabs=1e-15, epsrel=1e-13, limit=200)
    return val


def total_length(alpha) -> float:
    """Length of the upper half of the curve."""
    return arclength(alpha, math.pi)


# ---------------------------------------------------------------------------
# poles, regions, free energy

def pole_location(alpha, h, prec: int = 128):
    """``z = 1 - (1 - e^{-h})^(1/alpha)``, the smallest singularity of the generating function."""
    with context(prec):
        h = to_mpc(h, prec)
        if h == 0:
            raise DomainError("h = 0 is the singular point")
        a = to_mpfr(alpha, prec)
        return 1 - complex_pow(1 - gmpy2.exp(-h), 1 / a, prec)


def pole_location_np(alpha, h):
    h = np.asarray(h, dtype=complex)
    return 1 - (1 - np.exp(-h)) ** (1 / alpha)


class Region(enum.Enum):
    LOCALIZED = "localized"
    DELOCALIZED = "delocalized"
    CRITICAL = "critical"


@dataclass(frozen=True)
class RegionLabel:
    region: Region
    gap: float  # Re h minus the curve's real part at the same height
    tolerance: float = CRITICAL_TOL


def _invert_f2(alpha, y, iters: int = 60):
    """Solve ``Im h(theta) = y`` on ``[0, pi]`` by bisection (Im is increasing there)."""
    y = np.asarray(y, dtype=float)
    lo = np.zeros_like(y)
    hi = np.full_like(y, np.pi)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        _, f2 = curve_xy(alpha, np.maximum(mid, 1e-300))
        go_right = f2 < y
        lo = np.where(go_right, mid, lo)
        hi = np.where(go_right, hi, mid)
    return 0.5 * (lo + hi)


def curve_re_at_height(alpha, y):
    """Real part of the curve point with ``|Im h| = y``, ``0 <= y <= pi``."""
    y = np.abs(np.asarray(y, dtype=float))
    th = _invert_f2(alpha, y)
    f1, _ = curve_xy(alpha, np.maximum(th, 1e-300))
    return np.where(y == 0, 0.0, f1)


def classify_many(alpha, h, tol: float = CRITICAL_TOL):
    """Vectorized ``classify``: returns an array of ``Region`` values and gaps."""
    h = _wrap_im(np.atleast_1d(np.asarray(h, dtype=complex)))
    x0 = curve_re_at_height(alpha, h.imag)
    gap = h.real - x0
    labels = np.empty(h.shape, dtype=object)
    labels[:] = Region.CRITICAL
    labels[gap > tol] = Region.LOCALIZED
    labels[gap < -tol] = Region.DELOCALIZED
    labels[(h.real <= 0) & (np.abs(h) > tol)] = Region.DELOCALIZED
    return labels, gap


def classify(alpha, h, tol: float = CRITICAL_TOL) -> RegionLabel:
    """Localized, delocalized or critical, by inverting the monotone curve."""
    labels, gap = classify_many(alpha, [complex(h)], tol)
    return RegionLabel(labels[0], float(gap[0]), tol)


def classify_algebraic(alpha, h):
    """Cross-check: localized iff ``|z| < 1`` and ``|Arg(1 - e^{-h})| < alpha pi``.

    With ``u = (1 - e^{-h})^(1/alpha)`` and ``z = 1 - u``, ``|z| < 1`` is tested as
    ``log|u| < log(2 cos arg u)``, which does not round to ``|z| = 1`` when ``u`` is tiny.
    """
    h = np.asarray(h, dtype=complex)
    q = -np.expm1(-h)
    arg_q = np.angle(q)
    arg_u = arg_q / alpha
    with np.errstate(divide="ignore", invalid="ignore"):
        inside = np.log(np.abs(q)) / alpha < np.log(2 * np.cos(arg_u))
    return inside & (np.cos(arg_u) > 0) & (np.abs(arg_q) < alpha * np.pi)


def free_energy(alpha, h, prec: int = 128):
    """Analytic continuation ``-Log(1 - (1 - e^{-h})^(1/alpha))`` off ``(-inf, 0]``."""
    with context(prec):
        h = to_mpc(h, prec)
        if h.imag == 0 and h.real <= 0:
            raise DomainError("free_energy is cut along (-inf, 0]")
        return -principal_log(pole_location(alpha, h, prec), prec)


def physical_free_energy(alpha, h) -> float:
    """``Re F(h)`` in the localized region and ``0`` elsewhere."""
    hc = complex(h)
    if hc.imag == 0 and hc.real <= 0:
        return 0.0
    if classify(alpha, hc).region is not Region.LOCALIZED:
        return 0.0
    return float(free_energy(alpha, hc, 64).real)


def free_energy_general(law, h: float, n_max: int = 200000):
    """Real free energy of an arbitrary law at real ``h > 0``.

    Solves ``sum_n K(n) e^{-n F} = e^{-h}`` on the truncated law and
    brackets the effect of the missing mass.  Returns ``(F, half_width)``.
    """
    from .renewal import k_values

    if not h > 0:
        raise DomainError("free_energy_general needs real h > 0")
    K = np.array([float(v) for v in k_values(law, n_max, 64)])
    deficit = max(0.0, 1.0 - math.fsum(K))
    n = np.arange(1, n_max + 1)
    target = math.exp(-h)

    def g(F, extra):
        return float(np.sum(K * np.exp(-n * F))) + extra * deficit * math.exp(-(n_max + 1) * F) - target

    hi = 1.0
    while g(hi, 1) > 0:
        hi *= 2
    f_lo = optimize.brentq(g, 0.0, hi, args=(0,), xtol=1e-15)
    f_hi = optimize.brentq(g, 0.0, hi, args=(1,), xtol=1e-15)
    return 0.5 * (f_lo + f_hi), 0.5 * abs(f_hi - f_lo) + 1e-14


# ---------------------------------------------------------------------------
# limit measure of zeros

def mu_density_theta(alpha, theta):
    """Density of the limit law of zeros in the curve parameter: uniform, ``1/pi`` on the upper half."""
    return np.full_like(np.asarray(theta, dtype=float), 1 / np.pi)


def mu_density(alpha, theta):
    """Probability density per unit arclength on the upper half-curve at ``h(theta)``.

    The law of zeros is ``(1/2pi) Delta Re F``, i.e. the jump of the normal
    derivative of ``Re F`` across the curve divided by ``2 pi``; the jump is
    ``|F'(h)|``, which on the curve equals ``alpha^-1 (2 sin(theta/2))^(1-alpha)
    |1 - (1 - e^{-i theta})^alpha|``.
    """
    th = np.asarray(theta, dtype=float)
    q = _one_minus_exp(th)
    jump = (2 * np.sin(th / 2)) ** (1 - alpha) * np.abs(1 - q ** alpha) / alpha
    return jump / np.pi  # doubled for the conjugate half: 2 * jump / (2 pi)


def mu_density_small_s(alpha, s):
    """Small-arclength form ``s^((1-alpha)/alpha) / (alpha cos(alpha pi / 2))`` as printed."""
    return np.asarray(s, dtype=float) ** ((1 - alpha) / alpha) / (alpha * math.cos(alpha * math.pi / 2))


def mu_density_half_s(s):
    """Closed form ``sqrt(2) (1 - e^{-2s})`` quoted for ``alpha = 1/2`` in arclength."""
    return math.sqrt(2) * (1 - np.exp(-2 * np.asarray(s, dtype=float)))


def mu_density_half_x(x):
    """Closed form in the real coordinate for ``alpha = 1/2``: ``8 e^x sinh x / sqrt(6e^{2x} - e^{4x} - 1)``.

    It equals ``pi`` times the upper-half probability density per unit ``x``.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x >= math.log(1 + math.sqrt(2))) or np.any(x < 0):
        raise DomainError("x must lie in [0, log(1 + sqrt 2))")
    return 8 * np.exp(x) * np.sinh(x) / np.sqrt(6 * np.exp(2 * x) - np.exp(4 * x) - 1)


def free_energy_from_measure(alpha, h, zeros=None, n_theta: int = 20000) -> float:
    """``log alpha + integral log|e^h - e^zeta| mu(d zeta)``.

    With ``zeros`` (an iterable of complex) the empirical measure is used;
    otherwise the limit law, uniform in ``theta`` over the whole curve.
    """
    h = complex(h)
    if zeros is not None:
        zs = np.asarray([complex(z) for z in zeros])
        return math.log(alpha) + float(np.mean(np.log(np.abs(np.exp(h) - np.exp(zs)))))
    # midpoint rule in theta; the integrand is smooth for h off the curve
    th = (np.arange(n_theta) + 0.5) * (2 * np.pi / n_theta)
    ez = 1 / (1 - _one_minus_exp(th) ** alpha)
    return math.log(alpha) + float(np.mean(np.log(np.abs(np.exp(h) - ez))))


# ---------------------------------------------------------------------------
# sampled model

@dataclass
class CurveModel:
    """Sampled critical curve with signed arclength (negative on the lower half)."""

    alpha: float
    resolution: int = 2048
    theta: np.ndarray = field(init=False, repr=False)
    h: np.ndarray = field(init=False, repr=False)
    s: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        a = float(self.alpha)
        if not (0 < a < 1):
            raise ValueError("alpha must lie in (0, 1)")
        m = self.resolution // 2
        # uniform in t = theta^alpha resolves the cusp at the origin
        t = np.linspace(0, np.pi ** a, m + 1)
        th_up = t ** (1 / a)
        th_up[-1] = np.pi
        s_up = np.concatenate([[0.0], np.cumsum(_panel_lengths(a, t))])
        self.theta = np.concatenate([th_up, 2 * np.pi - th_up[-2:0:-1]])
        self.h = np.asarray(curve_point(a, self.theta))
        self.s = np.concatenate([s_up, -s_up[-2:0:-1]])
        self._t_up = t
        self._s_up = s_up

    @property
    def half_length(self) -> float:
        return float(self._s_up[-1])

    def theta_of_s(self, s):
        """Curve parameter at signed arclength ``s`` on the upper half (interpolated, then polished)."""
        s = np.clip(np.asarray(s, dtype=float), 0, self.half_length)
        t0 = np.interp(s, self._s_up, self._t_up)
        return t0 ** (1 / self.alpha)

    def s_of_theta(self, theta):
        """Signed arclength of ``h(theta)``, ``theta`` in ``[0, 2 pi)``."""
        th = np.asarray(theta, dtype=float)
        up = np.where(th <= np.pi, th, 2 * np.pi - th)
        t = up ** self.alpha
        out = np.empty_like(t)
        flat_t, flat_out = t.ravel(), out.ravel()
        for i, tt in enumerate(flat_t):
            k = min(np.searchsorted(self._t_up, tt, side="right") - 1, len(self._t_up) - 2)
            k = max(k, 0)
            flat_out[i] = self._s_up[k] + _gauss_length(self.alpha, self._t_up[k], tt)
        return np.where(th <= np.pi, out, -out)

    def density(self, theta):
        return mu_density(self.alpha, theta)

    def distances(self, points):
        return curve_distance(self.alpha, points, self)

    def density_in_s(self, s):
        """Upper-half probability density per unit arclength at arclength ``s``."""
        return mu_density(self.alpha, self.theta_of_s(s))


_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)


def _gauss_length(alpha, t0, t1):
    if t1 <= t0:
        return 0.0
    x = 0.5 * (t1 - t0) * _GL_X + 0.5 * (t1 + t0)
    return float(0.5 * (t1 - t0) * np.sum(_GL_W * _speed_in_t(alpha, x)))


def _panel_lengths(alpha, t):
    a, b = t[:-1], t[1:]
    x = 0.5 * (b - a)[:, None] * _GL_X[None, :] + 0.5 * (b + a)[:, None]
    return 0.5 * (b - a) * np.sum(_GL_W[None, :] * _speed_in_t(alpha, x), axis=1)


def curve_projection(alpha, points, model: CurveModel | None = None):
    """Nearest curve point for each of ``points`` in the cylinder.

    Returns ``(distance, theta)`` with ``theta`` in ``[0, pi]`` the parameter of
    the nearest point on the upper half (points below the real axis are
    reflected, the curve being conjugation symmetric).  Nearest sample first,
    then a bounded minimization over the curve parameter around it.
    """
    model = model or CurveModel(alpha, 4096)
    t_nodes = model._t_up
    up = model.h[: len(t_nodes)]
    pts = np.atleast_1d(np.asarray([complex(p) for p in np.ravel(points)], dtype=complex))
    dist = np.empty(pts.size)
    theta = np.empty(pts.size)
    last = len(t_nodes) - 1
    for i, p in enumerate(pts):
        q = p.real + 1j * abs(p.imag)
        # across Im = pi the lower half reappears as the mirror image of the upper one
        best = (math.inf, 0.0)
        for target in (q, q.real + 1j * (2 * np.pi - q.imag)):
            d = np.abs(up - target)
            k = int(d.argmin())
            best = min(best, (float(d[k]), float(t_nodes[k])))
            lo, hi = t_nodes[max(k - 1, 0)], t_nodes[min(k + 1, last)]
            res = optimize.minimize_scalar(
                lambda t: abs(complex(curve_point(alpha, t ** (1 / alpha))) - target),
                bounds=(lo, hi), method="bounded", options={"xatol": 1e-14})
            best = min(best, (float(res.fun), float(res.x)))
        dist[i] = best[0]
        theta[i] = min(best[1] ** (1 / alpha), np.pi)
    return dist, theta


def curve_distance(alpha, points, model: CurveModel | None = None):
    """Distance in the cylinder from each point to the curve."""
    return curve_projection(alpha, points, model)[0]


def curve_side(alpha, points):
    """``+1`` for points right of the curve (localized side), ``-1`` left of it."""
    _, gap = classify_many(alpha, points, tol=0)
    return np.sign(gap)
