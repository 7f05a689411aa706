"""The alpha = 1/2 scaling function ``F0``, its zeros, and the finite-N corrections.

``sqrt(N) Z_{N, zeta/sqrt(N)} -> F0(zeta) = zeta e^{zeta^2} erfc(-zeta) + 1/sqrt(pi)``
for the special inter-arrival law.  Multiprecision values are ``gmpy2.mpc``;
the ``*_np`` helpers are vectorized complex128 versions built on the Faddeeva
function, used for contour integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import gmpy2
import mpmath
import numpy as np
from gmpy2 import mpc, mpfr
from scipy.special import wofz

from .numerics import DEFAULT_BITS, ConvergenceError, DomainError, context, erfcx_complex, to_mpc
from .renewal import InterArrivalLaw, RenewalTable
from .zeros import count_zeros_in_disk, count_zeros_in_rectangle

SQRT_PI = math.sqrt(math.pi)


def _erfcx_minus(z: mpc, prec: int) -> mpc:
    """``e^{z^2} (1 + erf z) = erfcx(-z)``."""
    return erfcx_complex(-z, prec)


def f0(zeta, prec: int = DEFAULT_BITS) -> mpc:
    """``F0(zeta) = zeta erfcx(-zeta) + 1/sqrt(pi)``."""
    work = prec + 16
    with context(work):
        z = to_mpc(zeta, work)
        val = z * _erfcx_minus(z, work) + 1 / gmpy2.sqrt(gmpy2.const_pi())
    return mpc(val, precision=prec)


def f0_prime(zeta, prec: int = DEFAULT_BITS) -> mpc:
    """``F0'(zeta) = 2 zeta/sqrt(pi) + (1 + 2 zeta^2) erfcx(-zeta)``."""
    work = prec + 16
    with context(work):
        z = to_mpc(zeta, work)
        val = 2 * z / gmpy2.sqrt(gmpy2.const_pi()) + (1 + 2 * z * z) * _erfcx_minus(z, work)
    return mpc(val, precision=prec)


def f0_np(zeta):
    """Vectorized ``F0`` in complex128 (``erfcx(-z) = w(-iz)``)."""
    z = np.asarray(zeta, dtype=complex)
    return z * wofz(-1j * z) + 1 / SQRT_PI


def f0_prime_np(zeta):
    z = np.asarray(zeta, dtype=complex)
    return 2 * z / SQRT_PI + (1 + 2 * z * z) * wofz(-1j * z)


def _f0_pair_np(zeta):
    z = np.asarray(zeta, dtype=complex)
    e = wofz(-1j * z)
    return z * e + 1 / SQRT_PI, 2 * z / SQRT_PI + (1 + 2 * z * z) * e


def f0_integral(zeta, dps: int = 30):
    """``(2/pi) int_0^inf e^{-x^2} x^2 / (x^2 + zeta^2) dx`` by quadrature.

    Equals ``F0(zeta)`` for ``Re zeta < 0`` and ``F0(zeta) - 2 zeta e^{zeta^2}``
    for ``Re zeta > 0``; undefined on the imaginary axis.
    """
    z = complex(zeta)
    if z.real == 0:
        raise DomainError("the integral is singular for Re zeta = 0")
    with mpmath.workdps(dps):
        z = mpmath.mpc(z)
        z2 = z * z
        # the integrand has a near-pole at x = |Im zeta| when Re zeta is small
        pts = [0, abs(z.imag), mpmath.inf] if abs(z.imag) > 0 else [0, mpmath.inf]
        val = mpmath.quad(lambda x: mpmath.exp(-x * x) * x * x / (x * x + z2), pts)
        return complex(2 / mpmath.pi * val)


# ---------------------------------------------------------------------------
# zeros

def asymptotic_zero_seed(n: int, prec: int = DEFAULT_BITS) -> mpc:
    """``lam - L/(4 lam) + i (lam + L/(4 lam))`` with ``lam = sqrt(pi (n + 1/8))``, ``L = log(8 sqrt(2 pi) lam^3)``."""
    if n < 1:
        raise DomainError("seed index starts at 1")
    with context(prec):
        pi = gmpy2.const_pi()
        lam = gmpy2.sqrt(pi * (n + mpfr(1) / 8))
        corr = gmpy2.log(8 * gmpy2.sqrt(2 * pi) * lam ** 3) / (4 * lam)
        return mpc(lam - corr, lam + corr)


@dataclass(frozen=True)
class ScalingZero:
    index: int
    zeta: mpc
    seed: mpc
    certified: bool

    @property
    def gap(self) -> float:
        return abs(complex(self.zeta) - complex(self.seed))


@dataclass(frozen=True)
class SweepReport:
    """Argument-principle count over ``(0, x1) x (0, y1)`` versus the zeros located there."""

    x1: float
    y1: float
    count: int
    located: tuple  # every zero found inside the box, possibly beyond n_max

    @property
    def complete(self) -> bool:
        return self.count == len(self.located)


def _newton_f0(seed: mpc, prec: int, tol_bits: int, max_steps: int = 100) -> mpc:
    """Newton on ``F0``, halving the step while the residual grows."""
    with context(prec):
        z = mpc(seed, precision=prec)
        fz = f0(z, prec)
        tol = mpfr(2) ** (-tol_bits)
        for _ in range(max_steps):
            step = fz / f0_prime(z, prec)
            lam = mpfr(1)
            while True:
                cand = z - lam * step
                fc = f0(cand, prec)
                if abs(fc) <= abs(fz) or lam < mpfr(2) ** -20:
                    break
                lam /= 2
            z, fz = cand, fc
            if abs(lam * step) <= tol * abs(z):
                return z
        raise ConvergenceError("Newton on F0 did not converge", partial=complex(z))


def _certify_disk(z: complex, radius: float) -> bool:
    return count_zeros_in_disk(_f0_pair_np, z, radius, quadrature_points=256) == 1


def _zero_at(n: int, prec: int) -> ScalingZero:
    seed = asymptotic_zero_seed(n, prec)
    try:
        z = _newton_f0(seed, prec, tol_bits=prec - 16)
    except ConvergenceError as exc:
        raise ConvergenceError(f"Newton on F0 failed from seed n={n}", partial=exc.partial) from exc
    zc = complex(z)
    if not (zc.real > 0 and zc.imag > 0):
        raise ConvergenceError(f"Newton from seed n={n} left the first quadrant", partial=zc)
    return ScalingZero(n, z, seed, _certify_disk(zc, 0.2))


def _tile_count(x1: float, y1: float, avoid: list) -> int:
    """Sum of rectangle counts over a tiling of ``(0, x1) x (0, y1)`` by cells of side about 1.

    Interior grid lines are nudged away from known zeros so that no contour
    passes closer than 0.05 to one.
    """
    def lines(upper, coord):
        k = max(1, math.ceil(upper))
        out = [0.0]
        for i in range(1, k):
            c = upper * i / k
            for shift in (0.0, 0.1, -0.1, 0.2, -0.2, 0.3, -0.3):
                if all(abs(coord(a) - (c + shift)) > 0.05 for a in avoid):
                    c += shift
                    break
            out.append(c)
        return out + [upper]

    xs = lines(x1, lambda a: a.real)
    ys = lines(y1, lambda a: a.imag)
    total = 0
    for xa, xb in zip(xs, xs[1:]):
        for ya, yb in zip(ys, ys[1:]):
            total += count_zeros_in_rectangle(_f0_pair_np, xa, xb, ya, yb, quadrature_points=256)
    return total


def _sweep(n_max: int, zeros: list, prec: int) -> tuple:
    seed = complex(asymptotic_zero_seed(n_max, 64))
    x1, y1 = seed.real + 1, seed.imag + 1
    found = list(zeros)
    n = len(found)
    # higher-index zeros may still fall inside the box
    while True:
        nxt = _zero_at(n + 1, prec)
        zc = complex(nxt.zeta)
        if not (zc.real < x1 and zc.imag < y1):
            break
        found.append(nxt)
        n += 1
    located = tuple(complex(z.zeta) for z in found)
    whole = count_zeros_in_rectangle(_f0_pair_np, 0.0, x1, 0.0, y1, quadrature_points=1024)
    tiled = _tile_count(x1, y1, list(located))
    if whole != tiled:
        raise ConvergenceError(f"sweep counts disagree: whole box {whole}, tiles {tiled}")
    return SweepReport(x1, y1, whole, located), found


@lru_cache(maxsize=8)
def _f0_zero_table(n_max: int, prec: int):
    zeros = [_zero_at(n, prec) for n in range(1, n_max + 1)]
    report, _ = _sweep(n_max, zeros, prec)
    return tuple(zeros), report


def f0_zeros(n_max: int, prec: int = DEFAULT_BITS) -> list:
    """Zeros ``zeta_1 .. zeta_{n_max}`` of ``F0`` in the first quadrant, each disk-certified.

    A sweep over ``(0, Re seed_{n_max} + 1) x (0, Im seed_{n_max} + 1)`` checks
    that the argument-principle count equals the number of zeros located in
    that box; a mismatch raises ``ConvergenceError``.
    """
    if n_max < 1:
        raise DomainError("n_max must be at least 1")
    zeros, report = _f0_zero_table(n_max, prec)
    if not report.complete:
        raise ConvergenceError(
            f"sweep found {report.count} zeros but {len(report.located)} were located", partial=report)
    return list(zeros)


def f0_sweep(n_max: int, prec: int = DEFAULT_BITS) -> SweepReport:
    return _f0_zero_table(n_max, prec)[1]


# ---------------------------------------------------------------------------
# finite-N corrections

def zero_expansion(j: int, prec: int = DEFAULT_BITS) -> tuple:
    """``(z0, z1, z2)`` with ``sqrt(N) h_{N,j} = z0 + z1/sqrt(N) + z2/N + O(N^{-3/2})``.

    Solving ``F0 + F1/sqrt(N) + F2/N = 0`` order by order gives ``z1 = -F1/F0'``
    and ``z2 = -(F0'' z1^2/2 + F1' z1 + F2)/F0'``; at a zero of ``F0`` these
    reduce to ``z0^2/2`` and ``z0 (2 z0^2 - 3)/24``.
    """
    z0 = f0_zeros(j, prec)[j - 1].zeta
    with context(prec):
        z1 = z0 * z0 / 2
        z2 = z0 * (2 * z0 * z0 - 3) / 24
    return z0, z1, z2


def printed_z2(z0, prec: int = DEFAULT_BITS) -> mpc:
    """The alternative closed form ``sqrt(pi) z0 (12 z0^4 + 2 z0^2 - 3)/24``, kept for comparison only.

    It does not solve the second-order equation and misses Newton-refined
    zeros by ``O(1/N)``.
    """
    with context(prec):
        z0 = to_mpc(z0, prec)
        return gmpy2.sqrt(gmpy2.const_pi()) * z0 * (12 * z0 ** 4 + 2 * z0 ** 2 - 3) / 24


def f1_f2_values(zeta, prec: int = DEFAULT_BITS) -> tuple:
    """First and second finite-N corrections ``F1``, ``F2`` to ``sqrt(N) Z_{N, zeta/sqrt(N)}``."""
    work = prec + 16
    with context(work):
        z = to_mpc(zeta, work)
        e = _erfcx_minus(z, work)
        rp = gmpy2.sqrt(gmpy2.const_pi())
        z2 = z * z
        f1 = -z * (z * (2 * z2 + 3) * e + 2 * (z2 + 1) / rp) / 2
        f2 = (2 * (6 * z2 * z2 + 31 * z2 + 26) * z2 * z * e
              + (12 * z2 ** 3 + 56 * z2 * z2 + 30 * z2 - 3) / rp) / 24
    return mpc(f1, precision=prec), mpc(f2, precision=prec)


def f1_np(zeta):
    z = np.asarray(zeta, dtype=complex)
    e = wofz(-1j * z)
    return -0.5 * z * (z * (2 * z * z + 3) * e + 2 * (z * z + 1) / SQRT_PI)


def scaled_partition(source, N: int, zeta):
    """``sqrt(N) Z_{N, zeta/sqrt(N)}`` for an array of ``zeta`` (complex128)."""
    from .partition import partition_recursive, partition_value

    zeta = np.asarray(zeta, dtype=complex)
    h = zeta / math.sqrt(N)
    if isinstance(source, InterArrivalLaw):
        vals = partition_recursive(source, N, h.ravel())
    else:
        vals = np.array([complex(partition_value(source, N, complex(v))) for v in h.ravel()])
    return (math.sqrt(N) * np.asarray(vals)).reshape(zeta.shape)


def _require_half(source):
    law = source if isinstance(source, InterArrivalLaw) else source.law
    if law.kind != "special" or law.alpha != 0.5:
        raise DomainError("the scaling function F0 belongs to the alpha = 1/2 special law")


def scaling_limit_check(table: RenewalTable | InterArrivalLaw, N: int, zeta_grid) -> float:
    """``max |sqrt(N) Z_{N, zeta/sqrt(N)} - F0(zeta)|`` over the grid.

    ``table`` may be a renewal table or, for large ``N``, the law itself.
    """
    _require_half(table)
    grid = np.asarray(zeta_grid, dtype=complex)
    return float(np.max(np.abs(scaled_partition(table, N, grid) - f0_np(grid))))


def scaling_derivative_check(law: InterArrivalLaw, N: int, zeta=0.0) -> complex:
    """``Z'_{N, zeta/sqrt(N)} - F0'(zeta)``; tends to zero as ``N`` grows."""
    from .partition import partition_recursive

    _require_half(law)
    _, d = partition_recursive(law, N, complex(zeta) / math.sqrt(N), derivative=True)
    return complex(d) - complex(f0_prime_np(zeta))
