"""Arbitrary-precision complex helpers and special functions.

Complex numbers are ``gmpy2.mpc`` values and reals are ``gmpy2.mpfr``.
Every function takes an explicit ``prec`` (mantissa bits) and works inside
a local gmpy2 context, so nothing here touches global state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import gmpy2
from gmpy2 import mpc, mpfr

DEFAULT_BITS = 128


class DomainError(ValueError):
    """Argument outside the domain of a function."""


class ConvergenceError(ArithmeticError):
    """An iteration failed to converge; ``partial`` carries what was reached."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class PrecisionPolicy:
    """Working precision as a function of polynomial degree.

    ``bits(N) = base_bits + ceil(per_degree_bits * N)``, never below 128.
    """

    base_bits: int = 256
    per_degree_bits: Fraction = Fraction(3, 2)
    quadrature_tol: float = 1e-30

    def __post_init__(self):
        object.__setattr__(self, "per_degree_bits", Fraction(self.per_degree_bits))
        if self.base_bits < 64:
            raise ValueError("base_bits must be at least 64")
        if self.per_degree_bits < 0:
            raise ValueError("per_degree_bits must be non-negative")
        if not self.quadrature_tol > 0:
            raise ValueError("quadrature_tol must be positive")

    def bits(self, degree: int) -> int:
        extra = math.ceil(self.per_degree_bits * degree)
        return max(128, self.base_bits + extra)


def context(prec: int):
    """A local gmpy2 context with ``prec`` mantissa bits."""
    if prec < 64:
        raise ValueError("precision below 64 bits")
    return gmpy2.context(precision=prec)


def to_mpc(z, prec: int = DEFAULT_BITS) -> mpc:
    """Convert Python/numpy/mpmath/gmpy2 numbers to ``mpc`` at ``prec`` bits."""
    if isinstance(z, mpc):
        return mpc(z, precision=prec)
    if isinstance(z, (float, complex)):
        return mpc(complex(z), precision=prec)
    if hasattr(z, "imag") and not isinstance(z, (int, Fraction)) \
            and type(z).__name__ not in ("mpz", "mpq", "mpfr"):
        return mpc(_to_mpfr(z.real, prec), _to_mpfr(z.imag, prec), precision=prec)
    return mpc(_to_mpfr(z, prec), 0, precision=prec)


def _to_mpfr(x, prec: int) -> mpfr:
    if isinstance(x, Fraction):
        return mpfr(gmpy2.mpq(x.numerator, x.denominator), prec)
    if hasattr(x, "man_exp"):  # mpmath.mpf, converted exactly
        man, exp = x.man_exp
        return gmpy2.mul_2exp(mpfr(man, prec), exp)
    return mpfr(x, prec)


def to_mpfr(x, prec: int = DEFAULT_BITS) -> mpfr:
    return _to_mpfr(x, prec)


def principal_log(z, prec: int = DEFAULT_BITS) -> mpc:
    """Principal logarithm with ``Log(x) = log|x| + i*pi`` for ``x < 0``."""
    with context(prec):
        z = to_mpc(z, prec)
        if z == 0:
            raise DomainError("log of zero")
        if z.imag == 0:
            re = z.real
            return mpc(gmpy2.log(abs(re)), gmpy2.const_pi() if re < 0 else 0)
        return gmpy2.log(z)


def complex_pow(z, c, prec: int = DEFAULT_BITS) -> mpc:
    """``exp(c * Log z)`` for real ``c`` with the principal branch."""
    with context(prec):
        z = to_mpc(z, prec)
        c = _to_mpfr(c, prec)
        if z == 0:
            if c > 0:
                return mpc(0)
            raise DomainError("0 raised to a non-positive power")
        return gmpy2.exp(c * principal_log(z, prec))


# ---------------------------------------------------------------------------
# complementary error function

_CF_RADIUS = 4
_CF_MIN_REAL = 2


def _erf_series(z: mpc, prec: int) -> mpc:
    """Maclaurin series of erf with enough guard bits for the cancellation."""
    r2 = float(abs(z)) ** 2
    guard = int(1.45 * r2 + 1.45 * max(0.0, float((z * z).real))) + 24
    work = prec + guard
    with context(work):
        z = mpc(z, precision=work)
        z2 = z * z
        term = mpc(z)
        total = mpc(z)
        eps = mpfr(2) ** (-work)
        n = 0
        while True:
            n += 1
            term = -term * z2 / n
            contrib = term / (2 * n + 1)
            total += contrib
            if n > r2 and abs(contrib) <= eps * abs(total):
                break
        return 2 * total / gmpy2.sqrt(gmpy2.const_pi())


def _erfcx_cf(z: mpc, prec: int) -> mpc:
    """``exp(z^2) erfc(z)`` by Lentz's method on the Laplace continued fraction.

    Valid for Re z > 0; used only where it converges quickly.
    """
    work = prec + 16
    with context(work):
        z = mpc(z, precision=work)
        tiny = mpfr(2) ** (-4 * work)
        eps = mpfr(2) ** (-work)
        f = mpc(z)
        c = mpc(z)
        d = mpc(0)
        for n in range(1, 200000):
            a = mpfr(n) / 2
            d = z + a * d
            if d == 0:
                d = mpc(tiny)
            d = 1 / d
            c = z + a / c
            if c == 0:
                c = mpc(tiny)
            delta = c * d
            f *= delta
            if abs(delta - 1) < eps:
                break
        return 1 / (f * gmpy2.sqrt(gmpy2.const_pi()))


def _use_cf(z: mpc) -> bool:
    return abs(z) >= _CF_RADIUS and z.real >= _CF_MIN_REAL


def erfc_complex(z, prec: int = DEFAULT_BITS) -> mpc:
    """Complementary error function of a complex argument."""
    with context(prec + 8):
        z = to_mpc(z, prec + 8)
        flip = z.real < 0
        w = -z if flip else z
        if _use_cf(w):
            val = _erfcx_cf(w, prec) * gmpy2.exp(-w * w)
        else:
            val = 1 - _erf_series(w, prec)
        if flip:
            val = 2 - val
    return mpc(val, precision=prec)


def erfcx_complex(z, prec: int = DEFAULT_BITS) -> mpc:
    """Scaled function ``exp(z^2) erfc(z)``, free of overflow for large Re z > 0."""
    with context(prec + 8):
        z = to_mpc(z, prec + 8)
        if _use_cf(z):
            val = _erfcx_cf(z, prec)
        elif _use_cf(-z):
            val = 2 * gmpy2.exp(z * z) - _erfcx_cf(-z, prec)
        else:
            val = gmpy2.exp(z * z) * (1 - _erf_series(z, prec))
    return mpc(val, precision=prec)


# ---------------------------------------------------------------------------
# real special functions

def log_gamma_real(x, prec: int = DEFAULT_BITS) -> mpfr:
    """``log Gamma(x)`` for ``x > 0``."""
    with context(prec):
        x = _to_mpfr(x, prec)
        if not x > 0:
            raise DomainError("log_gamma_real needs x > 0")
        return gmpy2.lngamma(x)


def polylog_direct(s, x, tol=1e-30, prec: int = DEFAULT_BITS) -> mpfr:
    """``Li_s(x) = sum_{n>=1} x^n / n^s`` for ``0 < x < 1`` by direct summation.

    Summation stops once the summand has decreased for 50 consecutive terms
    and the geometric majorant of the tail is below ``tol`` relative to the
    partial sum.
    """
    with context(prec + 32):
        x = _to_mpfr(x, prec + 32)
        s = _to_mpfr(s, prec + 32)
        if not (0 < x < 1):
            raise DomainError("polylog_direct needs 0 < x < 1")
        tol = _to_mpfr(tol, prec + 32)
        log_x = gmpy2.log(x)
        total = mpfr(0)
        prev = None
        decreasing = 0
        n = 0
        while True:
            n += 1
            term = gmpy2.exp(n * log_x - s * gmpy2.log(n))
            total += term
            if prev is not None and term < prev:
                decreasing += 1
            else:
                decreasing = 0
            prev = term
            if decreasing >= 50:
                # ratio of consecutive summands; it decreases in n for s <= 0
                # and is bounded by x for s > 0
                ratio = x * ((mpfr(n) / (n + 1)) ** s if s <= 0 else 1)
                if ratio < 1:
                    tail = term * ratio / (1 - ratio)
                    if tail < tol * total:
                        break
        return mpfr(total, prec)


def polylog_asymptotic(beta, p, prec: int = DEFAULT_BITS) -> mpfr:
    """Leading behaviour ``Gamma(1+beta) / |log p|^(1+beta)`` of ``Li_{-beta}(p)``."""
    with context(prec + 16):
        beta = _to_mpfr(beta, prec + 16)
        lp = abs(gmpy2.log(_to_mpfr(p, prec + 16)))
        val = gmpy2.exp(gmpy2.lngamma(1 + beta) - (1 + beta) * gmpy2.log(lp))
    return mpfr(val, prec)
