"""Partition function ``Z_{N,h} = sum_j e^{hj} P(tau_j = N)`` and its asymptotics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import gmpy2
import mpmath
import numpy as np
from gmpy2 import mpc, mpfr

from .numerics import DomainError, complex_pow, context, principal_log, to_mpc, to_mpfr
from .renewal import InterArrivalLaw, RenewalTable, k_value, k_values

GUARD_BITS = 32


@dataclass(frozen=True)
class PartitionPolynomial:
    """``P_N(w) = sum_{j=1}^N c_j w^j`` with ``c_j = P(tau_j = N)``."""

    N: int
    coeffs: tuple  # c_1 .. c_N as mpfr
    law: InterArrivalLaw
    precision_bits: int

    @property
    def degree(self) -> int:
        return self.N

    @property
    def leading(self) -> mpfr:
        return self.coeffs[-1]

    def __call__(self, w):
        return self.evaluate_w(w)[0]

    def evaluate_w(self, w, prec: int | None = None):
        """``(P(w), w P'(w))`` by Horner in ``w``."""
        prec = prec or self.precision_bits + GUARD_BITS
        with context(prec):
            w = to_mpc(w, prec)
            return _horner_w(self.coeffs, w)

    def value_at_one(self) -> mpfr:
        with context(self.precision_bits + GUARD_BITS):
            return gmpy2.fsum(self.coeffs)


def _horner_w(coeffs, w):
    """``sum c_j w^j`` and ``sum j c_j w^j`` (j from 1)."""
    acc = mpc(0)
    der = mpc(0)
    for c in reversed(coeffs):
        der = der * w + acc
        acc = acc * w + c
    # acc = sum c_j w^{j-1}; der = sum (j-1) c_j w^{j-2}
    value = acc * w
    wder = (der * w + acc) * w
    return value, wder


def _horner_reversed(coeffs, u):
    """With ``u = 1/w``: ``sum c_j u^{N-j}`` and ``sum (N-j) c_j u^{N-j}``."""
    acc = mpc(0)
    der = mpc(0)
    for c in coeffs:
        der = der * u + acc
        acc = acc * u + c
    return acc, der * u


def _eval_h(coeffs, h, prec):
    """``(Z, dZ/dh)`` at ``h``, choosing the stable Horner direction."""
    n = len(coeffs)
    with context(prec):
        h = to_mpc(h, prec)
        if h.real <= 0:
            w = gmpy2.exp(h)
            return _horner_w(coeffs, w)
        u = gmpy2.exp(-h)
        s, t = _horner_reversed(coeffs, u)
        scale = gmpy2.exp(n * h)
        return s * scale, (n * s - t) * scale


def _column(source, N):
    if isinstance(source, PartitionPolynomial):
        if source.N != N:
            raise ValueError("polynomial degree does not match N")
        return source.coeffs, source.precision_bits
    if N > source.N:
        raise ValueError(f"table only reaches N={source.N}")
    return tuple(source.column(N)), source.precision_bits


def partition_value(table: RenewalTable | PartitionPolynomial, N: int, h, prec: int | None = None) -> mpc:
    """``Z_{N,h}`` from the renewal table column at ``N``."""
    coeffs, p = _column(table, N)
    return _eval_h(coeffs, h, prec or p + GUARD_BITS)[0]


def partition_derivative(table: RenewalTable | PartitionPolynomial, N: int, h,
                         prec: int | None = None) -> mpc:
    """``dZ_{N,h}/dh = sum_j j e^{hj} P(tau_j = N)``."""
    coeffs, p = _column(table, N)
    return _eval_h(coeffs, h, prec or p + GUARD_BITS)[1]


def partition_value_and_derivative(table, N: int, h, prec: int | None = None):
    coeffs, p = _column(table, N)
    return _eval_h(coeffs, h, prec or p + GUARD_BITS)


def partition_polynomial(table: RenewalTable, N: int) -> PartitionPolynomial:
    if N > table.N:
        raise ValueError(f"table only reaches N={table.N}")
    return PartitionPolynomial(N, tuple(table.column(N)), table.law, table.precision_bits)


# ---------------------------------------------------------------------------
# double-precision route through the renewal equation

def partition_recursive(law: InterArrivalLaw, N: int, h, derivative: bool = False):
    """``Z_{N,h}`` for an array of ``h`` in complex128 via ``Z_n = e^h sum_m K(m) Z_{n-m}``.

    Costs ``O(N^2)`` per point and needs no renewal table, which makes it the
    tool of choice for ``N`` in the thousands.  Returns ``(Z, Z')`` when
    ``derivative`` is true.
    """
    hs = np.atleast_1d(np.asarray(h, dtype=complex)).ravel()
    K = np.array([float(v) for v in k_values(law, N, 64)])
    eh = np.exp(hs)
    Z = np.zeros((N + 1, hs.size), dtype=complex)
    Z[0] = 1.0
    D = np.zeros_like(Z) if derivative else None
    Krev = K[::-1]  # Krev[N-m] = K(m)
    for n in range(1, N + 1):
        kk = Krev[N - n:]  # K(n), ..., K(1)
        Z[n] = eh * (kk @ Z[:n])
        if derivative:
            D[n] = Z[n] + eh * (kk @ D[:n])
    zN = Z[N].reshape(np.shape(h)) if np.ndim(h) else Z[N][0]
    if not derivative:
        return zN
    dN = D[N].reshape(np.shape(h)) if np.ndim(h) else D[N][0]
    return zN, dN


# ---------------------------------------------------------------------------
# asymptotic evaluators

def asymptotic_deloc(law: InterArrivalLaw, N: int, h, prec: int = 128) -> mpc:
    """``K(N) e^h / (1 - e^h)^2``, the delocalized-region asymptotics."""
    with context(prec):
        h = to_mpc(h, prec)
        eh = gmpy2.exp(h)
        if eh == 1:
            raise DomainError("pole at e^h = 1")
        return k_value(law, N, prec) * eh / (1 - eh) ** 2


def _loc_prefactor(alpha, h, prec):
    a = to_mpfr(alpha, prec)
    u = 1 - gmpy2.exp(-h)
    return complex_pow(u, (1 - a) / a, prec) / (a * gmpy2.exp(h))


def asymptotic_loc(alpha, N: int, h, prec: int = 128) -> mpc:
    """``(1 - e^{-h})^{(1-a)/a} / (a e^h) * z^{-(N+1)}`` for ``h`` in the localized region."""
    from .critcurve import Region, classify, pole_location

    hc = complex(to_mpc(h, 64))
    if classify(float(alpha), hc).region is not Region.LOCALIZED:
        raise DomainError("asymptotic_loc needs h in the localized region")
    with context(prec):
        h = to_mpc(h, prec)
        z = pole_location(alpha, h, prec)
        return _loc_prefactor(alpha, h, prec) * z ** (-(N + 1))


def asymptotic_crit(alpha, N: int, h, prec: int = 128) -> mpc:
    """Two-term expansion on the critical curve: unit-modulus phase term plus a ``N^{-(1+a)}`` term."""
    from .critcurve import pole_location

    with context(prec):
        h = to_mpc(h, prec)
        if h == 0:
            raise DomainError("h = 0 is the singular point of the curve")
        a = to_mpfr(alpha, prec)
        z = pole_location(alpha, h, prec)
        phase = gmpy2.exp(mpc(0, -(N + 1) * principal_log(z, prec).imag))
        eh = gmpy2.exp(h)
        minus_gamma = -gmpy2.gamma(-a)
        tail = eh / (minus_gamma * (1 - eh) ** 2 * mpfr(N) ** (1 + a))
        return _loc_prefactor(alpha, h, prec) * phase + tail


# ---------------------------------------------------------------------------
# alpha = 1/2 moment representation

MOMENT_GUARD = 0.05


def _atom(h, N):
    eh = mpmath.exp(h)
    return 2 * (eh - 1) / (2 * eh - 1) * (eh ** 2 / (2 * eh - 1)) ** N


def moment_oracle_half(h, N: int, tol: float = 1e-20):
    """``Z_{N,h}`` at ``alpha = 1/2`` as the ``N``-th moment of ``nu_h``.

    Tanh-sinh quadrature of the absolutely continuous part on ``(0, 1)``
    (split near ``1 - 10|h|^2`` where the near-pole sits), plus the atom at
    ``e^{2h}/(2e^h - 1)`` when ``Re h > 0``.  Returns an ``mpmath.mpc``.
    """
    h = mpmath.mpc(complex(h)) if not isinstance(h, mpmath.mpc) else h
    if abs(h.real) < MOMENT_GUARD:
        raise DomainError(f"|Re h| must be at least {MOMENT_GUARD}")
    dps = max(30, int(-math.log10(tol)) + 15)
    with mpmath.workdps(dps):
        eh = mpmath.exp(h)
        e2h = eh ** 2
        c = 1 - 2 * eh

        def f(x):
            return x ** (N - 1) * mpmath.sqrt(x * (1 - x)) / (x * c + e2h)

        split = 1 - 10 * abs(h) ** 2
        pts = [0, split, 1] if 0 < split < 1 else [0, 1]
        val, err = mpmath.quad(f, pts, error=True, maxdegree=10)
        if err > tol * max(abs(val), mpmath.mpf(1e-300)):
            # refine the left panel where x^N is tiny and the right one near the pole
            more = sorted(set(pts + [1 - mpmath.mpf(2) ** -k for k in range(1, 12)]))
            val, err = mpmath.quad(f, more, error=True, maxdegree=12)
            if err > tol * abs(val) * 1e3:
                raise ArithmeticError(f"moment quadrature reached only {mpmath.nstr(err, 3)}")
        out = eh / mpmath.pi * val
        if h.real > 0:
            out += _atom(h, N)
        return out


def atom_scaling(zeta, N: int):
    """``g_N(zeta)``: the atom contribution at ``h = zeta/sqrt(N)``."""
    zeta = mpmath.mpc(complex(zeta))
    r = mpmath.sqrt(N)
    e = mpmath.exp(zeta / r)
    return 2 * (e - 1) * mpmath.exp(2 * zeta * r) / (2 * e - 1) ** (N + 1)
