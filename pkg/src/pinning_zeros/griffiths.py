"""Taylor coefficients at ``h = 0`` of the reduced disordered free energy.

The reduced free energy is ``f(h) = sum_{n >= n0} p^n sum_j log(1 - h/h_{n,j})``
over the zeros ``h_{n,j}`` of ``Z_{n,.}``.  Its coefficients
``t_k = f^(k)(0)/k! = -(1/k) sum_n p^n sum_j h_{n,j}^{-k}`` grow like
``Gamma(k/2)`` with an oscillating sign; ``griffiths_prediction`` gives the
closed-form asymptotics in terms of the scaling zero ``z0``.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import gmpy2
import numpy as np
from gmpy2 import mpfr
from scipy.stats import kstest

from .numerics import DomainError, PrecisionPolicy, context, polylog_direct, to_mpfr
from .partition import partition_polynomial
from .renewal import InterArrivalLaw, renewal_table
from .scaling import zero_expansion
from .zeros import ZeroSet, find_all_zeros


# ---------------------------------------------------------------------------
# on-disk zero store

def default_cache_dir() -> Path:
    env = os.environ.get("PINNING_ZEROS_CACHE")
    return Path(env) if env else Path.home() / ".cache" / "pinning-zeros"


def content_key(law: InterArrivalLaw, n: int, precision_bits: int) -> str:
    """Stable hash of ``(law, n, precision)``, used as a cache file name."""
    blob = json.dumps({"law": law.descriptor(), "n": n, "precision": precision_bits},
                      sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:24]


class ZeroStore:
    """Zero sets of ``Z_{n,.}`` for ``n <= n_max``, computed once and cached on disk."""

    def __init__(self, law: InterArrivalLaw, n_max: int, directory: Path | str | None = None,
                 policy: PrecisionPolicy | None = None):
        self.law = law
        self.n_max = n_max
        self.policy = policy or PrecisionPolicy()
        self.directory = Path(directory) if directory is not None else default_cache_dir()
        self._table = None
        self._memory: dict = {}

    def path(self, n: int) -> Path:
        return self.directory / f"zeros-{content_key(self.law, n, self.policy.bits(n))}.json"

    def _renewal(self):
        if self._table is None:
            self._table = renewal_table(self.law, self.n_max, self.policy)
        return self._table

    def __getitem__(self, n: int) -> ZeroSet:
        if not 2 <= n <= self.n_max:
            raise KeyError(n)
        if n in self._memory:
            return self._memory[n]
        path = self.path(n)
        if path.exists():
            zs = ZeroSet.load(path)
        else:
            poly = partition_polynomial(self._renewal(), n)
            zs = find_all_zeros(poly, self.policy, prec=self.policy.bits(n))
            self.directory.mkdir(parents=True, exist_ok=True)
            zs.save(path)
        self._memory[n] = zs
        return zs

    def fill(self, progress=None) -> None:
        for n in range(2, self.n_max + 1):
            self[n]
            if progress:
                progress(n)


# ---------------------------------------------------------------------------
# Taylor coefficients

def window(p: float, k: int, alpha: float = 0.5) -> tuple:
    """``(n_{p,k}, l_k)``: centre ``floor(alpha k/|log p|)`` and half-width ``sqrt(k) log k``."""
    centre = math.floor(alpha * k / abs(math.log(p)))
    return centre, math.sqrt(k) * math.log(k)


@dataclass
class GriffithsRun:
    p: float
    n0: int = 3
    n_max: int = 300
    zero_store: ZeroStore | None = None
    coefficients: dict = field(default_factory=dict)
    reality: dict = field(default_factory=dict)  # k -> log2 |Im raw| / |t_k|

    def __post_init__(self):
        if not 0 < self.p < 1:
            raise DomainError("p must lie in (0, 1)")
        if self.n0 < 2:
            raise DomainError("n0 must be at least 2 (Z_1 has no zeros)")
        if self.zero_store is None:
            self.zero_store = ZeroStore(InterArrivalLaw.special(Fraction(1, 2)), self.n_max)
        self._polar: dict = {}
        self._polar_prec = 0

    @property
    def alpha(self) -> float:
        return float(self.zero_store.law.alpha)

    def required_n_max(self, k: int) -> int:
        centre, half = window(self.p, k, self.alpha)
        return math.ceil(centre + half)

    def _polar_data(self, prec: int) -> dict:
        """Per ``n``: ``(log|h|, arg h)`` for zeros with ``Im h > 0`` and, separately, ``Im h < 0``."""
        if prec > self._polar_prec:
            data = {}
            with context(prec):
                for n in range(self.n0, self.n_max + 1):
                    zs = self.zero_store[n]
                    hs = [gmpy2.mpc(h, precision=prec) for h in zs.zeros]
                    # a zero on Im h = pi is its own conjugate on the cylinder: it enters
                    # with weight 1/2 at each of x +- i pi, i.e. once as a "pair"
                    pi = gmpy2.const_pi()
                    edge = [h for h in hs if abs(h.imag - pi) < 2 ** (-prec // 2)]
                    upper = [(gmpy2.log(abs(h)), gmpy2.phase(h)) for h in hs if 0 < h.imag and h not in edge]
                    lower = [(gmpy2.log(abs(h)), gmpy2.phase(h)) for h in hs if h.imag < 0]
                    real = [h.real for h in hs if h.imag == 0]
                    on_edge = [(gmpy2.log(abs(h)), gmpy2.phase(h)) for h in edge]
                    data[n] = (upper, lower, real, on_edge)
            self._polar, self._polar_prec = data, prec
        return self._polar


def taylor_coefficient(run: GriffithsRun, k: int, closest_only: bool = False,
                       windowed: bool = False) -> mpfr:
    """``t_k = -(1/k) sum_{n >= n0} p^n sum_j h_{n,j}^{-k}`` in log-polar form.

    Conjugate pairs enter as ``2 |h|^{-k} cos(k arg h)``; a zero on ``Im h = pi``
    is its own mirror image and enters once.  ``closest_only``
    keeps only the closest pair of each ``n``; ``windowed`` restricts ``n`` to
    the saddle window ``|n - n_{p,k}| <= sqrt(k) log k``.
    """
    if k < 1:
        raise DomainError("k must be at least 1")
    need = run.required_n_max(k)
    if run.n_max < need:
        raise DomainError(f"k={k} needs zero sets up to n={need}, have n_max={run.n_max}")
    prec = k + 128 + 64
    data = run._polar_data(prec)
    centre, half = window(run.p, k, run.alpha)
    with context(prec):
        log_p = gmpy2.log(to_mpfr(run.p, prec))
        terms = []
        imag_raw = []
        for n in range(run.n0, run.n_max + 1):
            if windowed and abs(n - centre) > half:
                continue
            upper, lower, real, edge = data[n]
            if closest_only:
                upper, lower, real, edge = upper[:1], [], [], []
            base = n * log_p
            for lg, ph in upper:
                terms.append(2 * gmpy2.exp(base - k * lg) * gmpy2.cos(k * ph))
            for lg, ph in edge:
                terms.append(gmpy2.exp(base - k * lg) * gmpy2.cos(k * ph))
            if not closest_only:
                # each zero on its own; the imaginary parts should cancel
                for lg, ph in upper + lower:
                    imag_raw.append(-gmpy2.exp(base - k * lg) * gmpy2.sin(k * ph))
            for x in real:
                terms.append(gmpy2.exp(base) * x ** (-k))
        value = -gmpy2.fsum(terms) / k
        if not closest_only and not windowed:
            im = abs(gmpy2.fsum(imag_raw)) / k
            run.reality[k] = float(gmpy2.log2(im / abs(value))) if im else -math.inf
            run.coefficients[k] = value
    return value


def finite_difference_coefficient(run: GriffithsRun, k: int, step: float = 1e-3,
                                  order: int = 8) -> float:
    """``f^(k)(0)/k!`` from central differences of ``f(h) = sum p^n sum_j log(1 - h/h_{n,j})``.

    An independent check for small ``k``, summing the zero sets directly.
    """
    import mpmath

    with mpmath.workdps(60):
        hs = []
        weights = []
        for n in range(run.n0, run.n_max + 1):
            for h in run.zero_store[n].zeros:
                hs.append(mpmath.mpc(str(h.real), str(h.imag)))
                weights.append(mpmath.mpf(run.p) ** n)

        def f(x):
            return mpmath.fsum(w * mpmath.log(1 - x / h) for w, h in zip(weights, hs)).real

        d = mpmath.diff(f, 0, k, h=step, method="step", addprec=order * 10)
        return float(d / mpmath.factorial(k))


# ---------------------------------------------------------------------------
# constants and prediction

@dataclass(frozen=True)
class GriffithsConstants:
    p: float
    alpha: float
    z0: complex
    z1: complex
    z2: complex
    a: float
    b: float
    c: float
    d: float
    A: float
    B: float
    C: float
    b1: float
    b2: float
    C1: float
    C2: float

    def to_json(self) -> dict:
        out = {}
        for k, v in self.__dict__.items():
            out[k] = [v.real, v.imag] if isinstance(v, complex) else v
        return out


def _b2(z0, z1, z2):
    """Second-order coefficient of ``arg(z0 + z1 e + z2 e^2)`` in ``e``, as a rational expression."""
    x0, y0 = z0.real, z0.imag
    x1, y1 = z1.real, z1.imag
    x2, y2 = z2.real, z2.imag
    num = (-x2 * y0 ** 3 + y0 ** 2 * y1 * x1 + y0 ** 2 * y2 * x0 - y0 * y1 ** 2 * x0
           - y0 * x0 ** 2 * x2 + y0 * x0 * x1 ** 2 - y1 * x0 ** 2 * x1 + y2 * x0 ** 3)
    return num / abs(z0) ** 4


def griffiths_constants(p: float, prec: int = 128, printed: bool = False) -> GriffithsConstants:
    """All constants of the ``k -> infinity`` asymptotics, from the closest scaling zero.

    With ``r_i = z_i/z0`` and ``l = |log p|`` a saddle-point expansion of the
    closest-zero sum gives the phase shift ``c = l Im(2 r2 - 3/2 r1^2)`` and
    ``C1 = -(2/l) exp(-l Re(2 r2 - 3/2 r1^2))``. ``printed=True`` instead uses
    the Gaussian-window form ``c = b2 c_p^2 + C d/l^2`` and
    ``C1 = -(2/l) exp(B + (C^2 - d^2)/(2 l^2))``, which amounts to a coefficient
    2 on ``r1^2`` and does not match the sums numerically.
    """
    if not 0 < p < 1:
        raise DomainError("p must lie in (0, 1)")
    alpha = 0.5
    z0m, z1m, z2m = zero_expansion(1, prec)
    z0, z1, z2 = complex(z0m), complex(z1m), complex(z2m)
    lp = abs(math.log(p))
    cp = math.sqrt(lp / alpha)
    a = math.atan2(z0.imag, z0.real)
    b1 = (z1.imag * z0.real - z0.imag * z1.real) / abs(z0) ** 2
    b2 = _b2(z0, z1, z2)
    b = b1 * cp
    d = -0.5 * b1 * cp ** 3
    r = z1 / z0
    A = -r.real * cp
    # only the modulus enters |eta|^{-k}, so the real part is the relevant one
    B = -(z2 / z0 - z1 * z1 / (2 * z0 * z0)).real * lp / alpha
    C = 0.5 * r.real * cp ** 3
    if printed:
        c = b2 * cp ** 2 + C * d / lp ** 2
        C1 = -(2 / lp) * math.exp(B + (C * C - d * d) / (2 * lp * lp))
    else:
        shift = lp * (2 * z2 / z0 - 1.5 * r * r)
        c = shift.imag
        C1 = -(2 / lp) * math.exp(-shift.real)
    C2 = 1 / (abs(z0) * lp ** alpha)
    return GriffithsConstants(p, alpha, z0, z1, z2, a, b, c, d, A, B, C, b1, b2, C1, C2)


def griffiths_phase(consts: GriffithsConstants, k) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    return consts.a * k + consts.b * np.sqrt(k) + consts.c


def griffiths_prediction(consts: GriffithsConstants, k: int) -> float:
    """``C1 C2^k e^{A sqrt(k)} Gamma(k/2 + 1) cos(a k + b sqrt(k) + c)``; compare with ``k t_k``."""
    if k < 1:
        raise DomainError("k must be at least 1")
    log_mag = (math.log(abs(consts.C1)) + k * math.log(consts.C2) + consts.A * math.sqrt(k)
               + math.lgamma(consts.alpha * k + 1))
    return math.copysign(1.0, consts.C1) * math.exp(log_mag) * math.cos(float(griffiths_phase(consts, k)))


# ---------------------------------------------------------------------------
# polylogarithm window sums

def polylog_leading(beta: float, p: float, prec: int = 128) -> mpfr:
    """``T_beta = Gamma(1 + beta)/|log p|^{1 + beta}``."""
    with context(prec):
        bm = to_mpfr(beta, prec)
        return gmpy2.exp(gmpy2.lngamma(1 + bm) - (1 + bm) * gmpy2.log(-gmpy2.log(to_mpfr(p, prec))))


def polylog_window_sum(beta: float, p: float, modulator: str = "exp-cos", C: float = 0.0,
                       d: float = 0.0, prec: int = 128) -> tuple:
    """``(window sum, prediction)`` as ``mpfr`` for ``sum p^n n^beta e^{C x} h(d x)``, ``x = (n - n_beta)/sqrt(beta)``.

    The sum runs over ``|n - n_beta| <= sqrt(beta) log beta`` with
    ``n_beta = beta/|log p|``; the prediction is
    ``T_beta exp((C^2 - d^2)/(2 log^2 p)) h(C d/log^2 p)`` with ``h`` cos or sin.
    """
    if beta < 10:
        raise DomainError("beta must be at least 10")
    if modulator not in ("exp-cos", "exp-sin"):
        raise DomainError(f"unknown modulator {modulator!r}")
    trig = gmpy2.cos if modulator == "exp-cos" else gmpy2.sin
    lp = abs(math.log(p))
    n_beta = beta / lp
    half = math.sqrt(beta) * math.log(beta)
    lo, hi = max(1, math.ceil(n_beta - half)), math.floor(n_beta + half)
    with context(prec):
        bm = to_mpfr(beta, prec)
        log_p = gmpy2.log(to_mpfr(p, prec))
        rb = gmpy2.sqrt(bm)
        terms = []
        for n in range(lo, hi + 1):
            x = (n - to_mpfr(n_beta, prec)) / rb
            terms.append(gmpy2.exp(n * log_p + bm * gmpy2.log(n) + C * x) * trig(d * x))
        total = gmpy2.fsum(terms)
        lp2 = lp * lp
        pred = gmpy2.exp(gmpy2.lngamma(1 + bm) - (1 + bm) * gmpy2.log(-log_p)
                         + (C * C - d * d) / (2 * lp2)) * trig(to_mpfr(C * d / lp2, prec))
    return total, pred


def polylog_ratio(beta: float, p: float, prec: int = 128) -> float:
    """``Li_{-beta}(p)/T_beta - 1`` with the polylogarithm summed directly."""
    with context(prec):
        li = polylog_direct(-to_mpfr(beta, prec), p, tol=1e-30, prec=prec)
        return float(li / polylog_leading(beta, p, prec) - 1)


def window_fraction(beta: float, p: float, prec: int = 128) -> float:
    """``1 - (window sum)/Li_{-beta}(p)``: the mass outside the saddle window."""
    win, _ = polylog_window_sum(beta, p, "exp-cos", 0.0, 0.0, prec)
    with context(prec):
        li = polylog_direct(-to_mpfr(beta, prec), p, tol=1e-30, prec=prec)
        return float(1 - win / li)


# ---------------------------------------------------------------------------
# equidistribution

def equidistribution_ks(a: float, b: float, c: float, n: int) -> float:
    """KS distance between ``{(a k + b sqrt(k) + c) mod 2 pi : k <= n}`` and the uniform law."""
    if b == 0:
        ratio = Fraction(a / (2 * math.pi)).limit_denominator(10 ** 4)
        if abs(float(ratio) - a / (2 * math.pi)) < 1e-12:
            raise DomainError("b = 0 with a/(2 pi) rational: the sequence is periodic")
    k = np.arange(1, n + 1, dtype=float)
    x = np.mod(a * k + b * np.sqrt(k) + c, 2 * math.pi) / (2 * math.pi)
    return float(kstest(x, "uniform").statistic)


# ---------------------------------------------------------------------------
# acceptance-style sweep

@dataclass(frozen=True)
class GriffithsRow:
    k: int
    t_k: float
    prediction: float
    ratio: float
    cos_value: float


def griffiths_sweep(run: GriffithsRun, ks, consts: GriffithsConstants | None = None) -> list:
    consts = consts or griffiths_constants(run.p)
    rows = []
    for k in ks:
        t = taylor_coefficient(run, k)
        pred = griffiths_prediction(consts, k)
        cosv = math.cos(float(griffiths_phase(consts, k)))
        rows.append(GriffithsRow(k, float(t), pred, float(k * t) / pred if pred else math.nan, cosv))
    return rows
