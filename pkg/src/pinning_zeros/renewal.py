"""Inter-arrival laws and the renewal mass table ``P(tau_j = n)``.

The table is built row by row: row ``j+1`` is the convolution of row ``j``
with the law ``K``.  Each row is held in block floating point (integer
mantissas sharing one binary exponent) so a whole convolution is a single
big-integer product via Kronecker substitution.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import gmpy2
from gmpy2 import mpfr, mpz

from .numerics import DomainError, PrecisionPolicy, context, to_mpc, to_mpfr

ZETA2 = "pi^2/6"
ZETA4 = "pi^4/90"

KINDS = ("special", "mixture-power", "mixture-lacunary", "custom")


def _as_fraction(alpha) -> Fraction:
    if isinstance(alpha, Fraction):
        return alpha
    if isinstance(alpha, float):
        return Fraction(repr(alpha))
    return Fraction(alpha)


@dataclass(frozen=True)
class InterArrivalLaw:
    """A probability mass ``K(n)`` on the positive integers.

    ``kind`` is one of ``special`` (the Gamma-ratio family with ``K(1) = alpha``),
    ``mixture-power`` and ``mixture-lacunary`` (equal mixtures of the special
    family with ``1/(n^2 zeta(2))``, resp. ``1/(n^2 zeta(4))`` on perfect
    squares only), or ``custom`` (explicit ``values`` for ``n = 1, 2, ...``).
    """

    kind: str = "special"
    alpha: Fraction | None = Fraction(1, 2)
    values: tuple = ()
    tail_exponent: float | None = None
    truncation_N: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown law kind {self.kind!r}")
        if self.kind == "custom":
            if not self.values:
                raise ValueError("custom law needs values")
            if self.tail_exponent is None:
                raise ValueError("custom law must state its tail exponent alpha")
            vals = tuple(Fraction(v) if isinstance(v, (int, Fraction)) else v for v in self.values)
            if any(v < 0 for v in vals) or not vals[0] > 0:
                raise ValueError("custom law needs K(n) >= 0 and K(1) > 0")
            object.__setattr__(self, "values", vals)
            object.__setattr__(self, "alpha", None)
        else:
            a = _as_fraction(self.alpha)
            if not (0 < a < 1):
                raise ValueError("alpha must lie in (0, 1)")
            object.__setattr__(self, "alpha", a)

    @classmethod
    def special(cls, alpha=Fraction(1, 2)) -> "InterArrivalLaw":
        return cls("special", alpha)

    @classmethod
    def mixture_power(cls, alpha=Fraction(1, 2)) -> "InterArrivalLaw":
        return cls("mixture-power", alpha)

    @classmethod
    def mixture_lacunary(cls, alpha=Fraction(1, 2)) -> "InterArrivalLaw":
        return cls("mixture-lacunary", alpha)

    @classmethod
    def custom(cls, values, tail_exponent: float) -> "InterArrivalLaw":
        return cls("custom", None, tuple(values), tail_exponent)

    @property
    def tail_alpha(self) -> float:
        return float(self.alpha) if self.alpha is not None else float(self.tail_exponent)

    def descriptor(self) -> dict:
        d = {"kind": self.kind}
        if self.alpha is not None:
            d["alpha"] = str(self.alpha)
        if self.kind == "custom":
            d["values"] = [str(v) for v in self.values]
            d["tail_exponent"] = self.tail_exponent
        return d

    @classmethod
    def from_descriptor(cls, d: dict) -> "InterArrivalLaw":
        if d["kind"] == "custom":
            return cls.custom([Fraction(v) for v in d["values"]], d["tail_exponent"])
        return cls(d["kind"], Fraction(d["alpha"]))

    def tail_constant(self) -> float:
        """Effective ``c`` in ``K(n) ~ c n^{-(1+alpha)}``, recorded as metadata."""
        if self.kind == "custom":
            return float("nan")
        a = float(self.alpha)
        c = 1.0 / (-math.gamma(-a))
        return c / 2 if self.kind.startswith("mixture") else c

    def key(self) -> str:
        return hashlib.sha256(json.dumps(self.descriptor(), sort_keys=True).encode()).hexdigest()[:16]


def _special_values(alpha: Fraction, n_max: int, prec: int) -> list:
    """``K(1..n_max)`` via ``K(n+1) = K(n) (n - alpha) / (n + 1)``."""
    a = gmpy2.mpq(alpha.numerator, alpha.denominator)
    with context(prec):
        out = [mpfr(a)]
        for n in range(1, n_max):
            out.append(out[-1] * mpfr(n - a) / (n + 1))
    return out


def k_values(law: InterArrivalLaw, n_max: int, prec: int = 128) -> list:
    """``[K(1), ..., K(n_max)]`` as ``mpfr`` at ``prec`` bits."""
    guard = prec + 2 * max(1, n_max).bit_length() + 8
    with context(guard):
        if law.kind == "custom":
            vals = [to_mpfr(law.values[n], guard) if n < len(law.values) else mpfr(0)
                    for n in range(n_max)]
        else:
            vals = _special_values(law.alpha, n_max, guard)
            if law.kind != "special":
                pi = gmpy2.const_pi()
                if law.kind == "mixture-power":
                    z2 = pi ** 2 / 6
                    vals = [(v + 1 / (mpfr(n) ** 2 * z2)) / 2 for n, v in enumerate(vals, 1)]
                else:
                    z4 = pi ** 4 / 90
                    vals = [(v + (1 / (mpfr(n) ** 2 * z4) if gmpy2.is_square(n) else 0)) / 2
                            for n, v in enumerate(vals, 1)]
        return [mpfr(v, prec) for v in vals]


def k_value(law: InterArrivalLaw, n: int, prec: int = 128) -> mpfr:
    """``K(n)`` for a single ``n >= 1``."""
    if n < 1:
        raise DomainError("K(n) is defined for n >= 1")
    return k_values(law, n, prec)[-1]


def khat(alpha, z, prec: int = 128):
    """Generating function ``1 - (1 - z)^alpha`` of the special family.

    Raises on the cut ``z > 1``; at ``z = 1`` returns 1 by continuity.
    """
    from .numerics import complex_pow

    with context(prec):
        z = to_mpc(z, prec)
        if z.imag == 0 and z.real >= 1:
            if z.real == 1:
                return gmpy2.mpc(1)
            raise DomainError("khat is cut along [1, inf)")
        return 1 - complex_pow(1 - z, to_mpfr(_as_fraction(alpha), prec), prec)


def normalization_deficit(law: InterArrivalLaw, n_max: int, prec: int = 128) -> mpfr:
    """``1 - sum_{n<=n_max} K(n)``."""
    with context(prec):
        return 1 - gmpy2.fsum(k_values(law, n_max, prec))


# ---------------------------------------------------------------------------
# the table

def _to_fixed(values, exponent: int) -> list:
    """Integer mantissas ``round(v * 2^-exponent)``."""
    out = []
    for v in values:
        if v == 0:
            out.append(0)
            continue
        m, e = v.as_mantissa_exp()
        shift = e - exponent
        out.append(int(m << shift) if shift >= 0 else int(m >> -shift))
    return out


def _pack(ints, slot: int) -> mpz:
    nbytes = slot // 8
    buf = b"".join(int(v).to_bytes(nbytes, "little") for v in ints)
    return mpz(int.from_bytes(buf, "little"))


def _unpack(big: mpz, slot: int, count: int) -> list:
    nbytes = slot // 8
    raw = int(big).to_bytes(max(nbytes * count, (big.bit_length() + 7) // 8), "little")
    return [int.from_bytes(raw[i * nbytes:(i + 1) * nbytes], "little") for i in range(count)]


@dataclass
class RenewalTable:
    """``P(tau_j = n)`` for ``1 <= j <= n <= N``.

    Row ``j`` is stored as integer mantissas for ``n = j..N`` with one shared
    exponent, so ``P(tau_j = n) = rows[j-1][n-j] * 2**exps[j-1]``.
    """

    law: InterArrivalLaw
    N: int
    precision_bits: int
    rows: list = field(repr=False)
    exps: list = field(repr=False)
    underflow: list = field(default_factory=list)

    def entry(self, j: int, n: int) -> mpfr:
        if not (1 <= j <= n <= self.N):
            if 1 <= n <= self.N and j > n:
                return mpfr(0)
            raise IndexError((j, n))
        with context(self.precision_bits):
            return gmpy2.mul_2exp(mpfr(self.rows[j - 1][n - j]), self.exps[j - 1])

    def column(self, n: int) -> list:
        """``[P(tau_1 = n), ..., P(tau_n = n)]``."""
        return [self.entry(j, n) for j in range(1, n + 1)]

    def row(self, j: int) -> list:
        return [self.entry(j, n) for n in range(j, self.N + 1)]

    def column_sum(self, n: int) -> mpfr:
        with context(self.precision_bits + 32):
            return gmpy2.fsum(self.column(n))

    # -- binary cache ----------------------------------------------------
    def save(self, path) -> None:
        """Header line (JSON) followed by row-major ``mantissa:exponent`` hex pairs."""
        path = Path(path)
        header = {"format": "renewal-table/1", "law": self.law.descriptor(), "N": self.N,
                  "precision_bits": self.precision_bits}
        tmp = path.with_suffix(path.suffix + ".tmp")
        with open(tmp, "wb") as fh:
            fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
            for j in range(1, self.N + 1):
                pairs = []
                for n in range(j, self.N + 1):
                    v = self.entry(j, n)
                    m, e = v.as_mantissa_exp() if v != 0 else (0, 0)
                    pairs.append(f"{int(m):x}:{int(e):x}")
                fh.write(" ".join(pairs).encode() + b"\n")
        tmp.replace(path)

    @classmethod
    def load(cls, path) -> "RenewalTable":
        with open(path, "rb") as fh:
            header = json.loads(fh.readline())
            if header.get("format") != "renewal-table/1":
                raise ValueError("not a renewal table file")
            N, prec = header["N"], header["precision_bits"]
            rows, exps = [], []
            for _ in range(N):
                pairs = [p.split(":") for p in fh.readline().decode().split()]
                ms = [int(m, 16) for m, _ in pairs]
                es = [int(e, 16) for _, e in pairs]
                nz = [e for m, e in zip(ms, es) if m]
                e0 = min(nz) if nz else 0
                rows.append([m << (e - e0) if m else 0 for m, e in zip(ms, es)])
                exps.append(e0)
        return cls(InterArrivalLaw.from_descriptor(header["law"]), N, prec, rows, exps)


def _guard_bits(k1: float, N: int) -> int:
    """Bits lost between a row's largest entry and its diagonal ``K(1)^j``."""
    return math.ceil(N * max(0.0, -math.log2(k1))) + N.bit_length() + 16


def renewal_table(law: InterArrivalLaw, N: int, policy: PrecisionPolicy | None = None,
                  precision_bits: int | None = None) -> RenewalTable:
    """Build ``P(tau_j = n)`` for ``1 <= j <= n <= N``.

    Every entry is accurate to ``precision_bits`` relative bits (default from
    ``policy`` at degree ``N``).  Entries whose value falls below
    ``2^-precision_bits`` are listed in ``underflow``; this is not an error.
    """
    if N < 1:
        raise DomainError("N must be at least 1")
    policy = policy or PrecisionPolicy()
    prec = precision_bits or policy.bits(N)
    kvals = k_values(law, N, prec + 64)
    k1 = float(kvals[0])
    guard = _guard_bits(k1, N)
    width = prec + guard  # mantissa bits carried by each row maximum

    # fixed-point K: relative precision must survive the smallest nonzero K(n)
    nz = [v for v in kvals if v != 0]
    k_range = math.ceil(math.log2(float(max(nz))) - math.log2(float(min(nz)))) + 1
    k_width = prec + guard + k_range
    k_exp = gmpy2.get_exp(max(nz)) - k_width
    k_fixed = _to_fixed(kvals, k_exp)

    rows, exps = [], []
    row_exp = k_exp
    row = list(k_fixed)
    under = []
    for j in range(1, N + 1):
        # renormalize so the row maximum has exactly `width` bits
        top = max(row).bit_length()
        shift = top - width
        if shift > 0:
            row = [v >> shift for v in row]
            row_exp += shift
        rows.append(row)
        exps.append(row_exp)
        floor = -prec - row_exp
        for off, v in enumerate(row):
            if v and v.bit_length() <= floor:
                under.append((j, j + off))
        if j == N:
            break
        # row_{j+1}[n] = sum_m row_j[m] K(n-m), n = j+1..N
        count = N - j
        slot = 8 * math.ceil((max(row).bit_length() + k_width + count.bit_length() + 2) / 8)
        a = _pack(row[:count], slot)
        b = _pack(k_fixed[:count], slot)
        prod = _unpack(a * b, slot, count)
        row = prod
        row_exp = row_exp + k_exp
    return RenewalTable(law, N, prec, rows, exps, under)


def closed_form_half(j: int, n: int) -> Fraction:
    """Exact ``P(tau_j = n)`` for the special family at ``alpha = 1/2``."""
    if j > n or j < 1:
        return Fraction(0)
    return Fraction(j, 2 * n - j) * Fraction(math.comb(2 * n - j, n), 2 ** (2 * n - j))


# ---------------------------------------------------------------------------
# one-sided stable densities

def stable_density_half(x) -> float:
    """``g_{1/2}(x) = exp(-1/(4x)) / sqrt(4 pi x^3)``."""
    x = float(x)
    if not x > 0:
        raise DomainError("stable density needs x > 0")
    return math.exp(-1.0 / (4 * x)) / math.sqrt(4 * math.pi * x ** 3)


def stable_density_asymptotics(alpha, x, side: str) -> float:
    """Small-``x`` or large-``x`` asymptotic form of the one-sided stable density.

    Diagnostic only: at ``alpha = 1/2`` the small-``x`` form is exact.
    """
    a, x = float(alpha), float(x)
    if not x > 0:
        raise DomainError("x must be positive")
    if side == "zero":
        r = a / x
        return (1 / math.sqrt(2 * math.pi * a * (1 - a))) * r ** ((2 - a) / (2 * (1 - a))) \
            * math.exp(-(1 - a) * r ** (a / (1 - a)))
    if side == "infinity":
        return math.gamma(1 + a) * math.sin(math.pi * a) / math.pi * x ** (-(1 + a))
    raise ValueError("side must be 'zero' or 'infinity'")
