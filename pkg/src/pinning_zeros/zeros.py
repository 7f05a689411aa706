"""Zeros of ``h -> Z_{N,h}``: all at once, one by Newton, or counted on a contour.

All-zeros search runs the Ehrlich-Aberth iteration on the deflated
polynomial ``P_N(w)/w`` in ``w = e^h`` and maps back with the principal
logarithm.  The iteration starts at a reduced precision sized to the
conditioning of the polynomial and is then polished at the full working
precision.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import gmpy2
import numpy as np
from gmpy2 import mpc, mpfr

from .numerics import ConvergenceError, DomainError, PrecisionPolicy, context, principal_log, to_mpc
from .partition import PartitionPolynomial, partition_recursive, partition_value_and_derivative
from .renewal import InterArrivalLaw, RenewalTable


@dataclass(frozen=True)
class ZeroSet:
    """The ``N - 1`` nonzero-``w`` zeros of ``Z_{N,h}``, as points ``h`` of the cylinder.

    ``zeros`` come in conjugate pairs, ordered by modulus then argument, each
    representative with ``Im h >= 0`` immediately followed by its conjugate.
    ``residuals`` are ``log2(|P(w)| / sum_j c_j |w|^j)`` and ``radii`` are
    inclusion radii in ``w``: each disk of that radius around ``w_j`` holds a
    root.
    """

    N: int
    zeros: tuple
    w: tuple = field(repr=False)
    residuals: tuple = field(repr=False)
    radii: tuple = field(repr=False)
    precision_bits: int = 0
    converged: tuple = field(default=(), repr=False)
    iterations: int = 0
    law: dict | None = None
    multiplicity_report: tuple = ()

    def __len__(self):
        return len(self.zeros)

    def as_complex(self) -> np.ndarray:
        return np.array([complex(z) for z in self.zeros])

    @property
    def all_converged(self) -> bool:
        return all(self.converged)

    # -- serialization ---------------------------------------------------
    def to_json(self) -> dict:
        return {
            "N": self.N,
            "precision_bits": self.precision_bits,
            "law": self.law,
            "iterations": self.iterations,
            "zeros": [{"re": float(z.real), "im": float(z.imag), "residual": float(r)}
                      for z, r in zip(self.zeros, self.residuals)],
        }

    def save(self, path) -> None:
        """JSON summary plus a ``.mp`` sidecar holding the zeros bit for bit."""
        path = Path(path)
        _atomic_write(path, (json.dumps(self.to_json(), indent=1, sort_keys=True) + "\n").encode())
        chunks = [b"ZSET1", struct.pack("<qq", self.N, self.precision_bits)]
        for seq in (self.zeros, self.w):
            for v in seq:
                blob = gmpy2.to_binary(v)
                chunks.append(struct.pack("<I", len(blob)) + blob)
        meta = json.dumps({"residuals": [float(r) for r in self.residuals],
                           "radii": [float(r) for r in self.radii],
                           "converged": [bool(c) for c in self.converged],
                           "iterations": self.iterations, "law": self.law}).encode()
        chunks.append(struct.pack("<I", len(meta)) + meta)
        _atomic_write(sidecar_path(path), b"".join(chunks))

    @classmethod
    def load(cls, path) -> "ZeroSet":
        raw = sidecar_path(Path(path)).read_bytes()
        if raw[:5] != b"ZSET1":
            raise ValueError("not a zero-set sidecar")
        N, prec = struct.unpack_from("<qq", raw, 5)
        pos = 21
        vals = []
        for _ in range(2 * (N - 1)):
            (n,) = struct.unpack_from("<I", raw, pos)
            vals.append(gmpy2.from_binary(raw[pos + 4:pos + 4 + n]))
            pos += 4 + n
        (n,) = struct.unpack_from("<I", raw, pos)
        meta = json.loads(raw[pos + 4:pos + 4 + n])
        return cls(N, tuple(vals[:N - 1]), tuple(vals[N - 1:]), tuple(meta["residuals"]),
                   tuple(meta["radii"]), prec, tuple(meta["converged"]), meta["iterations"],
                   meta["law"])


def sidecar_path(path: Path) -> Path:
    return path.with_suffix(path.suffix + ".mp")


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    tmp.replace(path)


# ---------------------------------------------------------------------------
# Ehrlich-Aberth

def _newton_polygon_guesses(coeffs) -> list:
    """Starting points on circles whose radii come from the upper convex hull of ``(k, log|q_k|)``."""
    n = len(coeffs) - 1
    logs = [float(gmpy2.log2(abs(c))) if c != 0 else -math.inf for c in coeffs]
    pts = [(k, v) for k, v in enumerate(logs) if v > -math.inf]
    hull = []
    for p in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (x2 - x1) * (p[1] - y1) - (y2 - y1) * (p[0] - x1) >= 0:
                hull.pop()
            else:
                break
        hull.append(p)
    guesses = []
    golden = (math.sqrt(5) - 1) / 2
    for i in range(len(hull) - 1):
        (k0, l0), (k1, l1) = hull[i], hull[i + 1]
        m = k1 - k0
        r = 2.0 ** ((l0 - l1) / m)
        sigma = 2 * math.pi * golden * (i + 1) + 0.4
        guesses += [r * complex(math.cos(2 * math.pi * j / m + sigma), math.sin(2 * math.pi * j / m + sigma))
                    for j in range(m)]
    assert len(guesses) == n
    return guesses


def _horner_many(coeffs, z):
    """``Q(z)`` and ``Q'(z)`` for an object array of ``mpc`` (current context)."""
    acc = np.full(z.shape, mpc(0), dtype=object)
    der = np.full(z.shape, mpc(0), dtype=object)
    for c in reversed(coeffs):
        der = der * z + acc
        acc = acc * z + c
    return acc, der


def _abs_poly(coeffs, r):
    """``sum |q_k| r^k`` for a real ``r >= 0`` (current context)."""
    acc = mpfr(0)
    for c in reversed(coeffs):
        acc = acc * r + abs(c)
    return acc


def _aberth_sums(zc: np.ndarray) -> np.ndarray:
    d = zc[:, None] - zc[None, :]
    np.fill_diagonal(d, np.inf)
    return np.sum(1.0 / d, axis=1)


def _aberth_phase(coeffs, z, prec, tol_bits, max_iter, frozen=None):
    """Jacobi-style Ehrlich-Aberth sweeps; roots are frozen once their relative step < 2^-tol_bits."""
    n = len(z)
    active = np.ones(n, dtype=bool) if frozen is None else ~frozen
    thresh = 2.0 ** (-tol_bits)
    it = 0
    with context(prec):
        z = np.array([mpc(v, precision=prec) for v in z], dtype=object)
        qs = [mpfr(c, prec) for c in coeffs]
        while active.any() and it < max_iter:
            it += 1
            zc = np.array([complex(v) for v in z])
            sums = _aberth_sums(zc)
            idx = np.nonzero(active)[0]
            val, der = _horner_many(qs, z[idx])
            for k, i in enumerate(idx):
                if val[k] == 0:
                    active[i] = False
                    continue
                ratio = val[k] / der[k]
                step = ratio / (1 - ratio * mpc(complex(sums[i])))
                z[i] = z[i] - step
                rel = float(abs(step) / abs(z[i])) if z[i] != 0 else float(abs(step))
                if rel < thresh:
                    active[i] = False
    return list(z), ~active, it


def _low_precision(coeffs, guesses, prec_full):
    """Working precision for the first phase, from the spread of ``sum |q_k| r^k`` over the starting radii."""
    radii = sorted(abs(g) for g in guesses)
    with context(128):
        hi = float(gmpy2.log2(_abs_poly(coeffs, mpfr(radii[-1]))))
        lo = float(gmpy2.log2(_abs_poly(coeffs, mpfr(radii[0]))))
    return int(min(prec_full, max(128, 96 + math.ceil(hi - lo) + len(coeffs).bit_length())))


def _inclusion_radii(coeffs, z, prec):
    """Radii ``(n) |Q(z_i)| / (|lead| prod_{j != i} |z_i - z_j|)`` of root-containing disks."""
    n = len(z)
    with context(prec):
        zz = np.array(z, dtype=object)
        val, _ = _horner_many(coeffs, zz)
        lead = abs(coeffs[-1])
        logq = np.array([float(gmpy2.log2(abs(v))) if v != 0 else -np.inf for v in val])
    zc = np.array([complex(v) for v in z])
    d = np.abs(zc[:, None] - zc[None, :])
    np.fill_diagonal(d, 1.0)
    logprod = np.sum(np.log2(d), axis=1)
    with context(64):
        loglead = float(gmpy2.log2(lead))
    return logq + math.log2(max(n, 1)) - loglead - logprod, val


def _pair_conjugates(z, radii_log2):
    """Snap conjugate pairs to exact conjugates and near-real roots onto the real axis."""
    zc = np.array([complex(v) for v in z])
    n = len(z)
    done = np.zeros(n, dtype=bool)
    out = list(z)
    unpaired = []
    for i in np.argsort(-zc.imag, kind="stable"):
        if done[i]:
            continue
        done[i] = True
        rad = 2.0 ** radii_log2[i]
        tol = max(rad, 1e-12 * max(1.0, abs(zc[i])))
        if abs(zc[i].imag) <= tol:
            out[i] = mpc(z[i].real, 0, precision=z[i].precision[0])
            continue
        cand = np.where(~done)[0]
        if cand.size == 0:
            unpaired.append(int(i))
            continue
        k = cand[np.argmin(np.abs(zc[cand] - np.conj(zc[i])))]
        if abs(zc[k] - np.conj(zc[i])) <= max(tol, 2.0 ** radii_log2[k]):
            done[k] = True
            prec = z[i].precision[0]
            with context(prec):  # negation rounds to the ambient precision
                out[k] = mpc(z[i].real, -z[i].imag, precision=prec)
        else:
            unpaired.append(int(i))
    return out, unpaired


def _order(hs):
    """Representatives with ``Im >= 0`` by (modulus, argument), each followed by its conjugate."""
    hc = [complex(h) for h in hs]
    reps = [i for i, h in enumerate(hc) if h.imag >= 0]
    reps.sort(key=lambda i: (abs(hc[i]), math.atan2(hc[i].imag, hc[i].real)))
    used = set()
    order = []
    for i in reps:
        if i in used:
            continue
        used.add(i)
        order.append(i)
        if hc[i].imag > 0 and hc[i].imag < math.pi:
            j = min((k for k in range(len(hc)) if k not in used and hc[k].imag < 0),
                    key=lambda k: abs(hc[k] - hc[i].conjugate()), default=None)
            if j is not None:
                used.add(j)
                order.append(j)
    order += [k for k in range(len(hc)) if k not in used]
    return order


def find_all_zeros(poly: PartitionPolynomial, policy: PrecisionPolicy | None = None,
                   max_iter: int = 400, polish_iter: int = 30, prec: int | None = None) -> ZeroSet:
    """All ``N - 1`` zeros of ``Z_{N,h}`` (the root ``w = 0`` of ``P_N`` is removed).

    Converged when each root's last relative correction is below
    ``2^-(prec/2)``; residual certificates and inclusion radii are attached.
    Roots that did not converge are flagged in ``converged``.
    """
    if poly.N < 2:
        raise DomainError("need degree at least 2")
    policy = policy or PrecisionPolicy()
    prec = prec or max(policy.bits(poly.N), poly.precision_bits)
    coeffs = list(poly.coeffs)  # deflated: Q(w) = sum_k c_{k+1} w^k
    guesses = _newton_polygon_guesses(coeffs)

    p_lo = _low_precision(coeffs, guesses, prec)
    z, _, it1 = _aberth_phase(coeffs, guesses, p_lo, tol_bits=min(48, p_lo // 4), max_iter=max_iter)
    z, conv, it2 = _aberth_phase(coeffs, z, prec, tol_bits=prec // 2, max_iter=polish_iter)

    radii, _ = _inclusion_radii([mpfr(c, prec) for c in coeffs], z, prec)
    z, unpaired = _pair_conjugates(z, radii)

    # certificates after pairing, at a little more than working precision
    cert_prec = prec + 32
    with context(cert_prec):
        zz = np.array([mpc(v, precision=cert_prec) for v in z], dtype=object)
        vals, _ = _horner_many(coeffs, zz)
        resid = []
        for v, w in zip(vals, zz):
            scale = _abs_poly(coeffs, abs(w))
            resid.append(float(gmpy2.log2(abs(v) / scale)) if v != 0 else -math.inf)
        hs = [principal_log(w, prec) for w in z]

    report = []
    zc = np.array([complex(v) for v in z])
    for i in range(len(zc)):
        for j in range(i + 1, len(zc)):
            if abs(zc[i] - zc[j]) <= 2.0 ** radii[i] + 2.0 ** radii[j]:
                report.append((i, j))
    order = _order(hs)
    pick = lambda seq: tuple(seq[i] for i in order)  # noqa: E731
    return ZeroSet(
        N=poly.N, zeros=pick(hs), w=pick(z), residuals=pick(resid), radii=pick(list(radii)),
        precision_bits=prec, converged=pick([bool(c) for c in conv]),
        iterations=it1 + it2, law=poly.law.descriptor(), multiplicity_report=tuple(report),
    )


# ---------------------------------------------------------------------------
# single zeros

@dataclass(frozen=True)
class NewtonResult:
    zero: complex
    residual: float
    steps: tuple


def _evaluator(source, N, prec=None):
    """Scalar ``h -> (Z, Z')`` from a table, a polynomial, or a law (double precision recursion)."""
    if isinstance(source, InterArrivalLaw):
        return lambda h: tuple(complex(v) for v in partition_recursive(source, N, h, derivative=True)), False
    return lambda h: partition_value_and_derivative(source, N, h, prec), True


def refine_zero_newton(source, N: int, seed, tol: float = 1e-14, max_steps: int = 200,
                       prec: int | None = None) -> NewtonResult:
    """Newton's method ``h <- h - Z/Z'`` from ``seed`` until the step is below ``tol``.

    ``source`` is a ``RenewalTable`` or ``PartitionPolynomial`` (multiprecision) or an
    ``InterArrivalLaw`` (double precision via the renewal equation, fit for ``N``
    in the thousands).
    """
    ev, multi = _evaluator(source, N, prec)
    h = to_mpc(seed, prec or 128) if multi else complex(seed)
    steps = []
    for _ in range(max_steps):
        val, der = ev(h)
        if der == 0:
            raise ConvergenceError("zero derivative in Newton step", partial=complex(h))
        step = val / der
        h = h - step
        steps.append(float(abs(step)))
        if not math.isfinite(steps[-1]) or steps[-1] > 1e6:
            raise ConvergenceError("Newton iteration diverged", partial=complex(h))
        if steps[-1] < tol:
            val, _ = ev(h)
            return NewtonResult(h if multi else complex(h), float(abs(val)), tuple(steps))
    raise ConvergenceError(f"Newton did not converge in {max_steps} steps", partial=complex(h))


# ---------------------------------------------------------------------------
# argument principle

class ContourTooClose(ArithmeticError):
    pass


def _winding_from_samples(vals, ders, dz_weights):
    return complex(np.sum(ders / vals * dz_weights)) / (2j * math.pi)


def _contour_scale(f):
    af = np.abs(f)
    if not np.all(af > 0):
        return 0.0, 1.0
    return float(af.min()), float(np.exp(np.mean(np.log(af))))


def _settle(compute, points, max_points, what):
    """Double the number of nodes until two successive winding values agree.

    A contour on which ``|f|`` dips below ``1e-10`` of its geometric mean is
    rejected as passing too close to a zero.
    """
    prev = None
    n = points
    while True:
        value, fmin, fscale = compute(n)
        if not fmin > 1e-10 * fscale:
            raise ContourTooClose(f"{what}: |f| drops to {fmin:.3e} on the contour")
        if prev is not None and abs(value - prev) < 1e-3:
            break
        if n >= max_points:
            break
        prev = value
        n *= 2
    k = round(value.real)
    if abs(value - k) > 0.1:
        raise ArithmeticError(f"{what}: winding value {value:.4f} is not close to an integer")
    return int(k)


def count_zeros_in_disk(evaluator, center, radius, quadrature_points: int = 4096,
                        max_points: int = 1 << 16) -> int:
    """Number of zeros of ``f`` in a disk: ``(1/2 pi i) \\oint f'/f`` by the trapezoidal rule.

    ``evaluator`` maps an array of points to ``(f, f')`` arrays.
    """
    c = complex(center)

    def compute(n):
        phi = 2 * np.pi * np.arange(n) / n
        e = np.exp(1j * phi)
        z = c + radius * e
        f, fp = evaluator(z)
        f, fp = np.asarray(f, dtype=complex), np.asarray(fp, dtype=complex)
        w = 1j * radius * e * (2 * np.pi / n)
        return _winding_from_samples(f, fp, w), *_contour_scale(f)

    return _settle(compute, quadrature_points, max_points, f"disk at {c} radius {radius}")


_GL_CACHE: dict = {}


def _gl(n):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


def count_zeros_in_rectangle(evaluator, x0, x1, y0, y1, quadrature_points: int = 1024,
                             max_points: int = 1 << 15) -> int:
    """Zero count inside ``(x0, x1) x (y0, y1)`` by panel Gauss-Legendre along the four sides."""
    corners = [complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1)]

    def compute(n):
        per_side = max(16, n // 4)
        panels = max(1, per_side // 16)
        x, w = _gl(16)
        zs, ws = [], []
        for a, b in zip(corners, corners[1:] + corners[:1]):
            edges = np.linspace(0, 1, panels + 1)
            for t0, t1 in zip(edges[:-1], edges[1:]):
                t = 0.5 * (t1 - t0) * x + 0.5 * (t1 + t0)
                zs.append(a + (b - a) * t)
                ws.append((b - a) * 0.5 * (t1 - t0) * w)
        z = np.concatenate(zs)
        wt = np.concatenate(ws)
        f, fp = evaluator(z)
        f, fp = np.asarray(f, dtype=complex), np.asarray(fp, dtype=complex)
        return _winding_from_samples(f, fp, wt), *_contour_scale(f)

    return _settle(compute, quadrature_points, max_points, f"rectangle ({x0},{x1})x({y0},{y1})")


def partition_evaluator(source, N: int, prec: int = 128):
    """Vectorized ``h -> (Z, Z')`` in complex128, for contour counts of ``Z_{N,.}``."""
    if isinstance(source, InterArrivalLaw):
        return lambda h: partition_recursive(source, N, np.asarray(h), derivative=True)
    if isinstance(source, RenewalTable):
        coeffs = source.column(N)
    else:
        coeffs = list(source.coeffs)

    def ev(h):
        h = np.asarray(h, dtype=complex)
        with context(prec):
            qs = [mpfr(c, prec) for c in coeffs]
            w = np.array([gmpy2.exp(mpc(v, precision=prec)) for v in h.ravel()], dtype=object)
            q, dq = _horner_many(qs, w)
            # Z = w Q(w), dZ/dh = w Q + w^2 Q'
            z = w * q
            dz = z + w * w * dq
            return (np.array([complex(v) for v in z]).reshape(h.shape),
                    np.array([complex(v) for v in dz]).reshape(h.shape))

    return ev


# ---------------------------------------------------------------------------
# empirical measure and distances

@dataclass(frozen=True)
class EmpiricalMeasure:
    atoms: np.ndarray

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.atoms.size, 1.0 / self.atoms.size)

    @property
    def mass(self) -> float:
        return float(np.sum(self.weights))

    def integrate(self, f) -> complex:
        return complex(np.sum(self.weights * f(self.atoms)))


def empirical_measure(zs: ZeroSet) -> EmpiricalMeasure:
    return EmpiricalMeasure(zs.as_complex())


def distance_stats(zs: ZeroSet, curve) -> dict:
    """Distances from each zero to the critical curve, plus side-of-curve statistic."""
    from .critcurve import classify_many, curve_projection

    pts = zs.as_complex()
    dist, theta = curve_projection(curve.alpha, pts, curve)
    _, gap = classify_many(curve.alpha, pts, tol=0)
    return {
        "max": float(dist.max()),
        "mean": float(dist.mean()),
        "distances": dist,
        "theta": theta,
        "fraction_delocalized_side": float(np.mean(gap < 0)),
    }
