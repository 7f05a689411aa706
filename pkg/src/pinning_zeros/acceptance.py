"""End-to-end acceptance checks, one function per criterion.

Each check returns a ``CriterionResult``; ``run_all`` collects them.  The
heavy ones reuse the on-disk zero store, so a second run is much faster.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

import gmpy2
import numpy as np
from scipy.stats import kstest

from .critcurve import (
    CurveModel, Region, classify, classify_algebraic, classify_many, curve_derivative, curve_point,
    curve_xy, strip_width,
)
from .griffiths import (
    GriffithsRun, ZeroStore, griffiths_constants, griffiths_sweep, polylog_ratio, window_fraction,
)
from .numerics import PrecisionPolicy, context, to_mpc
from .partition import (
    asymptotic_deloc, asymptotic_loc, partition_polynomial, partition_recursive, partition_value,
)
from .renewal import InterArrivalLaw, renewal_table
from .scaling import _f0_zero_table, f0_zeros, f1_np, scaling_limit_check, zero_expansion
from .zeros import distance_stats, find_all_zeros, refine_zero_newton

HALF = InterArrivalLaw.special(Fraction(1, 2))

REFERENCE_F0_ZEROS = [1.225 + 2.547j, 2.026 + 3.162j, 2.629 + 3.656j, 3.132 + 4.083j,
               3.573 + 4.466j, 3.969 + 4.817j, 4.332 + 5.141j]
REFERENCE_SEED_GAPS = [0.017, 0.015, 0.013, 0.011, 0.010, 0.009, 0.008]


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] criterion {self.number:2d}: {self.title} ({self.seconds:.1f} s)"

    def to_json(self) -> dict:
        return {"number": self.number, "title": self.title, "passed": bool(self.passed),
                "detail": _plain(self.detail)}


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, (float, np.floating)):
        return float(x)
    return x


class Context:
    """Shared state between checks: the zero store and zero sets already loaded."""

    def __init__(self, cache_dir=None):
        self.cache_dir = cache_dir
        self._stores: dict = {}

    def store(self, n_max: int) -> ZeroStore:
        for m, st in self._stores.items():
            if m >= n_max:
                return st
        st = ZeroStore(HALF, n_max, self.cache_dir)
        self._stores[n_max] = st
        return st

    def zero_set(self, n: int):
        return self.store(max(n, 300))[n]


# ---------------------------------------------------------------------------

def check_f0_zero_table(ctx: Context) -> CriterionResult:
    _f0_zero_table.cache_clear()
    t0 = time.perf_counter()
    zs = f0_zeros(7)
    elapsed = time.perf_counter() - t0
    zero_err = [max(abs(complex(z.zeta).real - t.real), abs(complex(z.zeta).imag - t.imag))
                for z, t in zip(zs, REFERENCE_F0_ZEROS)]
    gap_err = [abs(z.gap - g) for z, g in zip(zs, REFERENCE_SEED_GAPS)]
    ok = (max(zero_err) <= 1e-3 and max(gap_err) <= 1e-3 and elapsed < 10
          and all(z.certified for z in zs))
    return CriterionResult(1, "first seven F0 zeros and seed gaps to 0.001, under 10 s", ok, {
        "zeros": [complex(z.zeta) for z in zs], "gaps": [z.gap for z in zs],
        "max_zero_error": max(zero_err), "max_gap_error": max(gap_err), "runtime_s": elapsed})


def check_first_zeros(ctx: Context) -> CriterionResult:
    zs = f0_zeros(2)
    d1 = abs(complex(zs[0].zeta) - (1.225 + 2.547j))
    d2 = abs(complex(zs[1].zeta) - (2.026 + 3.162j))
    ok = d1 <= 5e-4 and d2 <= 5e-4 and zs[0].certified and zs[1].certified
    return CriterionResult(2, "first two scaling zeros within 0.0005, disk-certified", ok,
                           {"distance_1": d1, "distance_2": d2})


def check_degree_500(ctx: Context) -> CriterionResult:
    t0 = time.perf_counter()
    table = renewal_table(HALF, 500)
    poly = partition_polynomial(table, 500)
    zs = find_all_zeros(poly)
    elapsed = time.perf_counter() - t0
    n_ok = len(zs) == 499
    # exact conjugation: every zero with Im > 0 has its bitwise conjugate in the set
    keys = {(gmpy2.to_binary(w.real), gmpy2.to_binary(w.imag)) for w in zs.w}
    with context(zs.precision_bits):
        # a root on the negative w-axis (Im h = pi) is its own conjugate
        paired = all(w.imag == 0 or (gmpy2.to_binary(w.real), gmpy2.to_binary(-w.imag)) in keys for w in zs.w)
    # real h means w on the positive real axis
    no_real = not any(w.imag == 0 and w.real > 0 for w in zs.w)
    certified = zs.all_converged and max(zs.residuals) < -64 and not zs.multiplicity_report
    rng = np.random.default_rng(500)
    rel = []
    prec = zs.precision_bits + 64
    with context(prec):
        for _ in range(10):
            h = to_mpc(complex(rng.uniform(-1, 1), rng.uniform(-math.pi, math.pi)), prec)
            w = gmpy2.exp(h)
            prod = poly.leading * w
            for r in zs.w:
                prod *= w - r
            z = partition_value(poly, 500, h, prec)
            rel.append(float(abs(prod / z - 1)))
    ok = n_ok and paired and no_real and certified and max(rel) <= 1e-20 and elapsed <= 1800
    return CriterionResult(3, "N=500: 499 certified zeros, exact pairs, none real, product identity", ok, {
        "count": len(zs), "paired": paired, "no_real": no_real, "max_residual_log2": max(zs.residuals),
        "product_identity_max_rel": max(rel), "runtime_s": elapsed})


def check_distance_trend(ctx: Context) -> CriterionResult:
    model = CurveModel(0.5, 4096)
    dmax = {}
    for n in (125, 250, 500):
        zs = ctx.zero_set(n) if n <= 300 else ctx.store(500)[n]
        dmax[n] = distance_stats(zs, model)["max"]
    ok = dmax[125] > dmax[250] > dmax[500]
    return CriterionResult(4, "max zero-to-curve distance decreases over N = 125, 250, 500", ok,
                           {"max_distance": dmax})


def _expansion_error(N, z0, z1, z2):
    h = refine_zero_newton(HALF, N, z0 / math.sqrt(N) + z1 / N + z2 / N ** 1.5, tol=1e-15).zero
    return abs(math.sqrt(N) * h - (z0 + z1 / math.sqrt(N) + z2 / N))


def check_closest_zero(ctx: Context) -> CriterionResult:
    z0, z1, z2 = (complex(v) for v in zero_expansion(1))
    e256 = _expansion_error(256, z0, z1, z2)
    e1024 = _expansion_error(1024, z0, z1, z2)
    ratio = e256 / e1024
    return CriterionResult(5, "closest-zero expansion error ratio N=256/1024 in [8/3, 24]",
                           8 / 3 <= ratio <= 24, {"error_256": e256, "error_1024": e1024, "ratio": ratio})


def check_delocalized(ctx: Context) -> CriterionResult:
    hs = [-1 + 0j, -1 + 1.5j, 0.2 + 2.5j]
    labels = [classify(0.5, h).region.value for h in hs]
    err = {}
    for N in (1000, 4000):
        z = partition_recursive(HALF, N, np.array(hs))
        err[N] = [abs(complex(zv) / complex(asymptotic_deloc(HALF, N, h)) - 1) for zv, h in zip(z, hs)]
    ratios = [a / b for a, b in zip(err[1000], err[4000])]
    ok = (all(lab == Region.DELOCALIZED.value for lab in labels)
          and max(err[4000]) <= 0.02 and all(1 <= r <= 4 for r in ratios))
    return CriterionResult(6, "delocalized asymptotics within 2% at N=4000, error halving from N=1000", ok,
                           {"regions": labels, "error_1000": err[1000], "error_4000": err[4000],
                            "ratios": ratios})


def check_localized(ctx: Context) -> CriterionResult:
    table = renewal_table(HALF, 200)
    z = partition_value(table, 200, 1)
    a = asymptotic_loc(Fraction(1, 2), 200, 1)
    with context(256):
        err = float(abs(z / a - 1))
    return CriterionResult(7, "localized asymptotics at h=1, N=200 within 1e-4", err <= 1e-4, {"error": err})


def check_scaling(ctx: Context) -> CriterionResult:
    grid = np.array([complex(x, y) for x in (-2, 0, 2) for y in (-2, 0, 2)])
    budget = 1.3 * float(np.max(np.abs(f1_np(grid)))) / 100
    dev = {N: scaling_limit_check(HALF, N, grid) for N in (2500, 10000)}
    ratio = dev[2500] / dev[10000]
    ok = dev[10000] <= budget and 1 <= ratio <= 4
    return CriterionResult(8, "scaling limit on a 3x3 grid: N=1e4 within first-correction budget", ok,
                           {"deviation": dev, "budget": budget, "ratio_2500_10000": ratio})


def check_griffiths(ctx: Context, k_range=range(40, 121)) -> CriterionResult:
    consts = griffiths_constants(0.5)
    run = GriffithsRun(0.5, n0=3, n_max=300, zero_store=ctx.store(300))
    rows = griffiths_sweep(run, k_range, consts)
    kept = [r for r in rows if abs(r.cos_value) >= 0.2]
    inside = [r for r in kept if 0.8 <= r.ratio <= 1.25]
    frac = len(inside) / len(kept) if kept else 0.0
    printed_rows = griffiths_sweep(run, k_range, griffiths_constants(0.5, printed=True))
    printed_kept = [r for r in printed_rows if abs(r.cos_value) >= 0.2]
    printed_frac = (sum(0.8 <= r.ratio <= 1.25 for r in printed_kept) / len(printed_kept)
                    if printed_kept else 0.0)
    const_ok = round(consts.a, 5) == 1.12247 and round(consts.b1, 5) == 1.27356
    reality = max(run.reality.values())
    ok = frac >= 0.95 and const_ok and reality < -64
    return CriterionResult(9, "Griffiths ratio k t_k / prediction in [0.8, 1.25] for 95% of k in [40, 120]",
                           ok, {"fraction_in_band": frac, "kept": len(kept),
                                "fraction_in_band_printed_constants": printed_frac, "a": consts.a, "b1": consts.b1,
                                "max_reality_log2": reality,
                                "rows": [[r.k, r.ratio, r.cos_value] for r in rows]})


def check_polylog(ctx: Context) -> CriterionResult:
    rows = []
    ok = True
    for beta in (100, 200, 400):
        for p in (0.3, 0.6):
            r = abs(polylog_ratio(beta, p))
            bound = math.log(beta) / math.sqrt(beta)
            w = window_fraction(beta, p)
            wbound = math.exp(-(math.log(beta) * math.log(p)) ** 2 / 8)
            ok &= r <= bound and 0 <= w <= wbound
            rows.append({"beta": beta, "p": p, "ratio_error": r, "bound": bound,
                         "outside_window": w, "window_bound": wbound})
    return CriterionResult(10, "polylog leading term and saddle-window truncation", ok, {"rows": rows})


def printed_arclength_cdf(s, half_length):
    """CDF of ``sqrt(2)(1 - e^{-2s})`` on ``[0, half_length]``, normalized."""
    g = lambda x: x - (1 - np.exp(-2 * x)) / 2  # noqa: E731
    return np.clip(g(np.asarray(s)) / g(half_length), 0, 1)


def arclength_ks(zs, model: CurveModel) -> tuple:
    """KS distances of the upper-half zero arclengths to the printed law and to the uniform-in-theta law."""
    st = distance_stats(zs, model)
    upper = np.array([complex(h).imag > 0 for h in zs.zeros])
    theta = st["theta"][upper]
    s = np.abs(model.s_of_theta(theta))
    ks_printed = kstest(s, lambda x: printed_arclength_cdf(x, model.half_length)).statistic
    ks_exact = kstest(theta, lambda t: np.clip(np.asarray(t) / np.pi, 0, 1)).statistic
    return float(ks_printed), float(ks_exact)


def check_density(ctx: Context) -> CriterionResult:
    model = CurveModel(0.5, 4096)
    ks200 = arclength_ks(ctx.zero_set(200), model)
    ks500 = arclength_ks(ctx.store(500)[500], model)
    ok = ks500[0] < ks200[0] and ks500[0] < 0.05
    return CriterionResult(11, "arclength law of zeros at N=500 vs sqrt(2)(1-e^{-2s}): KS < 0.05 and below N=200",
                           ok, {"ks_printed": {200: ks200[0], 500: ks500[0]},
                                "ks_uniform_theta": {200: ks200[1], 500: ks500[1]}})


def check_curve(ctx: Context) -> CriterionResult:
    detail = {}
    ok = True
    theta = np.linspace(0, 2 * np.pi, 1000, endpoint=False)[1:]
    for a in (0.2, 0.5, 0.8):
        h = curve_point(a, theta)
        x, y = curve_xy(a, theta)
        diff = h - (x + 1j * y)
        # the curve lives on the cylinder: imaginary parts agree modulo 2 pi
        dim = np.mod(diff.imag + np.pi, 2 * np.pi) - np.pi
        err = float(np.max(np.hypot(diff.real, dim)))
        th_up = theta[theta <= np.pi]
        xu, yu = curve_xy(a, th_up)
        d = curve_derivative(a, th_up[1:-1])
        mono = bool(np.all(np.diff(xu) > 0) and np.all(np.diff(yu) > 0)
                    and np.all(d.real > 0) and np.all(d.imag > 0))
        strip = bool(np.all((x >= -1e-15) & (x <= strip_width(a) + 1e-12)))
        rng = np.random.default_rng(12)
        pts = rng.uniform(-3, 3, 10_000) + 1j * rng.uniform(-math.pi, math.pi, 10_000)
        labels, _ = classify_many(a, pts, tol=0)
        alg = classify_algebraic(a, pts)
        lab_loc = np.array([lab is Region.LOCALIZED for lab in labels])
        disagree = int(np.sum(lab_loc != alg))
        detail[a] = {"formula_error": err, "monotone": mono, "strip": strip, "disagreements": disagree}
        ok &= err <= 1e-12 and mono and strip and disagree == 0
    return CriterionResult(12, "curve formulas, strip bounds, monotonicity, classification consistency",
                           ok, detail)


CHECKS = {
    1: check_f0_zero_table, 2: check_first_zeros, 3: check_degree_500, 4: check_distance_trend,
    5: check_closest_zero, 6: check_delocalized, 7: check_localized, 8: check_scaling,
    9: check_griffiths, 10: check_polylog, 11: check_density, 12: check_curve,
}


def run_check(number: int, ctx: Context | None = None) -> CriterionResult:
    ctx = ctx or Context()
    t0 = time.perf_counter()
    try:
        res = CHECKS[number](ctx)
    except Exception as exc:  # a crash is a failed criterion, reported with its message
        res = CriterionResult(number, CHECKS[number].__name__, False, {"error": repr(exc)})
    res.seconds = time.perf_counter() - t0
    return res


def run_all(numbers=None, ctx: Context | None = None, echo=None) -> list:
    ctx = ctx or Context()
    out = []
    for n in numbers or sorted(CHECKS):
        res = run_check(n, ctx)
        if echo:
            echo(res.line())
        out.append(res)
    return out
