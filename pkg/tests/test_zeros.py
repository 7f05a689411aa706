import math
from fractions import Fraction

import gmpy2
import mpmath
import numpy as np
import pytest

from pinning_zeros.critcurve import CurveModel
from pinning_zeros.numerics import DomainError
from pinning_zeros.partition import partition_polynomial, partition_value
from pinning_zeros.renewal import InterArrivalLaw, renewal_table
from pinning_zeros.zeros import (
    ContourTooClose, ZeroSet, count_zeros_in_disk, count_zeros_in_rectangle, distance_stats,
    empirical_measure, find_all_zeros, partition_evaluator, refine_zero_newton,
)

HALF = InterArrivalLaw.special(Fraction(1, 2))
TABLE = renewal_table(HALF, 60)


@pytest.fixture(scope="module")
def zs40():
    return find_all_zeros(partition_polynomial(TABLE, 40))


def test_degree_two_single_zero():
    zs = find_all_zeros(partition_polynomial(TABLE, 2))
    assert len(zs) == 1
    assert complex(zs.zeros[0]) == pytest.approx(complex(-math.log(2), math.pi))


def test_matches_mpmath_polyroots(zs40):
    poly = partition_polynomial(TABLE, 40)
    with mpmath.workdps(60):
        coeffs = [mpmath.mpf(int(c.as_integer_ratio()[0])) / c.as_integer_ratio()[1] for c in reversed(poly.coeffs)]
        ref = sorted((complex(r) for r in mpmath.polyroots(coeffs, maxsteps=200, extraprec=200)), key=lambda w: (abs(w), w.imag))
    ours = sorted(np.exp(zs40.as_complex()), key=lambda w: (abs(w), w.imag))
    assert len(ours) == len(ref) == 39
    for a in ours:
        assert min(abs(a - b) for b in ref) < 1e-12 * abs(a)


def test_invariants(zs40):
    h = zs40.as_complex()
    assert zs40.all_converged and not zs40.multiplicity_report
    assert np.all((h.imag > -math.pi) & (h.imag <= math.pi))
    assert np.all(np.abs(h.imag) > 0)  # no real zeros
    assert max(zs40.residuals) < -zs40.precision_bits + 8
    # odd count: exactly one zero sits on Im h = pi, its own conjugate on the cylinder
    assert np.sum(np.isclose(h.imag, math.pi)) == 1


def test_exact_conjugate_pairs_bitwise(zs40):
    with gmpy2.context(precision=zs40.precision_bits):
        ups = {(z.real, z.imag) for z in zs40.zeros if 0 < z.imag < 3}
        downs = {(z.real, -z.imag) for z in zs40.zeros if -3 < z.imag < 0}
    assert len(ups) >= 15
    assert ups == downs


def test_product_identity(zs40):
    # Z_{N,h} = K(1)^N e^h prod_j (e^h - w_j)
    h = 0.3 - 0.8j
    prec = zs40.precision_bits
    with gmpy2.context(precision=prec):
        w = gmpy2.exp(gmpy2.mpc(h))
        prod = w * gmpy2.mpfr(0.5) ** 40
        for wj in zs40.w:
            prod *= w - wj
        direct = partition_value(TABLE, 40, h, prec)
        assert abs(prod / direct - 1) < gmpy2.mpfr(2) ** (-prec // 2)


def test_save_load_roundtrip(tmp_path, zs40):
    path = tmp_path / "z.json"
    zs40.save(path)
    back = ZeroSet.load(path)
    assert back.zeros == zs40.zeros and back.N == 40
    assert back.zeros[0].precision == zs40.zeros[0].precision


def test_newton_refinement_table_and_law(zs40):
    seed = complex(zs40.zeros[0]) + 1e-3
    res = refine_zero_newton(TABLE, 40, seed, prec=256)
    assert complex(res.zero) == pytest.approx(complex(zs40.zeros[0]), abs=1e-14)
    res2 = refine_zero_newton(HALF, 40, seed, tol=1e-13)
    assert res2.zero == pytest.approx(complex(zs40.zeros[0]), abs=1e-11)


def test_argument_principle_counts(zs40):
    h = zs40.as_complex()
    ev = partition_evaluator(TABLE, 40)
    center, radius = h[0], 0.6 * min(abs(h[0] - x) for x in h[1:] if x != h[0].conjugate())
    assert count_zeros_in_disk(ev, center, radius) == 1
    inside = np.sum((h.real > -0.5) & (h.real < 0.5) & (h.imag > 0.05) & (h.imag < 2.0))
    assert count_zeros_in_rectangle(ev, -0.5, 0.5, 0.05, 2.0) == inside
    law_ev = partition_evaluator(HALF, 40)
    assert count_zeros_in_rectangle(law_ev, -0.5, 0.5, 0.05, 2.0) == inside


def test_contour_through_zero_is_refused(zs40):
    h0 = complex(zs40.zeros[0])
    ev = partition_evaluator(TABLE, 40)
    with pytest.raises(ContourTooClose):
        count_zeros_in_disk(ev, h0 - 0.1, 0.1, quadrature_points=4, max_points=4)


def test_empirical_measure_and_distances(zs40):
    mu = empirical_measure(zs40)
    assert mu.mass == pytest.approx(1)
    assert mu.integrate(lambda z: np.sin(z.imag)) == pytest.approx(0, abs=1e-14)
    st = distance_stats(zs40, CurveModel(0.5, 2048))
    assert 0 < st["mean"] <= st["max"] < 0.5
    assert st["fraction_delocalized_side"] == 1.0


def test_degree_too_small():
    with pytest.raises(DomainError):
        find_all_zeros(partition_polynomial(TABLE, 1))


def test_mixture_law_zeros():
    law = InterArrivalLaw.mixture_lacunary(Fraction(1, 2))
    zs = find_all_zeros(partition_polynomial(renewal_table(law, 30), 30))
    assert len(zs) == 29 and zs.all_converged
    assert max(zs.residuals) < -zs.precision_bits + 8
    tab = renewal_table(law, 30)
    scale = abs(complex(partition_value(tab, 30, abs(zs.zeros[0].real))))
    assert abs(complex(partition_value(tab, 30, zs.zeros[0], zs.precision_bits))) < 1e-60 * scale
