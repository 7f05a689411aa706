import cmath
import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from gmpy2 import mpc
from hypothesis import given, strategies as st

from pinning_zeros.numerics import DomainError
from pinning_zeros.renewal import InterArrivalLaw, renewal_table
from pinning_zeros.scaling import (
    asymptotic_zero_seed, f0, f0_integral, f0_np, f0_prime, f0_prime_np, f0_sweep, f0_zeros,
    f1_f2_values, f1_np, printed_z2, scaled_partition, scaling_derivative_check,
    scaling_limit_check, zero_expansion,
)
from pinning_zeros.zeros import refine_zero_newton

HALF = InterArrivalLaw.special(Fraction(1, 2))
SQRT_PI = math.sqrt(math.pi)


def test_values_at_origin():
    assert complex(f0(0)) == pytest.approx(1 / SQRT_PI, rel=1e-15)
    assert complex(f0_prime(0)) == pytest.approx(1, rel=1e-15)


@given(st.floats(-4, 4), st.floats(-4, 4))
def test_double_precision_path_matches(x, y):
    z = complex(x, y)
    assert f0_np(z) == pytest.approx(complex(f0(z)), rel=1e-12, abs=1e-13)
    assert f0_prime_np(z) == pytest.approx(complex(f0_prime(z)), rel=1e-12, abs=1e-13)


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_closed_form_against_mpmath_erfc(x, y):
    z = mpmath.mpc(x, y)
    with mpmath.workdps(30):
        ref = z * mpmath.exp(z * z) * mpmath.erfc(-z) + 1 / mpmath.sqrt(mpmath.pi)
    assert complex(f0(complex(x, y))) == pytest.approx(complex(ref), rel=1e-13, abs=1e-15)


@pytest.mark.parametrize("z", [-1 + 1j, 1 + 1j, 0.5 - 2j])
def test_integral_representation(z):
    expected = complex(f0(z))
    if z.real > 0:
        expected -= 2 * z * cmath.exp(z * z)
    assert complex(f0_integral(z)) == pytest.approx(expected, rel=1e-13)


def test_integral_representation_domain():
    with pytest.raises(DomainError):
        f0_integral(2j)


def test_zero_table():
    zs = f0_zeros(7)
    assert len(zs) == 7
    assert complex(zs[0].zeta) == pytest.approx(1.225 + 2.547j, abs=5e-4)
    assert complex(zs[6].zeta) == pytest.approx(4.332 + 5.141j, abs=1e-3)
    for z in zs:
        assert z.certified and z.zeta.real > 0 and z.zeta.imag > 0
        d = f0_prime(z.zeta)
        assert abs(complex(f0(z.zeta))) < 1e-30 * abs(complex(d))
        assert complex(d) * complex(z.zeta) * SQRT_PI == pytest.approx(-1, rel=1e-12)
    gaps = [z.gap for z in zs]
    assert gaps == sorted(gaps, reverse=True)


def test_seed_formula_converges():
    # the seed error decays roughly like (log n)^2 / n^(3/2)
    err = [abs(complex(f0_zeros(n)[n - 1].zeta) - complex(asymptotic_zero_seed(n))) for n in (2, 7)]
    assert err[1] < err[0] < 0.02


def test_sweep_counts_every_zero():
    report = f0_sweep(7)
    assert report.complete and report.count >= 7
    assert report.count == len(report.located)


def test_first_correction_coefficients():
    z0 = complex(f0_zeros(1)[0].zeta)
    F1, F2 = f1_f2_values(z0)
    # F1(z0) = z0^3 / (2 sqrt(pi)) times ... checked against F0'(z0) z1 = -F1(z0)
    z0_, z1, z2 = zero_expansion(1)
    assert complex(z1) == pytest.approx(z0 * z0 / 2)
    assert complex(f0_prime(z0)) * complex(z1) == pytest.approx(-complex(F1), rel=1e-12)


def test_second_order_term_solves_expansion():
    # z2 = -(F0'' z1^2 / 2 + F1' z1 + F2) / F0' with F0'' = -2/sqrt(pi) and F1' = (z0^2 + 2)/sqrt(pi) at a zero
    z0, z1, z2 = (complex(v) for v in zero_expansion(1))
    F1, F2 = (complex(v) for v in f1_f2_values(z0))
    eps = 1e-5
    F1p = (complex(f1_f2_values(z0 + eps)[0]) - complex(f1_f2_values(z0 - eps)[0])) / (2 * eps)
    assert F1p == pytest.approx((z0 * z0 + 2) / SQRT_PI, rel=1e-8)
    F0p = complex(f0_prime(z0))
    F0pp = (complex(f0_prime(z0 + eps)) - complex(f0_prime(z0 - eps))) / (2 * eps)
    assert F0pp == pytest.approx(-2 / SQRT_PI, rel=1e-8)
    solved = -(0.5 * F0pp * z1 * z1 + F1p * z1 + F2) / F0p
    assert z2 == pytest.approx(solved, rel=1e-7)
    assert complex(printed_z2(mpc(z0))) != pytest.approx(z2, rel=0.1)


def test_expansion_predicts_closest_zero():
    z0, z1, z2 = (complex(v) for v in zero_expansion(1))
    errs = []
    for N in (256, 1024):
        seed = (z0 + z1 / math.sqrt(N)) / math.sqrt(N)
        h = refine_zero_newton(HALF, N, seed, tol=1e-15).zero
        errs.append(abs(math.sqrt(N) * h - (z0 + z1 / math.sqrt(N) + z2 / N)))
    assert 8 / 3 <= errs[0] / errs[1] <= 24


def test_scaling_limit_table_and_law_agree():
    grid = np.array([0, 1 + 1j, -2 + 0.5j])
    tab = renewal_table(HALF, 400)
    a = scaled_partition(tab, 400, grid)
    b = scaled_partition(HALF, 400, grid)
    assert np.allclose(a, b, rtol=1e-10)
    assert scaling_limit_check(HALF, 400, grid) == pytest.approx(np.max(np.abs(b - f0_np(grid))))


def test_scaling_limit_first_correction():
    # sqrt(N) Z - F0 ~ F1 / sqrt(N)
    grid = np.array([0.5 + 0.5j, -1 + 1j])
    N = 4000
    dev = scaled_partition(HALF, N, grid) - f0_np(grid)
    assert dev * math.sqrt(N) == pytest.approx(f1_np(grid), rel=0.05)


def test_derivative_scaling():
    d = scaling_derivative_check(HALF, 2000)
    assert abs(d) < 0.05
    with pytest.raises(DomainError):
        scaling_limit_check(InterArrivalLaw.special(Fraction(1, 3)), 100, [0])
