from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, stats

from pinning_zeros.numerics import DomainError
from pinning_zeros.renewal import (
    InterArrivalLaw, RenewalTable, closed_form_half, k_value, k_values, khat, normalization_deficit,
    renewal_table, stable_density_asymptotics, stable_density_half,
)

HALF = InterArrivalLaw.special(Fraction(1, 2))
alphas = st.fractions(min_value=Fraction(1, 20), max_value=Fraction(19, 20), max_denominator=20)


def test_special_family_first_values():
    assert k_value(HALF, 1) == 0.5
    assert k_value(HALF, 2) == 0.125
    assert float(k_value(InterArrivalLaw.special(Fraction(1, 3)), 1)) == pytest.approx(1 / 3)


@given(alphas)
def test_special_family_is_subprobability(a):
    law = InterArrivalLaw.special(a)
    vals = k_values(law, 200)
    assert all(v >= 0 for v in vals)
    assert float(vals[0]) == pytest.approx(float(a))
    assert sum(float(v) for v in vals) <= 1 + 1e-15


def test_tail_deficit_is_power_law():
    d1 = float(normalization_deficit(HALF, 1000))
    d2 = float(normalization_deficit(HALF, 4000))
    assert d1 / d2 == pytest.approx(2.0, rel=1e-2)  # ~ n^(-1/2)


def test_generating_function_matches_series():
    # khat(z) = 1 - (1 - z)^alpha
    z = 0.3 + 0.2j
    series = sum(complex(v) * z ** (n + 1) for n, v in enumerate(k_values(HALF, 400)))
    assert complex(khat(0.5, z)) == pytest.approx(series, abs=1e-15)


@pytest.mark.parametrize("make", [InterArrivalLaw.mixture_power, InterArrivalLaw.mixture_lacunary])
def test_mixture_laws(make):
    law = make(Fraction(1, 2))
    vals = [float(v) for v in k_values(law, 400)]
    assert all(v >= 0 for v in vals) and vals[0] > 0
    assert sum(vals) < 1
    assert law.tail_constant() == pytest.approx(HALF.tail_constant() / 2)


def test_lacunary_vanishes_off_squares_only_in_second_component():
    law = InterArrivalLaw.mixture_lacunary(Fraction(1, 2))
    a, b = float(k_value(law, 3)), float(k_value(HALF, 3))
    assert a == pytest.approx(b / 2)
    assert float(k_value(law, 4)) > float(k_value(HALF, 4)) / 2


def test_law_validation():
    with pytest.raises(ValueError):
        InterArrivalLaw.special(Fraction(3, 2))
    with pytest.raises(ValueError):
        InterArrivalLaw.custom([0, 1], 0.5)
    law = InterArrivalLaw.custom([Fraction(1, 2), Fraction(1, 4)], 0.5)
    assert InterArrivalLaw.from_descriptor(law.descriptor()) == law


def test_table_matches_closed_form_exactly():
    N = 40
    tab = renewal_table(HALF, N)
    for j in range(1, N + 1, 3):
        for n in range(j, N + 1, 4):
            exact = closed_form_half(j, n)
            got = tab.entry(j, n)
            assert abs(Fraction(*got.as_integer_ratio()) - exact) <= exact * Fraction(1, 2 ** 200)


def test_table_first_row_and_column_sum():
    tab = renewal_table(HALF, 30)
    assert [float(v) for v in tab.row(1)[:5]] == [float(k_value(HALF, n)) for n in range(1, 6)]
    # P(N in tau) for alpha = 1/2 equals C(2N, N) / 4^N
    from math import comb
    assert float(tab.column_sum(30)) == pytest.approx(comb(60, 30) / 4 ** 30, rel=1e-15)


def test_table_save_load_roundtrip(tmp_path):
    tab = renewal_table(InterArrivalLaw.mixture_power(Fraction(1, 2)), 25)
    tab.save(tmp_path / "t.json")
    back = RenewalTable.load(tmp_path / "t.json")
    assert back.N == 25 and back.law == tab.law
    assert all(back.entry(j, 25) == tab.entry(j, 25) for j in range(1, 26))


def test_table_rejects_empty():
    with pytest.raises(DomainError):
        renewal_table(HALF, 0)


def test_stable_density_half_is_levy():
    xs = np.linspace(0.01, 20, 50)
    ours = np.array([stable_density_half(x) for x in xs])
    assert np.allclose(ours, stats.levy.pdf(xs, scale=0.5), rtol=1e-12)
    total, _ = integrate.quad(stable_density_half, 0, np.inf)
    assert total == pytest.approx(1, abs=1e-8)


def test_stable_density_asymptotics():
    assert stable_density_asymptotics(0.5, 0.01, "zero") == pytest.approx(stable_density_half(0.01), rel=1e-12)
    big = stable_density_asymptotics(0.5, 1e6, "infinity")
    assert big == pytest.approx(stable_density_half(1e6), rel=1e-5)
