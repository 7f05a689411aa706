import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from pinning_zeros.critcurve import (
    CurveModel, Region, arclength, classify, classify_algebraic, classify_many, curve_derivative,
    curve_distance, curve_point, curve_side, curve_xy, free_energy, free_energy_from_measure,
    free_energy_general, mu_density, mu_density_half_s, mu_density_half_x, physical_free_energy,
    pole_location, strip_width, total_length,
)
from pinning_zeros.numerics import DomainError
from pinning_zeros.renewal import InterArrivalLaw

alphas = st.floats(0.05, 0.95)
thetas = st.floats(1e-6, math.pi - 1e-6)


def test_trivial_points():
    assert curve_point(0.5, 0.0) == 0
    assert curve_point(0.5, math.pi) == pytest.approx(complex(strip_width(0.5), math.pi))
    assert strip_width(0.5) == pytest.approx(-math.log(math.sqrt(2) - 1))


@given(alphas, thetas)
def test_closed_form_matches_log(a, th):
    h = curve_point(a, th)
    f1, f2 = curve_xy(a, th)
    assert f1 == pytest.approx(h.real, abs=1e-12)
    assert (f2 - h.imag) % (2 * math.pi) == pytest.approx(0, abs=1e-12) or \
        abs((f2 - h.imag) % (2 * math.pi) - 2 * math.pi) < 1e-12


@given(alphas, st.floats(1e-3, math.pi))
def test_conjugation_symmetry(a, th):
    # compare in w = e^h: the cylinder identifies Im h = pi with -pi
    w1, w2 = np.exp(curve_point(a, 2 * math.pi - th)), np.exp(curve_point(a, th)).conjugate()
    assert w1 == pytest.approx(w2, abs=1e-11)


@given(alphas)
def test_strip_and_monotonicity(a):
    th = np.linspace(1e-4, math.pi, 400)
    f1, f2 = curve_xy(a, th)
    assert np.all(np.diff(f1) > 0) and np.all(np.diff(f2) > 0)
    assert np.all((f1 > 0) & (f1 <= strip_width(a) + 1e-12))


def test_curve_derivative_finite_difference():
    th, eps = 1.3, 1e-6
    fd = (curve_point(0.4, th + eps) - curve_point(0.4, th - eps)) / (2 * eps)
    assert complex(curve_derivative(0.4, th)) == pytest.approx(fd, rel=1e-8)


def test_arclength_quadrature():
    a = 0.5
    val, _ = integrate.quad(lambda t: abs(complex(curve_derivative(a, t))), 1e-12, math.pi, limit=400)
    assert total_length(a) == pytest.approx(val, rel=1e-7)
    model = CurveModel(a, 4096)
    assert model.half_length == pytest.approx(total_length(a), rel=1e-10)
    assert model.s_of_theta(1.0) == pytest.approx(arclength(a, 1.0), rel=1e-10)
    assert model.s_of_theta(2 * math.pi - 1.0) == pytest.approx(-arclength(a, 1.0), rel=1e-10)
    with pytest.raises(DomainError):
        arclength(a, 4.0)


def test_classification_examples():
    assert classify(0.5, -1).region is Region.DELOCALIZED
    assert classify(0.5, 1).region is Region.LOCALIZED
    assert classify(0.5, 0.2 + 2.5j).region is Region.DELOCALIZED
    assert classify(0.5, curve_point(0.5, 1.0)).region is Region.CRITICAL
    assert classify(0.5, 0).region is Region.CRITICAL


@given(alphas, st.floats(-1, 3), st.floats(-math.pi, math.pi))
def test_classify_agrees_with_algebraic_test(a, x, y):
    h = complex(x, y)
    lab = classify(a, h, tol=1e-7)
    if lab.region is not Region.CRITICAL:
        assert (lab.region is Region.LOCALIZED) == bool(classify_algebraic(a, h))


def test_classify_many_vectorized():
    pts = np.array([1, -1, 0.2 + 2.5j, 3 + 3j])
    labels, gap = classify_many(0.5, pts)
    assert [lab.value for lab in labels] == ["localized", "delocalized", "delocalized", "localized"]
    assert list(curve_side(0.5, pts)) == [1, -1, -1, 1]


def test_pole_and_free_energy_at_real_h():
    # for real h > 0 the free energy solves khat(e^{-F}) = e^{-h}
    F = float(free_energy(0.5, 1.0).real)
    assert 1 - (1 - math.exp(-F)) ** 0.5 == pytest.approx(math.exp(-1.0))
    assert physical_free_energy(0.5, 1.0) == pytest.approx(F)
    assert physical_free_energy(0.5, -1.0) == 0.0
    general, width = free_energy_general(InterArrivalLaw.special(Fraction(1, 2)), 1.0)
    assert general == pytest.approx(F, abs=width + 1e-10)
    assert abs(complex(pole_location(0.5, curve_point(0.5, 1.0)))) == pytest.approx(1, abs=1e-12)


def test_free_energy_vanishes_on_curve():
    for th in (0.3, 1.5, 2.9):
        assert float(free_energy(0.5, curve_point(0.5, th)).real) == pytest.approx(0, abs=1e-12)


@pytest.mark.parametrize("a", [0.3, 0.5, 0.7])
def test_density_is_jump_of_normal_derivative(a):
    # (1/2pi) |d Re F / dn| on the localized side, doubled for the conjugate half
    for th in (0.5, 1.5, 2.5):
        h = curve_point(a, th)
        t = complex(curve_derivative(a, th))
        normal = -1j * t / abs(t)  # points into the localized side
        if classify(a, h + 1e-3 * normal).region is not Region.LOCALIZED:
            normal = -normal
        eps = 1e-6
        slope = float(free_energy(a, h + eps * normal).real) / eps
        assert float(mu_density(a, th)) * math.pi == pytest.approx(abs(slope), rel=1e-4)


@pytest.mark.parametrize("a", [0.3, 0.5, 0.8])
def test_density_is_a_probability_in_arclength(a):
    model = CurveModel(a, 4096)
    total, _ = integrate.quad(lambda s: float(model.density_in_s(s)), 0, model.half_length, limit=200)
    assert total == pytest.approx(1, rel=1e-6)


def test_half_closed_forms():
    # x-form is pi times the density per unit real part
    th = np.linspace(0.2, 2.8, 7)
    x = curve_point(0.5, th).real
    dxdth = curve_derivative(0.5, th).real
    assert np.allclose(mu_density_half_x(x), np.pi * (1 / np.pi) / dxdth, rtol=1e-9)
    # the arclength form differs from the exact density
    model = CurveModel(0.5, 4096)
    s = np.linspace(0.1, model.half_length, 5)
    printed = mu_density_half_s(s) / integrate.quad(mu_density_half_s, 0, model.half_length)[0]
    assert np.max(np.abs(printed - model.density_in_s(s))) > 0.01
    with pytest.raises(DomainError):
        mu_density_half_x(2.0)


def test_free_energy_from_limit_measure():
    # potential of the limit law equals the physical free energy off the curve
    for h in (1.0, 0.8 + 0.5j, -1.0, 0.2 + 2.5j):
        assert free_energy_from_measure(0.5, h) == pytest.approx(physical_free_energy(0.5, h), abs=1e-6)


def test_distance_to_curve():
    th = np.array([0.5, 2.0])
    t = curve_derivative(0.5, th)
    pts = curve_point(0.5, th) + np.array([0.01, 0.02]) * 1j * t / np.abs(t)
    assert curve_distance(0.5, pts) == pytest.approx([0.01, 0.02], rel=1e-3)
    assert curve_distance(0.5, [curve_point(0.5, 1.2).conjugate()])[0] < 1e-7
