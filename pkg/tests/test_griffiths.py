import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import gammaln

from pinning_zeros.griffiths import (
    GriffithsRun, ZeroStore, content_key, equidistribution_ks, finite_difference_coefficient,
    griffiths_constants, griffiths_phase, griffiths_prediction, griffiths_sweep, polylog_leading,
    polylog_ratio, polylog_window_sum, taylor_coefficient, window, window_fraction,
)
from pinning_zeros.numerics import DomainError
from pinning_zeros.renewal import InterArrivalLaw

HALF = InterArrivalLaw.special(Fraction(1, 2))


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    store = ZeroStore(HALF, 24, tmp_path_factory.mktemp("zeros"))
    return GriffithsRun(0.5, n0=3, n_max=24, zero_store=store)


def test_window():
    centre, half = window(0.5, 100)
    assert centre == math.floor(50 / math.log(2))
    assert half == pytest.approx(10 * math.log(100))


def test_content_key():
    assert content_key(HALF, 10, 300) == content_key(InterArrivalLaw.special(Fraction(1, 2)), 10, 300)
    assert content_key(HALF, 10, 300) != content_key(HALF, 11, 300)
    assert content_key(HALF, 10, 300) != content_key(InterArrivalLaw.mixture_power(), 10, 300)


def test_store_writes_and_reloads(small_run, tmp_path):
    store = small_run.zero_store
    zs = store[10]
    assert store.path(10).exists()
    fresh = ZeroStore(HALF, 24, store.directory)
    assert fresh[10].zeros == zs.zeros
    with pytest.raises(KeyError):
        store[25]


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_taylor_coefficient_against_finite_differences(small_run, k):
    t = float(taylor_coefficient(small_run, k))
    fd = finite_difference_coefficient(small_run, k, step=1e-8)
    assert t == pytest.approx(fd, rel=1e-8)


def test_taylor_coefficient_direct_sum(small_run):
    k = 5
    total = 0
    for n in range(3, 25):
        hs = small_run.zero_store[n].as_complex()
        total += 0.5 ** n * np.sum(hs ** (-k))
    assert float(taylor_coefficient(small_run, k)) == pytest.approx(-(total / k).real, rel=1e-12)
    assert small_run.reality[k] < -64


def test_insufficient_depth_is_an_error(small_run):
    with pytest.raises(DomainError, match="needs zero sets up to"):
        taylor_coefficient(small_run, 60)


def test_run_validation():
    with pytest.raises(DomainError):
        GriffithsRun(1.5)
    with pytest.raises(DomainError):
        GriffithsRun(0.5, n0=1)


def test_constants_at_half():
    c = griffiths_constants(0.5)
    assert round(c.a, 5) == 1.12247
    assert round(c.b1, 5) == 1.27356
    assert c.b == pytest.approx(math.sqrt(2 * math.log(2)) * c.b1)
    assert c.b != 0
    # b2 is the second-order coefficient of arg(z0 + z1 e + z2 e^2)
    z0, z1, z2 = c.z0, c.z1, c.z2
    assert c.b2 == pytest.approx((z2 / z0 - z1 * z1 / (2 * z0 * z0)).imag, rel=1e-12)
    eps = 1e-4
    arg = lambda e: np.angle(z0 + z1 * e + z2 * e * e)  # noqa: E731
    assert (arg(eps) + arg(-eps) - 2 * arg(0)) / (2 * eps * eps) == pytest.approx(c.b2, rel=1e-5)
    assert c.C2 == pytest.approx(1 / (abs(z0) * math.sqrt(math.log(2))))
    assert set(c.to_json()) >= {"a", "b", "c", "d", "A", "B", "C", "b1", "b2", "C1", "C2", "z0"}


def _model_amplitude_error(k, printed):
    # complex closest-zero sum with h = (z0 + z1/sqrt n + z2/n)/sqrt n, divided by the prediction
    c = griffiths_constants(0.5, printed=printed)
    n = np.arange(3, 4 * k + 200, dtype=float)
    h = (c.z0 + c.z1 / np.sqrt(n) + c.z2 / n) / np.sqrt(n)
    ref = (gammaln(k / 2 + 1) + k * math.log(c.C2) + c.A * math.sqrt(k)
           - 1j * float(griffiths_phase(c, k)))
    s = -2 * np.sum(np.exp(n * math.log(0.5) - k * np.log(h) - ref))
    return abs(s / c.C1 - 1)


def test_constants_match_model_sum_with_sqrt_k_error():
    errs = [_model_amplitude_error(k, printed=False) for k in (400, 1600, 6400)]
    assert errs[2] < 0.03
    assert errs[0] / errs[1] == pytest.approx(2, rel=0.1)
    assert errs[1] / errs[2] == pytest.approx(2, rel=0.1)
    # the Gaussian-window constants stay a fixed factor away
    assert _model_amplitude_error(6400, printed=True) > 0.5


def test_prediction_shape():
    c = griffiths_constants(0.5)
    k = 50
    pred = griffiths_prediction(c, k)
    mag = abs(c.C1) * c.C2 ** k * math.exp(c.A * math.sqrt(k)) * math.gamma(k / 2 + 1)
    assert abs(pred) == pytest.approx(mag * abs(math.cos(float(griffiths_phase(c, k)))), rel=1e-12)
    with pytest.raises(DomainError):
        griffiths_prediction(c, 0)


def test_closest_pairs_dominate(small_run):
    # at small k the closest zero of each n already carries most of t_k
    full = float(taylor_coefficient(small_run, 4))
    closest = float(taylor_coefficient(small_run, 4, closest_only=True))
    assert abs(closest - full) < abs(full)


@pytest.mark.parametrize("beta,p", [(10, 0.3), (40, 0.6), (100.5, 0.5)])
def test_polylog_leading_term(beta, p):
    with mpmath.workdps(50):
        li = mpmath.polylog(-beta, p)
    assert float(li / mpmath.mpf(str(polylog_leading(beta, p)))) - 1 == pytest.approx(polylog_ratio(beta, p), abs=1e-12)
    assert abs(polylog_ratio(beta, p)) <= math.log(beta) / math.sqrt(beta)


@pytest.mark.parametrize("beta", [100, 400])
def test_window_holds_almost_everything(beta):
    assert 0 <= window_fraction(beta, 0.3) <= math.exp(-(math.log(beta) ** 2) * math.log(0.3) ** 2 / 8)


def test_modulated_window_sum():
    total, pred = polylog_window_sum(400, 0.4, "exp-cos", 1.0, 2.0)
    assert abs(float(total / pred) - 1) < math.log(400) / math.sqrt(400)


@given(st.floats(0.1, 6.0), st.floats(0.1, 3.0), st.floats(-3, 3))
def test_equidistribution_with_sqrt_term(a, b, c):
    assert equidistribution_ks(a, b, c, 20000) < 0.05


def test_equidistribution_rejects_periodic_sequences():
    with pytest.raises(DomainError):
        equidistribution_ks(math.pi / 2, 0, 0, 100)
    assert equidistribution_ks(1.0, 0, 0, 5000) < 0.02


def test_sweep_rows(small_run):
    rows = griffiths_sweep(small_run, [2, 3])
    assert [r.k for r in rows] == [2, 3]
    for r in rows:
        assert r.ratio == pytest.approx(r.k * r.t_k / r.prediction)
