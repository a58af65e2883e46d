import math

import pytest
from hypothesis import given, strategies as st
from scipy.optimize import brentq

from slicer.queueing import (
    PRODUCT_FORM, STANDARD, TrafficModel, UnstableQueueError, analytic_delay, md1_mean_delay, min_service_rate,
    required_capacity,
)
from slicer.scenario import EMBB, URLLC, SliceSpec


def pk_sojourn(lam, mu):
    """Pollaczek-Khinchine mean sojourn time with a constant service time 1/mu."""
    es, es2 = 1 / mu, 1 / mu ** 2
    return es + lam * es2 / (2 * (1 - lam * es))


def test_md1_empty_queue():
    assert md1_mean_delay(0.0, 500.0) == 1 / 500.0


def test_md1_hand_value():
    assert md1_mean_delay(1000.0, 2000.0) == pytest.approx(0.75e-3, rel=1e-12)


@given(st.floats(0.0, 1e4), st.floats(0.01, 0.99))
def test_md1_matches_pollaczek_khinchine(lam, rho):
    mu = max(lam, 1.0) / rho
    assert md1_mean_delay(lam, mu) == pytest.approx(pk_sojourn(lam, mu), rel=1e-12)


def test_md1_saturation():
    with pytest.raises(UnstableQueueError):
        md1_mean_delay(100.0, 100.0)
    assert md1_mean_delay(100.0, 100.0 * (1 + 1e-9)) > 1e3


@given(st.floats(1.0, 1e4), st.floats(1.01, 10.0), st.floats(1.001, 2.0))
def test_md1_monotone(lam, ratio, k):
    mu = lam * ratio
    assert md1_mean_delay(lam, mu * k) < md1_mean_delay(lam, mu)
    if lam * k < mu:
        assert md1_mean_delay(lam * k, mu) > md1_mean_delay(lam, mu)


def test_min_service_rate_examples():
    assert min_service_rate(0.0, 1e-3) == pytest.approx(1000.0)
    assert min_service_rate(1000.0, 0.75e-3) == pytest.approx(2000.0, rel=1e-12)


@pytest.mark.parametrize("lam", [0, 10, 100, 1000, 5000, 10_000])
@pytest.mark.parametrize("h", [0.1e-3, 1e-3, 5e-3, 50e-3])
def test_min_service_rate_round_trip(lam, h):
    mu = min_service_rate(lam, h)
    assert abs(md1_mean_delay(lam, mu) - h) / h < 1e-9


@pytest.mark.parametrize("lam", [10.0, 333.3, 5000.0])
@pytest.mark.parametrize("h", [1e-3, 5e-3])
def test_min_service_rate_matches_numeric_root(lam, h):
    ref = brentq(lambda mu: pk_sojourn(lam, mu) - h, lam * (1 + 1e-12), lam + 1e9, xtol=1e-12, rtol=1e-15)
    assert min_service_rate(lam, h) == pytest.approx(ref, rel=1e-10)


def test_min_service_rate_monotone_on_grid():
    lams = [0, 10, 100, 1000, 10_000]
    hs = [0.1e-3, 1e-3, 5e-3, 50e-3]
    for lam in lams:
        vals = [min_service_rate(lam, h) for h in hs]
        assert all(a >= b for a, b in zip(vals, vals[1:]))
    for h in hs:
        vals = [min_service_rate(lam, h) for lam in lams]
        assert all(a <= b for a, b in zip(vals, vals[1:]))


def test_product_form_flag_round_trip():
    lam, h = 1000.0, 1e-3
    mu = min_service_rate(lam, h, PRODUCT_FORM)
    assert md1_mean_delay(lam, mu, PRODUCT_FORM) == pytest.approx(h, rel=1e-9)
    # the product form is not a sojourn time: it sits below the service time alone
    assert md1_mean_delay(lam, 2 * lam, PRODUCT_FORM) < 1 / (2 * lam)


def test_required_capacity_throughput_bound():
    # any finite bound needs mu > lambda, so T is approached from above
    caps = [required_capacity(SliceSpec("x", "eMBB", 20e6, h, 1e-5), TrafficModel()) for h in (1.0, 10.0, 1e3)]
    assert all(c > 20e6 for c in caps)
    assert caps[-1] == pytest.approx(20e6, rel=1e-6)
    assert caps[0] > caps[1] > caps[2]


def test_required_capacity_urllc_two_step():
    tm = TrafficModel(packet_size=12_000)
    lam = 4e6 / 12_000
    assert lam == pytest.approx(333.333, abs=1e-3)
    mu = min_service_rate(lam, 1e-3)
    expected = max(4e6, 12_000 * mu)
    assert required_capacity(URLLC, tm) == pytest.approx(expected, rel=1e-15)
    assert required_capacity(URLLC, tm) > 4e6
    ref = brentq(lambda m: pk_sojourn(lam, m) - 1e-3, lam + 1e-9, 1e6)
    assert required_capacity(URLLC, tm) == pytest.approx(12_000 * ref, rel=1e-9)


def test_default_slice_requirements():
    tm = TrafficModel()
    assert required_capacity(EMBB, tm) == pytest.approx(21.27e6, rel=1e-3)
    assert required_capacity(URLLC, tm) == pytest.approx(14.32e6, rel=1e-3)


@given(st.floats(1e5, 1e8), st.floats(1e-4, 1.0), st.floats(1.0, 3.0))
def test_required_capacity_monotone(t, h, k):
    tm = TrafficModel()
    base = required_capacity(SliceSpec("s", "x", t, h, 1e-5), tm)
    assert base >= t
    assert required_capacity(SliceSpec("s", "x", t, h * k, 1e-5), tm) <= base * (1 + 1e-12)
    assert required_capacity(SliceSpec("s", "x", t * k, h, 1e-5), tm) >= base * (1 - 1e-12)


def test_analytic_delay_edges():
    tm = TrafficModel()
    assert analytic_delay(20e6, 0.0, tm) == math.inf
    assert analytic_delay(20e6, 20e6, tm) == math.inf
    cap = required_capacity(EMBB, tm)
    assert analytic_delay(20e6, cap, tm) <= EMBB.max_mean_delay * (1 + 1e-9)


def test_traffic_model_validation():
    with pytest.raises(ValueError):
        TrafficModel(packet_size=0)
    with pytest.raises(ValueError):
        TrafficModel(arrival_process="cbr")
    with pytest.raises(ValueError):
        TrafficModel(delay_model="other")
    tm = TrafficModel(delay_model=STANDARD)
    assert TrafficModel.from_dict(tm.to_dict()) == tm
