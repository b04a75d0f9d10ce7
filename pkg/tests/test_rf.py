import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from commexplore import rf
from commexplore.rf import NO_LINK, RfParams

P = RfParams()
P125 = RfParams(wavelength_m=0.125)


def test_friis_reference_value():
    assert rf.friis_received_power(P125, 1.0) == pytest.approx(-20.05, abs=0.01)


def test_friis_inverse_square():
    for d in (0.3, 1.0, 7.5, 120.0):
        drop = rf.friis_received_power(P, d) - rf.friis_received_power(P, 2 * d)
        assert drop == pytest.approx(20 * math.log10(2), rel=1e-12)
        assert drop == pytest.approx(6.0206, abs=1e-4)


def test_friis_at_d0_matches_reference_loss():
    assert rf.friis_received_power(P, P.reference_distance_m) == pytest.approx(P.link_budget_dbm - P.pl0_db, rel=1e-12)


@pytest.mark.parametrize("d", [0.0, -1.0])
def test_friis_domain(d):
    with pytest.raises(ValueError):
        rf.friis_received_power(P, d)


def test_path_loss_examples():
    assert rf.path_loss_db(P, 1.0) == P.pl0_db
    assert rf.path_loss_db(P, 10.0) == pytest.approx(P.pl0_db + 30.0, rel=1e-12)
    p = RfParams(reference_loss_db=40.05)
    assert rf.path_loss_db(p, 100.0) == pytest.approx(100.05, rel=1e-12)
    assert rf.rssi(p, 100.0) == pytest.approx(-80.05, rel=1e-12)
    assert rf.rssi(p, 1.0) == pytest.approx(-20.05, rel=1e-12)


def test_path_loss_clamps_below_d0():
    assert rf.path_loss_db(P, 0.01) == rf.path_loss_db(P, 1.0)
    assert rf.path_loss_db(P, 0.0) == P.pl0_db


def test_shadow_term():
    p = RfParams(shadow_sigma_db=4.0)
    assert rf.path_loss_db(p, 10.0, 0.5) == pytest.approx(rf.path_loss_db(p, 10.0) + 2.0, rel=1e-12)
    assert rf.path_loss_db(P, 10.0, 3.0) == rf.path_loss_db(P, 10.0)


def test_no_link():
    assert rf.rssi(P, math.inf) == NO_LINK
    assert rf.channel_capacity(P, NO_LINK) == 0.0
    assert rf.transmission_time(P, 8e8, NO_LINK) == math.inf


def test_snr_examples():
    assert rf.snr_linear(-88, -88) == 1.0
    assert rf.snr_linear(-58, -88) == pytest.approx(1000.0, rel=1e-12)
    assert rf.snr_linear(-98, -88) == pytest.approx(0.1, rel=1e-12)


def test_capacity_examples():
    assert rf.channel_capacity(P, -88.0) == pytest.approx(20e6, rel=1e-12)
    c = rf.channel_capacity(P, -58.0)
    assert c == pytest.approx(2e7 * math.log2(1001), rel=1e-12)
    assert c / 1e6 == pytest.approx(199.35, abs=0.01)


def test_transmission_time_examples():
    c = rf.channel_capacity(P, -58.0)
    assert rf.transmission_time(P, c, -58.0) == pytest.approx(1.0, rel=1e-12)
    assert rf.transmission_time(P, 8e8, -58.0) == pytest.approx(4.013, abs=0.01)
    assert rf.transmission_time(P, 0, NO_LINK) == 0.0
    with pytest.raises(ValueError):
        rf.transmission_time(P, -1, -58.0)


def test_n2_degenerates_to_friis():
    p = RfParams(path_loss_exponent=2.0)
    for d in np.geomspace(1.0, 500.0, 50):
        assert rf.rssi(p, float(d)) == pytest.approx(rf.friis_received_power(p, float(d)), rel=1e-9)


def test_monotonicity_10k():
    rng = np.random.default_rng(1)
    d = np.unique(rng.uniform(1.0, 500.0, 10_000))
    r = [rf.rssi(P, float(x)) for x in d]
    t = [rf.transmission_time(P, 8e8, v) for v in r]
    assert all(a > b for a, b in zip(r, r[1:]))
    assert all(a < b for a, b in zip(t, t[1:]))


@given(st.floats(-150, 50, allow_nan=False))
def test_dbm_roundtrip(dbm):
    assert rf.mw_to_dbm(rf.dbm_to_mw(dbm)) == pytest.approx(dbm, rel=1e-12, abs=1e-12)


@settings(max_examples=200)
@given(st.floats(1.0, 1e4), st.floats(1.0, 1e4))
def test_rssi_strictly_decreasing(a, b):
    if a != b:
        lo, hi = min(a, b), max(a, b)
        assert rf.rssi(P, lo) > rf.rssi(P, hi)


def test_fading_reproducible():
    a, b = rf.ShadowFading(7), rf.ShadowFading(7)
    assert [a.draw() for _ in range(5)] == [b.draw() for _ in range(5)]


@pytest.mark.parametrize(
    "kw", [{"wavelength_m": 0}, {"reference_distance_m": -1}, {"bandwidth_hz": 0}, {"shadow_sigma_db": -1}]
)
def test_params_validation(kw):
    with pytest.raises(ValueError):
        RfParams(**kw)
