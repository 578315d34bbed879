import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from floodige.estimate import solve_gains
from floodige.plan import PowerSchedule, VectorRegistry, condition_number, decode_plan, encode_plan
from floodige.radio import RadioModel, dbm_to_mw, distorted_received_mw, ideal_received_mw, mw_to_dbm, report_rssi

from strategies import LEVELS, seeds

exact = RadioModel(rssi_noise_sigma=0.0, rssi_resolution=0.0)


@given(tx=st.floats(-30.0, 0.0), gain_db=st.floats(-85.0, -25.0))
def test_single_sender_proportionality(tx, gain_db):
    assume(-90.0 <= tx + gain_db <= -20.0)
    rx = distorted_received_mw([dbm_to_mw(gain_db)], [tx], exact.with_(noise_floor=-math.inf))
    assert report_rssi(rx, exact) == pytest.approx(tx + gain_db, abs=1e-9)


@given(st.lists(st.tuples(st.floats(-110.0, -20.0), st.floats(-30.0, 0.0)), min_size=1, max_size=8))
def test_ideal_model_is_additive(pairs):
    g = dbm_to_mw(np.array([p[0] for p in pairs]))
    tx = np.array([p[1] for p in pairs])
    model = RadioModel.ideal()
    assert distorted_received_mw(g, tx, model) == pytest.approx(ideal_received_mw(g, dbm_to_mw(tx)), rel=1e-12)


@given(st.floats(-89.9, -20.0), st.sampled_from([0.25, 0.5, 1.0, 2.0]))
def test_quantization_bound(rx_db, res):
    m = RadioModel(rssi_noise_sigma=0.0, rssi_resolution=res)
    assert abs(report_rssi(dbm_to_mw(rx_db), m) - rx_db) <= res / 2 + 1e-9


@given(st.floats(-130.0, 0.0), st.floats(0.0, 20.0))
def test_report_monotone(a, delta):
    lo, hi = report_rssi(dbm_to_mw(a), exact), report_rssi(dbm_to_mw(a + delta), exact)
    assert hi >= lo - 1e-12


def _schedules(n_max=5):
    return st.integers(1, n_max).flatmap(
        lambda n: st.integers(n, n + 4).flatmap(
            lambda m: arrays(float, (m, n), elements=st.sampled_from(LEVELS))
        )
    )


@given(_schedules(), seeds, st.floats(1e-3, 1e3))
def test_condition_number_invariances(mat, seed, scale):
    mw = dbm_to_mw(mat)
    c = condition_number(mw)
    perm = np.random.default_rng(seed).permutation(mw.shape[0])
    c_perm, c_scaled = condition_number(mw[perm]), condition_number(mw * scale)
    if math.isinf(c):
        assert math.isinf(c_perm)
    else:
        assert c >= 1.0 - 1e-12
        assert c_perm == pytest.approx(c, rel=1e-8)
        assert c_scaled == pytest.approx(c, rel=1e-8)


@given(_schedules())
def test_encode_decode_bijection(mat):
    reg = VectorRegistry(tuple(map(tuple, mat)))
    try:
        s = PowerSchedule(mat)
    except ValueError:
        assume(False)
    idx = encode_plan(s, reg)
    np.testing.assert_array_equal(decode_plan(idx, reg), mat)
    assert all(0 <= i < len(reg) for i in idx)


@given(_schedules(6), seeds)
def test_least_squares_oracle(mat, seed):
    assume(np.isfinite(condition_number(dbm_to_mw(mat))))
    s = PowerSchedule(mat)
    h = dbm_to_mw(np.random.default_rng(seed).uniform(-100.0, -30.0, size=s.n))
    sol = solve_gains(s, s.matrix_mw @ h)
    np.testing.assert_allclose(sol.gains, h, rtol=1e-6 * max(1.0, s.condition_number))


@given(_schedules(5), seeds, st.floats(0.01, 100.0))
def test_scaling_and_permutation_covariance(mat, seed, c):
    mw = dbm_to_mw(mat)
    assume(np.isfinite(condition_number(mw)))
    rng = np.random.default_rng(seed)
    h = dbm_to_mw(rng.uniform(-90.0, -40.0, size=mw.shape[1]))
    base = solve_gains(mw, mw @ h).gains
    scaled = solve_gains(mw * c, (mw * c) @ h).gains
    np.testing.assert_allclose(scaled, base, rtol=1e-8)
    perm = rng.permutation(mw.shape[1])
    permuted = solve_gains(mw[:, perm], mw @ h).gains
    np.testing.assert_allclose(permuted, base[perm], rtol=1e-6 * condition_number(mw))


@given(st.floats(1e-12, 1.0))
def test_dbm_roundtrip(p):
    assert dbm_to_mw(mw_to_dbm(p)) == pytest.approx(p, rel=1e-12)
