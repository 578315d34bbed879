import math

import numpy as np
import pytest

from floodige.estimate import (
    EstimationReport,
    Transmission,
    IncompleteDataError,
    LinkEstimate,
    Measurement,
    MeasurementLog,
    RemainderWarning,
    UnsolvableError,
    average_repeats,
    estimate_hopwise,
    gain_error_db,
    solve_gains,
    subtract_interference,
)
from floodige.plan import PowerSchedule, round_rows
from floodige.radio import dbm_to_mw, mw_to_dbm

TWO = 10 * math.log10(2.0)


class TestSolveGains:
    def test_small_network_recovery(self):
        p = np.array([[1.0, 2.0], [2.0, 1.0]])
        h = np.array([0.001, 0.001])
        rx = p @ h  # 0.003 mW at both rows
        np.testing.assert_allclose(rx, [0.003, 0.003])
        sol = solve_gains(p, rx)
        np.testing.assert_allclose(sol.gains, h, rtol=1e-12)
        assert sol.condition_number == pytest.approx(3.0, abs=1e-9)
        assert not sol.clamped

    def test_identity(self):
        assert solve_gains(np.eye(1), [0.25]).gains[0] == pytest.approx(0.25)

    def test_overdetermined_consistent(self):
        p = dbm_to_mw(np.array([[0.0, -4.0], [-8.0, 0.0], [-12.0, -4.0], [0.0, -12.0]]))
        h = np.array([3e-6, 7e-7])
        sol = solve_gains(p, p @ h)
        sub = solve_gains(p[:2], (p @ h)[:2])
        np.testing.assert_allclose(sol.gains, sub.gains, rtol=1e-9)
        assert sol.residual <= 1e-12

    def test_rank_deficient(self):
        with pytest.raises(UnsolvableError):
            solve_gains(np.array([[1.0, 2.0], [2.0, 4.0]]), [1.0, 2.0])

    def test_negative_clamped(self):
        sol = solve_gains(np.eye(2), [0.5, -0.1])
        assert sol.clamped and sol.gains[1] == 0.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            solve_gains(np.eye(2), [1.0])

    def test_accepts_schedule(self):
        s = PowerSchedule([[0.0, TWO], [TWO, 0.0]], (0.0, TWO))
        np.testing.assert_allclose(solve_gains(s, [0.003, 0.003]).gains, [0.001, 0.001], rtol=1e-9)


class TestHelpers:
    def test_subtract(self):
        v, clamped = subtract_interference(0.004, 0.001)
        assert v == pytest.approx(0.003) and not clamped

    def test_subtract_clamps(self):
        assert subtract_interference(0.001, 0.004) == (0.0, True)

    def test_gain_error(self):
        assert gain_error_db(1e-5, 1e-5) == 0.0
        assert gain_error_db(2e-5, 1e-5) == pytest.approx(10 * math.log10(2), abs=1e-12)
        assert gain_error_db(1e-6, 1e-5) == pytest.approx(10.0)
        assert gain_error_db(0.0, 1e-5) == math.inf

    def test_gain_error_undefined_truth(self):
        with pytest.raises(ValueError):
            gain_error_db(1e-5, 0.0)


class TestAverageRepeats:
    def test_identical(self):
        avg = average_repeats({(7, 0): 0.002, (7, 1): 0.002}, 1)
        assert avg.means[7][0] == pytest.approx(0.002)

    def test_linear_mean(self):
        avg = average_repeats({(7, 0): 0.001, (7, 1): 0.003}, 1)
        assert avg.means[7][0] == pytest.approx(0.002)

    def test_remainder_dropped(self):
        samples = {(1, r): float(r) for r in range(30)}
        with pytest.warns(RemainderWarning):
            avg = average_repeats(samples, 4, total_rounds=30)
        assert avg.dropped_rounds == (28, 29)
        assert np.all(avg.counts == 7)

    def test_missing_rows(self):
        with pytest.raises(IncompleteDataError) as exc:
            average_repeats({(1, 0): 1.0, (1, 2): 1.0}, 2, rows={0: 0, 2: 0})
        assert exc.value.gaps == {1: [1]}


class TestMeasurementLog:
    def test_duplicate_rejected(self):
        log = MeasurementLog()
        log.add(Measurement(0, 1, 2, -50.0))
        with pytest.raises(ValueError):
            log.add(Measurement(0, 1, 2, -51.0))

    def test_non_listening_rejected(self):
        with pytest.raises(ValueError):
            MeasurementLog().add(Measurement(0, 1, 2, -50.0, listening=False))

    def test_sorted_iteration_and_csv(self):
        log = MeasurementLog([Measurement(1, 1, 0, -40.0), Measurement(0, 2, 3, -60.5)])
        assert [e.round for e in log] == [0, 1]
        text = log.to_csv()
        assert text.splitlines()[0] == "round,slot,node,rssi_dbm"
        assert text.splitlines()[1] == "0,2,3,-60.5"


def _two_hop_log(h, schedule, rounds):
    """Noise-free log for the two-hop example: initiator at 0 dBm in slots 1-2."""
    log = MeasurementLog()
    for r in range(rounds):
        row = schedule.matrix_mw[r % schedule.m]
        log.add_transmission(Transmission(r, 1, 0, 0.0))
        log.add_transmission(Transmission(r, 2, 0, 0.0))
        for col, node in enumerate((1, 2)):
            log.add_transmission(Transmission(r, 2, node, float(schedule.matrix_dbm[r % schedule.m, col])))
        for rx in (3, 4):
            log.add(Measurement(r, 1, rx, mw_to_dbm(h[0, rx])))
            total = h[0, rx] + row @ h[[1, 2], rx]
            log.add(Measurement(r, 2, rx, mw_to_dbm(total)))
    return log


def test_hopwise_exact_two_hop():
    h = np.zeros((5, 5))
    h[0, 3], h[0, 4] = 1e-10, 2e-10
    h[1, 3], h[2, 3], h[1, 4], h[2, 4] = 1e-6, 3e-7, 2e-7, 5e-6
    sched = PowerSchedule([[0.0, TWO], [TWO, 0.0]], (0.0, TWO))
    hop_of = {0: 0, 1: 1, 2: 1, 3: 2, 4: 2}
    log = _two_hop_log(h, sched, 2)
    rep = estimate_hopwise(log, {1: sched}, hop_of, round_rows({1: sched}, 2), true_gains=h, n=5)
    got = {(l.sender, l.receiver): l.h_est for l in rep.links}
    for (i, j), v in got.items():
        assert v == pytest.approx(h[i, j], rel=1e-9)
    assert set(got) == {(1, 3), (2, 3), (1, 4), (2, 4)}
    assert rep.fraction_within(1e-6) == 1.0


def test_report_csv_columns():
    rep = EstimationReport(2, [LinkEstimate(0, 1, 0, 1e-6, 1e-6, 0.0, 1.0, 0.0)], {0: 1.0})
    lines = rep.to_csv().splitlines()
    assert lines[0].split(",") == list(EstimationReport.CSV_HEADER)
    assert len(lines) == 2
