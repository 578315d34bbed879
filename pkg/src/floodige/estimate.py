"""Channel-gain recovery from transmit schedules and measured powers.

For a listener ``i`` and ``m`` slots with known transmit powers ``P``
(``m x n``, mW), the received powers satisfy ``rx = P @ h_i``.  Solving
that system for every listener recovers the gains into it.

In a flood, prior hops are still transmitting when hop ``k`` relays, so a
hop-``k+1`` node first removes the power it measured one slot earlier
(prior hops only) before solving against hop ``k``'s schedule.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .plan import RANK_EPS, PowerSchedule
from .radio import dbm_to_mw

__all__ = [
    "EstimationError",
    "EstimationReport",
    "GainSolution",
    "IncompleteDataError",
    "LinkEstimate",
    "Measurement",
    "MeasurementLog",
    "RemainderWarning",
    "RepeatAverage",
    "Transmission",
    "UnsolvableError",
    "average_repeats",
    "estimate_hopwise",
    "gain_error_db",
    "solve_gains",
    "subtract_interference",
]


class EstimationError(RuntimeError):
    pass


class UnsolvableError(EstimationError):
    """The schedule does not determine the gains (rank deficient)."""


class IncompleteDataError(EstimationError):
    """Some schedule rows were never measured."""

    def __init__(self, gaps):
        self.gaps = dict(gaps)
        super().__init__("missing schedule rows: " + ", ".join(f"{k}: {v}" for k, v in self.gaps.items()))


class RemainderWarning(UserWarning):
    """Rounds past the last whole pass over the schedule were dropped."""


# ---------------------------------------------------------------- measurement log


class Measurement(NamedTuple):
    round: int
    slot: int
    node: int
    rssi_dbm: float
    listening: bool = True


class Transmission(NamedTuple):
    round: int
    slot: int
    node: int
    tx_dbm: float


class MeasurementLog:
    """RSSI readings of listening nodes, plus who transmitted in each slot.

    At most one reading exists per ``(node, round, slot)``.  Rounds and slots
    are as the simulator numbers them (rounds from 0, slots from 1).
    """

    def __init__(self, entries: Iterable[Measurement] = (), transmissions: Iterable[Transmission] = ()):
        self._entries: dict[tuple[int, int, int], Measurement] = {}
        self._tx: dict[tuple[int, int], dict[int, float]] = defaultdict(dict)
        for e in entries:
            self.add(e)
        for t in transmissions:
            self.add_transmission(t)

    def add(self, entry: Measurement) -> None:
        if not entry.listening:
            raise ValueError("only listening nodes produce measurements")
        key = (entry.node, entry.round, entry.slot)
        if key in self._entries:
            raise ValueError(f"duplicate measurement for node {entry.node} round {entry.round} slot {entry.slot}")
        self._entries[key] = entry

    def add_transmission(self, t: Transmission) -> None:
        self._tx[(t.round, t.slot)][t.node] = t.tx_dbm

    def extend(self, other: "MeasurementLog") -> None:
        for e in other:
            self.add(e)
        for t in other.transmissions():
            self.add_transmission(t)

    def __len__(self):
        return len(self._entries)

    def __iter__(self):
        return iter(sorted(self._entries.values(), key=lambda e: (e.round, e.slot, e.node)))

    def __eq__(self, other):
        if not isinstance(other, MeasurementLog):
            return NotImplemented
        return self._entries == other._entries and dict(self._tx) == dict(other._tx)

    def get(self, node: int, round_: int, slot: int) -> Measurement | None:
        return self._entries.get((node, round_, slot))

    def rssi(self, node: int, round_: int, slot: int) -> float | None:
        e = self._entries.get((node, round_, slot))
        return None if e is None else e.rssi_dbm

    def by_node(self, node: int) -> list[Measurement]:
        return [e for e in self if e.node == node]

    def by_slot(self, round_: int, slot: int) -> list[Measurement]:
        return [e for e in self if e.round == round_ and e.slot == slot]

    def transmitters(self, round_: int, slot: int) -> dict[int, float]:
        return dict(self._tx.get((round_, slot), {}))

    def transmissions(self) -> list[Transmission]:
        return [
            Transmission(r, s, node, p)
            for (r, s), nodes in sorted(self._tx.items())
            for node, p in sorted(nodes.items())
        ]

    @property
    def rounds(self) -> list[int]:
        return sorted({e.round for e in self._entries.values()} | {r for r, _ in self._tx})

    def to_csv(self, path_or_buf=None) -> str:
        """Write ``round,slot,node,rssi_dbm`` rows; returns the text too."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["round", "slot", "node", "rssi_dbm"])
        for e in self:
            w.writerow([e.round, e.slot, e.node, repr(float(e.rssi_dbm))])
        text = buf.getvalue()
        if path_or_buf is not None:
            _write_text(path_or_buf, text)
        return text


def _write_text(path_or_buf, text: str) -> None:
    if hasattr(path_or_buf, "write"):
        path_or_buf.write(text)
    else:
        with open(path_or_buf, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


# ---------------------------------------------------------------- core solves


@dataclass(frozen=True)
class GainSolution:
    gains: np.ndarray
    residual: float
    condition_number: float
    clamped: bool


def solve_gains(schedule, rx_mw: Sequence[float]) -> GainSolution:
    """Least-squares gains for one listener.

    ``schedule`` is a :class:`PowerSchedule` or an ``m x n`` mW matrix.  The
    solve goes through SVD (``numpy.linalg.lstsq``), never the normal
    equations.  Negative components are clamped to zero and flagged.

    Raises
    ------
    UnsolvableError
        If the schedule does not have full column rank.
    """
    p = schedule.matrix_mw if isinstance(schedule, PowerSchedule) else np.atleast_2d(np.asarray(schedule, float))
    rx = np.asarray(rx_mw, dtype=float).ravel()
    if rx.shape[0] != p.shape[0]:
        raise ValueError(f"need {p.shape[0]} received powers, got {rx.shape[0]}")
    if p.shape[0] < p.shape[1]:
        raise UnsolvableError("fewer measurements than unknown gains")
    h, _, rank, s = np.linalg.lstsq(p, rx, rcond=None)
    if rank < p.shape[1] or s[-1] <= RANK_EPS * s[0]:
        raise UnsolvableError(f"schedule rank {rank} < {p.shape[1]}")
    residual = float(np.linalg.norm(p @ h - rx))
    clamped = bool(np.any(h < 0))
    return GainSolution(np.clip(h, 0.0, None), residual, float(s[0] / s[-1]), clamped)


def subtract_interference(total_mw: float, known_mw: float) -> tuple[float, bool]:
    """``max(total - known, 0)`` in mW, with a flag set when clamping happened."""
    if total_mw < 0 or known_mw < 0:
        raise ValueError("powers must be non-negative")
    diff = total_mw - known_mw
    if diff < 0:
        return 0.0, True
    return diff, False


def gain_error_db(h_est, h_true):
    """Absolute gain error in dB; an estimate of exactly 0 is infinitely wrong."""
    est = np.asarray(h_est, dtype=float)
    true = np.asarray(h_true, dtype=float)
    if np.any(true <= 0):
        raise ValueError("true gain must be positive")
    with np.errstate(divide="ignore"):
        err = np.abs(10.0 * np.log10(est) - 10.0 * np.log10(true))
    err = np.where(est <= 0, np.inf, err)
    return float(err) if err.ndim == 0 else err


@dataclass(frozen=True)
class RepeatAverage:
    means: dict[int, np.ndarray]
    counts: np.ndarray
    dropped_rounds: tuple[int, ...]


def average_repeats(
    samples: Mapping[tuple[int, int], float],
    period: int,
    rows: Mapping[int, int | None] | None = None,
    total_rounds: int | None = None,
) -> RepeatAverage:
    """Mean (linear mW) of every repeat of each schedule row, per node.

    Parameters
    ----------
    samples
        ``(node, round) -> mW``; rounds are relative to the start of the
        estimation cycle.
    period
        Number of schedule rows ``m``.
    rows
        Optional ``round -> row`` map (``None`` excludes the round).  Default
        is ``round % period``.
    total_rounds
        Cycle length.  With the default row map, rounds past the last whole
        multiple of ``period`` are dropped and a :class:`RemainderWarning` is
        issued.  Defaults to one past the largest round seen.

    Raises
    ------
    IncompleteDataError
        If a node lacks any schedule row; the error lists the gaps.
    """
    if period < 1:
        raise ValueError("period must be positive")
    seen = [r for _, r in samples]
    if total_rounds is None:
        total_rounds = (max(seen) + 1) if seen else 0
    dropped: tuple[int, ...] = ()
    if rows is None:
        usable = (total_rounds // period) * period
        dropped = tuple(range(usable, total_rounds))
        if dropped:
            warnings.warn(
                f"{total_rounds} rounds is not a multiple of {period}; dropping {len(dropped)}",
                RemainderWarning,
                stacklevel=2,
            )
        rows = {r: (r % period if r < usable else None) for r in range(total_rounds)}

    sums: dict[int, np.ndarray] = {}
    counts: dict[int, np.ndarray] = {}
    for (node, r), value in samples.items():
        row = rows.get(r)
        if row is None:
            continue
        sums.setdefault(node, np.zeros(period))[row] += value
        counts.setdefault(node, np.zeros(period, dtype=int))[row] += 1

    gaps = {node: [int(j) for j in np.flatnonzero(c == 0)] for node, c in counts.items() if np.any(c == 0)}
    nodes_without = {node for node, _ in samples} - set(counts)
    gaps.update({node: list(range(period)) for node in nodes_without})
    if gaps:
        raise IncompleteDataError(gaps)
    means = {node: sums[node] / counts[node] for node in sums}
    all_counts = np.array([counts[n] for n in sorted(counts)]) if counts else np.zeros((0, period), int)
    return RepeatAverage(means, all_counts, dropped)


# ---------------------------------------------------------------- reports


@dataclass(frozen=True)
class LinkEstimate:
    sender: int
    receiver: int
    hop: int
    h_est: float
    h_true: float | None
    error_db: float | None
    condition_number: float
    residual: float
    clamped: bool = False
    h_reference: float | None = None
    error_vs_reference_db: float | None = None

    @property
    def h_est_db(self) -> float:
        return 10.0 * math.log10(self.h_est) if self.h_est > 0 else -math.inf

    @property
    def h_true_db(self) -> float | None:
        return None if self.h_true is None else 10.0 * math.log10(self.h_true)


@dataclass
class EstimationReport:
    """Outcome of one estimation cycle over the links in scope."""

    n: int
    links: list[LinkEstimate] = field(default_factory=list)
    hop_condition_numbers: dict[int, float] = field(default_factory=dict)
    failures: dict[int, str] = field(default_factory=dict)
    dropped_rounds: dict[int, tuple[int, ...]] = field(default_factory=dict)
    irregular_rounds: dict[int, tuple[int, ...]] = field(default_factory=dict)
    cycle: int = 0

    @property
    def links_in_scope(self) -> set[tuple[int, int]]:
        return {(l.sender, l.receiver) for l in self.links}

    @property
    def h_est(self) -> np.ndarray:
        """``n x n`` estimate matrix, NaN outside the links in scope."""
        out = np.full((self.n, self.n), np.nan)
        for l in self.links:
            out[l.sender, l.receiver] = l.h_est
        return out

    def errors_db(self) -> np.ndarray:
        return np.array([l.error_db for l in self.links if l.error_db is not None], dtype=float)

    def fraction_within(self, threshold_db: float) -> float:
        err = self.errors_db()
        return float(np.mean(err < threshold_db)) if err.size else float("nan")

    CSV_HEADER = ("cycle", "sender", "receiver", "hop", "h_true_db", "h_est_db",
                  "error_db", "cond_number", "residual_mw", "clamped", "h_ref_db", "error_vs_ref_db")

    def csv_rows(self) -> list[list]:
        def db(x):
            if x is None:
                return ""
            return repr(10.0 * math.log10(x)) if x > 0 else "-inf"

        rows = []
        for l in sorted(self.links, key=lambda l: (l.hop, l.sender, l.receiver)):
            rows.append([
                self.cycle, l.sender, l.receiver, l.hop, db(l.h_true), db(l.h_est),
                "" if l.error_db is None else repr(float(l.error_db)),
                repr(float(l.condition_number)), repr(float(l.residual)), int(l.clamped),
                db(l.h_reference),
                "" if l.error_vs_reference_db is None else repr(float(l.error_vs_reference_db)),
            ])
        return rows

    def to_csv(self, path_or_buf=None, header: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(self.CSV_HEADER)
        w.writerows(self.csv_rows())
        text = buf.getvalue()
        if path_or_buf is not None:
            _write_text(path_or_buf, text)
        return text


# ---------------------------------------------------------------- hop-wise pipeline


def _hop_members(hop_of: Mapping[int, int]) -> dict[int, list[int]]:
    members: dict[int, list[int]] = defaultdict(list)
    for node, hop in sorted(hop_of.items()):
        members[hop].append(node)
    return dict(members)


def _round_is_regular(log: MeasurementLog, r: int, k: int, senders: Sequence[int]) -> bool:
    """Hop ``k`` relayed in slot ``k+1`` on top of exactly the slot-``k`` transmitters."""
    now = log.transmitters(r, k + 1)
    before = log.transmitters(r, k) if k >= 1 else {}
    if any(s not in now for s in senders):
        return False
    rest = {node: p for node, p in now.items() if node not in senders}
    return rest == before


def estimate_hopwise(
    log: MeasurementLog,
    schedules: Mapping[int, PowerSchedule],
    hop_of: Mapping[int, int],
    round_rows: Sequence[Mapping[int, int | None]],
    *,
    true_gains: np.ndarray | None = None,
    reference_gains: np.ndarray | None = None,
    first_round: int = 0,
    n: int | None = None,
    cycle: int = 0,
) -> EstimationReport:
    """Estimate every hop-``k`` to hop-``k+1`` gain from one cycle's log.

    Hop ``k`` first relays in slot ``k+1``; a hop-``k+1`` node has been
    listening since slot 1, so its slot-``k`` reading holds everything
    except hop ``k`` and serves as the baseline (zero for hop 0).  Per
    round and receiver the baseline is subtracted in mW, repeats of each
    schedule row are averaged, and the result is solved against hop ``k``'s
    schedule.

    Rounds in which the transmitter set deviated from that pattern (a relay
    failed to decode, say) are skipped for the affected hop and listed in
    ``irregular_rounds``.  A hop whose data is incomplete or unsolvable is
    recorded in ``failures`` while the other hops proceed.

    ``round_rows[r]`` gives the schedule row each hop played in cycle round
    ``r`` (log round ``first_round + r``).
    """
    members = _hop_members(hop_of)
    n = n if n is not None else (max(hop_of) + 1 if hop_of else 0)
    report = EstimationReport(n=n, cycle=cycle)
    total_rounds = len(round_rows)

    for k in sorted(members):
        receivers = members.get(k + 1)
        if not receivers or k not in schedules:
            continue
        senders = members[k]
        schedule = schedules[k]
        if schedule.n != len(senders):
            report.failures[k] = f"schedule width {schedule.n} != hop size {len(senders)}"
            continue

        samples: dict[tuple[int, int], float] = {}
        irregular, clamped_links = [], set()
        for r in range(total_rounds):
            if round_rows[r].get(k) is None:
                continue
            lr = first_round + r
            if not _round_is_regular(log, lr, k, senders):
                irregular.append(r)
                continue
            for j in receivers:
                total = log.rssi(j, lr, k + 1)
                base = log.rssi(j, lr, k) if k >= 1 else None
                if total is None or (k >= 1 and base is None):
                    continue
                value, clamped = subtract_interference(dbm_to_mw(total), dbm_to_mw(base) if base is not None else 0.0)
                if clamped:
                    clamped_links.add(j)
                samples[(j, r)] = value
        report.irregular_rounds[k] = tuple(irregular)

        # interleaved plans cycle r % m; drop the partial pass at the end
        # (a single sender's rows are all equal, so nothing is lost by keeping it)
        rows = {r: round_rows[r].get(k) for r in range(total_rounds)}
        usable = total_rounds
        if schedule.n > 1 and all(rows[r] == r % schedule.m for r in range(total_rounds)):
            usable = (total_rounds // schedule.m) * schedule.m
            dropped = tuple(range(usable, total_rounds))
            if dropped:
                warnings.warn(
                    f"hop {k}: {total_rounds} rounds is not a multiple of {schedule.m}; dropping {len(dropped)}",
                    RemainderWarning,
                    stacklevel=2,
                )
                report.dropped_rounds[k] = dropped
            rows = {r: (row if r < usable else None) for r, row in rows.items()}
        try:
            avg = average_repeats(samples, schedule.m, rows=rows, total_rounds=total_rounds)
            missing = [j for j in receivers if j not in avg.means]
            if missing:
                raise IncompleteDataError({j: list(range(schedule.m)) for j in missing})
        except IncompleteDataError as exc:
            report.failures[k] = str(exc)
            continue

        report.hop_condition_numbers[k] = schedule.condition_number
        for j in receivers:
            try:
                sol = solve_gains(schedule, avg.means[j])
            except UnsolvableError as exc:
                report.failures[k] = str(exc)
                break
            for col, i in enumerate(senders):
                h_true = None if true_gains is None else float(true_gains[i, j])
                err = gain_error_db(sol.gains[col], h_true) if h_true and h_true > 0 else None
                h_ref = None if reference_gains is None else float(reference_gains[i, j])
                err_ref = gain_error_db(sol.gains[col], h_ref) if h_ref and h_ref > 0 else None
                report.links.append(LinkEstimate(
                    sender=i, receiver=j, hop=k, h_est=float(sol.gains[col]), h_true=h_true,
                    error_db=err, condition_number=sol.condition_number, residual=sol.residual,
                    clamped=sol.clamped or j in clamped_links, h_reference=h_ref,
                    error_vs_reference_db=err_ref,
                ))
    return report
