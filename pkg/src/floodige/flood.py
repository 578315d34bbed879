"""Slot-synchronized concurrent flooding with power-controlled estimation.

Every round the initiator transmits in slots ``1..n_tx``.  A node that
decodes in slot ``s`` relays the identical packet in slots
``s+1..s+n_tx`` and is otherwise listening, recording one RSSI reading per
slot.  Concurrent relays carry the same packet, so a listener decodes when
the total power it receives reaches the sensitivity threshold.
"""

from __future__ import annotations

import csv
import io
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping, Sequence

import numpy as np

from .estimate import EstimationReport, Measurement, MeasurementLog, Transmission, estimate_hopwise
from .plan import PowerSchedule, VectorRegistry, encode_plan, round_rows
from .radio import RadioModel, dbm_to_mw, distorted_received_mw, report_rssi

__all__ = [
    "FloodConfig",
    "FloodSimulator",
    "NetworkTopology",
    "NodeState",
    "OverheadLedger",
    "Phase",
    "TopologyError",
    "assign_hops",
    "control_plane_collect",
    "control_plane_disseminate",
    "hop_members",
    "run_ige_cycle",
    "run_round",
]


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class NetworkTopology:
    """Ground-truth gains between all node pairs; ``gains[i, j]`` is i -> j."""

    gains: np.ndarray
    initiator: int = 0
    rx_sensitivity: float = -90.0
    reference_tx_dbm: float = 0.0

    def __post_init__(self):
        g = np.array(self.gains, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise TopologyError(f"gain matrix must be square, got {g.shape}")
        np.fill_diagonal(g, 0.0)
        if np.any(g < 0) or np.any(g > 1):
            raise TopologyError("gains must lie in [0, 1]")
        if not 0 <= self.initiator < g.shape[0]:
            raise TopologyError(f"initiator {self.initiator} is not a node")
        g.setflags(write=False)
        object.__setattr__(self, "gains", g)
        assign_hops(self)

    @property
    def n(self) -> int:
        return self.gains.shape[0]

    @property
    def gains_db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 10.0 * np.log10(self.gains)

    def decodable(self) -> np.ndarray:
        """Boolean link matrix: single-sender reception at the reference power."""
        with np.errstate(divide="ignore"):
            rx = self.reference_tx_dbm + 10.0 * np.log10(self.gains)
        return rx >= self.rx_sensitivity

    @classmethod
    def from_db(cls, gains_db, **kwargs) -> "NetworkTopology":
        g = np.asarray(gains_db, dtype=float)
        return cls(np.where(np.isfinite(g), 10.0 ** (g / 10.0), 0.0), **kwargs)

    @classmethod
    def from_coordinates(
        cls,
        xy,
        *,
        path_loss_exponent: float = 3.0,
        reference_loss_db: float = 40.0,
        reference_distance_m: float = 1.0,
        shadowing_sigma_db: float = 0.0,
        rng: np.random.Generator | None = None,
        **kwargs,
    ) -> "NetworkTopology":
        """Log-distance path loss between 2-D positions (meters).

        ``PL(d) = PL0 + 10 * gamma * log10(d / d0)``, with optional log-normal
        shadowing drawn independently per direction.
        """
        pts = np.asarray(xy, dtype=float)
        d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
        d = np.maximum(d, reference_distance_m)
        loss = reference_loss_db + 10.0 * path_loss_exponent * np.log10(d / reference_distance_m)
        if shadowing_sigma_db > 0:
            rng = np.random.default_rng() if rng is None else rng
            loss = loss + rng.normal(0.0, shadowing_sigma_db, size=loss.shape)
        loss = np.maximum(loss, 0.0)
        g = 10.0 ** (-loss / 10.0)
        np.fill_diagonal(g, 0.0)
        return cls(g, **kwargs)


def assign_hops(topology: NetworkTopology) -> dict[int, int]:
    """Breadth-first hop index of every node from the initiator (hop 0)."""
    link = topology.decodable()
    hops = {topology.initiator: 0}
    queue = deque([topology.initiator])
    while queue:
        i = queue.popleft()
        for j in np.flatnonzero(link[i]):
            j = int(j)
            if j not in hops:
                hops[j] = hops[i] + 1
                queue.append(j)
    missing = sorted(set(range(topology.n)) - set(hops))
    if missing:
        raise TopologyError(f"nodes {missing} are unreachable from initiator {topology.initiator}")
    return dict(sorted(hops.items()))


def hop_members(hop_of: Mapping[int, int]) -> dict[int, list[int]]:
    out: dict[int, list[int]] = {}
    for node, hop in sorted(hop_of.items()):
        out.setdefault(hop, []).append(node)
    return dict(sorted(out.items()))


@dataclass(frozen=True)
class FloodConfig:
    """Flooding and estimation-cycle parameters.

    Defaults follow a BlueFlood-style setup: three relays per reception, one
    slot per packet, 30 rounds per estimation cycle.  ``slots_per_round``
    ``None`` means ``max hop + n_tx + 1``; ``update_period`` ``None`` means
    cycles run back to back.
    """

    n_tx: int = 3
    packet_slots: int = 1
    packet_bytes: int = 38
    rounds_per_ige: int = 30
    update_period: int | None = None
    slots_per_round: int | None = None
    m_per_hop: int | None = 4
    strategy: str = "interleaved"
    loss_probability: float = 0.0
    drift_sigma_db: float = 0.0

    def __post_init__(self):
        if self.n_tx < 1:
            raise ValueError("n_tx must be at least 1")
        if self.packet_slots < 1:
            raise ValueError("packet_slots must be at least 1")
        if self.rounds_per_ige < 1:
            raise ValueError("rounds_per_ige must be at least 1")
        if self.update_period is not None and self.update_period < self.rounds_per_ige:
            raise ValueError("update_period cannot be shorter than an estimation cycle")
        if not 0.0 <= self.loss_probability <= 1.0:
            raise ValueError("loss_probability must be a probability")
        if self.strategy not in ("interleaved", "sequential"):
            raise ValueError(f"unknown strategy {self.strategy!r}")

    def slots_for(self, max_hop: int) -> int:
        return self.slots_per_round if self.slots_per_round is not None else max_hop + self.n_tx + 1

    @property
    def period(self) -> int:
        return self.update_period if self.update_period is not None else self.rounds_per_ige

    def check_schedules(self, schedules: Mapping[int, PowerSchedule]) -> None:
        widest = max((s.m for s in schedules.values() if s.n > 1), default=1)
        if self.rounds_per_ige < widest:
            raise ValueError(f"rounds_per_ige {self.rounds_per_ige} < schedule length {widest}")


class Phase(Enum):
    IDLE = "idle"
    RECEIVED = "received"
    TRANSMITTING = "transmitting"


@dataclass
class NodeState:
    hop: int
    phase: Phase = Phase.IDLE
    remaining: int = 0
    decoded_slot: int | None = None
    plan_position: int = 0
    measured: dict[int, float] = field(default_factory=dict)

    def reset(self) -> None:
        """Start-of-round reset; hop and plan position survive."""
        self.phase = Phase.IDLE
        self.remaining = 0
        self.decoded_slot = None
        self.measured = {}


@dataclass
class RoundResult:
    states: dict[int, NodeState]
    log: MeasurementLog
    decoded_slot: dict[int, int | None]
    max_consecutive_tx: dict[int, int]


def run_round(
    topology: NetworkTopology,
    states: dict[int, NodeState],
    tx_dbm: Mapping[int, float],
    model: RadioModel,
    rng: np.random.Generator,
    *,
    config: FloodConfig = FloodConfig(),
    round_index: int = 0,
    gains: np.ndarray | None = None,
    loss_hook: Callable[[int, int, np.random.Generator], bool] | None = None,
) -> RoundResult:
    """Simulate one flooding round.

    ``tx_dbm`` is each node's power for the whole round.  ``gains`` overrides
    the topology's (for drift).  ``loss_hook(node, slot, rng)`` returning true
    drops a reception that would otherwise decode; by default the config's
    ``loss_probability`` is applied as a Bernoulli draw.
    """
    g = topology.gains if gains is None else gains
    n_tx = config.n_tx
    slots = config.slots_for(max(s.hop for s in states.values()))
    nodes = sorted(states)
    for st in states.values():
        st.reset()
    init = states[topology.initiator]
    init.phase, init.remaining, init.decoded_slot = Phase.TRANSMITTING, n_tx, 0

    log = MeasurementLog()
    run_length = {node: 0 for node in nodes}
    longest = {node: 0 for node in nodes}
    sens_mw = dbm_to_mw(topology.rx_sensitivity)

    for slot in range(1, slots + 1):
        for st in states.values():
            if st.phase is Phase.RECEIVED:
                st.phase = Phase.TRANSMITTING
        senders = [i for i in nodes if states[i].phase is Phase.TRANSMITTING]
        powers = np.array([tx_dbm[i] for i in senders], dtype=float)
        for i in senders:
            log.add_transmission(Transmission(round_index, slot, i, float(tx_dbm[i])))
        newly = []
        for j in nodes:
            st = states[j]
            if j in senders:
                run_length[j] += 1
                longest[j] = max(longest[j], run_length[j])
                continue
            run_length[j] = 0
            if senders:
                rx = distorted_received_mw(g[senders, j], powers, model)
            else:
                rx = model.noise_floor_mw
            rssi = report_rssi(rx, model, rng)
            st.measured[slot] = rssi
            log.add(Measurement(round_index, slot, j, rssi))
            if st.decoded_slot is None and senders and rx >= sens_mw:
                if loss_hook is not None:
                    lost = loss_hook(j, slot, rng)
                else:
                    lost = config.loss_probability > 0 and rng.random() < config.loss_probability
                if not lost:
                    newly.append(j)
        for i in senders:
            st = states[i]
            st.remaining -= 1
            if st.remaining == 0:
                st.phase = Phase.IDLE
        for j in newly:
            st = states[j]
            st.decoded_slot = slot
            st.phase, st.remaining = Phase.RECEIVED, n_tx
    for st in states.values():
        st.plan_position += 1
    return RoundResult(states, log, {i: states[i].decoded_slot for i in nodes}, longest)


# ---------------------------------------------------------------- control plane


@dataclass
class OverheadLedger:
    """Bytes the (ideal, out-of-band) control plane would carry."""

    rows: list[tuple[int, int, str, int, int]] = field(default_factory=list)

    HEADER = ("cycle", "node", "direction", "items", "bytes")

    def add(self, cycle: int, node: int, direction: str, items: int, nbytes: int) -> None:
        self.rows.append((cycle, node, direction, items, nbytes))

    def extend(self, other: "OverheadLedger") -> None:
        self.rows.extend(other.rows)

    def total_bytes(self, direction: str | None = None) -> int:
        return sum(r[4] for r in self.rows if direction is None or r[2] == direction)

    def bytes_for(self, node: int, direction: str | None = None) -> int:
        return sum(r[4] for r in self.rows if r[1] == node and (direction is None or r[2] == direction))

    def __len__(self):
        return len(self.rows)

    def to_csv(self, path_or_buf=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.HEADER)
        w.writerows(self.rows)
        text = buf.getvalue()
        if path_or_buf is not None:
            if hasattr(path_or_buf, "write"):
                path_or_buf.write(text)
            else:
                with open(path_or_buf, "w", encoding="utf-8", newline="") as fh:
                    fh.write(text)
        return text


def control_plane_disseminate(
    plans: Mapping[int, Sequence[int]],
    cycle: int = 0,
    bytes_per_index: int = 1,
) -> tuple[dict[int, list[int]], OverheadLedger]:
    """Deliver each node its plan-index sequence; lossless, zero slot cost."""
    ledger = OverheadLedger()
    delivered = {}
    for node in sorted(plans):
        seq = [int(i) for i in plans[node]]
        if not seq:
            continue
        delivered[node] = seq
        ledger.add(cycle, node, "plan", len(seq), len(seq) * bytes_per_index)
    return delivered, ledger


def control_plane_collect(log: MeasurementLog, cycle: int = 0, bytes_per_reading: int = 2) -> tuple[MeasurementLog, OverheadLedger]:
    """Copy every node's readings to the initiator, 2 bytes per reading."""
    copy = MeasurementLog()
    copy.extend(log)
    counts: dict[int, int] = {}
    for e in log:
        counts[e.node] = counts.get(e.node, 0) + 1
    ledger = OverheadLedger()
    for node in sorted(counts):
        ledger.add(cycle, node, "report", counts[node], counts[node] * bytes_per_reading)
    return copy, ledger


# ---------------------------------------------------------------- estimation cycles


def _node_powers(schedules: Mapping[int, PowerSchedule], members: Mapping[int, list[int]], rows: Mapping[int, int | None]) -> dict[int, float]:
    out = {}
    for hop, nodes in members.items():
        sched = schedules.get(hop)
        for col, node in enumerate(nodes):
            if sched is None:
                out[node] = 0.0
                continue
            row = rows.get(hop)
            out[node] = float(sched.matrix_dbm[0 if row is None else row, col])
    return out


def _flood_cycle(topology, config, schedules, model, rng, hop_of, first_round):
    members = hop_members(hop_of)
    config.check_schedules(schedules)
    plan = round_rows(schedules, config.rounds_per_ige, config.strategy)
    states = {i: NodeState(hop=h) for i, h in hop_of.items()}
    log = MeasurementLog()
    for r, rows in enumerate(plan):
        gains = topology.gains
        if config.drift_sigma_db > 0:
            jitter = rng.normal(0.0, config.drift_sigma_db, size=gains.shape)
            gains = np.clip(gains * 10.0 ** (jitter / 10.0), 0.0, 1.0)
        res = run_round(
            topology, states, _node_powers(schedules, members, rows), model, rng,
            config=config, round_index=first_round + r, gains=gains,
        )
        log.extend(res.log)
    return log, plan


def run_ige_cycle(
    topology: NetworkTopology,
    config: FloodConfig,
    schedules: Mapping[int, PowerSchedule],
    model: RadioModel,
    rng: np.random.Generator,
    *,
    hop_of: Mapping[int, int] | None = None,
    first_round: int = 0,
    cycle: int = 0,
    reference_gains: np.ndarray | None = None,
) -> tuple[MeasurementLog, EstimationReport]:
    """Run ``rounds_per_ige`` rounds and estimate hop-to-next-hop gains.

    Schedule rows rotate per round as :func:`~floodige.plan.round_rows`
    dictates for ``config.strategy``; each node keeps its power for the
    whole round.
    """
    hop_of = assign_hops(topology) if hop_of is None else dict(hop_of)
    log, plan = _flood_cycle(topology, config, schedules, model, rng, hop_of, first_round)
    report = estimate_hopwise(
        log, schedules, hop_of, plan,
        true_gains=np.asarray(topology.gains), reference_gains=reference_gains,
        first_round=first_round, n=topology.n, cycle=cycle,
    )
    return log, report


class FloodSimulator:
    """Periodic estimation cycles over one scenario.

    Hops are assigned once.  Each cycle disseminates the plan, floods
    ``rounds_per_ige`` rounds, collects the readings at the initiator and
    estimates.  Rounds between cycles (``update_period`` longer than a
    cycle) carry no measurements and are not simulated.
    """

    def __init__(
        self,
        topology: NetworkTopology,
        schedules: Mapping[int, PowerSchedule],
        model: RadioModel,
        config: FloodConfig = FloodConfig(),
        *,
        seed: int | np.random.SeedSequence | None = None,
        reference_gains: np.ndarray | None = None,
        reschedule: Callable[[np.random.Generator], Mapping[int, PowerSchedule]] | None = None,
    ):
        self.topology = topology
        self.schedules = dict(schedules)
        self.model = model
        self.config = config
        self.hop_of = assign_hops(topology)
        self.members = hop_members(self.hop_of)
        self.rng = np.random.default_rng(seed)
        self.reference_gains = reference_gains
        self.reschedule = reschedule
        self._index_schedules()
        self.ledger = OverheadLedger()
        self.log = MeasurementLog()
        self.reports: list[EstimationReport] = []
        self.cycle = 0

    def _index_schedules(self) -> None:
        self.registries = {hop: VectorRegistry.from_schedules([s]) for hop, s in self.schedules.items()}

    def plan_indices(self) -> dict[int, list[int]]:
        """Per-node sequence of registry indices for one cycle."""
        plan = round_rows(self.schedules, self.config.rounds_per_ige, self.config.strategy)
        out = {}
        for hop, nodes in self.members.items():
            sched = self.schedules.get(hop)
            if sched is None:
                continue
            idx = encode_plan(sched, self.registries[hop])
            seq = [idx[row if (row := rows.get(hop)) is not None else 0] for rows in plan]
            # nodes only need one pass over the schedule; they loop it locally
            seq = seq[: sched.m] if self.config.strategy == "interleaved" else seq
            for node in nodes:
                out[node] = seq
        return out

    def run_cycle(self) -> EstimationReport:
        """One estimation cycle; with ``reschedule`` a fresh plan is drawn first."""
        if self.reschedule is not None and self.cycle > 0:
            self.schedules = dict(self.reschedule(self.rng))
            self._index_schedules()
        _, ledger = control_plane_disseminate(self.plan_indices(), self.cycle)
        self.ledger.extend(ledger)
        first = self.cycle * self.config.period
        log, plan = _flood_cycle(
            self.topology, self.config, self.schedules, self.model, self.rng, self.hop_of, first,
        )
        collected, ledger = control_plane_collect(log, self.cycle)
        self.ledger.extend(ledger)
        report = estimate_hopwise(
            collected, self.schedules, self.hop_of, plan,
            true_gains=np.asarray(self.topology.gains), reference_gains=self.reference_gains,
            first_round=first, n=self.topology.n, cycle=self.cycle,
        )
        self.log.extend(log)
        self.reports.append(report)
        self.cycle += 1
        return report

    def run(self, cycles: int) -> list[EstimationReport]:
        return [self.run_cycle() for _ in range(cycles)]
