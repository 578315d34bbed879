"""Transmit-power schedules for channel-gain estimation.

A schedule is an ``m x n`` matrix of transmit powers in dBm: row ``j`` holds
what each of ``n`` senders transmits in slot (or round) ``j``.  Estimation
solves a linear system in milliwatts, so rank and conditioning are always
evaluated on the mW matrix.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .radio import DEFAULT_TX_LEVELS_DBM, dbm_to_mw

__all__ = [
    "RANK_EPS",
    "PlanError",
    "PowerSchedule",
    "ScheduleError",
    "VectorRegistry",
    "condition_number",
    "decode_plan",
    "encode_plan",
    "generate_schedule",
    "is_full_rank",
    "per_hop_schedules",
    "round_rows",
    "schedules_from_json",
    "schedules_to_json",
    "shuffled_schedule",
]

RANK_EPS = 1e-10


class ScheduleError(ValueError):
    """No admissible schedule exists for the requested shape/level set."""


class PlanError(ValueError):
    """A schedule row or plan index cannot be mapped through a registry."""


def _as_mw(schedule) -> np.ndarray:
    if isinstance(schedule, PowerSchedule):
        return schedule.matrix_mw
    return np.atleast_2d(np.asarray(schedule, dtype=float))


def _singular_values(mw: np.ndarray) -> np.ndarray:
    return np.linalg.svd(mw, compute_uv=False)


def condition_number(schedule) -> float:
    """Ratio of largest to smallest singular value of the mW power matrix.

    ``schedule`` is a :class:`PowerSchedule` or an array already in mW.
    Returns ``inf`` when the matrix does not have full column rank.
    """
    mw = _as_mw(schedule)
    if mw.shape[0] < mw.shape[1]:
        return float("inf")
    s = _singular_values(mw)
    if s[-1] <= RANK_EPS * s[0]:
        return float("inf")
    return float(s[0] / s[-1])


def is_full_rank(schedule) -> bool:
    """True iff the mW matrix has ``m >= n`` and rank ``n``."""
    mw = _as_mw(schedule)
    if mw.shape[0] < mw.shape[1] or not np.any(mw):
        return False
    s = _singular_values(mw)
    return bool(s[-1] > RANK_EPS * s[0])


@dataclass(frozen=True)
class PowerSchedule:
    """An ``m x n`` transmit-power plan over a discrete level set (dBm).

    Construction checks the shape, that every entry is an allowed level, and
    that the mW matrix has full column rank.
    """

    matrix_dbm: np.ndarray
    level_set: tuple[float, ...] = DEFAULT_TX_LEVELS_DBM
    linear_only: bool = False
    tx_linear_max: float = 0.0

    def __post_init__(self):
        matrix = np.atleast_2d(np.asarray(self.matrix_dbm, dtype=float)).copy()
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix_dbm", matrix)
        object.__setattr__(self, "level_set", tuple(float(v) for v in self.level_set))
        m, n = matrix.shape
        if m < n:
            raise ScheduleError(f"schedule needs at least as many rows as senders ({m} < {n})")
        if not np.all(np.isin(matrix, self.level_set)):
            raise ScheduleError("schedule contains powers outside its level set")
        if self.linear_only and np.any(matrix > self.tx_linear_max):
            raise ScheduleError("linear-region schedule exceeds tx_linear_max")
        if not is_full_rank(self.matrix_mw):
            raise ScheduleError("schedule is rank deficient")

    @property
    def m(self) -> int:
        return self.matrix_dbm.shape[0]

    @property
    def n(self) -> int:
        return self.matrix_dbm.shape[1]

    @property
    def matrix_mw(self) -> np.ndarray:
        return dbm_to_mw(self.matrix_dbm)

    @property
    def condition_number(self) -> float:
        return condition_number(self.matrix_mw)

    def row(self, j: int) -> np.ndarray:
        return self.matrix_dbm[j % self.m]

    def to_dict(self) -> dict:
        return {
            "matrix_dbm": self.matrix_dbm.tolist(),
            "level_set": list(self.level_set),
            "linear_only": self.linear_only,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "PowerSchedule":
        return cls(
            np.asarray(data["matrix_dbm"], dtype=float),
            tuple(data.get("level_set", DEFAULT_TX_LEVELS_DBM)),
            bool(data.get("linear_only", False)),
        )

    def __eq__(self, other):
        if not isinstance(other, PowerSchedule):
            return NotImplemented
        return self.level_set == other.level_set and np.array_equal(self.matrix_dbm, other.matrix_dbm)

    __hash__ = None


def generate_schedule(
    n: int,
    m: int,
    level_set: Sequence[float] = DEFAULT_TX_LEVELS_DBM,
    candidates: int = 1000,
    rng: np.random.Generator | None = None,
    *,
    linear_only: bool = False,
) -> PowerSchedule:
    """Best-conditioned of ``candidates`` random ``m x n`` level matrices.

    Rank-deficient draws are discarded.  The result depends only on the rng
    state, so a seeded generator reproduces it exactly.

    Raises
    ------
    ScheduleError
        If ``m < n``, the level set has fewer than two levels, or none of the
        draws has full rank.
    """
    if m < n:
        raise ScheduleError(f"need m >= n, got m={m}, n={n}")
    if n < 1 or candidates < 1:
        raise ScheduleError("n and candidates must be positive")
    levels = np.asarray(sorted(set(float(v) for v in level_set), reverse=True))
    if levels.size < 2:
        raise ScheduleError("level set needs at least two distinct levels")
    rng = np.random.default_rng() if rng is None else rng

    picks = rng.integers(0, levels.size, size=(candidates, m, n))
    mw = dbm_to_mw(levels)[picks]
    s = np.linalg.svd(mw, compute_uv=False)
    with np.errstate(divide="ignore"):
        cond = np.where(s[:, -1] > RANK_EPS * s[:, 0], s[:, 0] / s[:, -1], np.inf)
    best = int(np.argmin(cond))
    if not np.isfinite(cond[best]):
        raise ScheduleError(f"no full-rank {m}x{n} schedule in {candidates} draws; level set too small")
    return PowerSchedule(levels[picks[best]], tuple(levels), linear_only=linear_only)


def shuffled_schedule(
    n: int,
    m: int,
    level_set: Sequence[float] = DEFAULT_TX_LEVELS_DBM,
    candidates: int = 1,
    rng: np.random.Generator | None = None,
    *,
    linear_only: bool = False,
    max_tries: int = 1000,
) -> PowerSchedule:
    """Schedule whose every column is a random arrangement of distinct levels.

    Each sender walks through ``m`` different levels, so consecutive power
    vectors always differ.  With ``candidates > 1`` the best-conditioned of
    that many full-rank shuffles is kept.  Rank-deficient shuffles are
    redrawn, up to ``max_tries`` draws in total.
    """
    levels = np.asarray(sorted(set(float(v) for v in level_set), reverse=True))
    if m < n:
        raise ScheduleError(f"need m >= n, got m={m}, n={n}")
    if m > levels.size:
        raise ScheduleError(f"cannot shuffle {levels.size} levels into {m} distinct rows")
    rng = np.random.default_rng() if rng is None else rng
    best, best_cond, kept = None, np.inf, 0
    for _ in range(max_tries):
        picks = np.stack([rng.permutation(levels.size)[:m] for _ in range(n)], axis=1)
        cond = condition_number(dbm_to_mw(levels[picks]))
        if not np.isfinite(cond):
            continue
        kept += 1
        if cond < best_cond:
            best, best_cond = picks, cond
        if kept >= candidates:
            break
    if best is None:
        raise ScheduleError(f"no full-rank shuffle of {m}x{n} found in {max_tries} draws")
    return PowerSchedule(levels[best], tuple(levels), linear_only=linear_only)


@dataclass(frozen=True)
class VectorRegistry:
    """Ordered, predefined transmit-power vectors addressable by index."""

    vectors: tuple[tuple[float, ...], ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        vectors = tuple(tuple(float(v) for v in vec) for vec in self.vectors)
        if not vectors:
            raise PlanError("registry must not be empty")
        if len({len(v) for v in vectors}) != 1:
            raise PlanError("registry vectors must share one length")
        object.__setattr__(self, "vectors", vectors)
        index = {}
        for i, vec in enumerate(vectors):
            index.setdefault(vec, i)
        object.__setattr__(self, "_index", index)

    def __len__(self):
        return len(self.vectors)

    @property
    def width(self) -> int:
        return len(self.vectors[0])

    @property
    def bytes_per_index(self) -> int:
        return max(1, (int(len(self) - 1).bit_length() + 7) // 8)

    @classmethod
    def full(cls, level_set: Sequence[float], n: int) -> "VectorRegistry":
        """Every length-``n`` vector over ``level_set``, in lexicographic order."""
        levels = sorted(set(float(v) for v in level_set), reverse=True)
        return cls(tuple(itertools.product(levels, repeat=n)))

    @classmethod
    def from_schedules(cls, schedules: Iterable[PowerSchedule]) -> "VectorRegistry":
        rows = sorted({tuple(r) for s in schedules for r in s.matrix_dbm.tolist()}, reverse=True)
        return cls(tuple(rows))

    def index_of(self, vector) -> int:
        try:
            return self._index[tuple(float(v) for v in vector)]
        except KeyError:
            raise PlanError(f"vector {list(vector)} is not in the registry") from None

    def to_dict(self) -> dict:
        return {"vectors": [list(v) for v in self.vectors]}

    @classmethod
    def from_dict(cls, data: Mapping) -> "VectorRegistry":
        return cls(tuple(tuple(v) for v in data["vectors"]))


def encode_plan(schedule, registry: VectorRegistry) -> list[int]:
    """Registry index of each schedule row."""
    rows = schedule.matrix_dbm if isinstance(schedule, PowerSchedule) else np.atleast_2d(schedule)
    return [registry.index_of(row) for row in rows]


def decode_plan(indices: Sequence[int], registry: VectorRegistry) -> np.ndarray:
    """Inverse of :func:`encode_plan`: the dBm rows named by ``indices``."""
    rows = []
    for i in indices:
        if not 0 <= int(i) < len(registry):
            raise PlanError(f"plan index {i} out of range for {len(registry)}-entry registry")
        rows.append(registry.vectors[int(i)])
    return np.asarray(rows, dtype=float).reshape(len(rows), registry.width)


def per_hop_schedules(
    hops: Mapping[int, Sequence[int]],
    m_per_hop: int | Mapping[int, int] | None = None,
    level_set: Sequence[float] = DEFAULT_TX_LEVELS_DBM,
    rng: np.random.Generator | None = None,
    *,
    candidates: int = 1000,
    linear_only: bool = False,
    method: str = "best",
) -> dict[int, PowerSchedule]:
    """One independent full-rank schedule per hop.

    ``hops`` maps hop index to its member nodes; schedule columns follow the
    order given there.  A single-node hop (always the case for hop 0, the
    initiator) gets a constant column at the strongest level so its power is
    identical in every slot that serves as a subtraction baseline.

    ``m_per_hop`` may be an int for all hops, a per-hop mapping, or ``None``
    for ``max(hop size, 2)`` rows.  ``method`` selects
    :func:`generate_schedule` (``"best"``) or :func:`shuffled_schedule`
    (``"shuffle"``) for multi-node hops.
    """
    if method not in ("best", "shuffle"):
        raise ValueError(f"unknown schedule method {method!r}")
    rng = np.random.default_rng() if rng is None else rng
    levels = tuple(sorted(set(float(v) for v in level_set), reverse=True))
    out = {}
    for hop in sorted(hops):
        members = list(hops[hop])
        if not members:
            raise ScheduleError(f"hop {hop} is empty")
        n = len(members)
        if m_per_hop is None:
            m = max(n, 2)
        elif isinstance(m_per_hop, Mapping):
            m = int(m_per_hop.get(hop, max(n, 2)))
        else:
            m = int(m_per_hop)
        if n == 1:
            out[hop] = PowerSchedule(np.full((m, 1), levels[0]), levels, linear_only=linear_only)
        elif method == "shuffle":
            out[hop] = shuffled_schedule(n, m, levels, candidates, rng, linear_only=linear_only)
        else:
            out[hop] = generate_schedule(n, m, levels, candidates, rng, linear_only=linear_only)
    return out


def round_rows(
    schedules: Mapping[int, PowerSchedule],
    rounds: int,
    strategy: str = "interleaved",
) -> list[dict[int, int | None]]:
    """Which schedule row each hop plays in each round of one IGE cycle.

    ``interleaved``: every hop cycles through its rows concurrently, row
    ``r mod m`` in round ``r``.

    ``sequential``: hops with more than one node take turns; the cycle is
    split into consecutive blocks, one per varying hop, each a whole number
    of passes over that hop's rows.  Outside its block a hop holds row 0 and
    is marked ``None`` (not used for its own estimation).  Single-node hops
    are constant anyway and always report row ``r mod m``.
    """
    if strategy == "interleaved":
        return [{hop: r % s.m for hop, s in schedules.items()} for r in range(rounds)]
    if strategy != "sequential":
        raise ValueError(f"unknown schedule strategy {strategy!r}")

    varying = [hop for hop in sorted(schedules) if schedules[hop].n > 1]
    plan = [{hop: (r % s.m if s.n == 1 else None) for hop, s in schedules.items()} for r in range(rounds)]
    if not varying:
        return plan
    share = rounds // len(varying)
    start = 0
    for hop in varying:
        m = schedules[hop].m
        block = (share // m) * m
        if block == 0:
            raise ScheduleError(f"{rounds} rounds cannot fit one pass of every hop schedule")
        for r in range(start, start + block):
            plan[r][hop] = (r - start) % m
        start += share
    return plan


def schedules_to_json(schedules: Mapping[int, PowerSchedule]) -> str:
    return json.dumps({str(h): s.to_dict() for h, s in sorted(schedules.items())}, indent=2)


def schedules_from_json(text: str) -> dict[int, PowerSchedule]:
    return {int(h): PowerSchedule.from_dict(d) for h, d in json.loads(text).items()}
