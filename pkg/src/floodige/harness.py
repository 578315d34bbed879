"""Named experiment scenarios and their CSV artifacts.

A scenario is a JSON document::

    {"name": "...", "kind": "controlled-ige", "trials": 300, "seed": 1,
     "radio": {...}, "topology": {...}, "flood": {...},
     "schedule": {...}, "params": {...}}

Every runner returns a :class:`ScenarioResult`: named CSV tables plus a flat
summary.  Results depend only on the scenario and its seed.  Trial ``t``
draws from ``SeedSequence(seed, spawn_key=(t,))``, or ``(m, t)`` in sweeps
over vector count ``m``, so adding trials or counts never changes the
others.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.stats import spearmanr

from .estimate import RemainderWarning, gain_error_db, solve_gains
from .flood import FloodConfig, FloodSimulator, NetworkTopology, assign_hops, hop_members
from .plan import DEFAULT_TX_LEVELS_DBM, ScheduleError, generate_schedule, per_hop_schedules
from .radio import RadioModel, dbm_to_mw, distorted_received_mw, power_ratio, report_rssi

__all__ = [
    "KINDS",
    "ScenarioError",
    "ScenarioResult",
    "ScenarioSpec",
    "bundled_scenarios",
    "cdf_pairs",
    "load_scenario",
    "point_to_point_gains",
    "run_condition_number_sweep",
    "run_controlled_ige",
    "run_flood_ige",
    "run_linearity_study",
    "run_scenario",
    "run_vector_count_sweep",
]


class ScenarioError(ValueError):
    """Malformed or unsupported scenario configuration."""


@dataclass
class ScenarioSpec:
    name: str
    kind: str
    trials: int = 1
    seed: int = 0
    radio: dict = field(default_factory=dict)
    topology: dict | None = None
    flood: dict = field(default_factory=dict)
    schedule: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ScenarioError(f"unknown scenario kind {self.kind!r}; expected one of {sorted(KINDS)}")
        if int(self.trials) < 1:
            raise ScenarioError("trials must be at least 1")
        if int(self.seed) < 0:
            raise ScenarioError("seed must be non-negative")
        self.trials = int(self.trials)
        self.seed = int(self.seed)

    @classmethod
    def from_dict(cls, data: Mapping) -> "ScenarioSpec":
        data = dict(data)
        unknown = set(data) - {"name", "kind", "trials", "seed", "radio", "topology", "flood", "schedule", "params", "description"}
        if unknown:
            raise ScenarioError(f"unknown scenario keys: {sorted(unknown)}")
        data.pop("description", None)
        if "kind" not in data:
            raise ScenarioError("scenario needs a 'kind'")
        data.setdefault("name", data["kind"])
        return cls(**data)

    def with_overrides(self, seed: int | None = None, trials: int | None = None) -> "ScenarioSpec":
        return replace(
            self,
            seed=self.seed if seed is None else int(seed),
            trials=self.trials if trials is None else int(trials),
        )

    def radio_model(self) -> RadioModel:
        try:
            return RadioModel.from_dict(self.radio)
        except (ValueError, TypeError, KeyError) as exc:
            raise ScenarioError(f"bad radio section: {exc}") from exc

    def flood_config(self) -> FloodConfig:
        try:
            return FloodConfig(**self.flood)
        except (ValueError, TypeError) as exc:
            raise ScenarioError(f"bad flood section: {exc}") from exc

    def network(self) -> NetworkTopology:
        if not self.topology:
            raise ScenarioError(f"{self.kind} scenario needs a topology section")
        t = dict(self.topology)
        common = {k: t.pop(k) for k in ("initiator", "rx_sensitivity", "reference_tx_dbm") if k in t}
        try:
            if "gains_db" in t:
                g = np.array([[(-math.inf if v is None else v) for v in row] for row in t.pop("gains_db")], float)
                topo = NetworkTopology.from_db(g, **common)
            elif "coordinates" in t:
                shadow_seed = t.pop("shadowing_seed", self.seed)
                topo = NetworkTopology.from_coordinates(
                    t.pop("coordinates"), rng=np.random.default_rng(shadow_seed),
                    **{k: t.pop(k) for k in list(t) if k in
                       ("path_loss_exponent", "reference_loss_db", "reference_distance_m", "shadowing_sigma_db")},
                    **common,
                )
            else:
                raise ScenarioError("topology needs 'gains_db' or 'coordinates'")
        except ScenarioError:
            raise
        except (ValueError, TypeError) as exc:
            raise ScenarioError(f"bad topology section: {exc}") from exc
        if t:
            raise ScenarioError(f"unknown topology keys: {sorted(t)}")
        return topo

    def validate(self) -> None:
        """Build every configured component once, raising :class:`ScenarioError` on problems."""
        self.radio_model()
        if self.kind in ("flood-ige", "vector-count-sweep"):
            self.flood_config()
            self.network()
        unknown = set(self.params) - set(_PARAM_DEFAULTS[self.kind])
        if unknown:
            raise ScenarioError(f"unknown params for {self.kind}: {sorted(unknown)}")
        levels = self.schedule.get("level_set", DEFAULT_TX_LEVELS_DBM)
        if len(set(levels)) < 2:
            raise ScenarioError("schedule level_set needs at least two levels")


def load_scenario(path: str | Path) -> ScenarioSpec:
    """Read a scenario file; a bare name falls back to the bundled scenarios."""
    p = Path(path)
    if not p.exists():
        bundled = bundled_scenarios()
        key = p.name if p.name in bundled else p.name + ".json"
        if key not in bundled:
            raise ScenarioError(f"scenario file {path} not found")
        p = bundled[key]
    try:
        with open(p, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{p}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ScenarioError(f"{p}: scenario must be a JSON object")
    return ScenarioSpec.from_dict(data)


def bundled_scenarios() -> dict[str, Path]:
    root = resources.files("floodige") / "scenarios"
    return {p.name: Path(str(p)) for p in sorted(root.iterdir(), key=lambda q: q.name) if p.name.endswith(".json")}


# ---------------------------------------------------------------- results


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


@dataclass
class Table:
    header: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for row in self.rows:
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()

    def column(self, name: str) -> np.ndarray:
        i = self.header.index(name)
        return np.array([row[i] for row in self.rows], dtype=float)


@dataclass
class ScenarioResult:
    name: str
    kind: str
    tables: dict[str, Table] = field(default_factory=dict)
    summary: dict[str, float] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def write(self, out_dir: str | Path) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for fname, table in self.tables.items():
            path = out / fname
            path.write_text(table.to_csv(), encoding="utf-8")
            paths.append(path)
        return paths

    def summary_table(self) -> str:
        width = max((len(k) for k in self.summary), default=0)
        lines = [f"{self.name} ({self.kind})"]
        lines += [f"  {k:<{width}}  {_fmt(v)}" for k, v in self.summary.items()]
        return "\n".join(lines)


def cdf_pairs(values: Sequence[float]) -> list[tuple[float, float]]:
    """Sorted ``(value, cumulative_fraction)`` pairs, one per sample."""
    v = np.sort(np.asarray(values, dtype=float))
    n = v.size
    return [(float(x), (i + 1) / n) for i, x in enumerate(v)]


def _trial_seeds(seed: int, count: int, *key: int) -> list[np.random.SeedSequence]:
    """Trial ``t`` uses ``SeedSequence(seed, spawn_key=(*key, t))``.

    Keying on the vector count (where there is one) keeps a count's trials
    identical no matter which other counts a scenario lists.
    """
    return [np.random.SeedSequence(seed, spawn_key=(*key, t)) for t in range(count)]


def _trial_rngs(seed: int, count: int, *key: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in _trial_seeds(seed, count, *key)]


# ---------------------------------------------------------------- linearity study


_PARAM_DEFAULTS: dict[str, dict] = {
    "linearity-study": {
        "regions_dbm": [[-40.0, -20.0], [-80.0, -60.0]],
        "step_db": 1.0,
        "bin_db": 4.0,
    },
    "controlled-ige": {
        "senders": 5,
        "vector_counts": list(range(5, 16)),
        "gain_db_range": [-55.0, -45.0],
        "cdf_vector_count": 11,
        "samples_per_vector": 1,
    },
    "condition-number-sweep": {
        "senders": 5,
        "vector_counts": list(range(5, 16)),
        "gain_db_range": [-55.0, -45.0],
        "buckets": 10,
        "error_cap_db": 40.0,
    },
    "flood-ige": {
        "total_rounds": 1500,
        "reference_probes": 10,
        "small_gain_threshold_db": 10.0,
        "error_threshold_db": 3.0,
        "log_rounds": 30,
    },
    "vector-count-sweep": {
        "vector_counts": [2, 3, 4, 5, 6],
        "total_rounds": 1500,
    },
}


def _params(spec: ScenarioSpec) -> dict:
    unknown = set(spec.params) - set(_PARAM_DEFAULTS[spec.kind])
    if unknown:
        raise ScenarioError(f"unknown params for {spec.kind}: {sorted(unknown)}")
    return {**_PARAM_DEFAULTS[spec.kind], **spec.params}


def run_linearity_study(spec: ScenarioSpec) -> ScenarioResult:
    """Two-sender power-ratio sweep over the configured arrival-power regions.

    Each region ``[lo, hi]`` is sampled at the centers of ``step_db`` cells
    on both axes.  Ratios are noise-free model outputs; the noise floor is
    excluded from both numerator and denominator.
    """
    p = _params(spec)
    model = spec.radio_model()
    quiet = model.with_(noise_floor=-math.inf)
    step, width = float(p["step_db"]), float(p["bin_db"])
    ratios_tbl = Table(("region", "rx1_dbm", "rx2_dbm", "power_ratio"))
    heat_tbl = Table(("region", "rx1_bin_dbm", "rx2_bin_dbm", "mean_power_ratio", "samples"))
    all_ratios = []
    diag = {}
    for region, (lo, hi) in enumerate(p["regions_dbm"]):
        axis = np.arange(lo + step / 2, hi, step)
        bins: dict[tuple[float, float], list[float]] = {}
        for a in axis:
            for b in axis:
                gains = dbm_to_mw(np.array([a, b]))
                actual = distorted_received_mw(gains, [0.0, 0.0], quiet)
                r = power_ratio(actual, gains.sum())
                ratios_tbl.rows.append((region, float(a), float(b), r))
                all_ratios.append(r)
                key = (lo + width * (math.floor((a - lo) / width) + 0.5), lo + width * (math.floor((b - lo) / width) + 0.5))
                bins.setdefault(key, []).append(r)
        for (ca, cb), vals in sorted(bins.items()):
            heat_tbl.rows.append((region, ca, cb, float(np.mean(vals)), len(vals)))
            if ca == cb:
                diag[(region, ca)] = float(np.mean(vals))
    cdf_tbl = Table(("power_ratio", "cumulative_fraction"), cdf_pairs(all_ratios))

    r = np.asarray(all_ratios)
    summary = {"samples": int(r.size), "fraction_ratio_0.9_1.1": float(np.mean((r >= 0.9) & (r <= 1.1)))}
    for (region, c), v in sorted(diag.items()):
        summary[f"diag_mean_ratio_r{region}_{c:g}dBm"] = v
    return ScenarioResult(spec.name, spec.kind,
                          {"power_ratio.csv": ratios_tbl, "heatmap.csv": heat_tbl, "ratio_cdf.csv": cdf_tbl}, summary)


# ---------------------------------------------------------------- controlled star experiments


def _controlled_trial(rng, senders, m, gain_range, model, level_set, candidates, samples=1):
    gains_db = rng.uniform(gain_range[0], gain_range[1], size=senders)
    gains = dbm_to_mw(gains_db)
    for _ in range(100):
        try:
            sched = generate_schedule(senders, m, level_set, candidates, rng)
            break
        except ScheduleError:
            continue
    else:
        raise ScenarioError(f"could not draw a full-rank {m}x{senders} schedule")
    rx = []
    for row in sched.matrix_dbm:
        true_rx = distorted_received_mw(gains, row, model)
        reads = [dbm_to_mw(report_rssi(true_rx, model, rng)) for _ in range(samples)]
        rx.append(float(np.mean(reads)))
    sol = solve_gains(sched, rx)
    return gains, sol, sched.condition_number


def run_controlled_ige(spec: ScenarioSpec) -> ScenarioResult:
    """Star of ``senders`` nodes into one receiver, repeated per vector count.

    ``trials`` independent trials run at every vector count.  Each trial
    draws fresh gains (uniform in dB over ``gain_db_range``) and a fresh
    random schedule (best of ``schedule.candidates`` draws, default 1, i.e.
    every sender picks a random level for every vector).
    """
    p = _params(spec)
    model = spec.radio_model()
    levels = tuple(spec.schedule.get("level_set", DEFAULT_TX_LEVELS_DBM))
    candidates = int(spec.schedule.get("candidates", 1))
    senders = int(p["senders"])
    counts = [int(m) for m in p["vector_counts"]]
    if any(m < senders for m in counts):
        raise ScenarioError(f"vector counts below {senders} senders cannot be full rank")

    trials_tbl = Table(("vector_count", "trial", "sender", "h_true_db", "h_est_db", "error_db", "cond_number"))
    curve_tbl = Table(("vector_count", "mean_cond_number", "median_cond_number", "mean_error_db",
                       "median_error_db", "fraction_error_below_3db"))
    per_count = {}
    for m in counts:
        rngs = _trial_rngs(spec.seed, spec.trials, m)
        conds, errs = [], []
        for t, rng in enumerate(rngs):
            gains, sol, cond = _controlled_trial(rng, senders, m, p["gain_db_range"], model, levels,
                                                 candidates, int(p["samples_per_vector"]))
            err = gain_error_db(sol.gains, gains)
            conds.append(cond)
            errs.extend(err.tolist())
            for s in range(senders):
                est_db = 10 * math.log10(sol.gains[s]) if sol.gains[s] > 0 else -math.inf
                trials_tbl.rows.append((m, t, s, 10 * math.log10(gains[s]), est_db, float(err[s]), cond))
        e = np.asarray(errs)
        finite = e[np.isfinite(e)]
        curve_tbl.rows.append((m, float(np.mean(conds)), float(np.median(conds)),
                               float(np.mean(finite)) if finite.size else math.inf,
                               float(np.median(e)), float(np.mean(e < 3.0))))
        per_count[m] = e

    cdf_m = int(p["cdf_vector_count"]) if int(p["cdf_vector_count"]) in per_count else counts[-1]
    cdf_tbl = Table(("error_db", "cumulative_fraction"), cdf_pairs(per_count[cdf_m]))
    summary = {
        "trials_per_vector_count": spec.trials,
        "cdf_vector_count": cdf_m,
        "fraction_error_below_3db": float(np.mean(per_count[cdf_m] < 3.0)),
        "median_error_db": float(np.median(per_count[cdf_m])),
    }
    for row in curve_tbl.rows:
        summary[f"mean_cond_m{row[0]}"] = row[1]
    return ScenarioResult(spec.name, spec.kind, {
        "trials.csv": trials_tbl, "condition_curve.csv": curve_tbl, "error_cdf.csv": cdf_tbl,
    }, summary)


def run_condition_number_sweep(spec: ScenarioSpec) -> ScenarioResult:
    """Mean gain error against schedule condition number.

    Each trial picks its vector count uniformly from ``vector_counts`` and a
    single random schedule, so conditioning varies widely.  Trials are
    grouped into equal-count buckets by condition number.  A trial's error
    is the mean over senders with each error capped at ``error_cap_db`` (an
    estimate of exactly zero has infinite error).
    """
    p = _params(spec)
    model = spec.radio_model()
    levels = tuple(spec.schedule.get("level_set", DEFAULT_TX_LEVELS_DBM))
    candidates = int(spec.schedule.get("candidates", 1))
    senders = int(p["senders"])
    counts = [int(m) for m in p["vector_counts"]]
    if any(m < senders for m in counts):
        raise ScenarioError(f"vector counts below {senders} senders cannot be full rank")
    cap = float(p["error_cap_db"])

    trials_tbl = Table(("trial", "vector_count", "cond_number", "mean_error_db"))
    conds, errs = [], []
    for t, rng in enumerate(_trial_rngs(spec.seed, spec.trials)):
        m = counts[int(rng.integers(len(counts)))]
        gains, sol, cond = _controlled_trial(rng, senders, m, p["gain_db_range"], model, levels, candidates)
        e = float(np.mean(np.minimum(gain_error_db(sol.gains, gains), cap)))
        trials_tbl.rows.append((t, m, cond, e))
        conds.append(cond)
        errs.append(e)

    conds_a, errs_a = np.asarray(conds), np.asarray(errs)
    nb = max(1, min(int(p["buckets"]), len(conds)))
    order = np.argsort(conds_a, kind="stable")
    bucket_tbl = Table(("bucket", "trials", "min_cond_number", "max_cond_number", "mean_cond_number", "mean_error_db"))
    for b, idx in enumerate(np.array_split(order, nb)):
        bucket_tbl.rows.append((b, int(idx.size), float(conds_a[idx].min()), float(conds_a[idx].max()),
                                float(conds_a[idx].mean()), float(errs_a[idx].mean())))
    bc, be = bucket_tbl.column("mean_cond_number"), bucket_tbl.column("mean_error_db")
    rho = float(spearmanr(bc, be).statistic) if nb > 2 else float("nan")
    summary = {"trials": spec.trials, "buckets": nb, "spearman_bucket_cond_vs_error": rho,
               "spearman_trial_cond_vs_error": float(spearmanr(conds_a, errs_a).statistic)}
    return ScenarioResult(spec.name, spec.kind, {"trials.csv": trials_tbl, "buckets.csv": bucket_tbl}, summary)


# ---------------------------------------------------------------- flood scenarios


def point_to_point_gains(topology: NetworkTopology, model: RadioModel, rng: np.random.Generator,
                         probes: int = 10, tx_dbm: float = 0.0) -> np.ndarray:
    """Gains measured one sender at a time, averaging ``probes`` RSSI readings in mW."""
    n = topology.n
    out = np.zeros((n, n))
    p_mw = dbm_to_mw(tx_dbm)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            true_rx = distorted_received_mw([topology.gains[i, j]], [tx_dbm], model)
            reads = [dbm_to_mw(report_rssi(true_rx, model, rng)) for _ in range(probes)]
            out[i, j] = float(np.mean(reads)) / p_mw
    return out


def _schedule_factory(spec: ScenarioSpec, members, m) -> Callable[[np.random.Generator], dict]:
    sched = spec.schedule
    levels = tuple(sched.get("level_set", DEFAULT_TX_LEVELS_DBM))
    method = sched.get("method", "best")
    candidates = int(sched.get("candidates", 1000 if method == "best" else 1))

    def make(rng):
        try:
            return per_hop_schedules({h: v for h, v in members.items()}, m, levels, rng,
                                     candidates=candidates, method=method)
        except ScheduleError as exc:
            raise ScenarioError(str(exc)) from exc
    return make


def _flood_run(spec, topo, model, config, m, rng_seed, probes=0):
    """Run ``total_rounds`` worth of estimation cycles; returns (simulator, reports)."""
    hop_of = assign_hops(topo)
    members = hop_members(hop_of)
    widest = max(len(v) for h, v in members.items() if (h + 1) in members)
    if m < widest:
        raise ScenarioError(f"{m} vectors cannot identify {widest} senders in one hop")
    make = _schedule_factory(spec, members, m)
    seq = rng_seed if isinstance(rng_seed, np.random.SeedSequence) else np.random.SeedSequence(rng_seed)
    plan_rng, sim_seed, probe_seed = (np.random.default_rng(s) for s in seq.spawn(3))
    config = replace(config, m_per_hop=m)
    reschedule = make if spec.schedule.get("reschedule_each_cycle", False) else None
    sim = FloodSimulator(topo, make(plan_rng), model, config, seed=sim_seed, reschedule=reschedule)
    cycles = max(1, int(spec.params.get("total_rounds", 1500)) // config.rounds_per_ige)
    reports = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RemainderWarning)
        for _ in range(cycles):
            if probes:
                sim.reference_gains = point_to_point_gains(topo, model, probe_seed, probes)
            reports.append(sim.run_cycle())
    notes = sorted({str(w.message) for w in caught})
    return sim, reports, notes


def _link_table(reports) -> Table:
    from .estimate import EstimationReport

    tbl = Table(EstimationReport.CSV_HEADER)
    for rep in reports:
        for row in rep.csv_rows():
            tbl.rows.append(tuple(row))
    return tbl


def run_flood_ige(spec: ScenarioSpec) -> ScenarioResult:
    """Flooding-based estimation cycles back to back with point-to-point probes.

    Errors are against the simulator's true gains; ``error_vs_ref_db`` in the
    report compares with noisy single-sender probes taken right before each
    cycle, the way a testbed would obtain its reference.
    """
    p = _params(spec)
    model = spec.radio_model()
    config = spec.flood_config()
    topo = spec.network()
    m = int(config.m_per_hop or 4)
    warn = []
    all_reports = []
    sims = []
    for t, seed in enumerate(_trial_seeds(spec.seed, spec.trials)):
        sim, reports, notes = _flood_run(spec, topo, model, config, m, seed, int(p["reference_probes"]))
        sims.append(sim)
        all_reports.extend(reports)
        warn.extend(notes)
        for rep in reports:
            for hop, why in sorted(rep.failures.items()):
                warn.append(f"trial {t} cycle {rep.cycle} hop {hop}: {why}")

    links = [l for rep in all_reports for l in rep.links if l.error_db is not None]
    errors = np.array([l.error_db for l in links])
    gmax_db = float(np.max(topo.gains_db[np.isfinite(topo.gains_db)]))
    thr, small_thr = float(p["error_threshold_db"]), float(p["small_gain_threshold_db"])
    big = [l for l in links if l.error_db > thr]
    below_max = np.array([gmax_db - l.h_true_db for l in big])

    report_tbl = _link_table(all_reports)
    cdf_tbl = Table(("error_db", "cumulative_fraction"), cdf_pairs(errors))
    small_tbl = Table(("db_below_max_gain", "cumulative_fraction"), cdf_pairs(below_max) if below_max.size else [])
    log_tbl = Table(("round", "slot", "node", "rssi_dbm"))
    keep = int(p["log_rounds"])
    for e in sims[0].log:
        if keep <= 0 or e.round < keep:
            log_tbl.rows.append((e.round, e.slot, e.node, e.rssi_dbm))
    ledger = Table(("trial",) + sims[0].ledger.HEADER)
    for t, sim in enumerate(sims):
        ledger.rows.extend((t,) + row for row in sim.ledger.rows)

    conds = [c for rep in all_reports for h, c in rep.hop_condition_numbers.items() if h >= 1]
    summary = {
        "cycles": len(all_reports),
        "links_scored": int(errors.size),
        "fraction_error_below_3db": float(np.mean(errors < thr)) if errors.size else math.nan,
        "median_error_db": float(np.median(errors)) if errors.size else math.nan,
        "links_error_above_threshold": len(big),
        "fraction_large_error_links_10db_below_max": float(np.mean(below_max >= small_thr)) if below_max.size else math.nan,
        "mean_cond_number": float(np.mean(conds)) if conds else math.nan,
        "failed_hop_estimates": sum(len(r.failures) for r in all_reports),
        "control_bytes_total": int(sum(sim.ledger.total_bytes() for sim in sims)),
    }
    return ScenarioResult(spec.name, spec.kind, {
        "report.csv": report_tbl, "error_cdf.csv": cdf_tbl, "small_gain_cdf.csv": small_tbl,
        "measurement_log.csv": log_tbl, "overhead.csv": ledger,
    }, summary, warn)


def _box_stats(values: np.ndarray) -> tuple[float, ...]:
    q1, med, q3 = np.percentile(values, [25, 50, 75])
    iqr = q3 - q1
    lo = float(values[values >= q1 - 1.5 * iqr].min())
    hi = float(values[values <= q3 + 1.5 * iqr].max())
    return float(q1), float(med), float(q3), float(iqr), lo, hi


def run_vector_count_sweep(spec: ScenarioSpec) -> ScenarioResult:
    """Error quartiles of flooding-based estimation per vector count."""
    p = _params(spec)
    model = spec.radio_model()
    config = spec.flood_config()
    topo = spec.network()
    counts = [int(m) for m in p["vector_counts"]]
    spec = replace(spec, params={**spec.params, "total_rounds": p["total_rounds"]})
    box = Table(("vector_count", "samples", "q1_error_db", "median_error_db", "q3_error_db", "iqr_error_db",
                 "whisker_low_error_db", "whisker_high_error_db", "mean_cond_number", "fraction_error_below_3db"))
    summary: dict[str, float] = {}
    warn = []
    for m in counts:
        errs, conds = [], []
        for trial_seed in _trial_seeds(spec.seed, spec.trials, m):
            _, reports, notes = _flood_run(spec, topo, model, config, m, trial_seed)
            warn.extend(notes)
            errs.extend(l.error_db for r in reports for l in r.links if l.error_db is not None)
            conds.extend(c for r in reports for h, c in r.hop_condition_numbers.items() if h >= 1)
        e = np.asarray(errs)
        q1, med, q3, iqr, lo, hi = _box_stats(e)
        box.rows.append((m, int(e.size), q1, med, q3, iqr, lo, hi, float(np.mean(conds)), float(np.mean(e < 3.0))))
        summary[f"iqr_m{m}"] = iqr
        summary[f"median_m{m}"] = med
        summary[f"mean_cond_m{m}"] = float(np.mean(conds))
    if len(counts) > 2:
        # descriptive only: does the median error fall as vectors are added?
        summary["median_trend_spearman"] = float(spearmanr(counts, box.column("median_error_db")).statistic)
    return ScenarioResult(spec.name, spec.kind, {"boxplot.csv": box}, summary, sorted(set(warn)))


KINDS: dict[str, Callable[[ScenarioSpec], ScenarioResult]] = {
    "linearity-study": run_linearity_study,
    "controlled-ige": run_controlled_ige,
    "condition-number-sweep": run_condition_number_sweep,
    "flood-ige": run_flood_ige,
    "vector-count-sweep": run_vector_count_sweep,
}


def run_scenario(spec: ScenarioSpec) -> ScenarioResult:
    spec.validate()
    return KINDS[spec.kind](spec)
