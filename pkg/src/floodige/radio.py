"""Received-power synthesis for concurrent senders.

Powers travel through this module in two units: dBm at the API edges
(transmit levels, RSSI reports) and linear milliwatts for every sum.
Superposition of concurrent senders is only meaningful in mW.

The radio is linear inside a bounded operating region.  Outside of it, and
for strong concurrent arrivals, the model bends in three configurable ways:

* transmit levels above ``tx_linear_max`` radiate at an offset power
  (``tx_distortion``),
* the sum of two strong arrivals is scaled by a power ratio looked up in an
  :class:`AdditivityTable`,
* reports below ``rx_linear_min`` are compressed toward the noise floor.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

__all__ = [
    "DEFAULT_TX_LEVELS_DBM",
    "AdditivityTable",
    "RadioModel",
    "calibrated_additivity_table",
    "dbm_to_mw",
    "distorted_received_mw",
    "ideal_received_mw",
    "load_radio_model",
    "mw_to_dbm",
    "power_ratio",
    "report_rssi",
]

#: nRF52-style transmit levels at or below 0 dBm.
DEFAULT_TX_LEVELS_DBM = (0.0, -4.0, -8.0, -12.0, -16.0, -20.0, -40.0)

# Table bin centers: 4 dB bins aligned so that -40..-20 and -80..-60 dBm split
# into whole bins (centers -38, -34, ..., -22 and -78, ..., -62).
_BIN_WIDTH_DB = 4.0
_GRID_CENTERS = np.arange(-98.0, -17.0, _BIN_WIDTH_DB)

# Diagonal (equal-power) deviation of the power ratio from 1, keyed by the
# mean arrival power in dBm.  Solved offline so that the 4 dB bin means along
# the strong diagonal come out at 1.11, 1.04, 0.98, 0.92, 0.71.
_DIAGONAL_DEVIATION = {
    -46.0: 0.0,
    -42.0: 0.05,
    -38.0: 0.1769,
    -34.0: 0.0582,
    -30.0: -0.0305,
    -26.0: -0.1066,
    -22.0: -0.4330,
    -18.0: -0.7595,
}
# Fraction of the diagonal deviation kept at a given power delta (dB).
_DELTA_DECAY = ((0.0, 4.0, 8.0, 12.0), (1.0, 0.2, 0.03, 0.0))
# Weak-power additivity dip around (-68, -68) dBm.
_WEAK_DIP_CENTER_DBM = -68.0
_WEAK_DIP_DEPTH = -0.1942
_WEAK_DIP_WIDTH_DB = 3.0


def dbm_to_mw(p):
    """Convert dBm to milliwatts.  Works on scalars and arrays; -inf maps to 0."""
    out = np.power(10.0, np.asarray(p, dtype=float) / 10.0)
    return float(out) if out.ndim == 0 else out


def mw_to_dbm(p):
    """Convert milliwatts to dBm.

    Raises
    ------
    ValueError
        If any input is zero or negative.
    """
    arr = np.asarray(p, dtype=float)
    if np.any(~(arr > 0)):
        raise ValueError(f"power must be positive to express in dBm, got {p!r}")
    if arr.ndim == 0:
        return 10.0 * math.log10(float(arr))
    return 10.0 * np.log10(arr)


def power_ratio(actual, expected_sum):
    """Ratio of the measured power to the sum of individually attenuated powers."""
    expected = np.asarray(expected_sum, dtype=float)
    if np.any(expected <= 0):
        raise ValueError("expected_sum must be positive")
    out = np.asarray(actual, dtype=float) / expected
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class AdditivityTable:
    """Power ratio over a square grid of two arrival powers (dBm).

    Lookups interpolate bilinearly between bin centers and clamp to the edge
    of the grid outside it.  The table is symmetric in use: callers pass the
    two strongest arrivals in either order.
    """

    centers_dbm: tuple[float, ...]
    ratios: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        values = np.asarray(self.ratios, dtype=float)
        n = len(self.centers_dbm)
        if values.shape != (n, n):
            raise ValueError(f"ratio grid must be {n}x{n}, got {values.shape}")
        if np.any(np.diff(self.centers_dbm) <= 0):
            raise ValueError("bin centers must be strictly increasing")
        if np.any(~(values > 0)):
            raise ValueError("all power ratios must be positive")

    @classmethod
    def ideal(cls, centers_dbm: Sequence[float] = tuple(_GRID_CENTERS)) -> "AdditivityTable":
        n = len(centers_dbm)
        return cls(tuple(float(c) for c in centers_dbm), tuple((1.0,) * n for _ in range(n)))

    @classmethod
    def from_array(cls, centers_dbm, ratios) -> "AdditivityTable":
        return cls(
            tuple(float(c) for c in centers_dbm),
            tuple(tuple(float(v) for v in row) for row in np.asarray(ratios, dtype=float)),
        )

    @property
    def is_ideal(self) -> bool:
        return bool(np.all(np.asarray(self.ratios) == 1.0))

    def _interpolator(self) -> RegularGridInterpolator:
        # cached on the instance; frozen dataclass forbids normal assignment
        interp = self.__dict__.get("_interp")
        if interp is None:
            centers = np.asarray(self.centers_dbm)
            interp = RegularGridInterpolator((centers, centers), np.asarray(self.ratios))
            object.__setattr__(self, "_interp", interp)
        return interp

    def lookup(self, rx1_dbm, rx2_dbm):
        """Interpolated power ratio at (rx1, rx2) dBm; accepts broadcastable arrays."""
        lo, hi = self.centers_dbm[0], self.centers_dbm[-1]
        a, b = np.broadcast_arrays(
            np.clip(np.asarray(rx1_dbm, dtype=float), lo, hi),
            np.clip(np.asarray(rx2_dbm, dtype=float), lo, hi),
        )
        out = self._interpolator()(np.stack([a.ravel(), b.ravel()], axis=-1)).reshape(a.shape)
        return float(out) if out.ndim == 0 else out

    def to_dict(self) -> dict:
        return {"centers_dbm": list(self.centers_dbm), "ratios": [list(r) for r in self.ratios]}

    @classmethod
    def from_dict(cls, data: Mapping) -> "AdditivityTable":
        return cls.from_array(data["centers_dbm"], data["ratios"])


def calibrated_additivity_table() -> AdditivityTable:
    """Two-sender power-ratio table shaped after nRF52 BLE 1M measurements.

    Along the equal-power diagonal the ratio falls from about 1.11 (bin at
    -38 dBm) to 0.71 (bin at -22 dBm) and sits near 1 around -32 dBm.  Away
    from the diagonal the deviation decays within about 8 dB of power delta.
    Weak arrivals are additive except for a dip around (-68, -68) dBm.
    """
    a, b = np.meshgrid(_GRID_CENTERS, _GRID_CENTERS, indexing="ij")
    mean_power = (a + b) / 2.0
    delta = np.abs(a - b)
    xs = np.array(sorted(_DIAGONAL_DEVIATION))
    ys = np.array([_DIAGONAL_DEVIATION[x] for x in xs])
    decay = np.interp(delta, *_DELTA_DECAY)
    strong = np.interp(mean_power, xs, ys, left=0.0, right=ys[-1]) * decay
    weak = _WEAK_DIP_DEPTH * np.exp(
        -((a - _WEAK_DIP_CENTER_DBM) ** 2 + (b - _WEAK_DIP_CENTER_DBM) ** 2) / (2 * _WEAK_DIP_WIDTH_DB**2)
    )
    return AdditivityTable.from_array(_GRID_CENTERS, 1.0 + strong + weak)


@dataclass(frozen=True)
class RadioModel:
    """Operating region, additivity distortion and RSSI reporting of a radio.

    ``rssi_resolution`` of 0 turns quantization off.  A ``noise_floor`` of
    ``-inf`` removes the additive floor entirely.
    """

    tx_linear_max: float = 0.0
    rx_linear_min: float = -90.0
    rx_linear_max: float = -20.0
    noise_floor: float = -100.0
    rssi_resolution: float = 1.0
    rssi_noise_sigma: float = 0.5
    tx_distortion: Mapping[float, float] = field(default_factory=dict)
    additivity_table: AdditivityTable = field(default_factory=AdditivityTable.ideal)

    def __post_init__(self):
        if not self.rx_linear_min < self.rx_linear_max:
            raise ValueError("rx_linear_min must be below rx_linear_max")
        if self.rssi_resolution < 0:
            raise ValueError("rssi_resolution must be non-negative")
        if self.rssi_noise_sigma < 0:
            raise ValueError("rssi_noise_sigma must be non-negative")
        if math.isnan(self.noise_floor) or self.noise_floor == math.inf:
            raise ValueError("noise_floor must be finite or -inf")

    @classmethod
    def ideal(cls) -> "RadioModel":
        """Perfectly linear, noiseless radio with no floor and no compression."""
        return cls(
            tx_linear_max=math.inf,
            rx_linear_min=-400.0,
            rx_linear_max=400.0,
            noise_floor=-math.inf,
            rssi_resolution=0.0,
            rssi_noise_sigma=0.0,
        )

    @classmethod
    def calibrated(cls, **overrides) -> "RadioModel":
        """Default operating region with the calibrated additivity table."""
        overrides.setdefault("additivity_table", calibrated_additivity_table())
        overrides.setdefault("tx_distortion", {1.0: 1.5, 2.0: 1.5, 3.0: 1.5, 4.0: 1.5, 8.0: 1.5})
        return cls(**overrides)

    @property
    def is_ideal(self) -> bool:
        return not self.tx_distortion and self.additivity_table.is_ideal

    @property
    def noise_floor_mw(self) -> float:
        return dbm_to_mw(self.noise_floor)

    def with_(self, **changes) -> "RadioModel":
        return replace(self, **changes)

    def effective_tx_dbm(self, tx_dbm):
        """Radiated power after transmit distortion above the linear limit."""
        tx = np.array(tx_dbm, dtype=float, ndmin=1)
        if self.tx_distortion:
            for i, level in enumerate(tx):
                if level > self.tx_linear_max:
                    tx[i] = level + self.tx_distortion.get(float(level), 0.0)
        return tx

    def to_dict(self) -> dict:
        def num(x):
            return x if math.isfinite(x) else ("-inf" if x < 0 else "inf")

        return {
            "tx_linear_max": num(self.tx_linear_max),
            "rx_linear_min": self.rx_linear_min,
            "rx_linear_max": self.rx_linear_max,
            "noise_floor": num(self.noise_floor),
            "rssi_resolution": self.rssi_resolution,
            "rssi_noise_sigma": self.rssi_noise_sigma,
            "tx_distortion": {str(k): v for k, v in sorted(self.tx_distortion.items())},
            "additivity_table": self.additivity_table.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "RadioModel":
        """Build a model from a JSON-style mapping.

        ``additivity_table`` may be a full ``{"centers_dbm", "ratios"}`` grid or
        one of the strings ``"ideal"`` / ``"calibrated"``.  Missing keys take
        the defaults; ``"preset"`` (``"ideal"`` or ``"calibrated"``) picks the
        starting point.
        """
        data = dict(data)
        preset = data.pop("preset", None)
        presets = {None: cls, "default": cls, "ideal": cls.ideal, "calibrated": cls.calibrated}
        if preset not in presets:
            raise ValueError(f"unknown radio preset {preset!r}")
        base = presets[preset]()
        kwargs = {}
        for key in ("tx_linear_max", "rx_linear_min", "rx_linear_max", "noise_floor",
                    "rssi_resolution", "rssi_noise_sigma"):
            if key in data:
                kwargs[key] = float(data.pop(key))
        if "tx_distortion" in data:
            kwargs["tx_distortion"] = {float(k): float(v) for k, v in data.pop("tx_distortion").items()}
        if "additivity_table" in data:
            table = data.pop("additivity_table")
            if table == "ideal":
                kwargs["additivity_table"] = AdditivityTable.ideal()
            elif table == "calibrated":
                kwargs["additivity_table"] = calibrated_additivity_table()
            else:
                kwargs["additivity_table"] = AdditivityTable.from_dict(table)
        if data:
            raise ValueError(f"unknown radio model keys: {sorted(data)}")
        return replace(base, **kwargs)


def load_radio_model(path: str | Path) -> RadioModel:
    """Read a :class:`RadioModel` from a JSON file."""
    with open(path, encoding="utf-8") as fh:
        return RadioModel.from_dict(json.load(fh))


def ideal_received_mw(gains_to_receiver, tx_mw, noise_floor_dbm: float = -math.inf) -> float:
    """Sum of individually attenuated powers plus the noise floor, in mW."""
    h = np.asarray(gains_to_receiver, dtype=float)
    p = np.asarray(tx_mw, dtype=float)
    if h.shape != p.shape:
        raise ValueError(f"gain/power length mismatch: {h.shape} vs {p.shape}")
    if np.any(h < 0) or np.any(p < 0):
        raise ValueError("gains and transmit powers must be non-negative")
    return float(h @ p) + dbm_to_mw(noise_floor_dbm)


def distorted_received_mw(gains, tx_dbm, model: RadioModel) -> float:
    """Received power under the model's transmit and additivity distortion.

    The ratio is taken from the two strongest per-sender arrivals; more than
    two senders reuse that pairwise ratio.
    """
    h = np.asarray(gains, dtype=float)
    tx = model.effective_tx_dbm(tx_dbm)
    if h.shape != tx.shape:
        raise ValueError(f"gain/power length mismatch: {h.shape} vs {tx.shape}")
    contributions = h * dbm_to_mw(tx)
    total = float(contributions.sum())
    active = contributions[contributions > 0]
    if active.size >= 2 and not model.additivity_table.is_ideal:
        top2 = np.partition(active, -2)[-2:]
        total *= model.additivity_table.lookup(*(10.0 * np.log10(top2)))
    return total + model.noise_floor_mw


def _compress_dbm(x: float, model: RadioModel) -> float:
    # slope-0.5 compression below the linear region, clamped 10 dB under it
    lo = model.rx_linear_min
    if x < lo:
        x = lo + 0.5 * (x - lo)
    return min(max(x, lo - 10.0), model.rx_linear_max)


def report_rssi(true_rx_mw: float, model: RadioModel, rng: np.random.Generator | None = None) -> float:
    """One RSSI reading (dBm) for a true received power.

    Compression/clamping, then Gaussian noise of ``rssi_noise_sigma`` dB,
    then rounding to ``rssi_resolution``.  ``rng`` may be omitted only for a
    noiseless model.
    """
    if true_rx_mw < 0:
        raise ValueError("received power must be non-negative")
    x = 10.0 * math.log10(true_rx_mw) if true_rx_mw > 0 else -math.inf
    x = _compress_dbm(x, model)
    if model.rssi_noise_sigma > 0:
        if rng is None:
            raise ValueError("a noisy radio model needs an rng")
        x += model.rssi_noise_sigma * rng.standard_normal()
    if model.rssi_resolution > 0:
        x = model.rssi_resolution * round(x / model.rssi_resolution)
    return x
