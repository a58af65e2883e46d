"""Link budget, MCS thresholds and the SNR-to-capacity regression.

The capacity of one wireless channel towards a ground user is modelled as a
continuous function of the SNR: an ordinary least-squares line through the
(minimum SNR, PHY rate) points of the MCS table at a given target BER,
clamped to ``[0, top rate]`` and cut off below the lowest MCS threshold.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import norm
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

SPEED_OF_LIGHT = 299_792_458.0  # m/s

# Coding gain subtracted from the uncoded AWGN requirement, per code rate (dB).
CODING_GAIN_DB = {"1/2": 5.5, "2/3": 4.5, "3/4": 4.0, "5/6": 3.5}

# IEEE 802.11ac VHT, 20 MHz, 800 ns GI, one spatial stream.
VHT20_MCS = [
    # index, modulation order, code rate, PHY rate (bit/s)
    (0, 2, "1/2", 6.5e6),
    (1, 4, "1/2", 13.0e6),
    (2, 4, "3/4", 19.5e6),
    (3, 16, "1/2", 26.0e6),
    (4, 16, "3/4", 39.0e6),
    (5, 64, "2/3", 52.0e6),
    (6, 64, "3/4", 58.5e6),
    (7, 64, "5/6", 65.0e6),
    (8, 256, "3/4", 78.0e6),
]

DEFAULT_BERS = (1e-5, 1e-10)


class RadioConfigError(ValueError):
    """Raised for an invalid radio configuration or MCS table."""


@dataclass(frozen=True)
class RadioConfig:
    tx_power: float = 20.0  # dBm
    tx_gain: float = 0.0  # dBi
    rx_gain: float = 0.0  # dBi
    carrier_freq: float = 5.25e9  # Hz
    noise_power: float = -94.0  # dBm per channel_bandwidth
    channel_bandwidth: float = 20e6  # Hz
    max_channels_total: int = 8

    def __post_init__(self):
        if self.carrier_freq <= 0:
            raise RadioConfigError("carrier_freq must be positive")
        if self.channel_bandwidth <= 0:
            raise RadioConfigError("channel_bandwidth must be positive")
        if self.noise_power >= self.tx_power:
            raise RadioConfigError("noise_power must be below tx_power")
        if self.max_channels_total < 1:
            raise RadioConfigError("max_channels_total must be >= 1")

    def to_dict(self) -> dict:
        return {
            "tx_power": self.tx_power,
            "tx_gain": self.tx_gain,
            "rx_gain": self.rx_gain,
            "carrier_freq": self.carrier_freq,
            "noise_power": self.noise_power,
            "channel_bandwidth": self.channel_bandwidth,
            "max_channels_total": self.max_channels_total,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RadioConfig":
        return cls(**d)


@dataclass(frozen=True)
class McsEntry:
    index: int
    phy_rate: float  # bit/s
    min_snr_by_ber: dict = field(default_factory=dict)  # BER -> dB
    modulation_order: int | None = None
    coding_rate: str | None = None

    def threshold(self, ber: float) -> float:
        for key, value in self.min_snr_by_ber.items():
            if math.isclose(key, ber, rel_tol=1e-9):
                return value
        raise RadioConfigError(f"BER {ber:g} not in MCS table (entry {self.index})")

    def to_dict(self) -> dict:
        d = {"index": self.index, "phy_rate": self.phy_rate}
        if self.modulation_order is not None:
            d["modulation_order"] = self.modulation_order
        if self.coding_rate is not None:
            d["coding_rate"] = self.coding_rate
        d["min_snr_by_ber"] = {_ber_key(b): v for b, v in sorted(self.min_snr_by_ber.items(), reverse=True)}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "McsEntry":
        return cls(
            index=int(d["index"]),
            phy_rate=float(d["phy_rate"]),
            min_snr_by_ber={float(k): float(v) for k, v in d["min_snr_by_ber"].items()},
            modulation_order=d.get("modulation_order"),
            coding_rate=d.get("coding_rate"),
        )


def _ber_key(ber: float) -> str:
    return f"{ber:g}"


# ---------------------------------------------------------------------------
# link budget

def path_loss(distance, freq):
    """Free-space path loss in dB for ``distance`` metres at ``freq`` Hz."""
    d = np.asarray(distance, dtype=float)
    if np.any(d <= 0) or freq <= 0:
        raise ValueError("path_loss requires distance > 0 and freq > 0")
    out = 20.0 * np.log10(d) + 20.0 * math.log10(freq) + 20.0 * math.log10(4.0 * math.pi / SPEED_OF_LIGHT)
    return float(out) if out.ndim == 0 else out


def received_power(cfg: RadioConfig, distance):
    return cfg.tx_power + cfg.tx_gain + cfg.rx_gain - path_loss(distance, cfg.carrier_freq)


def snr(cfg: RadioConfig, distance):
    """SNR in dB over one channel of ``cfg.channel_bandwidth``."""
    return received_power(cfg, distance) - cfg.noise_power


def wide_channel_snr(snr_db, n_channels):
    """SNR seen on a single channel bonded from ``n_channels`` base channels.

    Noise power grows linearly with bandwidth while transmit power is fixed.
    """
    return np.asarray(snr_db, dtype=float) - 10.0 * np.log10(np.maximum(n_channels, 1))


# ---------------------------------------------------------------------------
# MCS thresholds

def uncoded_snr_threshold(modulation_order: int, ber: float) -> float:
    """Es/N0 (dB) at which Gray-coded BPSK / square M-QAM reaches ``ber`` on AWGN."""
    if not 0 < ber < 1:
        raise ValueError("ber must lie in (0, 1)")
    m = modulation_order
    if m == 2:
        x = norm.isf(ber)
        gamma = x * x / 2.0
    else:
        k = math.log2(m)
        coef = (4.0 / k) * (1.0 - 1.0 / math.sqrt(m))
        x = norm.isf(ber / coef)
        gamma = x * x * (m - 1) / 3.0
    return 10.0 * math.log10(gamma)


def analytic_mcs_table(bers: Iterable[float] = DEFAULT_BERS) -> list[McsEntry]:
    bers = tuple(bers)
    table = []
    for index, order, rate, phy in VHT20_MCS:
        thresholds = {
            b: round(uncoded_snr_threshold(order, b) - CODING_GAIN_DB[rate], 4) for b in bers
        }
        table.append(McsEntry(index, phy, thresholds, order, rate))
    return table


def validate_mcs_table(table: Sequence[McsEntry]) -> None:
    if not table:
        raise RadioConfigError("empty MCS table")
    entries = sorted(table, key=lambda e: e.index)
    bers = set(entries[0].min_snr_by_ber)
    for prev, cur in zip(entries, entries[1:]):
        if cur.phy_rate <= prev.phy_rate:
            raise RadioConfigError(f"phy_rate not increasing at MCS {cur.index}")
        for b in bers:
            if cur.threshold(b) <= prev.threshold(b):
                raise RadioConfigError(f"threshold not increasing at MCS {cur.index}, BER {b:g}")
    for e in entries:
        ordered = sorted(e.min_snr_by_ber.items())  # strictest BER first
        for (_, strict), (_, loose) in zip(ordered, ordered[1:]):
            if strict <= loose:
                raise RadioConfigError(f"MCS {e.index}: lower BER must need higher SNR")


def load_mcs_table(path: str | Path | None = None) -> list[McsEntry]:
    """Load an MCS table from JSON; the packaged 802.11ac table by default."""
    if path is None:
        text = resources.files("slicer").joinpath("data/mcs_80211ac_vht20.json").read_text()
    else:
        text = Path(path).read_text()
    table = [McsEntry.from_dict(d) for d in json.loads(text)]
    validate_mcs_table(table)
    return sorted(table, key=lambda e: e.index)


def dump_mcs_table(table: Sequence[McsEntry]) -> str:
    return json.dumps([e.to_dict() for e in table], indent=2) + "\n"


def mcs_for_snr(table: Sequence[McsEntry], snr_db: float, ber: float) -> McsEntry | None:
    """Highest MCS whose threshold at ``ber`` is <= ``snr_db`` (inclusive)."""
    best = None
    for entry in sorted(table, key=lambda e: e.index):
        if entry.threshold(ber) <= snr_db:
            best = entry
    return best


# ---------------------------------------------------------------------------
# capacity regression

class CapacityModel(RegressorMixin, BaseEstimator):
    """Linear SNR -> per-channel capacity model for one target BER.

    ``fit`` takes MCS thresholds (dB) as ``X`` and PHY rates (bit/s) as ``y``.

    Attributes
    ----------
    slope_ : float
        Fitted (bit/s)/dB.
    intercept_ : float
        Fitted bit/s at 0 dB.
    snr_cutoff_ : float
        Lowest threshold; capacity is zero below it.
    rate_ceiling_ : float
        Highest PHY rate; the prediction is clamped to it.
    residuals_ : ndarray
        ``y - line(X)`` at the fitted points.
    max_residual_ : float
        ``max(abs(residuals_))``.
    """

    rate_floor = 0.0

    def __init__(self, ber: float = 1e-5):
        self.ber = ber

    def fit(self, X, y):
        x = np.asarray(X, dtype=float).ravel()
        y = np.asarray(y, dtype=float).ravel()
        if x.shape != y.shape:
            raise ValueError("X and y must have the same length")
        if x.size < 2:
            raise ValueError("need at least two MCS points to fit")
        xm, ym = x.mean(), y.mean()
        sxx = float(np.sum((x - xm) ** 2))
        if sxx == 0.0:
            raise ValueError("degenerate fit: all SNR thresholds are equal")
        self.slope_ = float(np.sum((x - xm) * (y - ym)) / sxx)
        self.intercept_ = float(ym - self.slope_ * xm)
        self.snr_cutoff_ = float(x.min())
        self.rate_ceiling_ = float(y.max())
        self.residuals_ = y - (self.slope_ * x + self.intercept_)
        self.max_residual_ = float(np.max(np.abs(self.residuals_)))
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "slope_")
        s = np.asarray(X, dtype=float)
        rate = np.clip(self.slope_ * s + self.intercept_, self.rate_floor, self.rate_ceiling_)
        rate = np.where(s < self.snr_cutoff_, 0.0, rate)
        return rate.ravel() if rate.ndim > 1 else rate

    def to_dict(self) -> dict:
        check_is_fitted(self, "slope_")
        return {
            "ber": self.ber,
            "slope": self.slope_,
            "intercept": self.intercept_,
            "rate_floor": self.rate_floor,
            "rate_ceiling": self.rate_ceiling_,
            "snr_cutoff": self.snr_cutoff_,
            "residuals": [float(r) for r in self.residuals_],
            "max_residual": self.max_residual_,
        }


def fit_capacity_model(table: Sequence[McsEntry], ber: float) -> CapacityModel:
    entries = sorted(table, key=lambda e: e.index)
    x = [e.threshold(ber) for e in entries]
    y = [e.phy_rate for e in entries]
    return CapacityModel(ber=ber).fit(x, y)


def capacity(model: CapacityModel, snr_db):
    """Per-channel capacity (bit/s) at ``snr_db``; scalar in, scalar out."""
    out = model.predict(snr_db)
    return float(out) if np.ndim(out) == 0 else out


def fit_models(table: Sequence[McsEntry], bers: Iterable[float]) -> dict[float, CapacityModel]:
    return {b: fit_capacity_model(table, b) for b in sorted(set(bers))}
