"""Link budget, adaptive coding-and-modulation rate lookup, and hop timing.

A link's SNR follows from free-space loss at the current slant range; the
data rate is the spectral efficiency of the highest table row whose SNR
threshold is met (inclusive boundary), times the channel bandwidth, and
zero when even the lowest row is out of reach.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .constants import BOLTZMANN_J_K, SPEED_OF_LIGHT_M_S
from . import topology


class DeadLinkError(RuntimeError):
    """Transmission was requested on a zero-rate link."""


@dataclass(frozen=True)
class RadioParams:
    """One transmit/receive parameter set (used per link kind)."""

    eirp_dbw: float
    rx_gain_over_temp_db_k: float
    carrier_hz: float
    bandwidth_hz: float

    def __post_init__(self) -> None:
        if not self.carrier_hz > 0:
            raise ValueError(f"carrier_hz must be > 0, got {self.carrier_hz}")
        if not self.bandwidth_hz > 0:
            raise ValueError(f"bandwidth_hz must be > 0, got {self.bandwidth_hz}")


@dataclass(frozen=True)
class ModcodRow:
    name: str
    min_snr_db: float
    spectral_efficiency: float


@dataclass(frozen=True)
class ModcodTable:
    """Ordered modulation-and-coding rows, strictly increasing in both
    threshold and efficiency."""

    rows: tuple[ModcodRow, ...]

    def __post_init__(self) -> None:
        if not self.rows:
            raise ValueError("modcod table must have at least one row")
        for prev, cur in zip(self.rows, self.rows[1:]):
            if not (cur.min_snr_db > prev.min_snr_db):
                raise ValueError("modcod table: min_snr_db must be strictly increasing")
            if not (cur.spectral_efficiency > prev.spectral_efficiency):
                raise ValueError(
                    "modcod table: spectral_efficiency must be strictly increasing"
                )

    @classmethod
    def from_csv(cls, path: str | Path) -> "ModcodTable":
        rows = []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            expected = {"name", "min_snr_db", "spectral_efficiency"}
            if reader.fieldnames is None or not expected.issubset(reader.fieldnames):
                raise ValueError(
                    f"modcod file {path}: header must contain {sorted(expected)}"
                )
            for row in reader:
                rows.append(
                    ModcodRow(
                        name=row["name"],
                        min_snr_db=float(row["min_snr_db"]),
                        spectral_efficiency=float(row["spectral_efficiency"]),
                    )
                )
        return cls(rows=tuple(rows))


def default_modcod_path() -> Path:
    return Path(str(resources.files("satnetsim") / "data" / "modcod.csv"))


def free_space_path_loss_db(distance_m: float, carrier_hz: float) -> float:
    return 20.0 * math.log10(
        4.0 * math.pi * distance_m * carrier_hz / SPEED_OF_LIGHT_M_S
    )


def snr_db(distance_m: float, params: RadioParams) -> float:
    """Receive SNR in dB at the given slant range, free-space loss only."""
    if not distance_m > 0:
        raise ValueError(f"distance_m must be > 0, got {distance_m}")
    noise_db = 10.0 * math.log10(BOLTZMANN_J_K * params.bandwidth_hz)
    return (
        params.eirp_dbw
        + params.rx_gain_over_temp_db_k
        - free_space_path_loss_db(distance_m, params.carrier_hz)
        - noise_db
    )


def data_rate_bps(snr: float, table: ModcodTable, bandwidth_hz: float) -> float:
    """Rate of the highest row whose threshold is met; 0 below the table."""
    rate = 0.0
    for row in table.rows:
        if snr >= row.min_snr_db:
            rate = row.spectral_efficiency * bandwidth_hz
        else:
            break
    return rate


def propagation_time_s(distance_m: float) -> float:
    if distance_m < 0:
        raise ValueError(f"distance_m must be >= 0, got {distance_m}")
    return distance_m / SPEED_OF_LIGHT_M_S


def transmission_time_s(packet_bits: int, rate_bps: float) -> float:
    if not packet_bits > 0:
        raise ValueError(f"packet_bits must be > 0, got {packet_bits}")
    if rate_bps <= 0:
        raise DeadLinkError("link rate is zero; packet cannot be transmitted")
    return packet_bits / rate_bps


def make_rate_fn(
    radio: dict[str, RadioParams], table: ModcodTable
) -> topology.RateFn:
    """Rate filler for topology rebuilds.

    ``radio`` maps link kinds to parameter sets: keys ``isl``, ``gsl_up``,
    ``gsl_down``. For GSL edges the first returned rate is the uplink
    (gateway to satellite) and the second the downlink.
    """
    missing = {"isl", "gsl_up", "gsl_down"} - radio.keys()
    if missing:
        raise ValueError(f"radio params missing link kinds: {sorted(missing)}")

    def rate_fn(kind: str, distance_m: float) -> tuple[float, float]:
        if kind == topology.GSL:
            up = data_rate_bps(
                snr_db(distance_m, radio["gsl_up"]), table, radio["gsl_up"].bandwidth_hz
            )
            down = data_rate_bps(
                snr_db(distance_m, radio["gsl_down"]),
                table,
                radio["gsl_down"].bandwidth_hz,
            )
            return up, down
        rate = data_rate_bps(
            snr_db(distance_m, radio["isl"]), table, radio["isl"].bandwidth_hz
        )
        return rate, rate

    return rate_fn
