"""Walker constellation geometry and closed-form circular-orbit propagation.

Satellites fly ideal circular orbits organised in a Walker star or delta
pattern. Positions are evaluated analytically from the epoch-0 orbital
elements at any requested epoch — there is no numerical integration, so
splitting a propagation interval into sub-steps cannot accumulate drift.

All positions are expressed in an Earth-centred Earth-fixed frame: the
rotation of the Earth is folded into a secular drift of each plane's
ascending node, which keeps ground-site coordinates constant over time.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .constants import EARTH_MU_M3_S2, EARTH_RADIUS_M, EARTH_ROTATION_RAD_S

WALKER_KINDS = ("star", "delta")


class ConfigurationError(ValueError):
    """A constellation, gateway, or scenario parameter is out of range."""


@dataclass(frozen=True)
class ConstellationSpec:
    """Shell geometry: planes, slots per plane, altitude, inclination, phasing.

    ``phasing_offset_rad`` is the along-track shift between satellites in
    adjacent planes; ``None`` selects the conventional default (0 for star,
    pi / (num_planes * sats_per_plane) for delta).
    """

    num_planes: int
    sats_per_plane: int
    altitude_m: float
    inclination_rad: float
    walker_kind: str = "star"
    phasing_offset_rad: float | None = None

    def __post_init__(self) -> None:
        if self.num_planes < 1:
            raise ConfigurationError(f"num_planes must be >= 1, got {self.num_planes}")
        if self.sats_per_plane < 1:
            raise ConfigurationError(
                f"sats_per_plane must be >= 1, got {self.sats_per_plane}"
            )
        if not self.altitude_m > 0:
            raise ConfigurationError(f"altitude_m must be > 0, got {self.altitude_m}")
        if self.walker_kind not in WALKER_KINDS:
            raise ConfigurationError(
                f"walker_kind must be one of {WALKER_KINDS}, got {self.walker_kind!r}"
            )

    @property
    def raan_spacing_rad(self) -> float:
        """Ascending-node spacing: planes span pi (star) or 2*pi (delta)."""
        span = math.pi if self.walker_kind == "star" else 2.0 * math.pi
        return span / self.num_planes

    @property
    def phase_step_rad(self) -> float:
        if self.phasing_offset_rad is not None:
            return self.phasing_offset_rad
        if self.walker_kind == "star":
            return 0.0
        return math.pi / (self.num_planes * self.sats_per_plane)


@dataclass(frozen=True)
class SatelliteState:
    """One satellite at one epoch.

    The epoch-0 elements (``raan0_rad``, ``anomaly0_rad``) are carried along
    so that any later position is a pure function of absolute epoch time.
    """

    sat_id: tuple[int, int]
    epoch_s: float
    altitude_m: float
    inclination_rad: float
    raan0_rad: float
    anomaly0_rad: float
    position: np.ndarray

    @property
    def plane(self) -> int:
        return self.sat_id[0]

    @property
    def index_in_plane(self) -> int:
        return self.sat_id[1]


@dataclass(frozen=True)
class GatewaySite:
    """A named ground gateway, fixed in the Earth-fixed frame."""

    gw_id: int
    latitude_rad: float
    longitude_rad: float
    name: str = ""

    def __post_init__(self) -> None:
        if abs(self.latitude_rad) > math.pi / 2:
            raise ConfigurationError(
                f"gateway {self.name or self.gw_id}: latitude_rad out of range"
            )
        if not (-math.pi <= self.longitude_rad < math.pi):
            raise ConfigurationError(
                f"gateway {self.name or self.gw_id}: longitude_rad must be in [-pi, pi)"
            )


def orbital_period(altitude_m: float) -> float:
    """Period of a circular orbit at the given altitude, in seconds."""
    if not altitude_m > 0:
        raise ConfigurationError(f"altitude_m must be > 0, got {altitude_m}")
    r = EARTH_RADIUS_M + altitude_m
    return 2.0 * math.pi * math.sqrt(r**3 / EARTH_MU_M3_S2)


def mean_motion(altitude_m: float) -> float:
    """Angular rate along the orbit, rad/s."""
    return 2.0 * math.pi / orbital_period(altitude_m)


def _position_ecef(
    altitude_m: float,
    inclination_rad: float,
    raan0_rad: float,
    anomaly0_rad: float,
    epoch_s: float,
    earth_rate_rad_s: float,
) -> np.ndarray:
    """Closed-form position at an absolute epoch, metres, Earth-fixed frame."""
    r = EARTH_RADIUS_M + altitude_m
    u = anomaly0_rad + mean_motion(altitude_m) * epoch_s
    node = raan0_rad - earth_rate_rad_s * epoch_s
    cos_u, sin_u = math.cos(u), math.sin(u)
    cos_i, sin_i = math.cos(inclination_rad), math.sin(inclination_rad)
    cos_o, sin_o = math.cos(node), math.sin(node)
    return np.array(
        [
            r * (cos_u * cos_o - sin_u * cos_i * sin_o),
            r * (cos_u * sin_o + sin_u * cos_i * cos_o),
            r * sin_u * sin_i,
        ]
    )


def build_constellation(spec: ConstellationSpec) -> list[SatelliteState]:
    """Place every satellite of the shell at epoch 0.

    Within each plane the along-track spacing is exactly
    2*pi / sats_per_plane; plane ascending nodes are spaced per the Walker
    kind, and adjacent planes are phase-shifted by ``phase_step_rad``.
    """
    states: list[SatelliteState] = []
    d_anomaly = 2.0 * math.pi / spec.sats_per_plane
    for p in range(spec.num_planes):
        raan = p * spec.raan_spacing_rad
        for k in range(spec.sats_per_plane):
            anomaly = (k * d_anomaly + p * spec.phase_step_rad) % (2.0 * math.pi)
            states.append(
                SatelliteState(
                    sat_id=(p, k),
                    epoch_s=0.0,
                    altitude_m=spec.altitude_m,
                    inclination_rad=spec.inclination_rad,
                    raan0_rad=raan,
                    anomaly0_rad=anomaly,
                    position=_position_ecef(
                        spec.altitude_m,
                        spec.inclination_rad,
                        raan,
                        anomaly,
                        0.0,
                        EARTH_ROTATION_RAD_S,
                    ),
                )
            )
    return states


def propagate(
    states: list[SatelliteState],
    dt_s: float,
    earth_rate_rad_s: float = EARTH_ROTATION_RAD_S,
) -> list[SatelliteState]:
    """Advance every satellite by ``dt_s`` seconds.

    Positions are recomputed from the stored epoch-0 elements at the new
    absolute epoch, so chained calls commute with a single combined call.
    Passing ``earth_rate_rad_s=0`` freezes the frame against Earth rotation
    (useful for inertial-periodicity checks).
    """
    if dt_s < 0:
        raise ValueError(f"dt_s must be >= 0, got {dt_s}")
    out = []
    for s in states:
        epoch = s.epoch_s + dt_s
        out.append(
            replace(
                s,
                epoch_s=epoch,
                position=_position_ecef(
                    s.altitude_m,
                    s.inclination_rad,
                    s.raan0_rad,
                    s.anomaly0_rad,
                    epoch,
                    earth_rate_rad_s,
                ),
            )
        )
    return out


def gateway_position(site: GatewaySite) -> np.ndarray:
    """Earth-fixed position of a ground site on the spherical Earth, metres."""
    cos_lat = math.cos(site.latitude_rad)
    return np.array(
        [
            EARTH_RADIUS_M * cos_lat * math.cos(site.longitude_rad),
            EARTH_RADIUS_M * cos_lat * math.sin(site.longitude_rad),
            EARTH_RADIUS_M * math.sin(site.latitude_rad),
        ]
    )


# Named shell presets. Plane counts, slots and altitudes follow the four
# production constellations; inclinations are publicly known nominal values
# and can be overridden in the scenario config.
CONSTELLATION_PRESETS: dict[str, ConstellationSpec] = {
    "kepler": ConstellationSpec(7, 20, 600e3, math.radians(98.6), "star"),
    "iridium-next": ConstellationSpec(6, 11, 780e3, math.radians(86.4), "star"),
    "oneweb": ConstellationSpec(36, 18, 1200e3, math.radians(87.9), "star"),
    "starlink": ConstellationSpec(72, 22, 550e3, math.radians(53.0), "delta"),
}


def constellation_preset(name: str) -> ConstellationSpec:
    try:
        return CONSTELLATION_PRESETS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown constellation preset {name!r}; "
            f"known: {sorted(CONSTELLATION_PRESETS)}"
        ) from None


def load_gateway_csv(path: str | Path) -> list[GatewaySite]:
    """Read gateway sites from a CSV with header gw_id,name,lat_deg,lon_deg."""
    sites: list[GatewaySite] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        expected = {"gw_id", "name", "lat_deg", "lon_deg"}
        if reader.fieldnames is None or not expected.issubset(reader.fieldnames):
            raise ConfigurationError(
                f"gateway file {path}: header must contain {sorted(expected)}"
            )
        for row in reader:
            lon = math.radians(float(row["lon_deg"]))
            lon = (lon + math.pi) % (2.0 * math.pi) - math.pi
            sites.append(
                GatewaySite(
                    gw_id=int(row["gw_id"]),
                    latitude_rad=math.radians(float(row["lat_deg"])),
                    longitude_rad=lon,
                    name=row["name"],
                )
            )
    ids = [s.gw_id for s in sites]
    if len(set(ids)) != len(ids):
        raise ConfigurationError(f"gateway file {path}: duplicate gw_id")
    return sites


def default_gateway_path() -> Path:
    """Path of the bundled 18-site ground network (editable config data)."""
    return Path(str(resources.files("satnetsim") / "data" / "gateways.csv"))
