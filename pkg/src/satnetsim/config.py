"""Scenario configuration: a TOML document validated into typed settings.

Every key is optional; an empty file yields the default scenario. Unknown
keys are rejected with the full dotted path, as are type and range errors,
so a typo never silently falls back to a default. Scalar keys may be
overridden through environment variables named
``SATNETSIM_<SECTION>__<KEY>`` (for example
``SATNETSIM_TRAFFIC__LOAD_FRACTION=0.2``); values are parsed as TOML
scalars.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import channel, orbit
from .orbit import ConfigurationError

ENV_PREFIX = "SATNETSIM_"

POLICIES = ("dijkstra", "q_routing", "madrl")


@dataclass(frozen=True)
class ConstellationConfig:
    preset: str | None = "kepler"
    num_planes: int = 7
    sats_per_plane: int = 20
    altitude_km: float = 600.0
    inclination_deg: float = 98.6
    walker: str = "star"
    phasing_offset_rad: float | None = None

    def spec(self) -> orbit.ConstellationSpec:
        if self.preset is not None:
            return orbit.constellation_preset(self.preset)
        return orbit.ConstellationSpec(
            num_planes=self.num_planes,
            sats_per_plane=self.sats_per_plane,
            altitude_m=self.altitude_km * 1e3,
            inclination_rad=math.radians(self.inclination_deg),
            walker_kind=self.walker,
            phasing_offset_rad=self.phasing_offset_rad,
        )


@dataclass(frozen=True)
class GatewayConfig:
    file: str | None = None          # None -> bundled 18-site network
    count: int = 8
    min_elevation_deg: float = 10.0

    def sites(self) -> list[orbit.GatewaySite]:
        path = Path(self.file) if self.file else orbit.default_gateway_path()
        sites = orbit.load_gateway_csv(path)
        if not (1 <= self.count <= len(sites)):
            raise ConfigurationError(
                f"gateways.count: need 1..{len(sites)} for {path}, got {self.count}"
            )
        return sites[: self.count]


@dataclass(frozen=True)
class TopologyConfig:
    update_interval_s: float = 15.0


@dataclass(frozen=True)
class TrafficConfig:
    load_fraction: float = 0.1
    packet_bits: int = 64800


@dataclass(frozen=True)
class QueueConfig:
    capacity: int = 100
    ttl_hops: int = 250


@dataclass(frozen=True)
class RoutingConfig:
    policy: str = "dijkstra"
    scheme: str = "hop"              # dijkstra only: data_rate | slant_range | hop


@dataclass(frozen=True)
class LearningConfig:
    alpha: float = 0.25
    gamma: float = 0.95
    learning_rate: float = 1e-3
    batch_size: int = 32
    target_sync: int = 500
    buffer_capacity: int = 10_000
    ddqn: bool = True
    phase: str = "offline"           # offline | online
    exploit: bool = False
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_steps: int = 20_000
    delivery_bonus: float = 2.0
    drop_penalty: float = -2.0
    hop_cost_scale: float = 1.0
    hidden: tuple[int, ...] = (64, 64)
    model_import: str | None = None
    qtables_import: str | None = None


@dataclass(frozen=True)
class RadioConfig:
    eirp_dbw: float
    gain_over_temp_db_k: float
    carrier_hz: float
    bandwidth_hz: float

    def params(self) -> channel.RadioParams:
        return channel.RadioParams(
            eirp_dbw=self.eirp_dbw,
            rx_gain_over_temp_db_k=self.gain_over_temp_db_k,
            carrier_hz=self.carrier_hz,
            bandwidth_hz=self.bandwidth_hz,
        )


# Defaults calibrated once against the kepler preset at epoch 0 so that
# nearest-neighbour ISLs land mid-table; all values are assumptions, not
# measured link budgets.
DEFAULT_RADIO = {
    "isl": RadioConfig(25.0, 15.0, 26e9, 20e6),
    "gsl_up": RadioConfig(50.0, 5.0, 30e9, 20e6),
    "gsl_down": RadioConfig(20.0, 30.0, 20e9, 20e6),
}


@dataclass(frozen=True)
class OutputConfig:
    charts: bool = True
    routes_dump: bool = False
    record_paths: bool = True


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 42
    duration_s: float = 60.0
    output_dir: str = "runs/out"
    modcod_file: str | None = None
    constellation: ConstellationConfig = field(default_factory=ConstellationConfig)
    gateways: GatewayConfig = field(default_factory=GatewayConfig)
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    queue: QueueConfig = field(default_factory=QueueConfig)
    routing: RoutingConfig = field(default_factory=RoutingConfig)
    learning: LearningConfig = field(default_factory=LearningConfig)
    radio: dict = field(default_factory=lambda: dict(DEFAULT_RADIO))
    outputs: OutputConfig = field(default_factory=OutputConfig)

    def modcod_table(self) -> channel.ModcodTable:
        path = Path(self.modcod_file) if self.modcod_file else channel.default_modcod_path()
        return channel.ModcodTable.from_csv(path)

    def to_dict(self) -> dict:
        def unfold(obj):
            if hasattr(obj, "__dataclass_fields__"):
                return {f.name: unfold(getattr(obj, f.name)) for f in fields(obj)}
            if isinstance(obj, dict):
                return {k: unfold(v) for k, v in obj.items()}
            if isinstance(obj, tuple):
                return list(obj)
            return obj

        return unfold(self)


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigurationError(message)


def _typed(raw: dict, path: str, key: str, kind, default):
    """Fetch raw[key] coerced to ``kind``; int->float promotion only."""
    if key not in raw:
        return default
    value = raw.pop(key)
    where = f"{path}.{key}" if path else key
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if kind is int and isinstance(value, bool):
        raise ConfigurationError(f"{where}: expected int, got bool")
    if not isinstance(value, kind):
        raise ConfigurationError(
            f"{where}: expected {kind.__name__}, got {type(value).__name__} ({value!r})"
        )
    return value


def _reject_unknown(raw: dict, path: str) -> None:
    if raw:
        keys = ", ".join(sorted(raw))
        raise ConfigurationError(f"unknown key(s) under '{path or 'top level'}': {keys}")


def _parse_constellation(raw: dict) -> ConstellationConfig:
    preset = _typed(raw, "constellation", "preset", str, None)
    explicit = {
        k: raw.get(k)
        for k in ("num_planes", "sats_per_plane", "altitude_km", "inclination_deg", "walker")
        if k in raw
    }
    if preset is None and not explicit:
        preset = "kepler"
    if preset is not None and explicit:
        raise ConfigurationError(
            "constellation: give either 'preset' or explicit shell parameters, not both"
        )
    cfg = ConstellationConfig(
        preset=preset,
        num_planes=_typed(raw, "constellation", "num_planes", int, 7),
        sats_per_plane=_typed(raw, "constellation", "sats_per_plane", int, 20),
        altitude_km=_typed(raw, "constellation", "altitude_km", float, 600.0),
        inclination_deg=_typed(raw, "constellation", "inclination_deg", float, 98.6),
        walker=_typed(raw, "constellation", "walker", str, "star"),
        phasing_offset_rad=_typed(raw, "constellation", "phasing_offset_rad", float, None),
    )
    _reject_unknown(raw, "constellation")
    cfg.spec()  # raises ConfigurationError on bad shell parameters
    return cfg


def _parse_radio(raw: dict) -> dict:
    out = dict(DEFAULT_RADIO)
    for kind in ("isl", "gsl_up", "gsl_down"):
        if kind not in raw:
            continue
        sub = dict(raw.pop(kind))
        base = DEFAULT_RADIO[kind]
        cfg = RadioConfig(
            eirp_dbw=_typed(sub, f"radio.{kind}", "eirp_dbw", float, base.eirp_dbw),
            gain_over_temp_db_k=_typed(
                sub, f"radio.{kind}", "gain_over_temp_db_k", float, base.gain_over_temp_db_k
            ),
            carrier_hz=_typed(sub, f"radio.{kind}", "carrier_hz", float, base.carrier_hz),
            bandwidth_hz=_typed(sub, f"radio.{kind}", "bandwidth_hz", float, base.bandwidth_hz),
        )
        _require(cfg.carrier_hz > 0, f"radio.{kind}.carrier_hz: must be > 0")
        _require(cfg.bandwidth_hz > 0, f"radio.{kind}.bandwidth_hz: must be > 0")
        _reject_unknown(sub, f"radio.{kind}")
        out[kind] = cfg
    _reject_unknown(raw, "radio")
    return out


def parse_config(doc: dict) -> ScenarioConfig:
    """Validate a raw TOML tree into a ScenarioConfig."""
    raw = dict(doc)

    seed = _typed(raw, "", "seed", int, 42)
    duration_s = _typed(raw, "", "duration_s", float, 60.0)
    _require(duration_s >= 0, f"duration_s: must be >= 0, got {duration_s}")
    output_dir = _typed(raw, "", "output_dir", str, "runs/out")
    modcod_file = _typed(raw, "", "modcod_file", str, None)

    constellation = _parse_constellation(dict(raw.pop("constellation", {})))

    g = dict(raw.pop("gateways", {}))
    gateways = GatewayConfig(
        file=_typed(g, "gateways", "file", str, None),
        count=_typed(g, "gateways", "count", int, 8),
        min_elevation_deg=_typed(g, "gateways", "min_elevation_deg", float, 10.0),
    )
    _require(gateways.count >= 2, f"gateways.count: need at least 2, got {gateways.count}")
    _require(
        0.0 <= gateways.min_elevation_deg < 90.0,
        f"gateways.min_elevation_deg: need 0..90, got {gateways.min_elevation_deg}",
    )
    _reject_unknown(g, "gateways")

    t = dict(raw.pop("topology", {}))
    topo = TopologyConfig(
        update_interval_s=_typed(t, "topology", "update_interval_s", float, 15.0)
    )
    _require(topo.update_interval_s > 0, "topology.update_interval_s: must be > 0")
    _reject_unknown(t, "topology")

    tr = dict(raw.pop("traffic", {}))
    traffic = TrafficConfig(
        load_fraction=_typed(tr, "traffic", "load_fraction", float, 0.1),
        packet_bits=_typed(tr, "traffic", "packet_bits", int, 64800),
    )
    _require(
        0.0 < traffic.load_fraction <= 1.5,
        f"traffic.load_fraction: need (0, 1.5], got {traffic.load_fraction}",
    )
    _require(traffic.packet_bits > 0, "traffic.packet_bits: must be > 0")
    _reject_unknown(tr, "traffic")

    q = dict(raw.pop("queue", {}))
    queue = QueueConfig(
        capacity=_typed(q, "queue", "capacity", int, 100),
        ttl_hops=_typed(q, "queue", "ttl_hops", int, 250),
    )
    _require(queue.capacity >= 0, "queue.capacity: must be >= 0")
    _require(queue.ttl_hops > 0, "queue.ttl_hops: must be > 0")
    _reject_unknown(q, "queue")

    r = dict(raw.pop("routing", {}))
    routing = RoutingConfig(
        policy=_typed(r, "routing", "policy", str, "dijkstra"),
        scheme=_typed(r, "routing", "scheme", str, "hop"),
    )
    _require(
        routing.policy in POLICIES,
        f"routing.policy: unknown {routing.policy!r}; known: {POLICIES}",
    )
    from .routing.shortest_path import WEIGHT_SCHEMES

    _require(
        routing.scheme in WEIGHT_SCHEMES,
        f"routing.scheme: unknown {routing.scheme!r}; known: {WEIGHT_SCHEMES}",
    )
    _reject_unknown(r, "routing")

    l = dict(raw.pop("learning", {}))
    hidden_raw = l.pop("hidden", [64, 64])
    if not (
        isinstance(hidden_raw, list)
        and hidden_raw
        and all(isinstance(h, int) and h > 0 for h in hidden_raw)
    ):
        raise ConfigurationError("learning.hidden: expected a list of positive ints")
    learning = LearningConfig(
        alpha=_typed(l, "learning", "alpha", float, 0.25),
        gamma=_typed(l, "learning", "gamma", float, 0.95),
        learning_rate=_typed(l, "learning", "learning_rate", float, 1e-3),
        batch_size=_typed(l, "learning", "batch_size", int, 32),
        target_sync=_typed(l, "learning", "target_sync", int, 500),
        buffer_capacity=_typed(l, "learning", "buffer_capacity", int, 10_000),
        ddqn=_typed(l, "learning", "ddqn", bool, True),
        phase=_typed(l, "learning", "phase", str, "offline"),
        exploit=_typed(l, "learning", "exploit", bool, False),
        epsilon_start=_typed(l, "learning", "epsilon_start", float, 1.0),
        epsilon_end=_typed(l, "learning", "epsilon_end", float, 0.05),
        epsilon_decay_steps=_typed(l, "learning", "epsilon_decay_steps", int, 20_000),
        delivery_bonus=_typed(l, "learning", "delivery_bonus", float, 2.0),
        drop_penalty=_typed(l, "learning", "drop_penalty", float, -2.0),
        hop_cost_scale=_typed(l, "learning", "hop_cost_scale", float, 1.0),
        hidden=tuple(hidden_raw),
        model_import=_typed(l, "learning", "model_import", str, None),
        qtables_import=_typed(l, "learning", "qtables_import", str, None),
    )
    _require(0.0 <= learning.alpha <= 1.0, "learning.alpha: need 0..1")
    _require(0.0 <= learning.gamma <= 1.0, "learning.gamma: need 0..1")
    _require(learning.phase in ("offline", "online"), "learning.phase: offline or online")
    _require(
        0.0 <= learning.epsilon_end <= learning.epsilon_start <= 1.0,
        "learning: need 0 <= epsilon_end <= epsilon_start <= 1",
    )
    _require(
        learning.delivery_bonus > 0 > learning.drop_penalty,
        "learning: need delivery_bonus > 0 > drop_penalty",
    )
    _reject_unknown(l, "learning")

    radio = _parse_radio(dict(raw.pop("radio", {})))

    o = dict(raw.pop("outputs", {}))
    outputs = OutputConfig(
        charts=_typed(o, "outputs", "charts", bool, True),
        routes_dump=_typed(o, "outputs", "routes_dump", bool, False),
        record_paths=_typed(o, "outputs", "record_paths", bool, True),
    )
    _reject_unknown(o, "outputs")

    _reject_unknown(raw, "")

    return ScenarioConfig(
        seed=seed,
        duration_s=duration_s,
        output_dir=output_dir,
        modcod_file=modcod_file,
        constellation=constellation,
        gateways=gateways,
        topology=topo,
        traffic=traffic,
        queue=queue,
        routing=routing,
        learning=learning,
        radio=radio,
        outputs=outputs,
    )


def _apply_env_overrides(doc: dict, environ=os.environ) -> dict:
    """SATNETSIM_SECTION__KEY=value overrides onto the raw tree."""
    for name, value in sorted(environ.items()):
        if not name.startswith(ENV_PREFIX):
            continue
        dotted = name[len(ENV_PREFIX):].lower().split("__")
        try:
            parsed = tomllib.loads(f"v = {value}")["v"]
        except tomllib.TOMLDecodeError:
            parsed = value
        node = doc
        for part in dotted[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigurationError(
                    f"env override {name}: {'.'.join(dotted)} is not a section"
                )
        node[dotted[-1]] = parsed
    return doc


def load_config(path: str | Path | None, environ=os.environ) -> ScenarioConfig:
    """Parse, env-override and validate a scenario file (None -> defaults)."""
    doc: dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                doc = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigurationError(f"config file not found: {path}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigurationError(f"config file {path}: {exc}") from None
    doc = _apply_env_overrides(doc, environ)
    return parse_config(doc)


def apply_overrides(cfg_doc: dict, assignments: list[str]) -> dict:
    """CLI --set key=value pairs, dotted paths, TOML scalar values."""
    for item in assignments:
        if "=" not in item:
            raise ConfigurationError(f"--set expects key=value, got {item!r}")
        key, _, value = item.partition("=")
        parts = key.strip().split(".")
        try:
            parsed = tomllib.loads(f"v = {value}")["v"]
        except tomllib.TOMLDecodeError:
            parsed = value
        node = cfg_doc
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigurationError(f"--set {key}: {part} is not a section")
        node[parts[-1]] = parsed
    return cfg_doc
