"""Packet-routing simulator for LEO satellite constellations.

A discrete-event engine over a time-variant satellite/gateway graph, with
centralized shortest-path routing, distributed tabular Q-Routing, and
multi-agent deep value-network routing, plus post-training model-similarity
and federated-averaging analysis.
"""
from .constants import (
    BOLTZMANN_J_K,
    EARTH_MU_M3_S2,
    EARTH_RADIUS_M,
    EARTH_ROTATION_RAD_S,
    SPEED_OF_LIGHT_M_S,
)
from .orbit import (
    CONSTELLATION_PRESETS,
    ConfigurationError,
    ConstellationSpec,
    GatewaySite,
    SatelliteState,
    build_constellation,
    constellation_preset,
    gateway_position,
    orbital_period,
    propagate,
)
from .topology import Edge, TopologySnapshot, rebuild, visible
from .channel import DeadLinkError, ModcodTable, RadioParams
from .engine import EngineFault, HopFeedback, Packet, Simulator, TrafficSpec
from .routing import (
    DeepPolicy,
    QRoutingPolicy,
    RewardSpec,
    RoutingPolicy,
    ShortestPathPolicy,
)
from .analysis import aggregate, cka_matrix, linear_cka, probe_activations

__version__ = "0.1.0"

__all__ = [
    "BOLTZMANN_J_K",
    "EARTH_MU_M3_S2",
    "EARTH_RADIUS_M",
    "EARTH_ROTATION_RAD_S",
    "SPEED_OF_LIGHT_M_S",
    "CONSTELLATION_PRESETS",
    "ConfigurationError",
    "ConstellationSpec",
    "GatewaySite",
    "SatelliteState",
    "build_constellation",
    "constellation_preset",
    "gateway_position",
    "orbital_period",
    "propagate",
    "Edge",
    "TopologySnapshot",
    "rebuild",
    "visible",
    "DeadLinkError",
    "ModcodTable",
    "RadioParams",
    "EngineFault",
    "HopFeedback",
    "Packet",
    "Simulator",
    "TrafficSpec",
    "DeepPolicy",
    "QRoutingPolicy",
    "RewardSpec",
    "RoutingPolicy",
    "ShortestPathPolicy",
    "aggregate",
    "cka_matrix",
    "linear_cka",
    "probe_activations",
    "__version__",
]
