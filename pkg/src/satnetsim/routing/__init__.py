"""Routing policies: centralized shortest-path and distributed learned."""
from .base import RoutingPolicy
from .shortest_path import WEIGHT_SCHEMES, RouteTable, ShortestPathPolicy, shortest_path_table
from .learned import ACTION_NAMES, DeepPolicy, QRoutingPolicy, RewardSpec

__all__ = [
    "RoutingPolicy",
    "WEIGHT_SCHEMES",
    "RouteTable",
    "ShortestPathPolicy",
    "shortest_path_table",
    "ACTION_NAMES",
    "QRoutingPolicy",
    "DeepPolicy",
    "RewardSpec",
]
