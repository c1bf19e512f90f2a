"""Centralized Dijkstra routing with full knowledge of the snapshot.

Three edge-weight schemes are supported: the inverse of the link data rate,
the slant range between the endpoints, and unit weight per hop. Links whose
rate is zero in the traversal direction are never usable, whatever the
scheme. Ties between equal-cost paths are broken toward the
lexicographically smallest node-id path, which keeps replays deterministic.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field

from ..topology import Edge, TopologySnapshot
from .base import RoutingPolicy

WEIGHT_SCHEMES = ("data_rate", "slant_range", "hop")


def _edge_weight(edge: Edge, sender: str, scheme: str) -> float | None:
    """Weight of traversing ``edge`` outgoing from ``sender``; None if unusable."""
    rate = edge.rate_from(sender)
    if rate <= 0:
        return None
    if scheme == "data_rate":
        return 1.0 / rate
    if scheme == "slant_range":
        return edge.distance_m
    return 1.0


@dataclass
class RouteTable:
    """Per-destination next hops at one epoch; immutable once built."""

    epoch_s: float
    scheme: str
    next_hop: dict[tuple[str, str], str] = field(default_factory=dict)
    cost: dict[tuple[str, str], float] = field(default_factory=dict)

    def lookup(self, node: str, dst: str) -> str | None:
        return self.next_hop.get((node, dst))

    def path(self, src: str, dst: str, max_len: int = 10_000) -> list[str] | None:
        """Follow next hops from src; None when dst is unreachable."""
        path = [src]
        node = src
        while node != dst:
            node = self.next_hop.get((node, dst))  # type: ignore[assignment]
            if node is None or len(path) > max_len:
                return None
            path.append(node)
        return path


def shortest_path_table(
    snapshot: TopologySnapshot, scheme: str, destinations: list[str]
) -> RouteTable:
    """One Dijkstra pass per destination gateway.

    Costs satisfy cost(u) = min over usable neighbours m of
    weight(u -> m) + cost(m); the stored next hop is the smallest-id
    neighbour attaining that minimum.
    """
    if scheme not in WEIGHT_SCHEMES:
        raise ValueError(f"unknown weight scheme {scheme!r}; known: {WEIGHT_SCHEMES}")
    table = RouteTable(epoch_s=snapshot.epoch_s, scheme=scheme)
    for dst in destinations:
        if dst not in snapshot.adjacency:
            continue
        dist = _dijkstra_to(snapshot, dst, scheme)
        for node, d in dist.items():
            if node == dst:
                continue
            best: str | None = None
            for nbr in sorted(snapshot.adjacency[node]):
                if nbr not in dist:
                    continue
                w = _edge_weight(snapshot.adjacency[node][nbr], node, scheme)
                if w is None:
                    continue
                if w + dist[nbr] == d:
                    best = nbr
                    break
            if best is not None:
                table.next_hop[(node, dst)] = best
                table.cost[(node, dst)] = d
    return table


def _dijkstra_to(
    snapshot: TopologySnapshot, dst: str, scheme: str
) -> dict[str, float]:
    """Minimum cost from every node to ``dst``, honouring directional rates."""
    dist: dict[str, float] = {dst: 0.0}
    done: set[str] = set()
    heap: list[tuple[float, str]] = [(0.0, dst)]
    while heap:
        d, m = heapq.heappop(heap)
        if m in done:
            continue
        done.add(m)
        for u, edge in snapshot.adjacency[m].items():
            if u in done:
                continue
            w = _edge_weight(edge, u, scheme)
            if w is None:
                continue
            nd = d + w
            if nd < dist.get(u, float("inf")):
                dist[u] = nd
                heapq.heappush(heap, (nd, u))
    return dist


class ShortestPathPolicy(RoutingPolicy):
    """Tables are rebuilt eagerly at every topology update; per-packet
    lookups are O(1)."""

    def __init__(self, scheme: str):
        if scheme not in WEIGHT_SCHEMES:
            raise ValueError(f"unknown weight scheme {scheme!r}; known: {WEIGHT_SCHEMES}")
        self.scheme = scheme
        self.table: RouteTable | None = None
        self.tables_built = 0

    def on_topology(self, snapshot) -> None:
        destinations = sorted(self.sim.traffic.active_gateways)
        self.table = shortest_path_table(snapshot, self.scheme, destinations)
        self.tables_built += 1

    def next_hop(self, node: str, packet, now_ns: int) -> str | None:
        return self.table.lookup(node, packet.dst)
