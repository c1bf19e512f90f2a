"""Time-variant network graph: ISL matching and gateway-to-satellite links.

Each rebuild produces an immutable snapshot of the graph at one epoch.
Satellites carry four ISL antennas (two intra-plane, one inter-plane east,
one inter-plane west) and a single GSL antenna; gateways carry one GSL
antenna. Intra-plane links form a fixed ring; inter-plane links are chosen
by a distance-greedy matching per adjacent plane pair; each gateway takes
its nearest free visible satellite, closest gateway first.

All tie-breaking is by ascending (plane, index) node id so that a rebuild
is a deterministic function of positions.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .constants import EARTH_RADIUS_M
from .orbit import GatewaySite, SatelliteState, gateway_position

DEFAULT_MIN_ELEVATION_RAD = math.radians(10.0)

ISL_INTRA = "isl_intra"
ISL_INTER = "isl_inter"
GSL = "gsl"

# Directional link slots of one satellite, in fixed order. The RL action
# space indexes into this tuple.
LINK_SLOTS = ("intra_forward", "intra_backward", "inter_east", "inter_west", "down")

# rate_fn(kind, distance_m) -> (rate_a_to_b, rate_b_to_a); for GSL edges
# node_a is always the gateway, so the first element is the uplink rate.
RateFn = Callable[[str, float], tuple[float, float]]


def sat_node_id(plane: int, index: int) -> str:
    return f"S{plane:02d}_{index:02d}"


def gw_node_id(gw_id: int) -> str:
    return f"G{gw_id:02d}"


def is_gateway(node_id: str) -> bool:
    return node_id.startswith("G")


def parse_sat_node(node_id: str) -> tuple[int, int]:
    plane, index = node_id[1:].split("_")
    return int(plane), int(index)


@dataclass(frozen=True, slots=True)
class Edge:
    """One bidirectional link, stored once. ``a`` < ``b`` except for GSL
    edges, where ``a`` is always the gateway."""

    a: str
    b: str
    kind: str
    distance_m: float
    rate_ab_bps: float = 0.0
    rate_ba_bps: float = 0.0

    def __post_init__(self) -> None:
        if not self.distance_m > 0:
            raise ValueError(f"edge {self.a}-{self.b}: distance must be > 0")
        if self.rate_ab_bps < 0 or self.rate_ba_bps < 0:
            raise ValueError(f"edge {self.a}-{self.b}: rates must be >= 0")

    def other(self, node: str) -> str:
        return self.b if node == self.a else self.a

    def rate_from(self, node: str) -> float:
        """Transmission rate when ``node`` is the sending endpoint."""
        return self.rate_ab_bps if node == self.a else self.rate_ba_bps

    @property
    def rate_bps(self) -> float:
        """Symmetric summary rate (the slower direction)."""
        return min(self.rate_ab_bps, self.rate_ba_bps)


@dataclass(frozen=True)
class TopologySnapshot:
    """The graph at one epoch. Immutable after construction."""

    epoch_s: float
    sat_ids: tuple[str, ...]
    gateway_ids: tuple[str, ...]
    edges: tuple[Edge, ...]
    positions: dict[str, np.ndarray]
    adjacency: dict[str, dict[str, Edge]]
    # per-satellite directional slots, same order as LINK_SLOTS
    link_table: dict[str, tuple[Edge | None, ...]]
    gateway_links: dict[str, Edge]          # gw node -> its GSL edge
    unconnected_gateways: tuple[str, ...]
    num_planes: int = 0
    sats_per_plane: int = 0

    @property
    def node_ids(self) -> tuple[str, ...]:
        return self.sat_ids + self.gateway_ids

    def neighbors(self, node: str) -> Iterable[str]:
        return self.adjacency.get(node, {}).keys()

    def edge_between(self, a: str, b: str) -> Edge | None:
        return self.adjacency.get(a, {}).get(b)

    def export_csv(self, path: str | Path) -> None:
        """Edge list dump: epoch, node_a, node_b, kind, distance_m, rate_bps."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "node_a", "node_b", "kind", "distance_m", "rate_bps"])
            for e in self.edges:
                w.writerow(
                    [self.epoch_s, e.a, e.b, e.kind, f"{e.distance_m:.3f}", f"{e.rate_bps:.1f}"]
                )


def visible(
    a: np.ndarray,
    b: np.ndarray,
    min_elevation_rad: float = DEFAULT_MIN_ELEVATION_RAD,
) -> bool:
    """Line-of-sight gate.

    Between two orbiting nodes the segment must clear the Earth sphere;
    when one endpoint sits on the ground the other must stand at least
    ``min_elevation_rad`` above the local horizon.
    """
    ground_cutoff = EARTH_RADIUS_M + 1e3
    a_ground = float(np.linalg.norm(a)) < ground_cutoff
    b_ground = float(np.linalg.norm(b)) < ground_cutoff
    if a_ground and b_ground:
        return False
    if a_ground or b_ground:
        g, s = (a, b) if a_ground else (b, a)
        return _elevation_rad(g, s) >= min_elevation_rad
    return _segment_clears_earth(a, b)


def _elevation_rad(ground: np.ndarray, sat: np.ndarray) -> float:
    los = sat - ground
    d = float(np.linalg.norm(los))
    if d == 0.0:
        return math.pi / 2
    up = ground / float(np.linalg.norm(ground))
    return math.asin(float(np.dot(los, up)) / d)


def _segment_clears_earth(a: np.ndarray, b: np.ndarray) -> bool:
    ab = b - a
    denom = float(np.dot(ab, ab))
    if denom == 0.0:
        return True
    t = -float(np.dot(a, ab)) / denom
    t = min(1.0, max(0.0, t))
    closest = a + t * ab
    return float(np.linalg.norm(closest)) > EARTH_RADIUS_M


def _segments_clear_earth(pos_a: np.ndarray, pos_b: np.ndarray) -> np.ndarray:
    """Vectorised Earth-clearance for every (a, b) pair; returns (N, M) bools."""
    ab = pos_b[None, :, :] - pos_a[:, None, :]
    denom = np.sum(ab * ab, axis=2)
    denom = np.where(denom == 0.0, 1.0, denom)
    t = -np.einsum("ik,ijk->ij", pos_a, ab) / denom
    t = np.clip(t, 0.0, 1.0)
    closest = pos_a[:, None, :] + t[..., None] * ab
    return np.linalg.norm(closest, axis=2) > EARTH_RADIUS_M


def match_intra_plane(states: list[SatelliteState]) -> list[tuple[str, str, float]]:
    """Ring of immediate neighbours within each plane.

    Returns (node_a, node_b, distance) triples with node_a < node_b; a plane
    of one satellite contributes nothing, a plane of two contributes the
    single deduplicated edge.
    """
    planes: dict[int, list[SatelliteState]] = {}
    for s in states:
        planes.setdefault(s.plane, []).append(s)
    out: list[tuple[str, str, float]] = []
    for p in sorted(planes):
        ring = sorted(planes[p], key=lambda s: s.index_in_plane)
        n = len(ring)
        if n < 2:
            continue
        seen: set[tuple[str, str]] = set()
        for s in ring:
            nxt = ring[(s.index_in_plane + 1) % n]
            a, b = sorted((sat_node_id(*s.sat_id), sat_node_id(*nxt.sat_id)))
            if (a, b) in seen:
                continue
            seen.add((a, b))
            d = float(np.linalg.norm(s.position - nxt.position))
            out.append((a, b, d))
    return out


def match_inter_plane_greedy(
    states: list[SatelliteState],
) -> list[tuple[str, str, float]]:
    """Distance-greedy partial matching between adjacent planes.

    For every adjacent plane pair, candidate pairs that clear the Earth are
    sorted by ascending distance (ties by node id) and accepted while the
    east antenna of the lower plane's satellite and the west antenna of the
    higher plane's satellite are both free. Each satellite ends up with at
    most one east and one west link.
    """
    planes: dict[int, list[SatelliteState]] = {}
    for s in states:
        planes.setdefault(s.plane, []).append(s)
    plane_ids = sorted(planes)
    n_planes = len(plane_ids)
    if n_planes < 2:
        return []

    pairs = [(plane_ids[i], plane_ids[i + 1]) for i in range(n_planes - 1)]
    if n_planes > 2:
        pairs.append((plane_ids[-1], plane_ids[0]))

    east_used: set[tuple[int, int]] = set()
    west_used: set[tuple[int, int]] = set()
    out: list[tuple[str, str, float]] = []

    for p_lo, p_hi in pairs:
        sats_a = sorted(planes[p_lo], key=lambda s: s.sat_id)
        sats_b = sorted(planes[p_hi], key=lambda s: s.sat_id)
        pos_a = np.stack([s.position for s in sats_a])
        pos_b = np.stack([s.position for s in sats_b])
        diff = pos_a[:, None, :] - pos_b[None, :, :]
        dist = np.sqrt(np.sum(diff * diff, axis=2))
        clear = _segments_clear_earth(pos_a, pos_b)
        candidates = [
            (float(dist[i, j]), sats_a[i].sat_id, sats_b[j].sat_id)
            for i, j in np.argwhere(clear)
        ]
        candidates.sort()
        for d, ida, idb in candidates:
            if ida in east_used or idb in west_used:
                continue
            east_used.add(ida)
            west_used.add(idb)
            a, b = sorted((sat_node_id(*ida), sat_node_id(*idb)))
            out.append((a, b, d))
    return out


def match_gsl(
    states: list[SatelliteState],
    gateways: list[GatewaySite],
    min_elevation_rad: float = DEFAULT_MIN_ELEVATION_RAD,
) -> tuple[list[tuple[str, str, float]], list[str]]:
    """Assign each gateway its nearest free visible satellite.

    Gateways are served in ascending order of distance-to-nearest-free
    satellite, so when two gateways contend for one satellite the closer
    gateway wins. Returns (gateway_node, sat_node, distance) triples plus
    the list of gateways left unconnected this snapshot.
    """
    if not gateways:
        return [], []
    sat_list = sorted(states, key=lambda s: s.sat_id)
    if not sat_list:
        return [], [gw_node_id(g.gw_id) for g in gateways]
    sat_pos = np.stack([s.position for s in sat_list])
    gw_list = sorted(gateways, key=lambda g: g.gw_id)
    gw_pos = np.stack([gateway_position(g) for g in gw_list])

    diff = gw_pos[:, None, :] - sat_pos[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    # elevation of each satellite above each gateway's horizon
    up = gw_pos / np.linalg.norm(gw_pos, axis=1, keepdims=True)
    los_dot = np.einsum("gsk,gk->gs", -diff, up)
    with np.errstate(invalid="ignore"):
        elev = np.arcsin(np.clip(los_dot / dist, -1.0, 1.0))
    vis = elev >= min_elevation_rad

    sat_free = np.ones(len(sat_list), dtype=bool)
    pending = list(range(len(gw_list)))
    links: list[tuple[str, str, float]] = []
    unconnected: list[str] = []
    while pending:
        best: tuple[float, int, int] | None = None
        for g in pending:
            usable = vis[g] & sat_free
            if not usable.any():
                continue
            masked = np.where(usable, dist[g], np.inf)
            j = int(np.argmin(masked))
            cand = (float(masked[j]), g, j)
            if best is None or cand < best:
                best = cand
        if best is None:
            unconnected.extend(gw_node_id(gw_list[g].gw_id) for g in pending)
            break
        d, g, j = best
        sat_free[j] = False
        pending.remove(g)
        links.append((gw_node_id(gw_list[g].gw_id), sat_node_id(*sat_list[j].sat_id), d))
    return links, sorted(unconnected)


def rebuild(
    epoch_s: float,
    states: list[SatelliteState],
    gateways: list[GatewaySite],
    previous: TopologySnapshot | None = None,
    *,
    min_elevation_rad: float = DEFAULT_MIN_ELEVATION_RAD,
    rate_fn: RateFn | None = None,
    inter_plane_matcher=None,
) -> TopologySnapshot:
    """Full re-match at the given positions.

    Node identities are stable across rebuilds, so per-node queue state kept
    by the engine survives unchanged. ``previous`` is accepted for matching
    policies that need history; the default greedy matcher ignores it.
    ``inter_plane_matcher`` is the slot for alternative matching policies
    (signature: states -> (node_a, node_b, distance) triples).
    """
    del previous  # greedy matching is memoryless
    if inter_plane_matcher is None:
        inter_plane_matcher = match_inter_plane_greedy

    sat_states = sorted(states, key=lambda s: s.sat_id)
    sat_ids = tuple(sat_node_id(*s.sat_id) for s in sat_states)
    gw_sorted = sorted(gateways, key=lambda g: g.gw_id)
    gateway_ids = tuple(gw_node_id(g.gw_id) for g in gw_sorted)

    positions: dict[str, np.ndarray] = {
        sat_node_id(*s.sat_id): s.position for s in sat_states
    }
    for g in gw_sorted:
        positions[gw_node_id(g.gw_id)] = gateway_position(g)

    def _rates(kind: str, d: float) -> tuple[float, float]:
        if rate_fn is None:
            return 0.0, 0.0
        return rate_fn(kind, d)

    edges: list[Edge] = []
    for a, b, d in match_intra_plane(sat_states):
        r_ab, r_ba = _rates(ISL_INTRA, d)
        edges.append(Edge(a, b, ISL_INTRA, d, r_ab, r_ba))
    for a, b, d in inter_plane_matcher(sat_states):
        r_ab, r_ba = _rates(ISL_INTER, d)
        edges.append(Edge(a, b, ISL_INTER, d, r_ab, r_ba))
    gsl_links, unconnected = match_gsl(sat_states, gw_sorted, min_elevation_rad)
    for gw, sat, d in gsl_links:
        r_up, r_down = _rates(GSL, d)
        edges.append(Edge(gw, sat, GSL, d, r_up, r_down))

    adjacency: dict[str, dict[str, Edge]] = {n: {} for n in sat_ids + gateway_ids}
    for e in edges:
        adjacency[e.a][e.b] = e
        adjacency[e.b][e.a] = e

    num_planes = 1 + max((s.plane for s in sat_states), default=0)
    sats_per_plane = 1 + max((s.index_in_plane for s in sat_states), default=0)
    link_table = _build_link_table(
        sat_states, adjacency, num_planes, sats_per_plane
    )
    gateway_links = {e.a: e for e in edges if e.kind == GSL}

    snap = TopologySnapshot(
        epoch_s=epoch_s,
        sat_ids=sat_ids,
        gateway_ids=gateway_ids,
        edges=tuple(edges),
        positions=positions,
        adjacency=adjacency,
        link_table=link_table,
        gateway_links=gateway_links,
        unconnected_gateways=tuple(unconnected),
        num_planes=num_planes,
        sats_per_plane=sats_per_plane,
    )
    check_snapshot_invariants(snap)
    return snap


def _build_link_table(
    sat_states: list[SatelliteState],
    adjacency: dict[str, dict[str, Edge]],
    num_planes: int,
    sats_per_plane: int,
) -> dict[str, tuple[Edge | None, ...]]:
    by_id = {s.sat_id: s for s in sat_states}
    table: dict[str, tuple[Edge | None, ...]] = {}
    for s in sat_states:
        node = sat_node_id(*s.sat_id)
        p, k = s.sat_id
        slots: list[Edge | None] = [None] * len(LINK_SLOTS)
        fwd = by_id.get((p, (k + 1) % sats_per_plane))
        bwd = by_id.get((p, (k - 1) % sats_per_plane))
        for target, slot in ((fwd, 0), (bwd, 1)):
            if target is not None and target.sat_id != s.sat_id:
                slots[slot] = adjacency[node].get(sat_node_id(*target.sat_id))
        east_plane = (p + 1) % num_planes
        west_plane = (p - 1) % num_planes
        for nbr, edge in adjacency[node].items():
            if edge.kind == ISL_INTER:
                nbr_plane = parse_sat_node(nbr)[0]
                if nbr_plane == east_plane and slots[2] is None:
                    slots[2] = edge
                elif nbr_plane == west_plane and slots[3] is None:
                    slots[3] = edge
            elif edge.kind == GSL:
                slots[4] = edge
        table[node] = tuple(slots)
    return table


def check_snapshot_invariants(snap: TopologySnapshot) -> None:
    """Antenna budgets, symmetry and GSL exclusivity; raises on violation."""
    intra: dict[str, int] = {}
    inter_east: dict[str, int] = {}
    inter_west: dict[str, int] = {}
    gsl_sat: dict[str, int] = {}
    gsl_gw: dict[str, int] = {}
    for e in snap.edges:
        if e.kind == ISL_INTRA:
            intra[e.a] = intra.get(e.a, 0) + 1
            intra[e.b] = intra.get(e.b, 0) + 1
        elif e.kind == ISL_INTER:
            pa, pb = parse_sat_node(e.a)[0], parse_sat_node(e.b)[0]
            lo, hi = (e.a, e.b) if _is_east_of(pa, pb, snap.num_planes) else (e.b, e.a)
            inter_east[lo] = inter_east.get(lo, 0) + 1
            inter_west[hi] = inter_west.get(hi, 0) + 1
        else:
            gsl_gw[e.a] = gsl_gw.get(e.a, 0) + 1
            gsl_sat[e.b] = gsl_sat.get(e.b, 0) + 1
    for name, counts, cap in (
        ("intra-plane", intra, 2),
        ("inter-plane east", inter_east, 1),
        ("inter-plane west", inter_west, 1),
        ("satellite GSL", gsl_sat, 1),
        ("gateway GSL", gsl_gw, 1),
    ):
        for node, c in counts.items():
            if c > cap:
                raise RuntimeError(
                    f"snapshot@{snap.epoch_s}: {node} exceeds {name} budget ({c} > {cap})"
                )
    for node, nbrs in snap.adjacency.items():
        for nbr, e in nbrs.items():
            if snap.adjacency[nbr].get(node) is not e:
                raise RuntimeError(f"snapshot@{snap.epoch_s}: asymmetric edge {node}-{nbr}")


def _is_east_of(plane_a: int, plane_b: int, num_planes: int) -> bool:
    """True if plane_b is the eastern neighbour of plane_a."""
    return (plane_a + 1) % num_planes == plane_b


def snapshot_from_csv(path: str | Path) -> TopologySnapshot:
    """Rebuild a structural snapshot (edges and adjacency, no positions)
    from an exported edge-list CSV."""
    edges: list[Edge] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        expected = {"epoch", "node_a", "node_b", "kind", "distance_m", "rate_bps"}
        if reader.fieldnames is None or not expected.issubset(reader.fieldnames):
            raise ValueError(f"topology file {path}: header must contain {sorted(expected)}")
        epoch = 0.0
        for row in reader:
            epoch = float(row["epoch"])
            rate = float(row["rate_bps"])
            edges.append(
                Edge(
                    row["node_a"],
                    row["node_b"],
                    row["kind"],
                    float(row["distance_m"]),
                    rate,
                    rate,
                )
            )
    nodes = sorted({e.a for e in edges} | {e.b for e in edges})
    adjacency: dict[str, dict[str, Edge]] = {n: {} for n in nodes}
    for e in edges:
        adjacency[e.a][e.b] = e
        adjacency[e.b][e.a] = e
    return TopologySnapshot(
        epoch_s=epoch,
        sat_ids=tuple(n for n in nodes if not is_gateway(n)),
        gateway_ids=tuple(n for n in nodes if is_gateway(n)),
        edges=tuple(edges),
        positions={},
        adjacency=adjacency,
        link_table={},
        gateway_links={e.a: e for e in edges if e.kind == GSL},
        unconnected_gateways=(),
    )
