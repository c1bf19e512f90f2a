"""Discrete-event core: packet creation, queueing, transmission, topology ticks.

The clock is a single monotonic integer in nanoseconds; every event carries
a (time, seq) key so replays with the same seed are byte-identical. Each
node owns one FIFO transmission buffer with a single server: the head-of-line
packet is handed to the routing policy, transmitted on the chosen link, and
arrives at the neighbour after the propagation delay. Hop components are
integers, so the end-to-end latency of a delivered packet equals the sum of
its per-hop queue, transmission and propagation times exactly.

Traffic is one independent Poisson process per ordered gateway pair, each
with its own seeded random stream, so adding a flow never perturbs the
draws of another.
"""
from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .constants import EARTH_ROTATION_RAD_S, SPEED_OF_LIGHT_M_S
from . import orbit, topology

NS_PER_S = 1_000_000_000

EV_ARRIVAL = 0
EV_TX_DONE = 1
EV_TOPOLOGY = 2
EV_TRAIN = 3
EV_SIM_END = 4
EVENT_NAMES = ("packet_arrival", "tx_complete", "topology_update", "train_step", "sim_end")

DELIVERED = "delivered"
DROPPED = "dropped"
STUCK = "stuck"
IN_FLIGHT = "in_flight"


def to_ns(seconds: float) -> int:
    return round(seconds * NS_PER_S)


class EngineFault(RuntimeError):
    """Internal inconsistency: routing to a non-neighbour, a dead link, a
    conservation imbalance. Always a bug, never a modelled outcome."""


class SchedulingError(EngineFault):
    """An event was scheduled before the current clock."""


@dataclass(slots=True)
class Packet:
    packet_id: int
    src: str
    dst: str
    size_bits: int
    created_ns: int
    delivered_ns: int | None = None
    status: str = IN_FLIGHT
    hops: int = 0
    queue_ns: int = 0
    tx_ns: int = 0
    prop_ns: int = 0
    path: list | None = None
    last_hop_ns: tuple | None = None
    policy_ctx: object = None

    @property
    def e2e_ns(self) -> int | None:
        if self.delivered_ns is None:
            return None
        return self.delivered_ns - self.created_ns


@dataclass(slots=True)
class TxQueue:
    owner: str
    capacity: int
    items: deque = field(default_factory=deque)
    busy: bool = False


@dataclass(frozen=True)
class TrafficSpec:
    """Offered load: every active gateway streams packets to every other."""

    load_fraction: float
    packet_bits: int
    active_gateways: tuple[str, ...]

    def __post_init__(self) -> None:
        if not (0.0 < self.load_fraction <= 1.5):
            raise orbit.ConfigurationError(
                f"load_fraction must be in (0, 1.5], got {self.load_fraction}"
            )
        if self.packet_bits <= 0:
            raise orbit.ConfigurationError(
                f"packet_bits must be > 0, got {self.packet_bits}"
            )
        if len(self.active_gateways) < 2:
            raise orbit.ConfigurationError("traffic needs at least 2 active gateways")

    @property
    def flow_count(self) -> int:
        n = len(self.active_gateways)
        return n * (n - 1)


@dataclass(slots=True)
class HopFeedback:
    """Outcome of one completed hop, delivered to the policy at the arrival
    event of the receiving node."""

    packet: Packet
    from_node: str
    to_node: str
    latency_s: float
    delivered: bool
    dropped: bool
    now_ns: int


class Simulator:
    """One simulation run: immutable configuration, mutable event state."""

    def __init__(
        self,
        *,
        states: list[orbit.SatelliteState],
        gateways: list[orbit.GatewaySite],
        traffic: TrafficSpec,
        policy,
        rate_fn: topology.RateFn,
        queue_capacity: int = 100,
        topology_interval_s: float = 15.0,
        min_elevation_rad: float = topology.DEFAULT_MIN_ELEVATION_RAD,
        seed: int = 0,
        ttl_hops: int = 250,
        record_paths: bool = True,
        record_events: bool = False,
        earth_rate_rad_s: float = EARTH_ROTATION_RAD_S,
    ):
        if topology_interval_s <= 0:
            raise orbit.ConfigurationError(
                f"topology_interval_s must be > 0, got {topology_interval_s}"
            )
        self._states0 = sorted(states, key=lambda s: s.sat_id)
        self.gateways = sorted(gateways, key=lambda g: g.gw_id)
        self.traffic = traffic
        self.policy = policy
        self.rate_fn = rate_fn
        self.queue_capacity = queue_capacity
        self.topology_interval_ns = to_ns(topology_interval_s)
        self.min_elevation_rad = min_elevation_rad
        self.seed = seed
        self.ttl_hops = ttl_hops
        self.record_paths = record_paths
        self.record_events = record_events
        self.earth_rate_rad_s = earth_rate_rad_s

        self.clock_ns = 0
        self._seq = 0
        self._heap: list = []
        self.rebuild_count = 0
        self.counts = {"created": 0, DELIVERED: 0, DROPPED: 0, STUCK: 0}
        self.records: list[Packet] = []
        self.queue_samples: list[tuple[int, str, int]] = []
        self.edge_usage: dict[tuple[str, str], int] = {}
        self.event_trace: list[tuple[int, int, str]] = []
        self._next_packet_id = 0

        self.snapshot = topology.rebuild(
            0.0,
            self._states0,
            self.gateways,
            min_elevation_rad=min_elevation_rad,
            rate_fn=rate_fn,
        )
        self.queues: dict[str, TxQueue] = {
            n: TxQueue(owner=n, capacity=queue_capacity)
            for n in self.snapshot.node_ids
        }
        self._flows = self._build_flows()

        policy.bind(self)
        policy.on_topology(self.snapshot)

    # ------------------------------------------------------------------ setup

    def _build_flows(self):
        """One Poisson flow per ordered gateway pair, each with its own
        keyed random stream."""
        active = sorted(self.traffic.active_gateways)
        unknown = [g for g in active if g not in self.snapshot.positions]
        if unknown:
            raise orbit.ConfigurationError(f"active gateways not in scenario: {unknown}")
        uplinks = []
        for g in active:
            e = self.snapshot.gateway_links.get(g)
            if e is None or e.rate_from(g) <= 0:
                raise EngineFault(
                    f"active gateway {g} has no usable uplink at epoch 0; "
                    "cannot size traffic load"
                )
            uplinks.append(e.rate_from(g))
        r_up_min = min(uplinks)
        n = len(active)
        lam = (
            self.traffic.load_fraction
            * r_up_min
            / (self.traffic.packet_bits * (n - 1))
        )
        flows = []
        idx = 0
        for src in active:
            for dst in active:
                if src == dst:
                    continue
                rng = np.random.Generator(
                    np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=(1, idx)))
                )
                flows.append({"src": src, "dst": dst, "rate": lam, "rng": rng})
                idx += 1
        self.flow_rate_per_flow = lam
        return flows

    def exploration_stream(self, key: int = 0) -> np.random.Generator:
        """Policy-owned stream, independent of every traffic stream."""
        return np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=(2, key)))
        )

    # ------------------------------------------------------------- scheduling

    def schedule(self, time_ns: int, kind: int, payload) -> None:
        if time_ns < self.clock_ns:
            raise SchedulingError(
                f"event {EVENT_NAMES[kind]} scheduled at {time_ns} ns, "
                f"clock already at {self.clock_ns} ns"
            )
        self._seq += 1
        heapq.heappush(self._heap, (time_ns, self._seq, kind, payload))

    def run(self, duration_s: float) -> None:
        """Schedule the standing events and drain the clock to the horizon."""
        duration_ns = to_ns(duration_s)
        k = 1
        while k * self.topology_interval_ns <= duration_ns:
            self.schedule(k * self.topology_interval_ns, EV_TOPOLOGY, None)
            k += 1
        self.schedule(duration_ns, EV_SIM_END, None)
        for i in range(len(self._flows)):
            self._schedule_next_creation(i)
        self.run_until(duration_s)
        self.conservation_audit()

    def run_until(self, t_end_s: float) -> None:
        t_end_ns = to_ns(t_end_s)
        if t_end_ns < self.clock_ns:
            raise SchedulingError("run_until target precedes current clock")
        heap = self._heap
        while heap and heap[0][0] <= t_end_ns:
            time_ns, seq, kind, payload = heapq.heappop(heap)
            self.clock_ns = time_ns
            if self.record_events:
                self.event_trace.append((time_ns, seq, EVENT_NAMES[kind]))
            if kind == EV_ARRIVAL:
                packet, node = payload
                if packet is None:
                    self._on_creation(node, time_ns)
                else:
                    self._on_arrival(packet, node, time_ns)
            elif kind == EV_TX_DONE:
                self._on_tx_done(payload, time_ns)
            elif kind == EV_TOPOLOGY:
                self._on_topology(time_ns)
            elif kind == EV_TRAIN:
                self.policy.train_step(time_ns)
            elif kind == EV_SIM_END:
                self._sample_queues(time_ns)

    def request_train_step(self) -> None:
        """Enqueue a training event at the current clock (runs after the
        current event, same timestamp)."""
        self.schedule(self.clock_ns, EV_TRAIN, None)

    # ----------------------------------------------------------------- events

    def _schedule_next_creation(self, flow_idx: int) -> None:
        flow = self._flows[flow_idx]
        dt_s = flow["rng"].exponential(1.0 / flow["rate"])
        dt_ns = max(1, to_ns(dt_s))
        self.schedule(self.clock_ns + dt_ns, EV_ARRIVAL, (None, flow_idx))

    def _on_creation(self, flow_idx: int, now: int) -> None:
        flow = self._flows[flow_idx]
        packet = Packet(
            packet_id=self._next_packet_id,
            src=flow["src"],
            dst=flow["dst"],
            size_bits=self.traffic.packet_bits,
            created_ns=now,
            path=[] if self.record_paths else None,
        )
        self._next_packet_id += 1
        self.counts["created"] += 1
        self._schedule_next_creation(flow_idx)
        self._on_arrival(packet, flow["src"], now)

    def _on_arrival(self, packet: Packet, node: str, now: int) -> None:
        delivered = node == packet.dst
        dropped = False
        stuck = False
        if not delivered:
            if packet.hops >= self.ttl_hops:
                stuck = True
            else:
                q = self.queues[node]
                dropped = len(q.items) >= q.capacity

        if packet.policy_ctx is not None:
            hop_ns = sum(packet.last_hop_ns) if packet.last_hop_ns else 0
            self.policy.hop_feedback(
                HopFeedback(
                    packet=packet,
                    from_node=packet.policy_ctx[0],
                    to_node=node,
                    latency_s=hop_ns / NS_PER_S,
                    delivered=delivered,
                    dropped=dropped,
                    now_ns=now,
                )
            )

        if delivered:
            packet.delivered_ns = now
            self._finalize(packet, DELIVERED, node, now)
        elif stuck:
            self._finalize(packet, STUCK, node, now)
        elif dropped:
            self._finalize(packet, DROPPED, node, now)
        else:
            q = self.queues[node]
            q.items.append((packet, now))
            if not q.busy:
                self._start_service(node, now)

    def _start_service(self, node: str, now: int) -> None:
        q = self.queues[node]
        adjacency = self.snapshot.adjacency[node]
        while q.items:
            packet, ready = q.items[0]
            next_node = self._route(node, packet, now)
            if next_node is None:
                q.items.popleft()
                self._finalize(packet, STUCK, node, now)
                continue
            edge = adjacency.get(next_node)
            if edge is None:
                raise EngineFault(
                    f"policy routed {node} -> {next_node} but no such edge exists"
                )
            rate = edge.rate_from(node)
            if rate <= 0:
                raise EngineFault(
                    f"policy routed {node} -> {next_node} over a zero-rate link"
                )
            q.items.popleft()
            queue_ns = now - ready
            tx_ns = max(1, to_ns(packet.size_bits / rate))
            prop_ns = max(1, to_ns(edge.distance_m / SPEED_OF_LIGHT_M_S))
            packet.queue_ns += queue_ns
            packet.tx_ns += tx_ns
            packet.prop_ns += prop_ns
            packet.hops += 1
            packet.last_hop_ns = (queue_ns, tx_ns, prop_ns)
            key = (edge.a, edge.b)
            self.edge_usage[key] = self.edge_usage.get(key, 0) + 1
            if packet.path is not None:
                packet.path.append((node, ready, queue_ns, tx_ns, prop_ns))
            q.busy = True
            self.schedule(now + tx_ns, EV_TX_DONE, (node, packet, next_node, prop_ns))
            return

    def _route(self, node: str, packet: Packet, now: int) -> str | None:
        if topology.is_gateway(node):
            edge = self.snapshot.gateway_links.get(node)
            if edge is None or edge.rate_from(node) <= 0:
                return None
            return edge.b
        return self.policy.next_hop(node, packet, now)

    def _on_tx_done(self, payload, now: int) -> None:
        node, packet, next_node, prop_ns = payload
        self.schedule(now + prop_ns, EV_ARRIVAL, (packet, next_node))
        q = self.queues[node]
        q.busy = False
        if q.items:
            self._start_service(node, now)

    def _on_topology(self, now: int) -> None:
        epoch_s = now / NS_PER_S
        states = orbit.propagate(self._states0, epoch_s, self.earth_rate_rad_s)
        self.snapshot = topology.rebuild(
            epoch_s,
            states,
            self.gateways,
            previous=self.snapshot,
            min_elevation_rad=self.min_elevation_rad,
            rate_fn=self.rate_fn,
        )
        self.rebuild_count += 1
        self.policy.on_topology(self.snapshot)
        self._sample_queues(now)

    def _finalize(self, packet: Packet, status: str, node: str, now: int) -> None:
        packet.status = status
        packet.policy_ctx = None
        if packet.path is not None and (packet.path == [] or packet.path[-1][0] != node):
            packet.path.append((node, now, 0, 0, 0))
        self.counts[status] += 1
        self.records.append(packet)

    def _sample_queues(self, now: int) -> None:
        for node, q in self.queues.items():
            if q.items:
                self.queue_samples.append((now, node, len(q.items)))

    # ------------------------------------------------------------------ audit

    def conservation_audit(self) -> dict[str, int]:
        """created = delivered + dropped + stuck + in_flight, exactly."""
        queued = sum(len(q.items) for q in self.queues.values())
        transmitting = 0
        in_transit = 0
        for _, _, kind, payload in self._heap:
            if kind == EV_TX_DONE:
                transmitting += 1
            elif kind == EV_ARRIVAL and payload[0] is not None:
                in_transit += 1
        in_flight = queued + transmitting + in_transit
        counts = dict(self.counts)
        counts[IN_FLIGHT] = in_flight
        balance = (
            counts["created"]
            - counts[DELIVERED]
            - counts[DROPPED]
            - counts[STUCK]
            - in_flight
        )
        if balance != 0:
            raise EngineFault(
                f"conservation violated: created={counts['created']} vs "
                f"delivered={counts[DELIVERED]} dropped={counts[DROPPED]} "
                f"stuck={counts[STUCK]} in_flight={in_flight}"
            )
        return counts

    def queue_occupancy(self, node: str) -> int:
        return len(self.queues[node].items)

    def pending_packets(self) -> list[Packet]:
        """Packets still queued or in transit when the run stopped."""
        out = []
        for q in self.queues.values():
            out.extend(p for p, _ in q.items)
        for _, _, kind, payload in self._heap:
            if kind == EV_TX_DONE:
                out.append(payload[1])
            elif kind == EV_ARRIVAL and payload[0] is not None:
                out.append(payload[0])
        out.sort(key=lambda p: p.packet_id)
        return out
