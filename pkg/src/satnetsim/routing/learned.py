"""Distributed learned routing: tabular Q-Routing and deep value networks.

Every satellite chooses among at most five actions, one per link slot:
forward or backward along its plane, east or west to the matched neighbour
in the adjacent plane, or down its GSL. An action is valid only when the
link exists with a positive rate in the sending direction; the GSL action
additionally requires the linked gateway to be the packet's destination, so
a packet can never land at the wrong gateway.

Q-Routing keeps one table per satellite mapping (destination, action) to an
expected delivery cost in seconds; the only state shared between satellites
is the neighbour's bootstrap value, applied when the hop's arrival event
fires. The deep policy trains a value network by one-step TD with replay
and a periodically synchronised target network, either as a single global
model fed by all satellites (offline phase) or as per-satellite local
models (online phase).
"""
from __future__ import annotations

import csv
import logging
from collections import deque
from dataclasses import dataclass

import numpy as np

from .. import topology
from .base import RoutingPolicy
from . import neural

log = logging.getLogger(__name__)

ACTION_NAMES = ("intra_forward", "intra_backward", "inter_east", "inter_west", "down_to_gateway")
N_ACTIONS = len(ACTION_NAMES)
STATE_DIM = 5 + 4 * N_ACTIONS


@dataclass(frozen=True)
class RewardSpec:
    """Shaping of the per-hop learning signal (reward convention: higher is
    better; Q-Routing minimises the negated value as a cost)."""

    delivery_bonus: float = 2.0
    drop_penalty: float = -2.0
    hop_cost_scale: float = 1.0

    def __post_init__(self) -> None:
        if not (self.delivery_bonus > 0 > self.drop_penalty):
            raise ValueError("need delivery_bonus > 0 > drop_penalty")

    def reward(self, latency_s: float, delivered: bool, dropped: bool) -> float:
        r = -self.hop_cost_scale * latency_s
        if delivered:
            r += self.delivery_bonus
        elif dropped:
            r += self.drop_penalty
        return r

    def cost(self, latency_s: float, delivered: bool, dropped: bool) -> float:
        return -self.reward(latency_s, delivered, dropped)


@dataclass(frozen=True)
class EpsilonSchedule:
    """Linear decay from start to end over decay_steps training steps."""

    start: float = 1.0
    end: float = 0.05
    decay_steps: int = 20_000

    def value(self, step: int) -> float:
        if self.decay_steps <= 0 or step >= self.decay_steps:
            return self.end
        return self.start + (self.end - self.start) * (step / self.decay_steps)


def _wrap(delta: int, n: int) -> int:
    return ((delta + n // 2) % n) - n // 2 if n > 0 else 0


def action_mask(sim, snap, node: str, dst: str):
    """Validity and target neighbour of each action slot at ``node``."""
    slots = snap.link_table[node]
    mask = np.zeros(N_ACTIONS, dtype=bool)
    neighbors: list[str | None] = [None] * N_ACTIONS
    for i, edge in enumerate(slots):
        if edge is None:
            continue
        if edge.rate_from(node) <= 0:
            continue
        other = edge.other(node)
        if i == 4 and other != dst:
            continue
        mask[i] = True
        neighbors[i] = other
    return mask, neighbors


class _Normalizer:
    """Scales raw link features into [0, 1] using epoch-0 magnitudes."""

    def __init__(self, sim):
        snap = sim.snapshot
        radii = [float(np.linalg.norm(snap.positions[s])) for s in snap.sat_ids]
        self.dist_scale = 2.0 * max(radii) if radii else 1.0
        rates = [r for e in snap.edges for r in (e.rate_ab_bps, e.rate_ba_bps) if r > 0]
        self.rate_scale = max(rates) if rates else 1.0
        self.qmax = max(1, sim.queue_capacity)
        self.num_planes = snap.num_planes
        self.sats_per_plane = snap.sats_per_plane


def build_observation(sim, snap, node: str, dst: str, norm: _Normalizer):
    """Local observation vector (all components in [-1, 1]) plus the action
    mask and per-action neighbours."""
    mask, neighbors = action_mask(sim, snap, node, dst)
    vec = np.zeros(STATE_DIM)
    p, k = topology.parse_sat_node(node)
    serving = snap.gateway_links.get(dst)
    if serving is not None:
        pt, kt = topology.parse_sat_node(serving.b)
        vec[0] = _wrap(pt - p, norm.num_planes) / max(1, norm.num_planes // 2)
        vec[1] = _wrap(kt - k, norm.sats_per_plane) / max(1, norm.sats_per_plane // 2)
    dst_pos = snap.positions[dst]
    vec[2:5] = dst_pos / np.linalg.norm(dst_pos)
    slots = snap.link_table[node]
    for i in range(N_ACTIONS):
        base = 5 + 4 * i
        if not mask[i]:
            continue
        edge = slots[i]
        occ = sim.queue_occupancy(neighbors[i]) / norm.qmax
        vec[base] = min(1.0, occ)
        vec[base + 1] = min(1.0, edge.distance_m / norm.dist_scale)
        vec[base + 2] = min(1.0, edge.rate_from(node) / norm.rate_scale)
        vec[base + 3] = 1.0
    return vec, mask, neighbors


# --------------------------------------------------------------------- tables


def save_qtables(tables: dict[str, np.ndarray], destinations: list[str], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sat_id", "dst_gw", "action", "value"])
        for sat in sorted(tables):
            t = tables[sat]
            for d, dst in enumerate(destinations):
                for a, name in enumerate(ACTION_NAMES):
                    w.writerow([sat, dst, name, repr(float(t[d, a]))])


def load_qtables(path) -> tuple[dict[str, np.ndarray], list[str]]:
    action_index = {name: i for i, name in enumerate(ACTION_NAMES)}
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        expected = {"sat_id", "dst_gw", "action", "value"}
        if reader.fieldnames is None or not expected.issubset(reader.fieldnames):
            raise ValueError(f"q-table file {path}: header must contain {sorted(expected)}")
        rows = list(reader)
    destinations = sorted({r["dst_gw"] for r in rows})
    dst_index = {d: i for i, d in enumerate(destinations)}
    tables: dict[str, np.ndarray] = {}
    for r in rows:
        sat = r["sat_id"]
        if sat not in tables:
            tables[sat] = np.zeros((len(destinations), N_ACTIONS))
        tables[sat][dst_index[r["dst_gw"]], action_index[r["action"]]] = float(r["value"])
    return tables, destinations


# -------------------------------------------------------------------- polices


class QRoutingPolicy(RoutingPolicy):
    """Per-satellite cost tables updated by one-step temporal differences."""

    def __init__(
        self,
        *,
        alpha: float = 0.25,
        gamma: float = 0.95,
        reward_spec: RewardSpec | None = None,
        epsilon: EpsilonSchedule | None = None,
        exploit: bool = False,
        tables: dict[str, np.ndarray] | None = None,
    ):
        self.alpha = alpha
        self.gamma = gamma
        self.reward_spec = reward_spec or RewardSpec()
        self.epsilon = epsilon or EpsilonSchedule()
        self.exploit = exploit
        self.tables = tables
        self.updates = 0
        self.experiences = 0
        self.rewards_log: list[tuple[int, float, float]] = []
        self.epsilon_log: list[tuple[int, float]] = []

    def bind(self, sim) -> None:
        super().bind(sim)
        self.rng = sim.exploration_stream(0)
        self.destinations = sorted(sim.traffic.active_gateways)
        self.dst_index = {g: i for i, g in enumerate(self.destinations)}
        if self.tables is None:
            self.tables = {
                s: np.zeros((len(self.destinations), N_ACTIONS))
                for s in sim.snapshot.sat_ids
            }

    def current_epsilon(self) -> float:
        if self.exploit:
            return 0.0
        return self.epsilon.value(self.updates)

    def next_hop(self, node: str, packet, now_ns: int) -> str | None:
        mask, neighbors = action_mask(self.sim, self.sim.snapshot, node, packet.dst)
        if not mask.any():
            return None
        d = self.dst_index.get(packet.dst)
        if d is None:
            return None
        eps = self.current_epsilon()
        if eps > 0 and self.rng.random() < eps:
            valid = np.flatnonzero(mask)
            action = int(valid[self.rng.integers(len(valid))])
        else:
            costs = np.where(mask, self.tables[node][d], np.inf)
            action = int(np.argmin(costs))
        packet.policy_ctx = (node, action)
        return neighbors[action]

    def hop_feedback(self, fb) -> None:
        node, action = fb.packet.policy_ctx
        d = self.dst_index[fb.packet.dst]
        terminal = fb.delivered or fb.dropped
        cost = self.reward_spec.cost(fb.latency_s, fb.delivered, fb.dropped)
        self.experiences += 1
        self.rewards_log.append((self.experiences, fb.now_ns / 1e9, -cost))
        if self.exploit:
            return  # imported knowledge is used as-is
        bootstrap = 0.0
        if not terminal and not topology.is_gateway(fb.to_node):
            mask, _ = action_mask(self.sim, self.sim.snapshot, fb.to_node, fb.packet.dst)
            if mask.any():
                bootstrap = float(np.min(self.tables[fb.to_node][d][mask]))
        t = self.tables[node]
        t[d, action] = (1.0 - self.alpha) * t[d, action] + self.alpha * (
            cost + self.gamma * bootstrap
        )
        self.updates += 1
        self.epsilon_log.append((self.updates, self.current_epsilon()))


class DeepPolicy(RoutingPolicy):
    """Value-network routing trained in-loop by one-step TD with replay.

    Offline phase: one global online/target pair and one replay buffer are
    shared by every satellite. Online phase: each satellite owns a copy of
    the (imported) network plus a private buffer and trains on local
    experience only, so models diverge with local traffic.
    """

    def __init__(
        self,
        *,
        phase: str = "offline",
        ddqn: bool = True,
        hidden: tuple[int, ...] = (64, 64),
        learning_rate: float = 1e-3,
        gamma: float = 0.95,
        batch_size: int = 32,
        target_sync: int = 500,
        buffer_capacity: int = 10_000,
        reward_spec: RewardSpec | None = None,
        epsilon: EpsilonSchedule | None = None,
        exploit: bool = False,
        import_model: neural.MlpModel | None = None,
        probe_capacity: int = 512,
    ):
        if phase not in ("offline", "online"):
            raise ValueError(f"phase must be 'offline' or 'online', got {phase!r}")
        self.phase = phase
        self.ddqn = ddqn
        self.hidden = tuple(hidden)
        self.learning_rate = learning_rate
        self.gamma = gamma
        self.batch_size = batch_size
        self.target_sync = target_sync
        self.buffer_capacity = buffer_capacity
        self.reward_spec = reward_spec or RewardSpec()
        self.epsilon = epsilon or EpsilonSchedule()
        self.exploit = exploit
        self.import_model = import_model
        self.probe_capacity = probe_capacity

        self.steps = 0
        self.experiences = 0
        self.rewards_log: list[tuple[int, float, float]] = []
        self.epsilon_log: list[tuple[int, float]] = []
        self.probe_states: list[np.ndarray] = []
        self._probe_seen = 0
        self._train_queue: deque[str] = deque()

    def bind(self, sim) -> None:
        super().bind(sim)
        self.explore_rng = sim.exploration_stream(0)
        self.replay_rng = sim.exploration_stream(1)
        self.init_rng = sim.exploration_stream(2)
        self.probe_rng = sim.exploration_stream(3)
        self.norm = _Normalizer(sim)
        sizes = (STATE_DIM,) + self.hidden + (N_ACTIONS,)
        if self.phase == "offline":
            base = self.import_model or neural.init_mlp(sizes, self.init_rng)
            self.online = {None: base.copy()}
            self.target = {None: base.copy()}
            self.buffers = {None: self._new_buffer()}
            self.step_count = {None: 0}
        else:
            if self.import_model is None:
                log.warning(
                    "online phase without an imported model: every agent "
                    "starts from its own random initialisation"
                )
            self.online, self.target, self.buffers, self.step_count = {}, {}, {}, {}
            for s in sim.snapshot.sat_ids:
                base = (
                    self.import_model.copy()
                    if self.import_model is not None
                    else neural.init_mlp(sizes, self.init_rng)
                )
                self.online[s] = base
                self.target[s] = base.copy()
                self.buffers[s] = self._new_buffer()
                self.step_count[s] = 0

    def _new_buffer(self) -> neural.ReplayBuffer:
        return neural.ReplayBuffer(self.buffer_capacity, STATE_DIM, N_ACTIONS)

    def _key(self, node: str):
        return None if self.phase == "offline" else node

    def current_epsilon(self) -> float:
        if self.exploit:
            return 0.0
        return self.epsilon.value(self.steps)

    def next_hop(self, node: str, packet, now_ns: int) -> str | None:
        state, mask, neighbors = build_observation(
            self.sim, self.sim.snapshot, node, packet.dst, self.norm
        )
        if not mask.any():
            return None
        eps = self.current_epsilon()
        if eps > 0 and self.explore_rng.random() < eps:
            valid = np.flatnonzero(mask)
            action = int(valid[self.explore_rng.integers(len(valid))])
        else:
            q = neural.forward(self.online[self._key(node)], state)
            action = int(np.argmax(np.where(mask, q, -np.inf)))
        packet.policy_ctx = (node, action, state)
        self._collect_probe(state)
        return neighbors[action]

    def _collect_probe(self, state: np.ndarray) -> None:
        self._probe_seen += 1
        if len(self.probe_states) < self.probe_capacity:
            self.probe_states.append(state.copy())
        else:
            j = int(self.probe_rng.integers(self._probe_seen))
            if j < self.probe_capacity:
                self.probe_states[j] = state.copy()

    def hop_feedback(self, fb) -> None:
        node, action, state = fb.packet.policy_ctx
        terminal = fb.delivered or fb.dropped
        reward = self.reward_spec.reward(fb.latency_s, fb.delivered, fb.dropped)
        next_state = None
        next_mask = None
        if not terminal and not topology.is_gateway(fb.to_node):
            next_state, next_mask, _ = build_observation(
                self.sim, self.sim.snapshot, fb.to_node, fb.packet.dst, self.norm
            )
        self.buffers[self._key(node)].append(
            state, action, reward, next_state, next_mask, terminal
        )
        self.experiences += 1
        self.rewards_log.append((self.experiences, fb.now_ns / 1e9, reward))
        if not self.exploit:
            self._train_queue.append(node)
            self.sim.request_train_step()

    def train_step(self, now_ns: int) -> None:
        node = self._train_queue.popleft()
        key = self._key(node)
        buf = self.buffers[key]
        if len(buf) < self.batch_size:
            return
        states, actions, rewards, next_states, next_masks, terminals = buf.sample(
            self.batch_size, self.replay_rng
        )
        online, target = self.online[key], self.target[key]
        targets = neural.td_targets(
            online, target, rewards, next_states, next_masks, terminals,
            self.gamma, self.ddqn,
        )
        grads_w, grads_b, _ = neural.backward(online, states, actions, targets)
        neural.sgd_step(online, grads_w, grads_b, self.learning_rate)
        self.step_count[key] += 1
        self.steps += 1
        self.epsilon_log.append((self.steps, self.current_epsilon()))
        if self.step_count[key] % self.target_sync == 0:
            self.target[key] = online.copy()

    def agent_models(self) -> dict[str, neural.MlpModel]:
        """Per-agent online networks keyed by a printable agent id."""
        if self.phase == "offline":
            return {"global": self.online[None]}
        return dict(self.online)
