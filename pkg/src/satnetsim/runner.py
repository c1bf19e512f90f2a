"""Run orchestration: build a simulator from a scenario config, execute it,
and write the artifact set (CSV traces, logs, models, charts, manifest).

Artifacts avoid wall-clock content entirely, so two runs of the same
(config, seed) produce byte-identical files and the manifest hashes match.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, channel, charts, engine, orbit, topology
from .config import ScenarioConfig
from .routing import neural
from .routing.learned import (
    DeepPolicy,
    EpsilonSchedule,
    QRoutingPolicy,
    RewardSpec,
    load_qtables,
    save_qtables,
)
from .routing.shortest_path import ShortestPathPolicy

NS = engine.NS_PER_S


class _RouteDumpPolicy(ShortestPathPolicy):
    """Shortest-path policy that records gateway-pair routes per rebuild."""

    def __init__(self, scheme: str):
        super().__init__(scheme)
        self.route_log: list[tuple[float, str, str, str]] = []

    def on_topology(self, snapshot) -> None:
        super().on_topology(snapshot)
        active = sorted(self.sim.traffic.active_gateways)
        for src in active:
            for dst in active:
                if src == dst:
                    continue
                path = self.table.path(src, dst)
                if path:
                    self.route_log.append((snapshot.epoch_s, src, dst, "|".join(path)))


def build_policy(cfg: ScenarioConfig):
    lc = cfg.learning
    if cfg.routing.policy == "dijkstra":
        if cfg.outputs.routes_dump:
            return _RouteDumpPolicy(cfg.routing.scheme)
        return ShortestPathPolicy(cfg.routing.scheme)
    reward = RewardSpec(lc.delivery_bonus, lc.drop_penalty, lc.hop_cost_scale)
    eps = EpsilonSchedule(lc.epsilon_start, lc.epsilon_end, lc.epsilon_decay_steps)
    if cfg.routing.policy == "q_routing":
        tables = None
        if lc.qtables_import:
            tables, _ = load_qtables(lc.qtables_import)
        return QRoutingPolicy(
            alpha=lc.alpha,
            gamma=lc.gamma,
            reward_spec=reward,
            epsilon=eps,
            exploit=lc.exploit,
            tables=tables,
        )
    import_model = neural.load_model(lc.model_import) if lc.model_import else None
    return DeepPolicy(
        phase=lc.phase,
        ddqn=lc.ddqn,
        hidden=lc.hidden,
        learning_rate=lc.learning_rate,
        gamma=lc.gamma,
        batch_size=lc.batch_size,
        target_sync=lc.target_sync,
        buffer_capacity=lc.buffer_capacity,
        reward_spec=reward,
        epsilon=eps,
        exploit=lc.exploit,
        import_model=import_model,
    )


def build_simulator(cfg: ScenarioConfig) -> engine.Simulator:
    states = orbit.build_constellation(cfg.constellation.spec())
    gateways = cfg.gateways.sites()
    radio = {k: v.params() for k, v in cfg.radio.items()}
    rate_fn = channel.make_rate_fn(radio, cfg.modcod_table())
    traffic = engine.TrafficSpec(
        load_fraction=cfg.traffic.load_fraction,
        packet_bits=cfg.traffic.packet_bits,
        active_gateways=tuple(topology.gw_node_id(g.gw_id) for g in gateways),
    )
    return engine.Simulator(
        states=states,
        gateways=gateways,
        traffic=traffic,
        policy=build_policy(cfg),
        rate_fn=rate_fn,
        queue_capacity=cfg.queue.capacity,
        topology_interval_s=cfg.topology.update_interval_s,
        min_elevation_rad=math.radians(cfg.gateways.min_elevation_deg),
        seed=cfg.seed,
        ttl_hops=cfg.queue.ttl_hops,
        record_paths=cfg.outputs.record_paths,
    )


@dataclass
class RunArtifacts:
    run_dir: Path
    files: dict[str, Path] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    chart_errors: dict[str, str] = field(default_factory=dict)
    manifest_path: Path | None = None


def _edge_kind(a: str, b: str) -> str:
    if topology.is_gateway(a) or topology.is_gateway(b):
        return topology.GSL
    return (
        topology.ISL_INTRA
        if topology.parse_sat_node(a)[0] == topology.parse_sat_node(b)[0]
        else topology.ISL_INTER
    )


def _latlon_deg(pos: np.ndarray) -> tuple[float, float]:
    r = float(np.linalg.norm(pos))
    lat = math.degrees(math.asin(pos[2] / r))
    lon = math.degrees(math.atan2(pos[1], pos[0]))
    return lat, lon


def _write_packets(path: Path, sim: engine.Simulator) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["packet_id", "src", "dst", "created_at", "delivered_at",
             "hops", "queue_s", "tx_s", "prop_s", "status"]
        )
        for p in list(sim.records) + sim.pending_packets():
            w.writerow(
                [
                    p.packet_id,
                    p.src,
                    p.dst,
                    repr(p.created_ns / NS),
                    "" if p.delivered_ns is None else repr(p.delivered_ns / NS),
                    p.hops,
                    repr(p.queue_ns / NS),
                    repr(p.tx_ns / NS),
                    repr(p.prop_ns / NS),
                    p.status,
                ]
            )


def _write_queues(path: Path, sim: engine.Simulator) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "node", "occupancy"])
        for t, node, occ in sim.queue_samples:
            w.writerow([repr(t / NS), node, occ])


def _write_edge_usage(path: Path, sim: engine.Simulator) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node_a", "node_b", "kind", "packets"])
        for (a, b), n in sorted(sim.edge_usage.items()):
            w.writerow([a, b, _edge_kind(a, b), n])


def _write_nodes(path: Path, snap: topology.TopologySnapshot) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "kind", "lat_deg", "lon_deg"])
        for node in snap.node_ids:
            lat, lon = _latlon_deg(snap.positions[node])
            kind = "gateway" if topology.is_gateway(node) else "satellite"
            w.writerow([node, kind, repr(lat), repr(lon)])


def _percentile(sorted_vals: list[float], q: float) -> float:
    if not sorted_vals:
        return 0.0
    pos = q * (len(sorted_vals) - 1)
    lo = int(pos)
    hi = min(lo + 1, len(sorted_vals) - 1)
    return sorted_vals[lo] + (sorted_vals[hi] - sorted_vals[lo]) * (pos - lo)


def _summarize(sim: engine.Simulator, cfg: ScenarioConfig) -> dict:
    counts = sim.conservation_audit()
    delivered = [p for p in sim.records if p.status == engine.DELIVERED]
    # aggregate the per-second values exactly as a reader of packets.csv would
    q_vals = [p.queue_ns / NS for p in delivered]
    t_vals = [p.tx_ns / NS for p in delivered]
    pr_vals = [p.prop_ns / NS for p in delivered]
    e2e = [(p.delivered_ns - p.created_ns) / NS for p in delivered]
    n = len(delivered)
    e2e_sorted = sorted(e2e)
    top_links = sorted(sim.edge_usage.items(), key=lambda kv: (-kv[1], kv[0]))[:20]
    return {
        "counts": counts,
        "delivered_count": n,
        "delivery_ratio": (n / counts["created"]) if counts["created"] else 0.0,
        "mean_e2e_s": sum(e2e) / n if n else 0.0,
        "p50_e2e_s": _percentile(e2e_sorted, 0.5),
        "p95_e2e_s": _percentile(e2e_sorted, 0.95),
        "mean_queue_s": sum(q_vals) / n if n else 0.0,
        "mean_tx_s": sum(t_vals) / n if n else 0.0,
        "mean_prop_s": sum(pr_vals) / n if n else 0.0,
        "rebuilds": sim.rebuild_count,
        "flows": sim.traffic.flow_count,
        "flow_rate_pps": sim.flow_rate_per_flow,
        "top_links": [(f"{a}-{b}", _edge_kind(a, b), c) for (a, b), c in top_links],
        "unconnected_gateways": list(sim.snapshot.unconnected_gateways),
    }


def _write_log(path: Path, cfg: ScenarioConfig, summary: dict) -> None:
    c = summary["counts"]
    lines = [
        "run summary",
        "===========",
        f"policy: {cfg.routing.policy}"
        + (f"/{cfg.routing.scheme}" if cfg.routing.policy == "dijkstra" else ""),
        f"constellation: {cfg.constellation.preset or 'custom'}",
        f"gateways_active: {cfg.gateways.count}",
        f"duration_s: {cfg.duration_s}",
        f"seed: {cfg.seed}",
        f"load_fraction: {cfg.traffic.load_fraction}",
        f"flows: {summary['flows']}",
        f"flow_rate_pps: {summary['flow_rate_pps']!r}",
        f"topology_rebuilds: {summary['rebuilds']}",
        "",
        "packet accounting",
        "-----------------",
        f"created: {c['created']}",
        f"delivered: {c['delivered']}",
        f"dropped: {c['dropped']}",
        f"stuck: {c['stuck']}",
        f"in_flight: {c['in_flight']}",
        f"delivery_ratio: {summary['delivery_ratio']!r}",
        "",
        "latency breakdown (delivered packets)",
        "-------------------------------------",
        f"mean_e2e_s: {summary['mean_e2e_s']!r}",
        f"p50_e2e_s: {summary['p50_e2e_s']!r}",
        f"p95_e2e_s: {summary['p95_e2e_s']!r}",
        f"mean_queue_s: {summary['mean_queue_s']!r}",
        f"mean_tx_s: {summary['mean_tx_s']!r}",
        f"mean_prop_s: {summary['mean_prop_s']!r}",
        "",
        "most used links (top 20)",
        "------------------------",
    ]
    for name, kind, count in summary["top_links"]:
        lines.append(f"{name} {kind} {count}")
    if summary["unconnected_gateways"]:
        lines.append("")
        lines.append(
            "unconnected_gateways: " + ",".join(summary["unconnected_gateways"])
        )
    path.write_text("\n".join(lines) + "\n")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def run_scenario(cfg: ScenarioConfig) -> RunArtifacts:
    """Execute one run and write every artifact plus the manifest."""
    run_dir = Path(cfg.output_dir)
    run_dir.mkdir(parents=True, exist_ok=True)

    sim = build_simulator(cfg)
    snap0 = sim.snapshot
    nodes_path = run_dir / "nodes.csv"
    _write_nodes(nodes_path, snap0)
    topo_path = run_dir / "topology.csv"
    snap0.export_csv(topo_path)

    sim.run(cfg.duration_s)
    summary = _summarize(sim, cfg)

    art = RunArtifacts(run_dir=run_dir, counts=summary["counts"], summary=summary)
    art.files["nodes.csv"] = nodes_path
    art.files["topology.csv"] = topo_path

    _write_packets(run_dir / "packets.csv", sim)
    art.files["packets.csv"] = run_dir / "packets.csv"
    _write_queues(run_dir / "queues.csv", sim)
    art.files["queues.csv"] = run_dir / "queues.csv"
    _write_edge_usage(run_dir / "edge_usage.csv", sim)
    art.files["edge_usage.csv"] = run_dir / "edge_usage.csv"

    policy = sim.policy
    if isinstance(policy, _RouteDumpPolicy):
        with open(run_dir / "routes.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "src", "dst", "path", "scheme"])
            for epoch, src, dst, p in policy.route_log:
                w.writerow([epoch, src, dst, p, policy.scheme])
        art.files["routes.csv"] = run_dir / "routes.csv"

    if isinstance(policy, (QRoutingPolicy, DeepPolicy)):
        with open(run_dir / "rewards.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "sim_time", "reward"])
            for step, t, r in policy.rewards_log:
                w.writerow([step, repr(t), repr(r)])
        art.files["rewards.csv"] = run_dir / "rewards.csv"
        with open(run_dir / "epsilon.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "epsilon"])
            for step, e in policy.epsilon_log:
                w.writerow([step, repr(e)])
        art.files["epsilon.csv"] = run_dir / "epsilon.csv"

    if isinstance(policy, QRoutingPolicy):
        save_qtables(policy.tables, policy.destinations, run_dir / "qtables.csv")
        art.files["qtables.csv"] = run_dir / "qtables.csv"
    elif isinstance(policy, DeepPolicy):
        models_dir = run_dir / "models"
        models_dir.mkdir(exist_ok=True)
        for agent, model in sorted(policy.agent_models().items()):
            p = models_dir / f"{agent}.npz"
            neural.save_model(model, p)
            art.files[f"models/{agent}.npz"] = p
        if policy.phase == "offline":
            p = models_dir / "global_target.npz"
            neural.save_model(policy.target[None], p)
            art.files["models/global_target.npz"] = p
        if policy.probe_states:
            probes_path = run_dir / "probes.npz"
            np.savez(probes_path, states=np.stack(policy.probe_states))
            art.files["probes.npz"] = probes_path

    _write_log(run_dir / "run.log", cfg, summary)
    art.files["run.log"] = run_dir / "run.log"

    if cfg.outputs.charts:
        written, errors = charts.render_all(run_dir)
        art.chart_errors = errors
        for name, path in written.items():
            art.files[f"charts/{name}"] = path

    manifest = {
        "version": __version__,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "counts": summary["counts"],
        "rebuilds": summary["rebuilds"],
        "files": {name: _sha256(path) for name, path in sorted(art.files.items())},
    }
    manifest_path = run_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    art.manifest_path = manifest_path
    art.summary = summary
    return art
