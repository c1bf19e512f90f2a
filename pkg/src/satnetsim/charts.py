"""Static charts rendered from a run directory's CSV artifacts.

Six figures: the ground-track map, the per-edge congestion map, the reward
trace, mean latency vs time against the exploration rate, mean latency over
the run, and the end-to-end latency box plot. Each chart reads only the
files it needs; a missing file fails that chart alone with a named error
while the others still render.
"""
from __future__ import annotations

import csv
import math
from pathlib import Path

from . import svgplot

CHART_NAMES = (
    "map.svg",
    "congestion.svg",
    "rewards.svg",
    "latency_epsilon.svg",
    "latency_time.svg",
    "latency_box.svg",
)


class MissingArtifactError(FileNotFoundError):
    pass


def _read_csv(path: Path) -> list[dict]:
    if not path.exists():
        raise MissingArtifactError(f"chart input missing: {path.name} (in {path.parent})")
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _node_points(nodes_rows):
    return {
        r["node"]: (float(r["lon_deg"]), float(r["lat_deg"]), r["kind"])
        for r in nodes_rows
    }


def _split_dateline(lon1, lat1, lon2, lat2):
    """Segments for an equirectangular map, split at the +-180 wrap."""
    if abs(lon1 - lon2) <= 180.0:
        return [(lon1, lat1, lon2, lat2)]
    if lon1 < lon2:
        lon1, lat1, lon2, lat2 = lon2, lat2, lon1, lat1
    # lon1 near +180, lon2 near -180
    span = (180.0 - lon1) + (lon2 + 180.0)
    if span == 0:
        return [(lon1, lat1, lon2, lat2)]
    frac = (180.0 - lon1) / span
    lat_mid = lat1 + (lat2 - lat1) * frac
    return [(lon1, lat1, 180.0, lat_mid), (-180.0, lat_mid, lon2, lat2)]


def _map_figure(title):
    fig = svgplot.Figure(width=900, height=500, title=title,
                         x_label="longitude [deg]", y_label="latitude [deg]")
    fig.set_ranges((-180, 180), (-90, 90))
    fig.axes()
    return fig


def render_map(run_dir: Path) -> str:
    nodes = _node_points(_read_csv(run_dir / "nodes.csv"))
    edges = _read_csv(run_dir / "topology.csv")
    fig = _map_figure("constellation, ISLs and gateways at epoch 0")
    if not nodes:
        fig.annotate_empty()
        return fig.render()
    for r in edges:
        a, b = nodes.get(r["node_a"]), nodes.get(r["node_b"])
        if a is None or b is None:
            continue
        color = "#bbbbbb" if r["kind"].startswith("isl") else "#2ca02c"
        for x1, y1, x2, y2 in _split_dateline(a[0], a[1], b[0], b[1]):
            fig.segment(x1, y1, x2, y2, color=color, width=0.7, opacity=0.8)
    for node, (lon, lat, kind) in nodes.items():
        if kind == "gateway":
            fig.pixel_rect(fig.px(lon) - 3, fig.py(lat) - 3, 6, 6,
                           fill="#d62728", stroke="none")
        else:
            plane = int(node[1:].split("_")[0]) if node.startswith("S") else 0
            fig.pixel_circle(fig.px(lon), fig.py(lat), 2.2,
                             svgplot.PALETTE[plane % len(svgplot.PALETTE)])
    return fig.render()


def render_congestion(run_dir: Path) -> str:
    nodes = _node_points(_read_csv(run_dir / "nodes.csv"))
    usage = _read_csv(run_dir / "edge_usage.csv")
    fig = _map_figure("per-edge packet counts (congestion test)")
    rows = [r for r in usage if r["node_a"] in nodes and r["node_b"] in nodes]
    if not rows:
        fig.annotate_empty("no traffic")
        return fig.render()
    top = max(int(r["packets"]) for r in rows)
    for r in rows:
        a, b = nodes[r["node_a"]], nodes[r["node_b"]]
        load = int(r["packets"]) / max(1, top)
        red = int(40 + 215 * load)
        color = f"#{red:02x}30{int(200 - 170 * load):02x}"
        for x1, y1, x2, y2 in _split_dateline(a[0], a[1], b[0], b[1]):
            fig.segment(x1, y1, x2, y2, color=color, width=0.6 + 4.0 * load,
                        opacity=0.9)
    for node, (lon, lat, kind) in nodes.items():
        if kind == "gateway":
            fig.pixel_rect(fig.px(lon) - 3, fig.py(lat) - 3, 6, 6,
                           fill="#111111", stroke="none")
    return fig.render()


def render_rewards(run_dir: Path) -> str:
    rows = _read_csv(run_dir / "rewards.csv")
    xs = [float(r["sim_time"]) for r in rows]
    ys = [float(r["reward"]) for r in rows]
    if len(xs) > 5000:  # deterministic thinning
        stride = len(xs) // 5000 + 1
        xs, ys = xs[::stride], ys[::stride]
    return svgplot.scatter_chart(
        "per-hop reward", xs, ys,
        title="rewards over simulation time",
        x_label="simulation time [s]", y_label="reward",
    )


def _binned_latency(packet_rows, n_bins=60):
    delivered = [
        (float(r["created_at"]), float(r["delivered_at"]) - float(r["created_at"]))
        for r in packet_rows
        if r["status"] == "delivered" and r["delivered_at"]
    ]
    if not delivered:
        return [], []
    t_end = max(t for t, _ in delivered)
    t_end = t_end or 1.0
    width = t_end / n_bins
    sums = [0.0] * n_bins
    counts = [0] * n_bins
    for t, lat in delivered:
        b = min(n_bins - 1, int(t / width))
        sums[b] += lat
        counts[b] += 1
    xs = [(b + 0.5) * width for b in range(n_bins) if counts[b]]
    ys = [1e3 * sums[b] / counts[b] for b in range(n_bins) if counts[b]]
    return xs, ys


def render_latency_epsilon(run_dir: Path) -> str:
    packets = _read_csv(run_dir / "packets.csv")
    xs, ys = _binned_latency(packets)
    y2 = None
    eps_path = run_dir / "epsilon.csv"
    rew_path = run_dir / "rewards.csv"
    if eps_path.exists() and rew_path.exists():
        eps_rows = _read_csv(eps_path)
        time_of_step = {int(r["step"]): float(r["sim_time"]) for r in _read_csv(rew_path)}
        pts = [
            (time_of_step[int(r["step"])], float(r["epsilon"]))
            for r in eps_rows
            if int(r["step"]) in time_of_step
        ]
        if pts:
            y2 = ("epsilon", [p[0] for p in pts], [p[1] for p in pts])
    return svgplot.line_chart(
        [("mean E2E latency", xs, ys)],
        title="latency vs time vs exploration",
        x_label="simulation time [s]", y_label="mean E2E latency [ms]",
        y2=y2, y2_label="epsilon",
    )


def render_latency_time(run_dir: Path) -> str:
    packets = _read_csv(run_dir / "packets.csv")
    xs, ys = _binned_latency(packets)
    return svgplot.line_chart(
        [("mean E2E latency", xs, ys)],
        title="mean E2E latency over the run",
        x_label="simulation time [s]", y_label="mean E2E latency [ms]",
    )


def render_latency_box(run_dir: Path) -> str:
    packets = _read_csv(run_dir / "packets.csv")
    lat_ms = [
        1e3 * (float(r["delivered_at"]) - float(r["created_at"]))
        for r in packets
        if r["status"] == "delivered" and r["delivered_at"]
    ]
    return svgplot.box_plot(
        [("delivered", lat_ms)],
        title="E2E latency distribution", y_label="E2E latency [ms]",
    )


RENDERERS = {
    "map.svg": render_map,
    "congestion.svg": render_congestion,
    "rewards.svg": render_rewards,
    "latency_epsilon.svg": render_latency_epsilon,
    "latency_time.svg": render_latency_time,
    "latency_box.svg": render_latency_box,
}


def render_all(run_dir: str | Path) -> tuple[dict[str, Path], dict[str, str]]:
    """Render every chart; returns (written files, per-chart errors)."""
    run_dir = Path(run_dir)
    out_dir = run_dir / "charts"
    out_dir.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}
    errors: dict[str, str] = {}
    for name, renderer in RENDERERS.items():
        try:
            svg = renderer(run_dir)
        except MissingArtifactError as exc:
            errors[name] = str(exc)
            continue
        path = out_dir / name
        path.write_text(svg)
        written[name] = path
    return written, errors


# ------------------------------------------------------------------- compare

FINGERPRINT_KEYS = ("constellation", "gateways", "duration_s", "traffic")


class CompareError(ValueError):
    """Run directories are not comparable (different scenarios)."""


def _fingerprint(manifest: dict) -> dict:
    cfg = manifest.get("config", {})
    return {k: cfg.get(k) for k in FINGERPRINT_KEYS}


def compare_runs(run_dirs: list[str | Path], out_dir: str | Path) -> dict[str, Path]:
    """Aligned time-binned mean E2E latency per run plus one overlay chart."""
    import json

    run_dirs = [Path(d) for d in run_dirs]
    if len(run_dirs) < 2:
        raise CompareError("need at least 2 run directories to compare")
    manifests = []
    for d in run_dirs:
        mp = d / "manifest.json"
        if not mp.exists():
            raise CompareError(f"{d}: no manifest.json (not a finished run?)")
        manifests.append(json.loads(mp.read_text()))
    base = _fingerprint(manifests[0])
    for d, m in zip(run_dirs[1:], manifests[1:]):
        fp = _fingerprint(m)
        if fp != base:
            diffs = [k for k in FINGERPRINT_KEYS if fp.get(k) != base.get(k)]
            raise CompareError(
                f"{run_dirs[0].name} and {d.name} differ on scenario fields: "
                f"{', '.join(diffs)}"
            )

    n_bins = 60
    duration = float(manifests[0]["config"]["duration_s"]) or 1.0
    width = duration / n_bins
    series = []
    columns: dict[str, list] = {}
    for d in run_dirs:
        packets = _read_csv(d / "packets.csv")
        sums = [0.0] * n_bins
        counts = [0] * n_bins
        for r in packets:
            if r["status"] != "delivered" or not r["delivered_at"]:
                continue
            t = float(r["created_at"])
            b = min(n_bins - 1, int(t / width))
            sums[b] += float(r["delivered_at"]) - t
            counts[b] += 1
        means = [1e3 * s / c if c else None for s, c in zip(sums, counts)]
        columns[d.name] = means
        xs = [(b + 0.5) * width for b in range(n_bins) if counts[b]]
        ys = [m for m in means if m is not None]
        series.append((d.name, xs, ys))

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "comparison.csv"
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_start_s"] + [d.name for d in run_dirs])
        for b in range(n_bins):
            row = [repr(b * width)]
            for d in run_dirs:
                m = columns[d.name][b]
                row.append("" if m is None else repr(m))
            w.writerow(row)
    svg_path = out_dir / "comparison.svg"
    svg_path.write_text(
        svgplot.line_chart(
            series,
            title="mean E2E latency comparison",
            x_label="simulation time [s]", y_label="mean E2E latency [ms]",
        )
    )
    return {"comparison.csv": csv_path, "comparison.svg": svg_path}
