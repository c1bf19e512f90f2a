"""Command-line entry point.

Subcommands: ``run`` (execute a scenario), ``charts`` (re-render figures for
a finished run), ``compare`` (overlay several runs), ``aggregate``
(federated parameter averaging over saved models), ``cka`` (pairwise model
similarity). Exit codes: 0 success, 2 configuration error, 3 runtime fault.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis, charts, topology
from .config import apply_overrides, load_config, parse_config
from .engine import EngineFault
from .orbit import ConfigurationError
from .routing import neural
from .runner import run_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _cmd_run(args) -> int:
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib

    doc = {}
    if args.config:
        with open(args.config, "rb") as fh:
            doc = tomllib.load(fh)
    doc = apply_overrides(doc, args.set or [])
    if args.output_dir:
        doc["output_dir"] = args.output_dir
    if args.seed is not None:
        doc["seed"] = args.seed
    import os

    from .config import _apply_env_overrides

    cfg = parse_config(_apply_env_overrides(doc, os.environ))
    art = run_scenario(cfg)
    c = art.counts
    print(
        f"run complete: {c['created']} created, {c['delivered']} delivered, "
        f"{c['dropped']} dropped, {c['stuck']} stuck, {c['in_flight']} in flight"
    )
    print(f"artifacts in {art.run_dir} ({len(art.files)} files)")
    for name, err in art.chart_errors.items():
        print(f"chart {name} skipped: {err}", file=sys.stderr)
    return EXIT_OK


def _cmd_charts(args) -> int:
    run_dir = Path(args.run_dir)
    if not run_dir.is_dir():
        raise ConfigurationError(f"not a run directory: {run_dir}")
    written, errors = charts.render_all(run_dir)
    for name in written:
        print(f"wrote charts/{name}")
    for name, err in errors.items():
        print(f"chart {name} skipped: {err}", file=sys.stderr)
    return EXIT_OK if written else EXIT_CONFIG


def _cmd_compare(args) -> int:
    try:
        files = charts.compare_runs(args.run_dirs, args.out)
    except charts.CompareError as exc:
        raise ConfigurationError(str(exc)) from exc
    for name, path in files.items():
        print(f"wrote {path}")
    return EXIT_OK


def _load_models_dir(path: Path) -> dict[str, neural.MlpModel]:
    files = sorted(path.glob("*.npz"))
    models = {p.stem: neural.load_model(p) for p in files if p.stem != "global_target"}
    if not models:
        raise ConfigurationError(f"no model files (*.npz) found in {path}")
    return models


def _cmd_aggregate(args) -> int:
    models = _load_models_dir(Path(args.models_dir))
    snapshot = None
    if args.topology:
        snapshot = topology.snapshot_from_csv(args.topology)
    try:
        var_before = analysis.parameter_variance(models)
        aggregated = analysis.aggregate(models, args.tier, snapshot)
        var_after = analysis.parameter_variance(aggregated)
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for agent, model in sorted(aggregated.items()):
        neural.save_model(model, out / f"{agent}.npz")
    report = {
        "tier": args.tier,
        "models": len(aggregated),
        "parameter_variance_before": var_before,
        "parameter_variance_after": var_after,
    }
    (out / "aggregation_report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n"
    )
    print(
        f"aggregated {len(aggregated)} models at tier {args.tier}: "
        f"variance {var_before:.3e} -> {var_after:.3e}"
    )
    return EXIT_OK


def _cmd_cka(args) -> int:
    models = _load_models_dir(Path(args.models_dir))
    try:
        with np.load(args.probes) as data:
            probes = data["states"]
    except Exception as exc:
        raise ConfigurationError(f"cannot read probe states {args.probes}: {exc}") from exc
    try:
        ids, mat = analysis.cka_matrix(models, probes)
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from exc
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["agent_i", "agent_j", "cka"])
        for i, a in enumerate(ids):
            for j, b in enumerate(ids):
                if j <= i:
                    continue
                w.writerow([a, b, repr(float(mat[i, j]))])
    off = mat[np.triu_indices(len(ids), 1)]
    mean = float(off.mean()) if off.size else 1.0
    print(f"wrote {out} ({len(ids)} agents, mean off-diagonal CKA {mean:.4f})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="satnetsim",
        description="LEO constellation packet-routing simulator",
    )
    sub = p.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a scenario")
    run_p.add_argument("--config", help="scenario TOML file (omit for defaults)")
    run_p.add_argument(
        "--set", action="append", metavar="KEY=VALUE",
        help="override a config key (dotted path, TOML value); repeatable",
    )
    run_p.add_argument("--output-dir", help="override output_dir")
    run_p.add_argument("--seed", type=int, help="override seed")
    run_p.set_defaults(func=_cmd_run)

    charts_p = sub.add_parser("charts", help="render charts for a finished run")
    charts_p.add_argument("run_dir")
    charts_p.set_defaults(func=_cmd_charts)

    cmp_p = sub.add_parser("compare", help="overlay several runs")
    cmp_p.add_argument("run_dirs", nargs="+")
    cmp_p.add_argument("--out", required=True, help="output directory")
    cmp_p.set_defaults(func=_cmd_compare)

    agg_p = sub.add_parser("aggregate", help="federated averaging over saved models")
    agg_p.add_argument("models_dir")
    agg_p.add_argument(
        "--tier", required=True, choices=analysis.AGGREGATION_TIERS
    )
    agg_p.add_argument(
        "--topology", help="topology.csv of the run (needed for model_anticipation)"
    )
    agg_p.add_argument("--out", required=True, help="output directory")
    agg_p.set_defaults(func=_cmd_aggregate)

    cka_p = sub.add_parser("cka", help="pairwise model similarity matrix")
    cka_p.add_argument("models_dir")
    cka_p.add_argument("--probes", required=True, help="probes.npz from the run")
    cka_p.add_argument("--out", required=True, help="output CSV path")
    cka_p.set_defaults(func=_cmd_cka)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EngineFault, neural.ModelFormatError) as exc:
        print(f"runtime fault: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except FileNotFoundError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
