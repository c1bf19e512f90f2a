"""Post-training analysis of per-agent routing models.

Two tools: a centred-kernel-alignment similarity score between the hidden
representations of two models on a shared probe set, and three tiers of
federated parameter averaging (linked neighbours, whole orbital plane,
full constellation) that progressively homogenise the agents' models.
"""
from __future__ import annotations

import numpy as np

from . import topology
from .routing import neural

AGGREGATION_TIERS = ("model_anticipation", "orbital_plane", "full_constellation")


def center_columns(x: np.ndarray) -> np.ndarray:
    return x - x.mean(axis=0, keepdims=True)


def linear_cka(x: np.ndarray, y: np.ndarray) -> float:
    """Linear CKA between two activation matrices with matching rows.

    Invariant to orthogonal transformations and isotropic scaling of either
    argument; 1 for identical (non-degenerate) representations, 0 when
    either representation is constant.
    """
    if x.shape[0] != y.shape[0]:
        raise ValueError(
            f"activation matrices need equal row counts, got {x.shape[0]} and {y.shape[0]}"
        )
    xc = center_columns(np.asarray(x, dtype=float))
    yc = center_columns(np.asarray(y, dtype=float))
    cross = float(np.linalg.norm(yc.T @ xc, "fro") ** 2)
    nx = float(np.linalg.norm(xc.T @ xc, "fro"))
    ny = float(np.linalg.norm(yc.T @ yc, "fro"))
    if nx == 0.0 or ny == 0.0:
        return 0.0
    return min(1.0, cross / (nx * ny))


def probe_activations(model: neural.MlpModel, probe_states: np.ndarray) -> np.ndarray:
    """Column-centred last-hidden-layer activations on the shared probe set."""
    probes = np.atleast_2d(np.asarray(probe_states, dtype=float))
    if probes.shape[0] < 2:
        raise ValueError(f"need at least 2 probe states, got {probes.shape[0]}")
    return center_columns(neural.hidden_activations(model, probes))


def cka_matrix(
    models: dict[str, neural.MlpModel], probe_states: np.ndarray
) -> tuple[list[str], np.ndarray]:
    """Pairwise CKA over all agents, on one shared probe set."""
    ids = sorted(models)
    acts = {a: probe_activations(models[a], probe_states) for a in ids}
    n = len(ids)
    out = np.ones((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            v = linear_cka(acts[ids[i]], acts[ids[j]])
            out[i, j] = out[j, i] = v
    return ids, out


def _check_same_architecture(models: dict[str, neural.MlpModel]) -> None:
    sizes = {m.sizes for m in models.values()}
    if len(sizes) > 1:
        raise ValueError(f"models disagree on architecture: {sorted(sizes)}")


def _mean_model(group: list[neural.MlpModel]) -> neural.MlpModel:
    return neural.MlpModel(
        weights=[
            np.mean([m.weights[l] for m in group], axis=0)
            for l in range(len(group[0].weights))
        ],
        biases=[
            np.mean([m.biases[l] for m in group], axis=0)
            for l in range(len(group[0].biases))
        ],
    )


def aggregate(
    models: dict[str, neural.MlpModel],
    tier: str,
    snapshot: topology.TopologySnapshot | None = None,
) -> dict[str, neural.MlpModel]:
    """Unweighted parameter averaging at one tier.

    model_anticipation: each agent averages with its currently ISL-linked
    neighbours (needs a topology snapshot). orbital_plane: all agents of a
    plane collapse onto the plane mean. full_constellation: every agent
    receives the global mean. All means are taken over the input models
    simultaneously.
    """
    if tier not in AGGREGATION_TIERS:
        raise ValueError(f"unknown tier {tier!r}; known: {AGGREGATION_TIERS}")
    if not models:
        return {}
    _check_same_architecture(models)

    if tier == "full_constellation":
        mean = _mean_model(list(models.values()))
        return {a: mean.copy() for a in models}

    if tier == "orbital_plane":
        planes: dict[int, list[str]] = {}
        for a in models:
            planes.setdefault(topology.parse_sat_node(a)[0], []).append(a)
        out: dict[str, neural.MlpModel] = {}
        for members in planes.values():
            mean = _mean_model([models[a] for a in members])
            for a in members:
                out[a] = mean.copy()
        return out

    if snapshot is None:
        raise ValueError("model_anticipation tier needs a topology snapshot")
    out = {}
    for a in models:
        group = [models[a]]
        for nbr, edge in snapshot.adjacency.get(a, {}).items():
            if edge.kind != topology.GSL and nbr in models:
                group.append(models[nbr])
        out[a] = _mean_model(group)
    return out


def parameter_variance(models: dict[str, neural.MlpModel]) -> float:
    """Mean per-coordinate variance of the flattened parameters across agents.

    Computed on deviations from the first agent (shift invariance), which
    keeps the result exactly zero when all agents are identical.
    """
    flat = np.stack([m.flat_params() for m in models.values()])
    return float(np.mean(np.var(flat - flat[0], axis=0)))
