import numpy as np
import pytest

from satnetsim import analysis, topology
from satnetsim.routing import neural

from conftest import desk_scenario
from satnetsim.routing import ShortestPathPolicy


def rand_acts(rng, n=64, p=16):
    return rng.normal(size=(n, p))


def test_cka_self_similarity():
    rng = np.random.default_rng(0)
    x = rand_acts(rng)
    assert analysis.linear_cka(x, x) == pytest.approx(1.0, abs=1e-12)


def test_cka_orthogonal_invariance():
    rng = np.random.default_rng(1)
    x = rand_acts(rng)
    q, _ = np.linalg.qr(rng.normal(size=(x.shape[1], x.shape[1])))
    assert analysis.linear_cka(x, x @ q) == pytest.approx(1.0, abs=1e-10)


def test_cka_scale_invariance():
    rng = np.random.default_rng(2)
    x = rand_acts(rng)
    for c in (1e-6, 0.5, 3.0, 1e6, -2.0):
        assert analysis.linear_cka(x, c * x) == pytest.approx(1.0, abs=1e-10)


def test_cka_symmetry():
    rng = np.random.default_rng(3)
    for _ in range(10):
        x, y = rand_acts(rng), rand_acts(rng, p=24)
        assert analysis.linear_cka(x, y) == pytest.approx(
            analysis.linear_cka(y, x), abs=1e-12
        )


def test_cka_range_zero_one():
    rng = np.random.default_rng(4)
    for _ in range(50):
        x, y = rand_acts(rng, n=32, p=8), rand_acts(rng, n=32, p=12)
        v = analysis.linear_cka(x, y)
        assert 0.0 <= v <= 1.0


def test_cka_degenerate_zero():
    rng = np.random.default_rng(5)
    x = rand_acts(rng)
    const = np.ones_like(x)  # centred to zero
    assert analysis.linear_cka(x, const) == 0.0


def test_cka_row_mismatch_faults():
    rng = np.random.default_rng(6)
    with pytest.raises(ValueError, match="row"):
        analysis.linear_cka(rand_acts(rng, n=10), rand_acts(rng, n=12))


def test_probe_activations_requires_two_rows():
    m = neural.init_mlp((4, 8, 2), np.random.default_rng(0))
    with pytest.raises(ValueError, match="probe"):
        analysis.probe_activations(m, np.ones((1, 4)))


def test_probe_activations_centred_and_shaped():
    m = neural.init_mlp((4, 8, 2), np.random.default_rng(0))
    acts = analysis.probe_activations(m, np.random.default_rng(1).normal(size=(32, 4)))
    assert acts.shape == (32, 8)
    assert np.allclose(acts.mean(axis=0), 0.0, atol=1e-12)


def test_identical_models_cka_one():
    rng = np.random.default_rng(7)
    m = neural.init_mlp((6, 16, 3), rng)
    probes = rng.uniform(-1, 1, size=(64, 6))
    a = analysis.probe_activations(m, probes)
    b = analysis.probe_activations(m.copy(), probes)
    assert analysis.linear_cka(a, b) == pytest.approx(1.0, abs=1e-12)


def make_models(n, rng, sizes=(6, 8, 3), ids=None):
    ids = ids or [topology.sat_node_id(i // 4, i % 4) for i in range(n)]
    return {a: neural.init_mlp(sizes, rng) for a in ids}


def test_aggregate_identity_fixed_point():
    rng = np.random.default_rng(8)
    base = neural.init_mlp((6, 8, 3), rng)
    models = {topology.sat_node_id(0, k): base.copy() for k in range(4)}
    for tier in ("orbital_plane", "full_constellation"):
        out = analysis.aggregate(models, tier)
        for a in models:
            assert np.array_equal(out[a].flat_params(), base.flat_params())


def test_aggregate_full_mean_of_opposites_is_zero():
    rng = np.random.default_rng(9)
    m = neural.init_mlp((6, 8, 3), rng)
    neg = neural.MlpModel(
        weights=[-w for w in m.weights], biases=[-b for b in m.biases]
    )
    out = analysis.aggregate(
        {"S00_00": m, "S00_01": neg}, "full_constellation"
    )
    for agg in out.values():
        assert np.allclose(agg.flat_params(), 0.0)


def test_aggregate_plane_tier_uniform_within_plane():
    rng = np.random.default_rng(10)
    models = make_models(8, rng)
    out = analysis.aggregate(models, "orbital_plane")
    probes = rng.uniform(-1, 1, size=(32, 6))
    plane0 = [a for a in out if topology.parse_sat_node(a)[0] == 0]
    acts = [analysis.probe_activations(out[a], probes) for a in plane0]
    for other in acts[1:]:
        assert analysis.linear_cka(acts[0], other) == pytest.approx(1.0, abs=1e-10)
    # but planes may differ from each other
    plane1 = [a for a in out if topology.parse_sat_node(a)[0] == 1]
    assert not np.array_equal(out[plane0[0]].flat_params(), out[plane1[0]].flat_params())


def test_aggregate_neighbor_tier_uses_isl_links():
    pol = ShortestPathPolicy("hop")
    sim = desk_scenario(pol)
    snap = sim.snapshot
    rng = np.random.default_rng(11)
    models = {s: neural.init_mlp((6, 8, 3), rng) for s in snap.sat_ids}
    out = analysis.aggregate(models, "model_anticipation", snap)
    node = "S00_01"
    group = [models[node].flat_params()]
    for nbr, e in snap.adjacency[node].items():
        if e.kind != topology.GSL:
            group.append(models[nbr].flat_params())
    assert len(group) > 1
    assert np.allclose(out[node].flat_params(), np.mean(group, axis=0))


def test_aggregate_neighbor_tier_needs_snapshot():
    rng = np.random.default_rng(12)
    with pytest.raises(ValueError, match="snapshot"):
        analysis.aggregate(make_models(4, rng), "model_anticipation")


def test_aggregate_contraction_and_full_variance_zero():
    pol = ShortestPathPolicy("hop")
    sim = desk_scenario(pol)
    snap = sim.snapshot
    rng = np.random.default_rng(13)
    models = {s: neural.init_mlp((6, 8, 3), rng) for s in snap.sat_ids}
    v0 = analysis.parameter_variance(models)
    for tier in analysis.AGGREGATION_TIERS:
        out = analysis.aggregate(models, tier, snap)
        assert analysis.parameter_variance(out) <= v0 + 1e-15
    full = analysis.aggregate(models, "full_constellation")
    assert analysis.parameter_variance(full) == pytest.approx(0.0, abs=1e-30)
    ids = sorted(full)
    flats = [full[a].flat_params() for a in ids]
    for f in flats[1:]:
        assert np.array_equal(flats[0], f)


def test_aggregate_rejects_mixed_architectures():
    rng = np.random.default_rng(14)
    models = {
        "S00_00": neural.init_mlp((6, 8, 3), rng),
        "S00_01": neural.init_mlp((6, 16, 3), rng),
    }
    with pytest.raises(ValueError, match="architecture"):
        analysis.aggregate(models, "full_constellation")


def test_aggregate_unknown_tier():
    with pytest.raises(ValueError, match="tier"):
        analysis.aggregate({}, "galactic")


def test_cka_matrix_symmetric_unit_diagonal():
    rng = np.random.default_rng(15)
    models = make_models(6, rng)
    probes = rng.uniform(-1, 1, size=(48, 6))
    ids, mat = analysis.cka_matrix(models, probes)
    assert mat.shape == (6, 6)
    assert np.allclose(np.diag(mat), 1.0)
    assert np.array_equal(mat, mat.T)
