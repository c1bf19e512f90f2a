import itertools
import math
from collections import deque

import numpy as np
import pytest

from satnetsim import channel, orbit, topology
from satnetsim.constants import EARTH_RADIUS_M

from conftest import strong_radio


def build(preset_or_spec, gateways=(), rate_fn=None, epoch=0.0):
    if isinstance(preset_or_spec, str):
        spec = orbit.constellation_preset(preset_or_spec)
    else:
        spec = preset_or_spec
    states = orbit.build_constellation(spec)
    if epoch:
        states = orbit.propagate(states, epoch)
    return topology.rebuild(epoch, states, list(gateways), rate_fn=rate_fn)


def test_intra_plane_ring_counts():
    snap = build(orbit.ConstellationSpec(1, 20, 600e3, 1.7))
    assert sum(1 for e in snap.edges if e.kind == topology.ISL_INTRA) == 20


def test_intra_plane_two_sats_single_edge():
    snap = build(orbit.ConstellationSpec(1, 2, 600e3, 1.7))
    intra = [e for e in snap.edges if e.kind == topology.ISL_INTRA]
    assert len(intra) == 1


def test_intra_plane_single_sat_no_edges():
    snap = build(orbit.ConstellationSpec(1, 1, 600e3, 1.7))
    assert not snap.edges


def test_kepler_intra_plane_edge_count():
    # one edge per satellite per ring, 7 planes of 20
    snap = build("kepler")
    assert sum(1 for e in snap.edges if e.kind == topology.ISL_INTRA) == 140


def test_inter_plane_aligned_planes_match_same_index():
    # two nearly parallel planes, zero phasing: counterparts share the
    # in-plane index
    states = []
    for p in range(2):
        for k in range(6):
            anomaly = 2 * math.pi * k / 6
            raan = p * 0.1
            states.append(
                orbit.SatelliteState(
                    sat_id=(p, k),
                    epoch_s=0.0,
                    altitude_m=600e3,
                    inclination_rad=1.0,
                    raan0_rad=raan,
                    anomaly0_rad=anomaly,
                    position=orbit._position_ecef(600e3, 1.0, raan, anomaly, 0.0, 0.0),
                )
            )
    edges = topology.match_inter_plane_greedy(states)
    assert len(edges) == 6
    for a, b, _ in edges:
        assert topology.parse_sat_node(a)[1] == topology.parse_sat_node(b)[1]


def test_inter_plane_single_plane_empty():
    states = orbit.build_constellation(orbit.ConstellationSpec(1, 6, 600e3, 1.0))
    assert topology.match_inter_plane_greedy(states) == []


def _greedy_oracle(states_a, states_b):
    """Sort all visible pairs by distance, scan, accept when both free."""
    cands = []
    for sa in states_a:
        for sb in states_b:
            mid_ok = topology._segment_clears_earth(sa.position, sb.position)
            if mid_ok:
                d = float(np.linalg.norm(sa.position - sb.position))
                cands.append((d, sa.sat_id, sb.sat_id))
    cands.sort()
    used_a, used_b, out = set(), set(), []
    for d, ia, ib in cands:
        if ia in used_a or ib in used_b:
            continue
        used_a.add(ia)
        used_b.add(ib)
        out.append(tuple(sorted((topology.sat_node_id(*ia), topology.sat_node_id(*ib)))))
    return sorted(out)


def test_inter_plane_greedy_equals_scan_oracle_on_small_instances():
    # phase-shifted small plane pairs, several geometries
    for n, phase in [(3, 0.5), (4, 0.3), (4, 1.0), (3, 0.0)]:
        spec = orbit.ConstellationSpec(
            2, n, 800e3, math.radians(70.0), "star", phase * (2 * math.pi / n) / 2
        )
        states = orbit.build_constellation(spec)
        got = sorted(
            tuple(sorted((a, b))) for a, b, _ in topology.match_inter_plane_greedy(states)
        )
        by_plane = {}
        for s in states:
            by_plane.setdefault(s.plane, []).append(s)
        assert got == _greedy_oracle(by_plane[0], by_plane[1])


def test_gsl_zenith_distance():
    spec = orbit.ConstellationSpec(1, 4, 600e3, math.radians(60.0))
    states = orbit.build_constellation(spec)
    from conftest import subpoint_gateway

    gw = subpoint_gateway(states[0], 0)
    links, unconnected = topology.match_gsl(states, [gw])
    assert not unconnected
    ((gnode, snode, d),) = links
    assert snode == "S00_00"
    assert d == pytest.approx(600e3, rel=1e-6)


def test_gsl_conflict_closer_gateway_wins():
    # both gateways nearest to satellite 0; the closer one takes it and the
    # other falls back to the next visible satellite
    spec = orbit.ConstellationSpec(1, 24, 1000e3, math.radians(60.0))
    states = orbit.build_constellation(spec)
    from conftest import subpoint_gateway

    g_close = subpoint_gateway(states[0], 0, "close")  # directly under sat 0
    sub = subpoint_gateway(states[0], 1, "far")
    g_far = orbit.GatewaySite(1, sub.latitude_rad + 0.02, sub.longitude_rad, "far")
    links, unconnected = topology.match_gsl(states, [g_close, g_far])
    assert not unconnected
    by_gw = {g: s for g, s, _ in links}
    assert by_gw["G00"] == "S00_00"
    assert by_gw["G01"] != "S00_00"


def test_gsl_unconnected_gateway_logged_not_fatal():
    # single satellite over the equator; a polar gateway sees nothing
    spec = orbit.ConstellationSpec(1, 1, 600e3, 0.0)
    states = orbit.build_constellation(spec)
    polar = orbit.GatewaySite(0, math.radians(89.0), 0.0, "pole")
    links, unconnected = topology.match_gsl(states, [polar])
    assert links == []
    assert unconnected == ["G00"]


def test_visible_zenith_and_antipodal():
    g = np.array([EARTH_RADIUS_M, 0.0, 0.0])
    overhead = np.array([EARTH_RADIUS_M + 600e3, 0.0, 0.0])
    assert topology.visible(g, overhead)
    sat_a = np.array([EARTH_RADIUS_M + 600e3, 0.0, 0.0])
    sat_b = -sat_a
    assert not topology.visible(sat_a, sat_b)


def test_visible_18_degree_chord_clears():
    # chord midpoint altitude = (R+h)cos(9 deg) - R ~ 514 km
    r = EARTH_RADIUS_M + 600e3
    a = np.array([r, 0.0, 0.0])
    ang = math.radians(18.0)
    b = np.array([r * math.cos(ang), r * math.sin(ang), 0.0])
    assert topology.visible(a, b)
    mid_alt = r * math.cos(math.radians(9.0)) - EARTH_RADIUS_M
    assert mid_alt == pytest.approx(514175.4, abs=100.0)


def test_visible_elevation_mask():
    g = np.array([EARTH_RADIUS_M, 0.0, 0.0])
    # satellite barely above the horizon: elevation ~ 5 deg < 10 deg mask
    low = np.array([EARTH_RADIUS_M + 40e3, 500e3, 0.0])
    assert not topology.visible(g, low)
    assert topology.visible(g, low, min_elevation_rad=math.radians(2.0))


def test_rebuild_deterministic_for_same_positions():
    gws = orbit.load_gateway_csv(orbit.default_gateway_path())
    a = build("kepler", gws)
    b = build("kepler", gws)
    assert a.edges == b.edges


def test_rebuild_after_step_keeps_invariants():
    gws = orbit.load_gateway_csv(orbit.default_gateway_path())
    snap = build("kepler", gws, epoch=15.0)
    topology.check_snapshot_invariants(snap)  # raises on violation
    assert snap.epoch_s == 15.0


def test_rebuild_no_gateways_isl_only():
    snap = build("kepler")
    assert all(e.kind != topology.GSL for e in snap.edges)


def test_antenna_budget_across_orbit():
    gws = orbit.load_gateway_csv(orbit.default_gateway_path())
    for epoch in (0.0, 300.0, 2000.0):
        snap = build("kepler", gws, epoch=epoch)
        for sat in snap.sat_ids:
            kinds = [e.kind for e in snap.adjacency[sat].values()]
            assert kinds.count(topology.ISL_INTRA) <= 2
            assert kinds.count(topology.ISL_INTER) <= 2
            assert kinds.count(topology.GSL) <= 1


def test_edge_symmetry():
    gws = orbit.load_gateway_csv(orbit.default_gateway_path())
    snap = build("kepler", gws)
    for node, nbrs in snap.adjacency.items():
        for nbr, e in nbrs.items():
            assert snap.adjacency[nbr][node] is e
            assert e.distance_m > 0


@pytest.mark.parametrize("preset", ["kepler", "iridium-next", "oneweb", "starlink"])
def test_presets_connected_with_default_gateways(preset, modcod):
    gws = orbit.load_gateway_csv(orbit.default_gateway_path())
    rate_fn = channel.make_rate_fn(strong_radio(), modcod)
    snap = build(preset, gws, rate_fn=rate_fn)
    connected = [g for g in snap.gateway_ids if g not in snap.unconnected_gateways]
    assert connected, "no gateway connected at epoch 0"
    seen = set()
    dq = deque([connected[0]])
    while dq:
        n = dq.popleft()
        if n in seen:
            continue
        seen.add(n)
        dq.extend(m for m in snap.neighbors(n) if m not in seen)
    assert all(g in seen for g in connected)


def test_gateway_exclusive_gsl():
    gws = orbit.load_gateway_csv(orbit.default_gateway_path())
    snap = build("kepler", gws)
    serving = [e.b for e in snap.edges if e.kind == topology.GSL]
    assert len(serving) == len(set(serving))  # a satellite serves <= 1 gateway
    connected = [g for g in snap.gateway_ids if g not in snap.unconnected_gateways]
    assert len(connected) == len(snap.gateway_links)


def test_link_table_slots_consistent():
    gws = orbit.load_gateway_csv(orbit.default_gateway_path())
    snap = build("kepler", gws)
    for sat, slots in snap.link_table.items():
        assert len(slots) == len(topology.LINK_SLOTS)
        p, k = topology.parse_sat_node(sat)
        fwd = slots[0]
        if fwd is not None:
            assert topology.parse_sat_node(fwd.other(sat))[1] == (k + 1) % snap.sats_per_plane
        for e in (slots[2], slots[3]):
            if e is not None:
                assert e.kind == topology.ISL_INTER
        if slots[4] is not None:
            assert slots[4].kind == topology.GSL


def test_export_csv_schema(tmp_path):
    gws = orbit.load_gateway_csv(orbit.default_gateway_path())
    snap = build("kepler", gws)
    out = tmp_path / "topology.csv"
    snap.export_csv(out)
    header = out.read_text().splitlines()[0]
    assert header == "epoch,node_a,node_b,kind,distance_m,rate_bps"
    assert len(out.read_text().splitlines()) == len(snap.edges) + 1
