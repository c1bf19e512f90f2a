"""Shared scenario builders for the test suite."""
import math

import numpy as np
import pytest

from satnetsim import channel, engine, orbit, topology


def strong_radio(isl_eirp=40.0, up_eirp=50.0, down_eirp=20.0):
    """Radio sets for small test scenarios where ISLs span long arcs."""
    return {
        "isl": channel.RadioParams(isl_eirp, 15.0, 26e9, 20e6),
        "gsl_up": channel.RadioParams(up_eirp, 5.0, 30e9, 20e6),
        "gsl_down": channel.RadioParams(down_eirp, 30.0, 20e9, 20e6),
    }


@pytest.fixture(scope="session")
def modcod():
    return channel.ModcodTable.from_csv(channel.default_modcod_path())


def subpoint_gateway(state, gw_id, name=""):
    """A gateway directly under a satellite's epoch-0 position."""
    x, y, z = state.position
    r = float(np.linalg.norm(state.position))
    lat = math.asin(z / r)
    lon = math.atan2(y, x)
    lon = (lon + math.pi) % (2 * math.pi) - math.pi
    return orbit.GatewaySite(gw_id=gw_id, latitude_rad=lat, longitude_rad=lon, name=name)


def ring_scenario(policy, *, n_sats=8, altitude=1000e3, load=0.05, seed=7,
                  gw_slots=(0, 2), queue_capacity=100, topology_interval_s=1e6,
                  isl_eirp=40.0, record_paths=True, ttl_hops=250):
    """Single-plane ring with gateways under two of its satellites.

    The huge default topology interval freezes the graph; pass a small one
    to exercise rebuilds.
    """
    spec = orbit.ConstellationSpec(1, n_sats, altitude, math.radians(60.0), "star")
    states = orbit.build_constellation(spec)
    gws = [subpoint_gateway(states[s], i, f"gw{i}") for i, s in enumerate(gw_slots)]
    table = channel.ModcodTable.from_csv(channel.default_modcod_path())
    rate_fn = channel.make_rate_fn(strong_radio(isl_eirp=isl_eirp), table)
    traffic = engine.TrafficSpec(
        load, 64800, tuple(topology.gw_node_id(g.gw_id) for g in gws)
    )
    return engine.Simulator(
        states=states,
        gateways=gws,
        traffic=traffic,
        policy=policy,
        rate_fn=rate_fn,
        queue_capacity=queue_capacity,
        topology_interval_s=topology_interval_s,
        seed=seed,
        record_paths=record_paths,
        ttl_hops=ttl_hops,
    )


def desk_scenario(policy, *, load=0.3, seed=11, queue_capacity=100,
                  topology_interval_s=1e6, record_paths=True):
    """Frozen 2-plane x 4-satellite shell with 2 gateways, used by the
    learned-routing convergence checks."""
    spec = orbit.ConstellationSpec(2, 4, 3000e3, math.radians(45.0), "star")
    states = orbit.build_constellation(spec)
    gws = [
        subpoint_gateway(states[0], 0, "gw-a"),   # under S00_00
        subpoint_gateway(states[4], 1, "gw-b"),   # under S01_00
    ]
    table = channel.ModcodTable.from_csv(channel.default_modcod_path())
    rate_fn = channel.make_rate_fn(strong_radio(isl_eirp=55.0), table)
    traffic = engine.TrafficSpec(
        load, 64800, tuple(topology.gw_node_id(g.gw_id) for g in gws)
    )
    return engine.Simulator(
        states=states,
        gateways=gws,
        traffic=traffic,
        policy=policy,
        rate_fn=rate_fn,
        queue_capacity=queue_capacity,
        topology_interval_s=topology_interval_s,
        seed=seed,
        record_paths=record_paths,
    )
