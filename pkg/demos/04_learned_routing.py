"""
Learned routing at desk scale
=============================

Train tabular Q-Routing and the deep multi-agent policy on a frozen
2-plane x 4-satellite shell with two gateways, then exploit the learned
knowledge and compare against the slant-range shortest-path baseline on
identical traffic. Both learners find the optimal two-ISL route.

Takes a minute or two (the deep policy trains one gradient step per hop).
"""
import math

import numpy as np

from satnetsim import channel, engine, orbit, topology
from satnetsim.routing import DeepPolicy, QRoutingPolicy, ShortestPathPolicy
from satnetsim.routing.learned import EpsilonSchedule


def scenario(policy, seed=11):
    spec = orbit.ConstellationSpec(2, 4, 3000e3, math.radians(45.0), "star")
    states = orbit.build_constellation(spec)

    def subpoint(state, gw_id, name):
        x, y, z = state.position
        r = float(np.linalg.norm(state.position))
        lon = (math.atan2(y, x) + math.pi) % (2 * math.pi) - math.pi
        return orbit.GatewaySite(gw_id, math.asin(z / r), lon, name)

    gws = [subpoint(states[0], 0, "alpha"), subpoint(states[4], 1, "beta")]
    radio = {
        "isl": channel.RadioParams(55.0, 15.0, 26e9, 20e6),
        "gsl_up": channel.RadioParams(50.0, 5.0, 30e9, 20e6),
        "gsl_down": channel.RadioParams(20.0, 30.0, 20e9, 20e6),
    }
    table = channel.ModcodTable.from_csv(channel.default_modcod_path())
    traffic = engine.TrafficSpec(0.3, 64800, ("G00", "G01"))
    return engine.Simulator(
        states=states, gateways=gws, traffic=traffic, policy=policy,
        rate_fn=channel.make_rate_fn(radio, table),
        topology_interval_s=1e6,  # frozen topology
        seed=seed,
    )


def mean_latency_ms(sim):
    lat = [r.e2e_ns for r in sim.records if r.status == engine.DELIVERED]
    return 1e-6 * float(np.mean(lat))


baseline = scenario(ShortestPathPolicy("slant_range"))
baseline.run(15.0)
base_ms = mean_latency_ms(baseline)
print(f"slant-range Dijkstra baseline: {base_ms:.2f} ms mean E2E")

print("\ntraining Q-Routing (30 sim-seconds, epsilon 1.0 -> 0.05)...")
qr = QRoutingPolicy(alpha=0.3, gamma=0.95, epsilon=EpsilonSchedule(1.0, 0.05, 30000))
scenario(qr).run(30.0)
exploit = QRoutingPolicy(exploit=True, tables=qr.tables)
sim = scenario(exploit)
sim.run(15.0)
q_ms = mean_latency_ms(sim)
print(f"Q-Routing after training:      {q_ms:.2f} ms ({q_ms / base_ms - 1:+.1%} vs baseline)")

print("\ntraining the deep policy (offline phase, shared network, DDQN)...")
dq = DeepPolicy(phase="offline", ddqn=True, learning_rate=1e-3, gamma=0.95,
                batch_size=32, target_sync=500, buffer_capacity=20000,
                epsilon=EpsilonSchedule(1.0, 0.05, 30000))
scenario(dq).run(25.0)
frozen = DeepPolicy(phase="offline", exploit=True, import_model=dq.online[None].copy())
sim = scenario(frozen)
sim.run(15.0)
d_ms = mean_latency_ms(sim)
print(f"deep policy after training:    {d_ms:.2f} ms ({d_ms / base_ms - 1:+.1%} vs baseline)")

print(f"\nreward trace points logged: {len(dq.rewards_log)}; "
      f"final epsilon {dq.current_epsilon():.3f}")
