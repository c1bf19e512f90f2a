"""Interface between the event engine and a routing policy."""
from __future__ import annotations


class RoutingPolicy:
    """Chooses the next hop for the head-of-line packet of a satellite.

    Gateways are not policy-controlled: their single GSL uplink is forced
    by the engine. A policy may stash per-packet decision context on
    ``packet.policy_ctx``; the engine then reports the hop outcome through
    ``hop_feedback`` at the arrival event of the receiving node.
    """

    def bind(self, sim) -> None:
        self.sim = sim

    def on_topology(self, snapshot) -> None:
        pass

    def next_hop(self, node: str, packet, now_ns: int) -> str | None:
        """Neighbour to forward to, or None when the packet is stuck."""
        raise NotImplementedError

    def hop_feedback(self, fb) -> None:
        pass

    def train_step(self, now_ns: int) -> None:
        pass
