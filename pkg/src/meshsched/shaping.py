"""Potential-based auxiliary reward over packet occupancy and hop distance."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field


@dataclass
class PotentialSnapshot:
    """Per-slot occupancy u_L and per-flow hop tables d.

    ``hops[flow_id]`` is an array over nodes with -1 for unreachable nodes.
    ``scale`` multiplies every potential so shaping can be expressed in the
    same unit as the delivery reward.
    """

    u_L: dict = field(default_factory=dict)
    hops: dict = field(default_factory=dict)
    scale: float = 1.0

    @classmethod
    def build(cls, packets, flows, graph, scale=1.0):
        """Snapshot from live packets; ``flows`` maps flow id to FlowSpec."""
        occ = Counter(p.state for p in packets if p.live)
        hops = {fid: graph.hop_table(f.destination) for fid, f in flows.items()}
        return cls(dict(occ), hops, scale)


def potential(snapshot, state):
    """scale * u_L(s) / d for d >= 1; zero at the destination, unreachable nodes and expired states."""
    if state.ttd <= 0:
        return 0.0
    d = int(snapshot.hops[state.flow_id][state.node])
    if d <= 0:
        return 0.0
    return snapshot.scale * snapshot.u_L.get(state, 0) / d


def auxiliary_reward(snapshot, s, s_next, next_snapshot=None):
    """phi(s') - phi(s).

    With ``next_snapshot`` the successor is scored against the occupancy of
    the slot in which it is actually held; by default both use ``snapshot``.
    """
    if s.flow_id != s_next.flow_id:
        raise ValueError("shaping across different flows")
    after = snapshot if next_snapshot is None else next_snapshot
    return potential(after, s_next) - potential(snapshot, s)
