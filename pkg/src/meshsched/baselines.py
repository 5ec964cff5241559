"""Contention baselines: slotted CSMA with binary exponential backoff and an
adaptive CSMA variant with queue-driven exponential timers.

Both route along static shortest paths, send the head-of-line packet of a
link on all C subcarriers at full power, and ignore deadlines when deciding
whether to transmit.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .mdp import power_grid
from .scheduler import SlotEntry, SlotSchedule, field_usage


def shortest_next_hop(graph, i, dest):
    """Lowest-id neighbour one hop closer to ``dest``; None if there is none."""
    table = graph.hop_table(dest)
    if table[i] <= 0:
        return None
    for j in graph.neighbors(i):
        if table[j] == table[i] - 1:
            return j
    return None


@dataclass
class CsmaState:
    """Per-link backoff state keyed by (i, j)."""

    cw_min: int = 16
    cw_max: int = 1024
    counter: dict = field(default_factory=dict)
    window: dict = field(default_factory=dict)

    def cw(self, link):
        return self.window.get(link, self.cw_min)

    def arm(self, link, rng):
        self.counter[link] = int(rng.integers(0, self.cw(link)))

    def collided(self, link):
        self.window[link] = min(2 * self.cw(link), self.cw_max)

    def succeeded(self, link):
        self.window[link] = self.cw_min


def csma_step(state, link, channel_busy, rng=None):
    """Advance one link's backoff by a slot; True means transmit now.

    A link whose counter is 0 transmits; otherwise the counter counts down
    only while the channel is idle.
    """
    c = state.counter.get(link)
    if c is None:
        if rng is None:
            raise ValueError("unarmed link needs an rng")
        state.arm(link, rng)
        c = state.counter[link]
    if c == 0:
        return True
    if not channel_busy:
        state.counter[link] = c - 1
    return False


@dataclass
class AdaptiveCsmaState:
    """Per-link exponential timers with mean ``m0 / (1 + beta * queue)``."""

    m0: float = 8.0
    beta: float = 0.5
    timer: dict = field(default_factory=dict)

    def mean(self, queue_len):
        return self.m0 / (1.0 + self.beta * queue_len)


def adaptive_csma_step(state, link, queue_len, channel_busy, rng):
    """Advance one link's timer; True means transmit now. Empty queues disarm the timer."""
    if queue_len <= 0:
        state.timer.pop(link, None)
        return False
    t = state.timer.get(link)
    if t is None:
        t = float(rng.exponential(state.mean(queue_len)))
    if t < 1.0:
        state.timer.pop(link, None)
        return True
    if not channel_busy:
        t -= 1.0
    state.timer[link] = t
    return False


class CsmaAgent:
    """Slot-level driver shared by both contention schemes."""

    def __init__(self, graph, flows, variant="csma", cw_min=16, cw_max=1024, m0=8.0, beta=0.5):
        if variant not in ("csma", "adaptive-csma"):
            raise ValueError(f"unknown baseline {variant!r}")
        self.graph = graph
        self.flows = flows
        self.variant = variant
        self.powers = power_grid(graph.max_power, 1)
        self.state = CsmaState(cw_min, cw_max) if variant == "csma" else AdaptiveCsmaState(m0, beta)
        self.queues = {}
        self.queued = set()
        self.busy = np.zeros(graph.n_nodes, dtype=bool)
        self.route = {}
        self.last_links = {}

    def refresh_channel(self):
        pass

    def begin_slot(self, t, snap):
        pass

    def _hop(self, i, fid):
        key = (i, fid)
        if key not in self.route:
            self.route[key] = shortest_next_hop(self.graph, i, self.flows[fid].destination)
        return self.route[key]

    def plan(self, t, live, rng):
        by_pid = {p.pid: p for p in live}
        for link, q in self.queues.items():
            keep = deque(pid for pid in q if pid in by_pid and by_pid[pid].state.node == link[0])
            if len(keep) != len(q):
                self.queued.difference_update(set(q) - set(keep))
                self.queues[link] = keep
        for p in sorted(live, key=lambda p: p.pid):
            if p.pid in self.queued:
                continue
            j = self._hop(p.state.node, p.state.flow_id)
            if j is None:
                continue
            self.queues.setdefault((p.state.node, j), deque()).append(p.pid)
            self.queued.add(p.pid)

        firing = {}
        for link in sorted(self.queues):
            q = self.queues[link]
            busy = bool(self.busy[link[0]])
            if self.variant == "csma":
                if not q:
                    self.state.counter.pop(link, None)
                    continue
                fire = csma_step(self.state, link, busy, rng)
            else:
                fire = adaptive_csma_step(self.state, link, len(q), busy, rng)
            if fire:
                i = link[0]
                # one transmission per node per slot: earliest head-of-line packet wins
                if i not in firing or q[0] < self.queues[firing[i]][0]:
                    firing[i] = link

        sched = SlotSchedule()
        heads = {self.queues[link][0]: link for link in firing.values()}
        C = self.graph.num_subcarriers
        P = self.graph.max_power
        for p in live:
            link = heads.get(p.pid)
            if link is None:
                sched.entries.append(SlotEntry(p.pid, p.state, 0, -1, 0, 0.0, -1, active=False,
                                               reason="hold"))
            else:
                sched.entries.append(SlotEntry(p.pid, p.state, 1, link[1], C, P, 0))
        self.last_links = {e.pid: (e.node, e.next_hop) for e in sched.entries if e.active}
        gain2 = self.graph.gain ** 2
        act = [e for e in sched.entries if e.active]
        total, power, f = field_usage(act, gain2, self.graph.detect_threshold, self.graph.n_nodes)
        sched.used_subcarriers, sched.used_power, sched.fields = total, power, f
        return sched

    def collisions(self, sched):
        """Pids whose receiver is covered by another sender's field or is itself sending."""
        act = [e for e in sched.entries if e.active]
        senders = {e.node for e in act}
        bad = set()
        for e in act:
            if e.next_hop in senders:
                bad.add(e.pid)
                continue
            for o in act:
                if o.node != e.node and sched.fields[o.node, e.next_hop]:
                    bad.add(e.pid)
                    break
        return bad

    def observe(self, t, sched, outcomes, packets):
        delivered, dropped = [], []
        for e in sched.entries:
            nxt, ok, _ = outcomes[e.pid]
            pkt = packets[e.pid]
            link = self.last_links.get(e.pid)
            if link is not None and self.variant == "csma":
                if ok:
                    self.state.succeeded(link)
                else:
                    self.state.collided(link)
                self.state.counter.pop(link, None)
            pkt.state = nxt
            flow = self.flows[nxt.flow_id]
            if nxt.node == flow.destination:
                pkt.mark_delivered(t)
                delivered.append(e.pid)
            elif nxt.ttd == 0:
                pkt.mark_dropped()
                dropped.append(e.pid)
        act = [e.node for e in sched.entries if e.active]
        self.busy = sched.fields[act].any(axis=0) if act else np.zeros(self.graph.n_nodes, bool)
        return delivered, dropped
