"""Per-slot scheduling: policy sampling with bit-budget retries, capacity
resolution with value-ranked removal, half-duplex, and slot execution."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mdp import HOLD, PacketState, ScheduleAction, transition


@dataclass
class SlotEntry:
    pid: int
    state: PacketState
    action_idx: int
    next_hop: int
    n_c: int
    n_p: float
    level: int = -1
    value: float = 0.0
    active: bool = True
    reason: str = ""
    node: int = field(init=False)

    def __post_init__(self):
        self.node = self.state.node


@dataclass
class SlotSchedule:
    entries: list = field(default_factory=list)
    removed: list = field(default_factory=list)
    used_subcarriers: np.ndarray | None = None
    used_power: np.ndarray | None = None
    fields: np.ndarray | None = None

    def active(self):
        return [e for e in self.entries if e.active]


def sample_resources(policy, state, budgets, rng, retry_limit=8, n_eps=10.0, bits=100):
    """Sample an action index, resampling while the bit budget misses the packet size.

    ``budgets`` holds the bit budget of every action at the packet's node. Hold
    (index 0) is always accepted; after ``retry_limit`` rejected resamples the
    packet holds. All ``retry_limit + 1`` uniforms are drawn up front so the
    stream advances by the same amount every call. Returns ``(index, draws)``.
    """
    c = policy.cdf(state)
    u = rng.random(retry_limit + 1)
    idx = np.minimum(np.searchsorted(c, u, side="right"), len(c) - 1)
    ok = (idx == 0) | (np.abs(budgets[idx] - bits) <= n_eps)
    hit = np.flatnonzero(ok)
    if len(hit):
        return int(idx[hit[0]]), int(hit[0]) + 1
    return 0, retry_limit + 1


def _node_power(entries, n):
    p = np.zeros(n)
    for e in entries:
        if e.active:
            p[e.node] += e.n_p
    return p


def _fields(gain2, tx_power, threshold):
    """Boolean matrix F[i, j]: j hears i at i's total power this slot."""
    f = tx_power[:, None] * gain2 > threshold
    np.fill_diagonal(f, False)
    return f


def field_usage(entries, gain2, threshold, n):
    """Per-node totals: own subcarriers plus those used inside the node's field."""
    power = _node_power(entries, n)
    own = np.zeros(n)
    for e in entries:
        if e.active:
            own[e.node] += e.n_c
    f = _fields(gain2, power, threshold)
    total = np.where(power > 0, own + f.astype(float) @ own, 0.0)
    return total, power, f


def _drop(entry, reason, sched):
    entry.active = False
    entry.reason = reason
    sched.removed.append(entry.pid)


def _weakest(cands):
    return min(cands, key=lambda e: (e.value, e.pid))


def resolve_capacity(sched, graph, value_fn=None):
    """Turn the fewest-value entries into holds until every constraint holds.

    Order: field subcarrier totals <= C, then per-node power <= P, then
    half-duplex. Each removal picks the active entry with the smallest state
    value among those involved (ties go to the lower packet id). Surviving
    entries are never modified.
    """
    n = graph.n_nodes
    C = graph.num_subcarriers
    gain2 = graph.gain * graph.gain
    if value_fn is not None:
        for e in sched.entries:
            e.value = value_fn(e.state)
    tx = [e for e in sched.entries if e.active and e.n_c > 0]
    for e in sched.entries:
        if e.active and e.n_c == 0:
            e.active = False
            e.reason = "hold"

    while True:
        total, power, f = field_usage(tx, gain2, graph.detect_threshold, n)
        over = np.flatnonzero(total > C)
        if not len(over):
            break
        i = int(over[0])
        cands = [e for e in tx if e.active and (e.node == i or f[i, e.node])]
        _drop(_weakest(cands), "capacity", sched)

    for i in range(n):
        while True:
            mine = [e for e in tx if e.active and e.node == i]
            if sum(e.n_p for e in mine) <= graph.max_power + 1e-9:
                break
            _drop(_weakest(mine), "power", sched)

    while True:
        senders = {e.node for e in tx if e.active}
        both = senders & {e.next_hop for e in tx if e.active}
        if not both:
            break
        cands = [e for e in tx if e.active and (e.node in both or e.next_hop in both)]
        _drop(_weakest(cands), "half_duplex", sched)

    total, power, f = field_usage(tx, gain2, graph.detect_threshold, n)
    sched.used_subcarriers = total
    sched.used_power = power
    sched.fields = f
    return sched


def check_schedule(sched, graph):
    """List of violated constraints in a finalized schedule (empty when feasible)."""
    n = graph.n_nodes
    gain2 = graph.gain * graph.gain
    act = [e for e in sched.entries if e.active and e.n_c > 0]
    total, power, _ = field_usage(act, gain2, graph.detect_threshold, n)
    bad = []
    for i in np.flatnonzero(total > graph.num_subcarriers):
        bad.append(("capacity", int(i), float(total[i])))
    for i in np.flatnonzero(power > graph.max_power + 1e-9):
        bad.append(("power", int(i), float(power[i])))
    senders = {e.node for e in act}
    for e in act:
        if e.next_hop in senders:
            bad.append(("half_duplex", e.next_hop, e.pid))
    return bad


def interference_at(sched, graph, entry):
    """Power arriving at ``entry``'s receiver from other senders whose field covers it."""
    j = entry.next_hop
    f = sched.fields
    gain2_j = graph.gain[:, j] ** 2
    total = 0.0
    for e in sched.entries:
        if not e.active or e.n_c == 0 or e.node == entry.node:
            continue
        if f[e.node, j]:
            total += e.n_p * gain2_j[e.node]
    return total


def execute_slot(sched, graph, rng, phy, powers, packets):
    """Apply the transition to every scheduled packet.

    Returns ``{pid: (next_state, success, interference)}``; held and removed
    entries move to (i, ttd - 1).
    """
    out = {}
    for e in sched.entries:
        pkt = packets[e.pid]
        if e.active and e.n_c > 0:
            interf = interference_at(sched, graph, e)
            act = ScheduleAction(e.next_hop, e.n_c, e.level)
            nxt, ok = transition(graph, pkt, act, interf, rng, phy, powers)
            out[e.pid] = (nxt, ok, interf)
        else:
            nxt, ok = transition(graph, pkt, HOLD, 0.0, rng, phy, powers)
            out[e.pid] = (nxt, False, 0.0)
    return out

