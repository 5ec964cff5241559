"""Learning scheduler: per-packet policy sampling, feedback-driven NPG updates, dual prices."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .feedback import FeedbackRecord, FeedbackTables, backtrack, expire_records, record_hop
from .mdp import ActionSpace, power_grid, unit_reward
from .policy import (DualVariables, PolicyTable, ReturnEstimator, npg_update,
                     record_trajectory, update_duals)
from .scheduler import SlotEntry, SlotSchedule, resolve_capacity, sample_resources
from .shaping import potential


@dataclass
class PGDSParams:
    eta1: float = 0.01
    eta2: float = 0.01
    eta3: float = 0.01
    dual_cap: float = 100.0
    dual_mode: str = "ascent"
    n_eps: float = 10.0
    retry_limit: int = 8
    power_levels: int = 4
    decay: float | None = 0.99
    shaping: bool = True
    bootstrap: bool = True
    feedback_latency: str = "instant"
    feedback_delay: int = 0
    reward_fn: str = "throughput"
    potential_scale: float = 1.0


class PGDSAgent:
    """Distributed learner shared by all nodes of one replication.

    Each slot: ``begin_slot`` settles last slot's hops once this slot's
    occupancy is known, ``plan`` samples and resolves a schedule, ``observe``
    writes feedback records, pushes finished trajectories through the
    estimators and updates the multipliers.
    """

    def __init__(self, graph, flows, params=None, packet_bits=100):
        self.graph = graph
        self.flows = flows
        self.p = params or PGDSParams()
        self.bits = packet_bits
        self.powers = power_grid(graph.max_power, self.p.power_levels)
        self.spaces = {i: ActionSpace(graph.neighbors(i), graph.num_subcarriers, self.powers)
                       for i in graph.nodes}
        self.policy = PolicyTable(self.spaces, self.p.eta1)
        self.est = ReturnEstimator(self.spaces, self.p.decay)
        self.duals = DualVariables(graph.n_nodes, self.p.eta2, self.p.eta3, self.p.dual_cap,
                                   self.p.dual_mode)
        self.tables = FeedbackTables.for_graph(graph)
        self.horizon = max(f.deadline for f in flows.values()) + self.p.feedback_delay + 1
        self.pending = []
        self.delayed = []
        self.prev_state = {}
        self.prev_snap = None
        self.snap = None
        self.trajectories = 0
        self.refresh_channel()

    @property
    def potential_scale(self):
        return self.p.potential_scale

    def refresh_channel(self):
        self.budgets = {i: sp.bit_budgets(self.graph, i) for i, sp in self.spaces.items()}

    def _step(self, s):
        npg_update(self.policy, s, self.est.advantages(s))

    def _learn(self, traj):
        self.trajectories += 1
        record_trajectory(self.est, traj)
        for s, _, _ in traj:
            self._step(s)

    def begin_slot(self, t, snap):
        self.prev_snap, self.snap = self.snap, snap
        for rec in self.pending:
            if self.p.shaping:
                rec.H = potential(snap, rec.next_state) - potential(self.prev_snap, rec.current_state)
            if self.p.bootstrap:
                s = rec.current_state
                target = rec.step_reward() + self.est.value(rec.next_state)
                self.est.fold(s, rec.action, target)
                self._step(s)
        self.pending = []
        if self.delayed:
            due = [d for d in self.delayed if d[0] <= t]
            self.delayed = [d for d in self.delayed if d[0] > t]
            for _, traj in due:
                self._learn(traj)
        if t % 16 == 0:
            expire_records(self.tables, t, self.horizon)

    def plan(self, t, live, rng):
        sched = SlotSchedule()
        for pkt in live:
            s = pkt.state
            idx, _ = sample_resources(self.policy, s, self.budgets[s.node], rng,
                                      self.p.retry_limit, self.p.n_eps, self.bits)
            sp = self.spaces[s.node]
            sched.entries.append(SlotEntry(pkt.pid, s, idx, int(sp.next_hop[idx]), int(sp.n_c[idx]),
                                           float(sp.n_p[idx]), int(sp.level[idx])))
        return resolve_capacity(sched, self.graph, self.est.value)

    def observe(self, t, sched, outcomes, packets):
        """Record hops, settle finished packets; returns ``(delivered, dropped)`` pid lists."""
        at_node = np.zeros(self.graph.n_nodes, dtype=int)
        own = np.zeros(self.graph.n_nodes)
        for e in sched.entries:
            at_node[e.node] += 1
            if e.active:
                own[e.node] += e.n_c
        field_sc = sched.used_subcarriers - own
        lam, mu = self.duals.lam, self.duals.mu
        delivered, dropped = [], []
        snap = self.snap
        for e in sched.entries:
            pkt = packets[e.pid]
            nxt, ok, _ = outcomes[e.pid]
            s = e.state
            i = s.node
            flow = self.flows[s.flow_id]
            rec = FeedbackRecord(
                packet_id=e.pid, slot=t, flow_id=s.flow_id,
                previous_state=self.prev_state.get(e.pid), current_state=s, next_state=nxt,
                action=e.action_idx,
                n_c=e.n_c if e.active else 0, n_p=e.n_p if e.active else 0.0,
                interference_subcarriers=int(round(field_sc[i])) if sched.used_power[i] > 0 else 0,
                N_i=int(at_node[i]), lam=float(lam[i]), mu=float(mu[i]), w_f=flow.weight)
            record_hop(self.tables, i, rec)
            self.prev_state[e.pid] = s
            pkt.state = nxt
            if nxt.node == flow.destination:
                pkt.mark_delivered(t)
                delivered.append(e.pid)
                self._finish(t, rec, pkt, unit_reward(self.p.reward_fn, self.bits), snap)
            elif nxt.ttd == 0:
                pkt.mark_dropped()
                dropped.append(e.pid)
                self._finish(t, rec, pkt, 0.0, snap)
            else:
                self.pending.append(rec)
        sc, pw = sched.used_subcarriers, sched.used_power
        for i in self.graph.nodes:
            update_duals(self.duals, i, sc[i], pw[i], self.graph.num_subcarriers,
                         self.graph.max_power)
        return delivered, dropped

    def _finish(self, t, rec, pkt, u, snap):
        if self.p.shaping:
            rec.H = -potential(snap, rec.current_state)
        self.prev_state.pop(pkt.pid, None)
        traj = backtrack(self.tables, rec.flow_id, rec.next_state, u, pkt.pid)
        if traj is None:
            return
        if self.p.feedback_latency == "hop_delayed":
            self.delayed.append((t + len(traj), traj))
        else:
            self._learn(traj)
