"""Time-slotted simulation loop and run metrics."""
from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .baselines import CsmaAgent
from .config import SimConfig
from .errors import InvariantViolation
from .feedback import dump_tables
from .mdp import Packet, PacketState, PhyModel
from .net import regenerate_channel
from .pgds import PGDSAgent
from .scheduler import check_schedule, execute_slot
from .shaping import PotentialSnapshot

SERIES = ("generated", "delivered", "dropped", "in_flight", "scheduled", "removed",
          "lambda_mean", "mu_mean")


@dataclass
class MetricsLog:
    slots: int
    packet_bits: int = 100
    warmup_frac: float = 0.2
    series: dict = field(default_factory=dict)
    packets: list = field(default_factory=list)
    constraint_violations: int = 0
    feedback_missing: int = 0
    trajectories: int = 0

    def __post_init__(self):
        for k in SERIES:
            self.series.setdefault(k, np.zeros(self.slots))

    @property
    def warmup(self):
        return int(self.slots * self.warmup_frac)

    @property
    def throughput(self):
        """Delivered unit packets per slot."""
        return self.series["delivered"]

    def steady_throughput(self):
        return float(self.throughput[self.warmup:].mean())

    def steady_throughput_bits(self):
        return self.steady_throughput() * self.packet_bits

    def terminal_throughput(self, tail=0.2):
        k = max(1, int(round(self.slots * tail)))
        return float(self.throughput[-k:].mean())

    def running_mean(self, window=50):
        x = self.throughput
        c = np.concatenate(([0.0], np.cumsum(x)))
        idx = np.arange(1, len(x) + 1)
        lo = np.maximum(idx - window, 0)
        return (c[idx] - c[lo]) / (idx - lo)

    def time_to_fraction(self, frac=0.9, window=50, tail=0.2):
        """First slot whose trailing ``window``-slot mean reaches ``frac`` of the terminal mean.

        Slots before the first full window are not eligible. Returns the slot
        count if the threshold is never reached.
        """
        target = frac * self.terminal_throughput(tail)
        rm = self.running_mean(window)
        ok = np.flatnonzero(rm[window - 1:] >= target)
        if target <= 0 or not len(ok):
            return self.slots if target > 0 else 0
        return int(ok[0] + window - 1)

    def finished_after_warmup(self):
        w = self.warmup
        return [p for p in self.packets if p["birth"] >= w and p["status"] != "in_flight"]

    def delay_violation(self):
        """Share of steady-state packets that missed their deadline."""
        done = self.finished_after_warmup()
        if not done:
            return 0.0
        return sum(p["status"] == "dropped" for p in done) / len(done)

    def delays(self):
        return np.array([p["delay"] for p in self.packets if p["status"] == "delivered"], dtype=int)

    def summary(self):
        d = self.delays()
        return {
            "slots": self.slots,
            "generated": int(self.series["generated"].sum()),
            "delivered": int(self.series["delivered"].sum()),
            "dropped": int(self.series["dropped"].sum()),
            "steady_throughput_units": self.steady_throughput(),
            "steady_throughput_bits": self.steady_throughput_bits(),
            "terminal_throughput_units": self.terminal_throughput(),
            "time_to_90": self.time_to_fraction(0.9),
            "delay_violation": self.delay_violation(),
            "mean_delay": float(d.mean()) if len(d) else None,
            "constraint_violations": self.constraint_violations,
            "feedback_missing": self.feedback_missing,
            "trajectories": self.trajectories,
        }

    def write(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "metrics.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("slot", "throughput_bits") + SERIES)
            for t in range(self.slots):
                row = [t, repr(float(self.series["delivered"][t] * self.packet_bits))]
                row += [repr(float(self.series[k][t])) for k in SERIES]
                w.writerow(row)
        with open(os.path.join(out_dir, "packets.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            cols = ("pid", "flow", "birth", "end", "status", "delay")
            w.writerow(cols)
            for p in self.packets:
                w.writerow([p[c] for c in cols])
        with open(os.path.join(out_dir, "summary.json"), "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)


def make_agent(cfg, graph, flows):
    if cfg.scheduler == "pgds":
        return PGDSAgent(graph, flows, cfg.pgds, cfg.packet_bits)
    c = cfg.csma
    return CsmaAgent(graph, flows, cfg.scheduler, c.cw_min, c.cw_max, c.m0, c.beta)


class Simulation:
    """One deterministic replication; ``step`` advances a slot."""

    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        ss = np.random.SeedSequence(cfg.seed)
        s_arr, s_chan, s_sched, s_phy = ss.spawn(4)
        self.rng_arrivals = np.random.default_rng(s_arr)
        self.rng_sched = np.random.default_rng(s_sched)
        self.rng_phy = np.random.default_rng(s_phy)
        self.channel = cfg.build_channel(int(s_chan.generate_state(1)[0]))
        self.graph = cfg.build_graph(self.channel)
        self.flows = cfg.build_flows(self.graph)
        self.phy = PhyModel(cfg.error_model, cfg.error_k)
        self.agent = make_agent(cfg, self.graph, self.flows)
        self.metrics = MetricsLog(cfg.slots, cfg.packet_bits, cfg.warmup_frac)
        self.packets = {}
        self.live = []
        self.next_pid = 0
        self.credit = np.zeros(len(self.flows))
        self.totals = {"generated": 0, "delivered": 0, "dropped": 0}
        self.t = 0
        self._fb_trace = open(cfg.trace_feedback, "w") if cfg.trace_feedback else None
        self._sched_trace = None
        self._sched_fh = None
        if cfg.trace_schedule:
            self._sched_fh = open(cfg.trace_schedule, "w", newline="")
            self._sched_trace = csv.writer(self._sched_fh)
            self._sched_trace.writerow(("slot", "packet", "node", "action", "finalized", "reason"))

    def _arrivals(self, t):
        n = 0
        for fid in sorted(self.flows):
            f = self.flows[fid]
            if self.cfg.arrivals == "poisson":
                k = int(self.rng_arrivals.poisson(f.arrival_rate))
            else:
                self.credit[fid] += f.arrival_rate
                k = int(np.floor(self.credit[fid] + 1e-12))
                self.credit[fid] -= k
            for _ in range(k):
                p = Packet(self.next_pid, PacketState(fid, f.source, f.deadline), self.cfg.packet_bits, t)
                self.packets[p.pid] = p
                self.live.append(p)
                self.next_pid += 1
            n += k
        return n

    def step(self):
        t = self.t
        m = self.metrics
        before = self.graph.gain
        regenerate_channel(self.channel, self.graph, t)
        if self.graph.gain is not before:
            self.agent.refresh_channel()
        gen = self._arrivals(t)
        self.totals["generated"] += gen
        snap = None
        if self.cfg.scheduler == "pgds":
            snap = PotentialSnapshot.build(self.live, self.flows, self.graph,
                                          self.agent.potential_scale)
        self.agent.begin_slot(t, snap)
        sched = self.agent.plan(t, self.live, self.rng_sched)
        if self.cfg.check_invariants and self.cfg.scheduler == "pgds":
            m.constraint_violations += len(check_schedule(sched, self.graph))
        outcomes = execute_slot(sched, self.graph, self.rng_phy, self.phy, self.agent.powers,
                                self.packets)
        if hasattr(self.agent, "collisions"):
            for pid in self.agent.collisions(sched):
                s = self.packets[pid].state
                outcomes[pid] = (PacketState(s.flow_id, s.node, s.ttd - 1), False, 0.0)
        delivered, dropped = self.agent.observe(t, sched, outcomes, self.packets)
        for pid in delivered:
            p = self.packets[pid]
            delay = t - p.birth_slot + 1
            if delay > self.flows[p.state.flow_id].deadline:
                raise InvariantViolation(f"packet {pid} delivered after its deadline")
            m.packets.append({"pid": pid, "flow": p.state.flow_id, "birth": p.birth_slot,
                              "end": t, "status": "delivered", "delay": delay})
        for pid in dropped:
            p = self.packets[pid]
            m.packets.append({"pid": pid, "flow": p.state.flow_id, "birth": p.birth_slot,
                              "end": t, "status": "dropped", "delay": -1})
        self.live = [p for p in self.live if p.live]
        self.totals["delivered"] += len(delivered)
        self.totals["dropped"] += len(dropped)
        tot = self.totals
        if tot["generated"] != tot["delivered"] + tot["dropped"] + len(self.live):
            raise InvariantViolation(f"packet conservation broken at slot {t}")

        s = m.series
        s["generated"][t] = gen
        s["delivered"][t] = len(delivered)
        s["dropped"][t] = len(dropped)
        s["in_flight"][t] = len(self.live)
        s["scheduled"][t] = sum(1 for e in sched.entries if e.active)
        s["removed"][t] = len(sched.removed)
        duals = getattr(self.agent, "duals", None)
        if duals is not None:
            s["lambda_mean"][t] = float(duals.lam.mean())
            s["mu_mean"][t] = float(duals.mu.mean())
        if self._fb_trace is not None and hasattr(self.agent, "tables"):
            dump_tables(self.agent.tables, self._fb_trace, t)
        if self._sched_trace is not None:
            for e in sched.entries:
                self._sched_trace.writerow((t, e.pid, e.node, e.action_idx, int(e.active), e.reason))
        self.t += 1

    def finish(self):
        m = self.metrics
        for p in self.live:
            m.packets.append({"pid": p.pid, "flow": p.state.flow_id, "birth": p.birth_slot,
                              "end": -1, "status": "in_flight", "delay": -1})
        m.packets.sort(key=lambda r: r["pid"])
        if hasattr(self.agent, "tables"):
            m.feedback_missing = self.agent.tables.missing
            m.trajectories = self.agent.trajectories
        for fh in (self._fb_trace, self._sched_fh):
            if fh is not None:
                fh.close()
        return m


def run(cfg: SimConfig, out_dir=None):
    sim = Simulation(cfg)
    for _ in range(cfg.slots):
        sim.step()
    m = sim.finish()
    if out_dir:
        m.write(out_dir)
    return m
