"""Named experiment grids and a replication runner with mean/stderr summaries."""
from __future__ import annotations

import copy
import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .config import SimConfig
from .engine import run

ARRIVAL_SUMS = (1.0, 2.0, 3.0, 4.0)
DEFAULT_SLOTS = 3000

# coherence times in slots; the longest deadline is 10 slots
FAST_COHERENCE = 5
SLOW_COHERENCE = 25


def mesh_flows(k):
    """Four 2-hop flows, one from each corner of a k x k lattice clockwise along the edge."""
    if k < 3:
        raise ValueError("need k >= 3 for 2-hop edge flows")
    at = lambda r, c: r * k + c
    return [(at(0, 0), at(0, 2)), (at(0, k - 1), at(2, k - 1)),
            (at(k - 1, k - 1), at(k - 1, k - 3)), (at(k - 1, 0), at(k - 3, 0))]


def corner_flow(k):
    """One flow between opposite corners of a k x k lattice, so paths can cross every node."""
    return [(0, k * k - 1)]


def tree_flows(k):
    """Top-row leaves two hops down their own column."""
    return [((k - 1) * k + c, (k - 3) * k + c) for c in range(4)]


def star_flows(arm):
    """Each arm tip two hops toward the centre."""
    if arm < 3:
        raise ValueError("star arms need >= 3 nodes")
    return [(1 + a * arm + arm - 1, 1 + a * arm + arm - 3) for a in range(4)]


TOPOLOGIES = {
    "mesh": ({"kind": "mesh", "nodes": 16}, mesh_flows(4)),
    "grid": ({"kind": "grid", "nodes": 16}, mesh_flows(4)),
    "tree": ({"kind": "tree", "nodes": 16}, tree_flows(4)),
    "star": ({"kind": "star", "nodes": 17}, star_flows(4)),
}


def make_config(topology="mesh", total=2.0, seed=0, slots=DEFAULT_SLOTS, scheduler="pgds",
                deadline=10, channel=None, **pgds):
    """SimConfig with four equal-rate flows summing to ``total`` unit packets per slot."""
    if isinstance(topology, tuple):
        topo, flows = topology
    else:
        topo, flows = TOPOLOGIES[topology]
    cfg = SimConfig(
        topology=dict(topo),
        flows=[{"source": s, "destination": d, "deadline": deadline, "arrival_rate": total / len(flows)}
               for s, d in flows],
        scheduler=scheduler, slots=slots, seed=seed, channel=dict(channel or {}))
    for k, v in pgds.items():
        if not hasattr(cfg.pgds, k):
            raise KeyError(f"unknown PGDS parameter {k!r}")
        setattr(cfg.pgds, k, v)
    return cfg


def _corner_mesh(k):
    return ({"kind": "mesh", "nodes": k * k}, corner_flow(k))


def _fading(coherence):
    if coherence is None:
        return {}
    return {"mode": "block_fading", "coherence_slots": coherence}


@dataclass
class Condition:
    label: dict
    kwargs: dict = field(default_factory=dict)


def conditions(preset):
    """Grid of labelled conditions for ``preset``."""
    out = []
    if preset == "fig3a":
        for s in ARRIVAL_SUMS:
            out.append(Condition({"arrival_sum": s}, {"total": s}))
    elif preset == "fig3b":
        for s in ARRIVAL_SUMS[:3]:
            for shaping in (True, False):
                out.append(Condition({"arrival_sum": s, "shaping": shaping},
                                     {"total": s, "shaping": shaping}))
    elif preset == "fig3c":
        for k in (3, 4, 5):
            out.append(Condition({"nodes": k * k}, {"topology": _corner_mesh(k), "total": 1.0}))
    elif preset in ("fig4a", "fig4b"):
        sums = ARRIVAL_SUMS if preset == "fig4a" else (2.0,)
        for topo in ("tree", "grid", "star"):
            for s in sums:
                out.append(Condition({"topology": topo, "arrival_sum": s},
                                     {"topology": topo, "total": s}))
    elif preset == "fig4c":
        for topo in ("tree", "grid", "star"):
            for s in ARRIVAL_SUMS + (5.0, 6.0):
                out.append(Condition({"topology": topo, "arrival_sum": s},
                                     {"topology": topo, "total": s}))
    elif preset in ("fig5a", "fig5b"):
        sums = ARRIVAL_SUMS if preset == "fig5a" else (2.0,)
        for sched in ("pgds", "adaptive-csma", "csma"):
            for s in sums:
                out.append(Condition({"scheduler": sched, "arrival_sum": s},
                                     {"scheduler": sched, "total": s}))
    elif preset == "fig5c":
        for name, coh in (("static", None), ("slow", SLOW_COHERENCE), ("fast", FAST_COHERENCE)):
            for sched in ("pgds", "adaptive-csma", "csma"):
                out.append(Condition({"channel": name, "scheduler": sched},
                                     {"scheduler": sched, "total": 2.0, "channel": _fading(coh)}))
    else:
        raise KeyError(f"unknown preset {preset!r}")
    return out


PRESETS = ("fig3a", "fig3b", "fig3c", "fig4a", "fig4b", "fig4c", "fig5a", "fig5b", "fig5c")

METRICS = ("steady_throughput_units", "terminal_throughput_units", "time_to_90",
           "delay_violation", "mean_delay")


def _mean_se(xs):
    xs = np.asarray([x for x in xs if x is not None], dtype=float)
    if not len(xs):
        return None, None
    se = xs.std(ddof=1) / np.sqrt(len(xs)) if len(xs) > 1 else 0.0
    return float(xs.mean()), float(se)


def delay_cdf(logs, deadline=10):
    """Empirical P(delay <= d) for d = 1..deadline over delivered and dropped packets.

    Dropped packets count as never arriving, so the curve tops out at the
    on-time delivery ratio.
    """
    delays, total = [], 0
    for m in logs:
        done = m.finished_after_warmup()
        total += len(done)
        delays.extend(p["delay"] for p in done if p["status"] == "delivered")
    d = np.asarray(delays, dtype=int)
    if not total:
        return [0.0] * deadline
    return [float((d <= k).sum() / total) for k in range(1, deadline + 1)]


def run_condition(cond, seeds, slots=DEFAULT_SLOTS, out_dir=None):
    logs = []
    for seed in seeds:
        kw = dict(cond.kwargs)
        cfg = make_config(seed=seed, slots=slots, **kw)
        sub = None
        if out_dir:
            tag = "_".join(f"{k}={v}" for k, v in cond.label.items())
            sub = os.path.join(out_dir, tag, f"seed{seed}")
        logs.append(run(cfg, sub))
    return logs


def run_experiment(preset, reps=10, seeds=None, out=None, slots=DEFAULT_SLOTS, keep_runs=False):
    """Run every condition of ``preset`` over ``reps`` seeds.

    Returns a list of summary rows (label fields plus ``<metric>_mean`` and
    ``<metric>_se``). With ``out`` set, writes ``summary.csv``,
    ``summary.json`` and ``series.csv`` (mean 50-slot running throughput).
    """
    seeds = list(seeds) if seeds is not None else list(range(reps))
    conds = conditions(preset)
    rows, series = [], {}
    for cond in conds:
        logs = run_condition(cond, seeds, slots, os.path.join(out, "runs") if out and keep_runs else None)
        row = dict(cond.label)
        summaries = [m.summary() for m in logs]
        for k in METRICS:
            row[f"{k}_mean"], row[f"{k}_se"] = _mean_se([s[k] for s in summaries])
        row["delay_cdf"] = delay_cdf(logs)
        row["seeds"] = len(seeds)
        rows.append(row)
        key = "_".join(f"{k}={v}" for k, v in cond.label.items())
        series[key] = np.mean([m.running_mean() for m in logs], axis=0)
    if out:
        write_summary(out, preset, rows, series)
    return rows


def write_summary(out, preset, rows, series):
    os.makedirs(out, exist_ok=True)
    flat = [{k: v for k, v in r.items() if k != "delay_cdf"} for r in rows]
    cols = list(flat[0])
    with open(os.path.join(out, "summary.csv"), "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        w.writerows(flat)
    with open(os.path.join(out, "summary.json"), "w") as fh:
        json.dump({"preset": preset, "rows": copy.deepcopy(rows)}, fh, indent=2)
    keys = list(series)
    with open(os.path.join(out, "series.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["slot"] + keys)
        for t in range(len(series[keys[0]])):
            w.writerow([t] + [repr(float(series[k][t])) for k in keys])
