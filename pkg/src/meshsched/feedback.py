"""Per-node feedback tables and reward backtracking along packet paths."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from .errors import ContractViolation
from .mdp import PacketState, lagrangian_reward


@dataclass
class FeedbackRecord:
    packet_id: int
    slot: int
    flow_id: int
    previous_state: Optional[PacketState]
    current_state: PacketState
    next_state: PacketState
    action: int
    n_c: int = 0
    n_p: float = 0.0
    interference_subcarriers: int = 0
    N_i: int = 1
    H: float = 0.0
    lam: float = 0.0
    mu: float = 0.0
    w_f: float = 1.0

    def step_reward(self, u=0.0):
        """Lagrangian reward of this hop; ``u`` is the primary reward if terminal."""
        return lagrangian_reward(self.w_f, u + self.H, self.lam, self.n_c, self.mu, self.n_p,
                                 self.N_i, self.interference_subcarriers)

    def to_json(self):
        d = dict(self.__dict__)
        for k in ("previous_state", "current_state", "next_state"):
            d[k] = None if d[k] is None else list(d[k])
        return d


@dataclass
class FeedbackMessage:
    flow_id: int
    last_hop_state: PacketState
    accumulated_return: float = 0.0


@dataclass
class FeedbackTables:
    """One table per node; each maps (flow, next_state) to the records holding it.

    ``in_neighbors[j]`` lists the nodes with a link into j, i.e. the only
    places a record ending at j can live besides j itself.
    """

    n_nodes: int
    in_neighbors: list
    tables: list = field(init=False)
    missing: int = 0

    def __post_init__(self):
        self.tables = [dict() for _ in range(self.n_nodes)]

    @classmethod
    def for_graph(cls, graph):
        rev = [[] for _ in range(graph.n_nodes)]
        for i, j in sorted(graph.links):
            rev[j].append(i)
        return cls(graph.n_nodes, rev)

    def __len__(self):
        return sum(len(lst) for t in self.tables for lst in t.values())


def record_hop(tables, node, record):
    if record.current_state.node != node:
        raise ContractViolation(f"record for node {record.current_state.node} stored at {node}")
    if record.next_state.ttd != record.current_state.ttd - 1:
        raise ContractViolation("next_state must be one slot after current_state")
    key = (record.flow_id, record.next_state)
    tables.tables[node].setdefault(key, []).append(record)


def _take(tables, node, key, want_state, packet_id):
    lst = tables.tables[node].get(key)
    if not lst:
        return None
    pick = None
    for k, rec in enumerate(lst):
        if rec.current_state == want_state:
            if rec.packet_id == packet_id:
                pick = k
                break
            if pick is None:
                pick = k
    if pick is None:
        return None
    rec = lst.pop(pick)
    if not lst:
        del tables.tables[node][key]
    return rec


def backtrack(tables, flow_id, final_state, u, packet_id=None):
    """Walk a packet's records backward from the state it ended in.

    At each step the node holding the record matches the carried state as its
    next state and infers its own current state as (node, ttd + 1). Records are
    consumed. Returns ``[(state, action, r_L), ...]`` from source to end, or
    None if a record is missing (the partial walk is discarded and counted).
    """
    msg = FeedbackMessage(flow_id, final_state)
    taken = []
    carried = final_state
    while True:
        key = (flow_id, carried)
        rec = None
        for node in [carried.node] + tables.in_neighbors[carried.node]:
            want = PacketState(flow_id, node, carried.ttd + 1)
            rec = _take(tables, node, key, want, packet_id)
            if rec is not None and (packet_id is None or rec.packet_id == packet_id):
                break
            if rec is not None:
                # matched a foreign packet's record; put it back and keep looking
                record_hop(tables, node, rec)
                rec = None
        if rec is None:
            for node, back in taken:
                record_hop(tables, node, back)
            tables.missing += 1
            return None
        taken.append((rec.current_state.node, rec))
        msg.accumulated_return += rec.step_reward(u if len(taken) == 1 else 0.0)
        msg.last_hop_state = rec.current_state
        if rec.previous_state is None:
            break
        carried = rec.current_state
    traj = []
    for k, (_, rec) in enumerate(reversed(taken)):
        last = k == len(taken) - 1
        traj.append((rec.current_state, rec.action, rec.step_reward(u if last else 0.0)))
    return traj


def expire_records(tables, current_slot, horizon):
    """Drop records written more than ``horizon`` slots ago; returns the count."""
    purged = 0
    cutoff = current_slot - horizon
    for table in tables.tables:
        for key in list(table):
            lst = table[key]
            keep = [r for r in lst if r.slot >= cutoff]
            purged += len(lst) - len(keep)
            if keep:
                table[key] = keep
            else:
                del table[key]
    return purged


def dump_tables(tables, fh, slot):
    """Append one NDJSON line per stored record."""
    for node, table in enumerate(tables.tables):
        for lst in table.values():
            for rec in lst:
                fh.write(json.dumps({"slot": slot, "node": node, **rec.to_json()}) + "\n")
