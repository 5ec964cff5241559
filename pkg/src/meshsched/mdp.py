"""Packet-level CMDP: states, actions, PHY model, transition and rewards."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ContractViolation


class PacketState(NamedTuple):
    flow_id: int
    node: int
    ttd: int


class ScheduleAction(NamedTuple):
    next_hop: int
    n_c: int
    power_level: int

    @property
    def is_hold(self):
        return self.n_c == 0


HOLD = ScheduleAction(-1, 0, -1)

UNIT_PACKET_BITS = 100


@dataclass
class Packet:
    pid: int
    state: PacketState
    size: int = UNIT_PACKET_BITS
    birth_slot: int = 0
    delivered: bool = False
    dropped: bool = False
    delivered_slot: int = -1

    @property
    def live(self):
        return not (self.delivered or self.dropped)

    def mark_delivered(self, slot):
        if self.dropped:
            raise ContractViolation(f"packet {self.pid} already dropped")
        self.delivered = True
        self.delivered_slot = slot

    def mark_dropped(self):
        if self.delivered:
            raise ContractViolation(f"packet {self.pid} already delivered")
        self.dropped = True


def power_grid(max_power, levels=4):
    """Evenly spaced transmit powers P/L, 2P/L, ..., P."""
    if levels < 1:
        raise ValueError("need at least one power level")
    return max_power * np.arange(1, levels + 1) / levels


class ActionSpace:
    """Enumerated legal actions at one node.

    Index 0 is hold; the rest run over (neighbour, n_c = 1..C, level) in
    lexicographic order. Parallel arrays give next hop, subcarriers and power.
    """

    def __init__(self, neighbors, num_subcarriers, powers):
        self.neighbors = list(neighbors)
        self.num_subcarriers = int(num_subcarriers)
        self.powers = np.asarray(powers, dtype=float)
        L = len(self.powers)
        C = self.num_subcarriers
        nb = len(self.neighbors)
        n = 1 + nb * C * L
        self.size = n
        self.next_hop = np.full(n, -1, dtype=int)
        self.n_c = np.zeros(n, dtype=int)
        self.level = np.full(n, -1, dtype=int)
        if nb:
            k, c, l = np.meshgrid(np.arange(nb), np.arange(1, C + 1), np.arange(L), indexing="ij")
            self.next_hop[1:] = np.asarray(self.neighbors)[k.ravel()]
            self.n_c[1:] = c.ravel()
            self.level[1:] = l.ravel()
        self.n_p = np.where(self.level >= 0, self.powers[np.maximum(self.level, 0)], 0.0)

    def action(self, idx):
        if idx == 0:
            return HOLD
        return ScheduleAction(int(self.next_hop[idx]), int(self.n_c[idx]), int(self.level[idx]))

    def index(self, action):
        if action.n_c == 0:
            return 0
        k = self.neighbors.index(action.next_hop)
        L = len(self.powers)
        return 1 + (k * self.num_subcarriers + action.n_c - 1) * L + action.power_level

    def bit_budgets(self, graph, i):
        """Bit budget of every action from node ``i`` over the current gains."""
        h = graph.gain[i, np.maximum(self.next_hop, 0)]
        h = np.where(self.next_hop >= 0, h, 0.0)
        return bit_budget(graph, self.n_c, self.n_p, h)


def sinr(graph, tx, rx, n_c, n_p, interference_power):
    if n_c < 1 or n_p <= 0:
        raise ContractViolation("sinr needs n_c >= 1 and n_p > 0")
    h2 = graph.gain[tx, rx] ** 2
    return n_p * h2 / (graph.noise_density * n_c * graph.subcarrier_spacing + interference_power)


def bit_budget(graph, n_c, n_p, h):
    """Shannon bits deliverable in one slot; vectorised over array inputs."""
    n_c = np.asarray(n_c, dtype=float)
    noise = graph.noise_density * graph.subcarrier_spacing * np.maximum(n_c, 1.0)
    snr = np.asarray(n_p, dtype=float) * np.asarray(h, dtype=float) ** 2 / noise
    bits = n_c * graph.subcarrier_spacing * np.log2(1.0 + snr) * graph.slot_duration
    bits = np.where(n_c > 0, bits, 0.0)
    return float(bits) if bits.ndim == 0 else bits


@dataclass
class PhyModel:
    """Success model on top of the SINR gate.

    ``ideal``: success with probability 1 once SINR >= threshold.
    ``exp_err``: success probability exp(-k / SINR) above threshold.
    """

    error_model: str = "ideal"
    k: float = 1.0

    def __post_init__(self):
        if self.error_model not in ("ideal", "exp_err"):
            raise ValueError(f"unknown error model {self.error_model!r}")

    def p_success(self, s, threshold):
        if s < threshold or s <= 0:
            return 0.0
        if self.error_model == "ideal":
            return 1.0
        return math.exp(-self.k / s)


def transition(graph, packet, action, interference_power, rng, phy=None, powers=None):
    """One-slot move of ``packet`` under ``action``.

    Returns ``(next_state, success)``. TTD drops by one whatever happens; the
    packet moves to the next hop only on success. ``rng`` is consumed only for
    the error-model draw, so the ideal PHY never touches it.
    """
    s = packet.state if isinstance(packet, Packet) else packet
    if s.ttd < 1:
        raise ContractViolation(f"transition called on expired state {s}")
    if action.n_c == 0:
        return PacketState(s.flow_id, s.node, s.ttd - 1), False
    if action.next_hop not in graph.neighbors(s.node):
        raise ContractViolation(f"{action.next_hop} is not adjacent to {s.node}")
    if powers is None:
        powers = power_grid(graph.max_power)
    n_p = float(powers[action.power_level])
    q = sinr(graph, s.node, action.next_hop, action.n_c, n_p, interference_power)
    phy = phy or PhyModel()
    p = phy.p_success(q, graph.sinr_threshold)
    if p >= 1.0:
        ok = True
    elif p <= 0.0:
        ok = False
    else:
        ok = bool(rng.random() < p)
    if ok:
        return PacketState(s.flow_id, action.next_hop, s.ttd - 1), True
    return PacketState(s.flow_id, s.node, s.ttd - 1), False


def unit_reward(reward_fn, bits=UNIT_PACKET_BITS):
    if reward_fn == "throughput":
        return float(bits)
    if reward_fn == "weighted_unit":
        return 1.0
    raise ValueError(f"unknown reward mode {reward_fn!r}")


def primary_reward(flow, next_state, reward_fn="throughput", bits=UNIT_PACKET_BITS):
    if next_state.node == flow.destination and next_state.ttd >= 0:
        return unit_reward(reward_fn, bits)
    return 0.0


def lagrangian_reward(w_f, r, lam, n_c, mu, n_p, N_i, interference_subcarriers):
    if interference_subcarriers and N_i <= 0:
        raise ContractViolation("interference term needs N_i >= 1")
    out = w_f * r - lam * n_c - mu * n_p
    if interference_subcarriers:
        out -= lam / N_i * interference_subcarriers
    return out
