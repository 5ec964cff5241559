"""Exact single-packet MDPs on small line networks.

Used as oracles: backward induction with and without shaping, brute-force
enumeration of deterministic policies, and an NPG driver that runs the
package's own update on exact advantages.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .mdp import ActionSpace, PacketState, PhyModel, bit_budget, power_grid, sinr, unit_reward
from .net import FlowSpec, graph_from_dict
from .policy import PolicyTable, npg_update
from .shaping import PotentialSnapshot, potential


def line_graph(n_nodes, num_subcarriers=20, gain2=0.012, noise_density=4.08e-7, **phy):
    """``n_nodes`` on a line, adjacent pairs linked, power gain ``gain2`` between neighbours only."""
    doc = {
        "nodes": n_nodes,
        "links": [[i, i + 1] for i in range(n_nodes - 1)] + [[i + 1, i] for i in range(n_nodes - 1)],
        "coords": [[float(i), 0.0] for i in range(n_nodes)],
        "C": num_subcarriers,
        "n0": noise_density,
    }
    doc.update(phy)
    g = graph_from_dict(doc)
    gain = np.zeros((n_nodes, n_nodes))
    for i in range(n_nodes - 1):
        gain[i, i + 1] = gain[i + 1, i] = math.sqrt(gain2)
    g.set_gains(gain)
    return g


@dataclass
class TabularMDP:
    """One flow, one packet, frozen multipliers.

    ``outcomes[s][a]`` lists ``(prob, next_state, reward)`` with the unshaped
    per-hop reward. Terminal states (destination or ttd 0) are not keys.
    """

    graph: object
    flow: FlowSpec
    spaces: dict
    legal: dict = field(default_factory=dict)
    outcomes: dict = field(default_factory=dict)

    @property
    def states(self):
        return sorted(self.outcomes, key=lambda s: (s.ttd, s.node))

    @property
    def start(self):
        return PacketState(self.flow.flow_id, self.flow.source, self.flow.deadline)

    def is_terminal(self, s):
        return s.node == self.flow.destination or s.ttd <= 0


def build_mdp(graph, flow, power_levels=4, phy=None, lam=0.0, mu=0.0, bits=100,
              n_eps=math.inf, reward_fn="throughput"):
    """Enumerate states (node, ttd) for ttd in 1..deadline and every legal action.

    An action is legal when it holds or its bit budget is within ``n_eps`` of
    ``bits``. Success follows the SINR gate with no concurrent interferers.
    """
    phy = phy or PhyModel()
    powers = power_grid(graph.max_power, power_levels)
    spaces = {i: ActionSpace(graph.neighbors(i), graph.num_subcarriers, powers) for i in graph.nodes}
    u = unit_reward(reward_fn, bits)
    mdp = TabularMDP(graph, flow, spaces)
    for ttd in range(1, flow.deadline + 1):
        for i in graph.nodes:
            if i == flow.destination:
                continue
            s = PacketState(flow.flow_id, i, ttd)
            sp = spaces[i]
            budgets = sp.bit_budgets(graph, i)
            legal = [0] + [a for a in range(1, sp.size) if abs(budgets[a] - bits) <= n_eps]
            stay = PacketState(flow.flow_id, i, ttd - 1)
            out = {0: [(1.0, stay, 0.0)]}
            for a in legal[1:]:
                j, n_c, n_p = int(sp.next_hop[a]), int(sp.n_c[a]), float(sp.n_p[a])
                cost = lam * n_c + mu * n_p
                p = phy.p_success(sinr(graph, i, j, n_c, n_p, 0.0), graph.sinr_threshold)
                move = PacketState(flow.flow_id, j, ttd - 1)
                gain = flow.weight * u if j == flow.destination else 0.0
                out[a] = [(p, move, gain - cost), (1.0 - p, stay, -cost)]
            mdp.legal[s] = legal
            mdp.outcomes[s] = out
    return mdp


def shaped(mdp, snapshot):
    """Copy of ``mdp`` with phi(s') - phi(s) added to every outcome."""
    out = {}
    for s, acts in mdp.outcomes.items():
        ps = potential(snapshot, s)
        out[s] = {a: [(p, s2, r + potential(snapshot, s2) - ps) for p, s2, r in lst]
                  for a, lst in acts.items()}
    return TabularMDP(mdp.graph, mdp.flow, mdp.spaces, dict(mdp.legal), out)


def frozen_snapshot(mdp, occupancy, scale=1.0):
    """Snapshot with fixed occupancy ``{state: count}`` for the MDP's flow."""
    hops = {mdp.flow.flow_id: mdp.graph.hop_table(mdp.flow.destination)}
    return PotentialSnapshot(dict(occupancy), hops, scale)


def _q_row(mdp, s, V):
    row = {}
    for a, lst in mdp.outcomes[s].items():
        row[a] = sum(p * (r + (0.0 if mdp.is_terminal(s2) else V[s2])) for p, s2, r in lst)
    return row


def greedy(row, tol=1e-9):
    """Lowest action index within ``tol`` (relative) of the best value."""
    best = max(row.values())
    eps = tol * max(1.0, abs(best))
    return min(a for a, q in row.items() if q >= best - eps)


def value_iteration(mdp):
    """Optimal V, Q and greedy policy by backward induction over ttd."""
    V, Q, pol = {}, {}, {}
    for s in mdp.states:
        row = _q_row(mdp, s, V)
        Q[s] = row
        pol[s] = greedy(row)
        V[s] = max(row.values())
    return V, Q, pol


def evaluate(mdp, probs):
    """V and Q of a stochastic policy ``probs[s] = {a: p}``."""
    V, Q = {}, {}
    for s in mdp.states:
        row = _q_row(mdp, s, V)
        Q[s] = row
        V[s] = sum(probs[s].get(a, 0.0) * q for a, q in row.items())
    return V, Q


def enumerate_optimal(mdp):
    """Best start-state value over every deterministic policy, by brute force.

    Returns ``(value, policy)``. Cost grows as the product of legal-set sizes,
    so this is meant for instances with a handful of states.
    """
    states = mdp.states
    choices = [mdp.legal[s] for s in states]
    best, best_pol = -math.inf, None
    for combo in itertools.product(*choices):
        pol = dict(zip(states, combo))
        V = {}
        for s in states:
            lst = mdp.outcomes[s][pol[s]]
            V[s] = sum(p * (r + (0.0 if mdp.is_terminal(s2) else V[s2])) for p, s2, r in lst)
        v = V[mdp.start]
        if v > best + 1e-12:
            best, best_pol = v, pol
    return best, best_pol


def restricted_probs(table, mdp, s):
    """Softmax over the legal actions of ``s`` only."""
    th = table.params(s)
    legal = mdp.legal[s]
    z = np.exp(th[legal] - th[legal].max())
    z /= z.sum()
    return dict(zip(legal, z))


def npg_curve(mdp, eta=1.0, iterations=10000):
    """Start-state value of the policy before each of ``iterations`` exact NPG steps.

    Advantages are exact (Q - V under the current policy) on legal actions and
    zero elsewhere; each step uses ``npg_update`` from the learning module.
    """
    table = PolicyTable(mdp.spaces, eta)
    vals = np.empty(iterations)
    for t in range(iterations):
        probs = {s: restricted_probs(table, mdp, s) for s in mdp.states}
        V, Q = evaluate(mdp, probs)
        vals[t] = V[mdp.start]
        for s in mdp.states:
            adv = np.zeros(mdp.spaces[s.node].size)
            for a, q in Q[s].items():
                adv[a] = q - V[s]
            npg_update(table, s, adv)
    return vals


def scaled_gap(values, optimum, checkpoints):
    """T * (optimum - mean of the first T values) at each checkpoint T."""
    c = np.cumsum(optimum - np.asarray(values))
    return np.array([c[T - 1] for T in checkpoints])


def budget_table(graph, i, j, powers):
    """Bit budget for every (n_c, level) on link i -> j; rows are n_c = 1..C."""
    h = graph.gain[i, j]
    n_c = np.arange(1, graph.num_subcarriers + 1)[:, None]
    return bit_budget(graph, n_c, np.asarray(powers)[None, :], h)
