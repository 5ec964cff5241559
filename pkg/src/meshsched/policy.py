"""Tabular softmax policies, return estimators, NPG step and Lagrange multipliers."""
from __future__ import annotations

import json

import numpy as np

from .mdp import PacketState, ScheduleAction


class PolicyTable:
    """Per-flow softmax parameters keyed by (flow, node, ttd).

    ``spaces`` maps node id to its ActionSpace; a state's parameter vector is
    indexed like that space. States are created lazily at theta = 0.
    """

    def __init__(self, spaces, step_size=0.5):
        self.spaces = spaces
        self.step_size = step_size
        self.theta = {}
        self._cdf = {}

    def params(self, s):
        th = self.theta.get(s)
        if th is None:
            th = np.zeros(self.spaces[s.node].size)
            self.theta[s] = th
        return th

    def probs(self, s):
        th = self.params(s)
        z = np.exp(th - th.max())
        return z / z.sum()

    def cdf(self, s):
        c = self._cdf.get(s)
        if c is None:
            c = np.cumsum(self.probs(s))
            c[-1] = 1.0
            self._cdf[s] = c
        return c

    def sample(self, s, rng):
        """Draw an action index from pi(.|s)."""
        c = self.cdf(s)
        return min(int(np.searchsorted(c, rng.random(), side="right")), len(c) - 1)

    def action_index(self, s, a):
        if isinstance(a, ScheduleAction):
            return self.spaces[s.node].index(a)
        return int(a)

    def to_dict(self):
        out = {}
        for s, th in sorted(self.theta.items()):
            space = self.spaces[s.node]
            entry = {}
            for idx in np.flatnonzero(th):
                a = space.action(int(idx))
                key = "hold" if a.n_c == 0 else f"{a.next_hop},{a.n_c},{a.power_level}"
                entry[key] = float(th[idx])
            out.setdefault(str(s.flow_id), {})[f"{s.node},{s.ttd}"] = entry
        return out

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)

    def load_dict(self, doc):
        self.theta.clear()
        self._cdf.clear()
        for fid, states in doc.items():
            for skey, entry in states.items():
                node, ttd = (int(x) for x in skey.split(","))
                s = PacketState(int(fid), node, ttd)
                th = self.params(s)
                for akey, val in entry.items():
                    if akey == "hold":
                        idx = 0
                    else:
                        j, c, l = (int(x) for x in akey.split(","))
                        idx = self.spaces[node].index(ScheduleAction(j, c, l))
                    th[idx] = val


def npg_update(table, s, advantages):
    """Exponentiated step: pi_new(a|s) proportional to pi_old(a|s) * exp(eta * A(a)).

    Implemented on the logits as theta += eta * A followed by re-centring at
    the max, which leaves the policy unchanged and keeps the exponent bounded.
    Returns the updated action distribution.
    """
    th = table.params(s)
    th += table.step_size * np.asarray(advantages, dtype=float)
    th -= th.max()
    p = np.exp(th)
    p /= p.sum()
    c = np.cumsum(p)
    c[-1] = 1.0
    table._cdf[s] = c
    return p


class ReturnEstimator:
    """Running means of Lagrangian returns per state-action (q) and state (v).

    With ``decay`` set, the step size is max(1/n, 1 - decay) so old samples
    are forgotten geometrically; ``decay=None`` gives the plain sample mean.
    """

    def __init__(self, spaces, decay=0.99):
        self.spaces = spaces
        self.decay = decay
        self.q = {}
        self.q_count = {}
        self.v = {}
        self.v_count = {}

    def _rate(self, n):
        if self.decay is None:
            return 1.0 / n
        return max(1.0 / n, 1.0 - self.decay)

    def fold(self, s, a_idx, g):
        q = self.q.get(s)
        if q is None:
            size = self.spaces[s.node].size
            q = self.q[s] = np.zeros(size)
            self.q_count[s] = np.zeros(size, dtype=np.int64)
        cnt = self.q_count[s]
        cnt[a_idx] += 1
        q[a_idx] += self._rate(cnt[a_idx]) * (g - q[a_idx])
        n = self.v_count.get(s, 0) + 1
        self.v_count[s] = n
        v = self.v.get(s, 0.0)
        self.v[s] = v + self._rate(n) * (g - v)

    def value(self, s):
        return self.v.get(s, 0.0)

    def advantages(self, s):
        """q(s, .) - v(s) over visited actions, zero elsewhere."""
        q = self.q.get(s)
        if q is None:
            return None
        return np.where(self.q_count[s] > 0, q - self.v[s], 0.0)


def advantage(est, s, a):
    q = est.q.get(s)
    if q is None:
        return 0.0
    idx = est.spaces[s.node].index(a) if isinstance(a, ScheduleAction) else int(a)
    if est.q_count[s][idx] == 0:
        return 0.0
    return float(q[idx] - est.v[s])


def record_trajectory(est, trajectory):
    """Fold suffix returns of a finished trajectory [(s, a, r_L), ...].

    TTD strictly decreases along a trajectory, so every visit is a first visit.
    Returns the list of visited states in order.
    """
    g = 0.0
    returns = []
    for s, a, r in reversed(trajectory):
        g += r
        returns.append((s, a, g))
    visited = []
    for s, a, g in reversed(returns):
        idx = est.spaces[s.node].index(a) if isinstance(a, ScheduleAction) else int(a)
        est.fold(s, idx, g)
        visited.append(s)
    return visited


class DualVariables:
    """Per-node subcarrier price lambda and power price mu, projected onto [0, cap]."""

    def __init__(self, n_nodes, eta2=0.01, eta3=0.01, cap=100.0, mode="ascent"):
        if mode not in ("ascent", "descent"):
            raise ValueError(f"unknown dual mode {mode!r}")
        self.lam = np.zeros(n_nodes)
        self.mu = np.zeros(n_nodes)
        self.eta2 = eta2
        self.eta3 = eta3
        self.cap = cap
        self.mode = mode


def update_duals(duals, i, used_subcarriers, used_power, C, P):
    sc_gap = used_subcarriers - C
    p_gap = used_power - P
    if duals.mode == "descent":
        sc_gap, p_gap = -sc_gap, -p_gap
    duals.lam[i] = min(max(duals.lam[i] + duals.eta2 * sc_gap, 0.0), duals.cap)
    duals.mu[i] = min(max(duals.mu[i] + duals.eta3 * p_gap, 0.0), duals.cap)
    return duals.lam[i], duals.mu[i]
