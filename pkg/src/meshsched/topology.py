"""Topology generators emitting the topology JSON schema.

All generators place nodes on a unit-spaced plane and add links in both
directions between the listed neighbours.
"""
from __future__ import annotations

import math

from .errors import ConfigError
from .net import DEFAULT_N0

KINDS = ("tree", "grid", "star", "mesh")


def _side(n, kind):
    k = int(round(math.sqrt(n)))
    if k * k != n or k < 2:
        raise ConfigError("nodes", f"{kind} topology needs a square node count >= 4, got {n}")
    return k


def _bidir(pairs):
    out = set()
    for i, j in pairs:
        out.add((i, j))
        out.add((j, i))
    return sorted(out)


def _lattice(k, diagonals=False):
    coords = [[float(c), float(r)] for r in range(k) for c in range(k)]
    pairs = []
    for r in range(k):
        for c in range(k):
            v = r * k + c
            if c + 1 < k:
                pairs.append((v, v + 1))
            if r + 1 < k:
                pairs.append((v, v + k))
            if diagonals and r + 1 < k:
                if c + 1 < k:
                    pairs.append((v, v + k + 1))
                if c > 0:
                    pairs.append((v, v + k - 1))
    return coords, pairs


def mesh(n):
    """k x k lattice with 4-neighbour links."""
    k = _side(n, "mesh")
    coords, pairs = _lattice(k)
    return coords, _bidir(pairs)


def grid(n):
    """k x k lattice with 8-neighbour links (diagonals included)."""
    k = _side(n, "grid")
    coords, pairs = _lattice(k, diagonals=True)
    return coords, _bidir(pairs)


def tree(n):
    """Comb-shaped spanning tree of the k x k lattice.

    The bottom row forms the spine and every column hangs off it.
    """
    k = _side(n, "tree")
    coords, _ = _lattice(k)
    pairs = [(c, c + 1) for c in range(k - 1)]
    for c in range(k):
        for r in range(k - 1):
            pairs.append((r * k + c, (r + 1) * k + c))
    return coords, _bidir(pairs)


def star(n):
    """Centre node 0 with four straight arms of unit-spaced nodes."""
    if n < 5 or (n - 1) % 4:
        raise ConfigError("nodes", f"star topology needs 1 + 4m nodes, got {n}")
    arm = (n - 1) // 4
    coords = [[0.0, 0.0]]
    pairs = []
    for a, (dx, dy) in enumerate(((1, 0), (0, 1), (-1, 0), (0, -1))):
        prev = 0
        for step in range(1, arm + 1):
            v = 1 + a * arm + (step - 1)
            coords.append([float(dx * step), float(dy * step)])
            pairs.append((prev, v))
            prev = v
    return coords, _bidir(pairs)


def generate(kind, n, **phy):
    """Topology document for ``kind`` with ``n`` nodes; ``phy`` overrides PHY fields."""
    builders = {"tree": tree, "grid": grid, "star": star, "mesh": mesh}
    if kind not in builders:
        raise ConfigError("topology.kind", f"unknown kind {kind!r}; expected one of {KINDS}")
    coords, links = builders[kind](int(n))
    doc = {
        "nodes": int(n),
        "links": [list(l) for l in links],
        "coords": coords,
        "C": 20,
        "P_mw": 100.0,
        "P_th_mw": 1.0,
        "sinr_th": 1.0,
        "n0": DEFAULT_N0,
        "delta_c_hz": 15e3,
        "delta_t_s": 0.25e-3,
    }
    doc.update(phy)
    return doc
