"""Network model: topology, channel gains, budgets, interference fields, hop distances."""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

UNREACHABLE = None

# h^2 at unit distance and the noise density are chosen together so that a
# 100-bit unit packet on a unit-length link needs 5 subcarriers at full power.
DEFAULT_REF_GAIN = 0.012
DEFAULT_N0 = 4.08e-7  # mW/Hz


def dbm_to_mw(dbm):
    return 10.0 ** (dbm / 10.0)


@dataclass
class NetworkGraph:
    n_nodes: int
    links: frozenset
    gain: np.ndarray
    num_subcarriers: int = 20
    max_power: float = 100.0
    detect_threshold: float = 1.0
    sinr_threshold: float = 1.0
    noise_density: float = DEFAULT_N0
    subcarrier_spacing: float = 15e3
    slot_duration: float = 0.25e-3
    coords: np.ndarray | None = None
    _neighbors: list = field(init=False, repr=False)
    _hops: dict = field(init=False, repr=False, default_factory=dict)

    def __post_init__(self):
        self.links = frozenset((int(i), int(j)) for i, j in self.links)
        self.gain = np.asarray(self.gain, dtype=float)
        n = self.n_nodes
        if n < 1:
            raise ConfigError("nodes", "need at least one node")
        if self.gain.shape != (n, n):
            raise ConfigError("gain", f"expected shape {(n, n)}, got {self.gain.shape}")
        if np.any(self.gain < 0) or np.any(self.gain > 1):
            raise ConfigError("gain", "channel gains must lie in [0, 1]")
        for i, j in self.links:
            if i == j:
                raise ConfigError("links", f"self-loop ({i}, {j})")
            if not (0 <= i < n and 0 <= j < n):
                raise ConfigError("links", f"link ({i}, {j}) references unknown node")
        if self.num_subcarriers < 1:
            raise ConfigError("C", "must be >= 1")
        if self.max_power <= 0:
            raise ConfigError("P_mw", "must be > 0")
        if self.subcarrier_spacing <= 0:
            raise ConfigError("delta_c_hz", "must be > 0")
        if self.slot_duration <= 0:
            raise ConfigError("delta_t_s", "must be > 0")
        if self.noise_density <= 0:
            raise ConfigError("n0", "must be > 0")
        if self.detect_threshold < 0:
            raise ConfigError("P_th_mw", "must be >= 0")
        nbrs = [[] for _ in range(n)]
        for i, j in self.links:
            nbrs[i].append(j)
        self._neighbors = [sorted(x) for x in nbrs]

    @property
    def nodes(self):
        return range(self.n_nodes)

    @property
    def gain2(self):
        return self.gain * self.gain

    def neighbors(self, i):
        self._check(i)
        return self._neighbors[i]

    def _check(self, i):
        if not (0 <= i < self.n_nodes):
            raise ValueError(f"unknown node id {i}")

    def set_gains(self, gain):
        gain = np.asarray(gain, dtype=float)
        if gain.shape != self.gain.shape:
            raise ValueError("gain shape mismatch")
        self.gain = np.clip(gain, 0.0, 1.0)

    def hop_table(self, dest):
        """Hop counts from every node to ``dest`` (``-1`` marks unreachable)."""
        self._check(dest)
        table = self._hops.get(dest)
        if table is None:
            table = np.full(self.n_nodes, -1, dtype=int)
            table[dest] = 0
            rev = [[] for _ in range(self.n_nodes)]
            for i, j in self.links:
                rev[j].append(i)
            queue = deque([dest])
            while queue:
                v = queue.popleft()
                for u in rev[v]:
                    if table[u] < 0:
                        table[u] = table[v] + 1
                        queue.append(u)
            self._hops[dest] = table
        return table

    def to_dict(self):
        out = {
            "nodes": self.n_nodes,
            "links": sorted([list(l) for l in self.links]),
            "C": self.num_subcarriers,
            "P_mw": self.max_power,
            "P_th_mw": self.detect_threshold,
            "sinr_th": self.sinr_threshold,
            "n0": self.noise_density,
            "delta_c_hz": self.subcarrier_spacing,
            "delta_t_s": self.slot_duration,
        }
        if self.coords is not None:
            out["coords"] = [[float(x), float(y)] for x, y in self.coords]
        return out


def interference_field(graph, i, tx_power):
    """Nodes j != i that hear node i above the detection threshold."""
    graph._check(i)
    if tx_power <= 0:
        return frozenset()
    hear = tx_power * graph.gain2[i] > graph.detect_threshold
    hear[i] = False
    return frozenset(int(j) for j in np.flatnonzero(hear))


def hop_distance(graph, i, dest):
    graph._check(i)
    d = int(graph.hop_table(dest)[i])
    return UNREACHABLE if d < 0 else d


@dataclass
class FlowSpec:
    flow_id: int
    source: int
    destination: int
    deadline: int = 10
    weight: float = 1.0
    arrival_rate: float = 0.25

    def __post_init__(self):
        if self.source == self.destination:
            raise ConfigError(f"flows[{self.flow_id}]", "source equals destination")
        if self.deadline < 1:
            raise ConfigError(f"flows[{self.flow_id}].deadline", "must be >= 1")
        if self.arrival_rate < 0:
            raise ConfigError(f"flows[{self.flow_id}].arrival_rate", "must be >= 0")
        if self.weight < 0:
            raise ConfigError(f"flows[{self.flow_id}].weight", "must be >= 0")


@dataclass
class ChannelModel:
    """Log-distance path loss with optional Rayleigh block fading.

    ``ref_gain`` is the power gain h^2 at unit distance. In ``block_fading``
    mode every unordered pair gets an independent Exp(1) power factor that is
    redrawn every ``coherence_slots`` slots; gains are clamped to [0, 1].
    """

    mode: str = "static"
    coherence_slots: int = 20
    path_loss_exponent: float = 3.5
    ref_gain: float = DEFAULT_REF_GAIN
    rng_seed: int = 0
    _rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if self.mode not in ("static", "block_fading"):
            raise ConfigError("channel.mode", f"unknown mode {self.mode!r}")
        if self.coherence_slots < 1:
            raise ConfigError("channel.coherence_slots", "must be >= 1")
        self._rng = np.random.default_rng(self.rng_seed)

    def path_gain2(self, coords):
        coords = np.asarray(coords, dtype=float)
        diff = coords[:, None, :] - coords[None, :, :]
        dist = np.sqrt((diff ** 2).sum(axis=-1))
        np.fill_diagonal(dist, 1.0)
        g2 = self.ref_gain * dist ** (-self.path_loss_exponent)
        np.fill_diagonal(g2, 0.0)
        return np.minimum(g2, 1.0)

    def draw(self, coords):
        g2 = self.path_gain2(coords)
        if self.mode == "block_fading":
            n = g2.shape[0]
            fade = self._rng.exponential(1.0, size=(n, n))
            fade = np.triu(fade, 1)
            fade = fade + fade.T
            g2 = np.minimum(g2 * fade, 1.0)
        return np.sqrt(g2)


def regenerate_channel(model, graph, slot):
    """Redraw gains on coherence boundaries in block-fading mode; returns the gains."""
    if slot < 0:
        raise ValueError("slot must be >= 0")
    if model.mode == "block_fading" and slot % model.coherence_slots == 0:
        if graph.coords is None:
            raise ValueError("block fading needs node coordinates")
        graph.set_gains(model.draw(graph.coords))
    return graph.gain


def graph_from_dict(doc, channel=None):
    """Build a NetworkGraph from the topology JSON schema.

    Gains come from an explicit ``gains`` matrix when present, otherwise from
    ``coords`` through the channel model's path loss (no fading draw).
    """
    if "nodes" not in doc:
        raise ConfigError("topology.nodes", "missing")
    nodes = doc["nodes"]
    n = len(nodes) if isinstance(nodes, list) else int(nodes)
    links = doc.get("links", [])
    for k, l in enumerate(links):
        if len(l) != 2:
            raise ConfigError(f"topology.links[{k}]", "expected [i, j]")
    channel = channel or ChannelModel()
    coords = doc.get("coords")
    if coords is not None:
        coords = np.asarray(coords, dtype=float)
        if coords.shape != (n, 2):
            raise ConfigError("topology.coords", f"expected {n} [x, y] pairs")
    if "gains" in doc:
        gain = np.asarray(doc["gains"], dtype=float)
    elif coords is not None:
        gain = np.sqrt(channel.path_gain2(coords))
    else:
        raise ConfigError("topology", "need either coords or gains")
    try:
        return NetworkGraph(
            n_nodes=n,
            links=frozenset(tuple(l) for l in links),
            gain=gain,
            num_subcarriers=int(doc.get("C", 20)),
            max_power=float(doc.get("P_mw", 100.0)),
            detect_threshold=float(doc.get("P_th_mw", 0.01 * float(doc.get("P_mw", 100.0)))),
            sinr_threshold=float(doc.get("sinr_th", 1.0)),
            noise_density=float(doc.get("n0", DEFAULT_N0)),
            subcarrier_spacing=float(doc.get("delta_c_hz", 15e3)),
            slot_duration=float(doc.get("delta_t_s", 0.25e-3)),
            coords=coords,
        )
    except ConfigError as exc:
        raise ConfigError(f"topology.{exc.path}", exc.message) from None


def load_topology(path, channel=None):
    with open(path) as fh:
        return graph_from_dict(json.load(fh), channel)
