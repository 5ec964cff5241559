"""Simulation configuration: JSON document <-> SimConfig with field-path validation."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

from .errors import ConfigError
from .net import ChannelModel, FlowSpec, NetworkGraph, graph_from_dict
from .pgds import PGDSParams
from .topology import generate

SCHEDULERS = ("pgds", "csma", "adaptive-csma")


@dataclass
class CsmaParams:
    cw_min: int = 16
    cw_max: int = 1024
    m0: float = 8.0
    beta: float = 0.5


@dataclass
class SimConfig:
    topology: dict = field(default_factory=lambda: {"kind": "mesh", "nodes": 16})
    flows: list = field(default_factory=list)
    scheduler: str = "pgds"
    channel: dict = field(default_factory=dict)
    pgds: PGDSParams = field(default_factory=PGDSParams)
    csma: CsmaParams = field(default_factory=CsmaParams)
    error_model: str = "ideal"
    error_k: float = 1.0
    arrivals: str = "poisson"
    packet_bits: int = 100
    slots: int = 1000
    seed: int = 0
    warmup_frac: float = 0.2
    check_invariants: bool = True
    trace_feedback: str | None = None
    trace_schedule: str | None = None

    def to_dict(self):
        return asdict(self)

    def build_channel(self, rng_seed):
        ch = dict(self.channel)
        return ChannelModel(mode=ch.get("mode", "static"),
                            coherence_slots=int(ch.get("coherence_slots", 20)),
                            path_loss_exponent=float(ch.get("path_loss_exponent", 3.5)),
                            ref_gain=float(ch.get("ref_gain", ChannelModel.ref_gain)),
                            rng_seed=rng_seed)

    def build_graph(self, channel) -> NetworkGraph:
        topo = dict(self.topology)
        if "kind" in topo:
            kind = topo.pop("kind")
            n = topo.pop("nodes", 16)
            try:
                topo = generate(kind, n, **topo)
            except ConfigError as exc:
                raise ConfigError(f"topology.{exc.path}", exc.message) from None
        return graph_from_dict(topo, channel)

    def build_flows(self, graph):
        out = {}
        for k, f in enumerate(self.flows):
            for key in ("source", "destination"):
                if key not in f:
                    raise ConfigError(f"flows[{k}].{key}", "missing")
                v = f[key]
                if not isinstance(v, int) or not 0 <= v < graph.n_nodes:
                    raise ConfigError(f"flows[{k}].{key}", f"node {v!r} not in topology")
            spec = FlowSpec(k, f["source"], f["destination"], int(f.get("deadline", 10)),
                            float(f.get("weight", 1.0)), float(f.get("arrival_rate", 0.25)))
            if graph.hop_table(spec.destination)[spec.source] < 0:
                raise ConfigError(f"flows[{k}]", "destination unreachable from source")
            out[k] = spec
        return out


def _sub(cls, doc, path):
    if doc is None:
        return cls()
    if not isinstance(doc, dict):
        raise ConfigError(path, "expected an object")
    names = {f.name for f in fields(cls)}
    for k in doc:
        if k not in names:
            raise ConfigError(f"{path}.{k}", "unknown field")
    return cls(**doc)


def config_from_dict(doc):
    if not isinstance(doc, dict):
        raise ConfigError("$", "config must be a JSON object")
    names = {f.name for f in fields(SimConfig)}
    for k in doc:
        if k not in names:
            raise ConfigError(k, "unknown field")
    d = dict(doc)
    d["pgds"] = _sub(PGDSParams, doc.get("pgds"), "pgds")
    d["csma"] = _sub(CsmaParams, doc.get("csma"), "csma")
    cfg = SimConfig(**d)
    validate(cfg)
    return cfg


def validate(cfg):
    if cfg.scheduler not in SCHEDULERS:
        raise ConfigError("scheduler", f"expected one of {SCHEDULERS}")
    if not isinstance(cfg.slots, int) or cfg.slots < 1:
        raise ConfigError("slots", "must be an integer >= 1")
    if cfg.arrivals not in ("poisson", "deterministic"):
        raise ConfigError("arrivals", "expected 'poisson' or 'deterministic'")
    if cfg.error_model not in ("ideal", "exp_err"):
        raise ConfigError("error_model", "expected 'ideal' or 'exp_err'")
    if cfg.packet_bits < 1:
        raise ConfigError("packet_bits", "must be >= 1")
    if not 0 <= cfg.warmup_frac < 1:
        raise ConfigError("warmup_frac", "must be in [0, 1)")
    if not cfg.flows:
        raise ConfigError("flows", "need at least one flow")
    for k, f in enumerate(cfg.flows):
        if not isinstance(f, dict):
            raise ConfigError(f"flows[{k}]", "expected an object")
        if float(f.get("arrival_rate", 0.25)) < 0:
            raise ConfigError(f"flows[{k}].arrival_rate", "must be >= 0")
    p = cfg.pgds
    if p.eta1 <= 0:
        raise ConfigError("pgds.eta1", "must be > 0")
    if p.eta2 < 0 or p.eta3 < 0:
        raise ConfigError("pgds.eta2", "dual step sizes must be >= 0")
    if p.retry_limit < 0:
        raise ConfigError("pgds.retry_limit", "must be >= 0")
    if p.power_levels < 1:
        raise ConfigError("pgds.power_levels", "must be >= 1")
    if p.dual_mode not in ("ascent", "descent"):
        raise ConfigError("pgds.dual_mode", "expected 'ascent' or 'descent'")
    if p.feedback_latency not in ("instant", "hop_delayed"):
        raise ConfigError("pgds.feedback_latency", "expected 'instant' or 'hop_delayed'")
    if p.reward_fn not in ("throughput", "weighted_unit"):
        raise ConfigError("pgds.reward_fn", "expected 'throughput' or 'weighted_unit'")
    if p.decay is not None and not 0 < p.decay <= 1:
        raise ConfigError("pgds.decay", "must be in (0, 1] or null")


def load_config(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("$", f"invalid JSON: {exc}") from None
    return config_from_dict(doc)
