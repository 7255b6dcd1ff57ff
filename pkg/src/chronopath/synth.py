"""Synthetic labeled account graphs with planted scheme behavior.

Ponzi contracts collect investments early and pay rewards strictly later,
so their call/trans timestamp pairs are time-ordered; normal contracts pay
at times drawn independently of the investments, so about half the pairs
violate the ordering. A share of rewards is routed through forwarder
contracts (three-hop chains), normal contracts occasionally self-call, and
uniform noise edges blur everything a little. Desk-scale only.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .graph import (CA, EOA, KIND_CALL, KIND_TRANS, HeterogeneousGraph,
                    LabelSet, save_graph)

# timestamps: investments land in the first half of the horizon, scheme
# rewards in the second half, so planted orderings never collide
_AMOUNT_SIGMA = 1.0
_PAYBACK_SIGMA = 0.8


@dataclass(frozen=True)
class SynthConfig:
    n_ponzi_ca: int = 100
    n_normal_ca: int = 100
    n_eoa: int = 5000
    investors_per_ca: float = 8.0
    reward_probability: float = 0.8
    payback_ratio: float = 0.75
    p2_fraction: float = 0.35
    self_call_rate_normal: float = 0.5
    time_horizon: int = 1000
    repeat_calls_mean: float = 5.0
    noise_edge_rate: float = 0.05
    seed: int = 7

    def __post_init__(self):
        for name in ("n_ponzi_ca", "n_normal_ca", "n_eoa", "time_horizon"):
            if int(getattr(self, name)) < 0:
                raise ConfigError(f"{name} must be >= 0")
        for name in ("reward_probability", "p2_fraction", "self_call_rate_normal"):
            v = float(getattr(self, name))
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {v}")
        if self.investors_per_ca < 0 or self.payback_ratio <= 0:
            raise ConfigError("investors_per_ca and payback_ratio must be positive")
        if self.repeat_calls_mean < 0:
            raise ConfigError("repeat_calls_mean must be >= 0")
        if self.noise_edge_rate < 0:
            raise ConfigError("noise_edge_rate must be >= 0")
        if (self.n_ponzi_ca or self.n_normal_ca) and self.n_eoa < 2:
            raise ConfigError("need at least 2 EOAs to wire any contract")
        if self.time_horizon < 4 and (self.n_ponzi_ca or self.n_normal_ca):
            raise ConfigError("time_horizon too small to order rewards")


class _EdgeSink:
    def __init__(self):
        self.src: list[int] = []
        self.dst: list[int] = []
        self.kind: list[int] = []
        self.ts: list[int] = []
        self.val: list[float] = []

    def add(self, src: int, dst: int, kind: int, ts: int, val: float) -> None:
        self.src.append(src)
        self.dst.append(dst)
        self.kind.append(kind)
        self.ts.append(int(ts))
        self.val.append(float(val))

    def __len__(self) -> int:
        return len(self.src)


def _amount(rng: np.random.Generator) -> float:
    return float(rng.lognormal(0.0, _AMOUNT_SIGMA))


def _wire_contract(rng: np.random.Generator, sink: _EdgeSink, cfg: SynthConfig,
                   ca: int, eoa_base: int, forwarder: int | None,
                   is_ponzi: bool, background: bool = False) -> None:
    half = cfg.time_horizon // 2
    n_inv = max(2, int(rng.poisson(cfg.investors_per_ca)))
    n_inv = min(n_inv, cfg.n_eoa)
    investors = eoa_base + rng.choice(cfg.n_eoa, size=n_inv, replace=False)
    first_ts = np.sort(rng.integers(0, half, size=n_inv))
    # the earliest investor is a repeat player; their pile of calls gives the
    # contract a dominant super that survives aggressive Top-K filtering
    # (floor of 7 extra calls keeps that super above the ordinary-omega band)
    n_calls = np.ones(n_inv, dtype=np.int64)
    if cfg.repeat_calls_mean > 0:
        n_calls[0] += max(7, int(rng.poisson(cfg.repeat_calls_mean)))
    invested = np.zeros(n_inv)
    for i in range(n_inv):
        e = int(investors[i])
        ts = np.concatenate(([first_ts[i]],
                             rng.integers(first_ts[i], half, size=n_calls[i] - 1)))
        for t in ts:
            amt = float(rng.lognormal(0.0, _AMOUNT_SIGMA))
            # one transaction: an invocation plus the value move
            sink.add(int(e), ca, KIND_CALL, int(t), amt)
            sink.add(int(e), ca, KIND_TRANS, int(t), amt)
            invested[i] += amt

    rewarded = rng.random(n_inv) < cfg.reward_probability
    if is_ponzi:
        rewarded[0] = True  # a scheme always pays its first investor
        if cfg.p2_fraction > 0 and n_inv >= 2:
            rewarded[1] = True
    idx = [i for i in range(n_inv) if rewarded[i]]

    routed = rng.random(len(idx)) < cfg.p2_fraction
    if idx:
        routed[0] = False  # keep one direct payout so the two-hop chain exists
        if is_ponzi and len(idx) > 1 and cfg.p2_fraction > 0 and not routed.any():
            routed[-1] = True

    ratio = cfg.payback_ratio if is_ponzi else 1.0
    for j, i in enumerate(idx):
        e = int(investors[i])
        # mean-1 multiplicative jitter so the ratio centers on payback_ratio
        jitter = rng.lognormal(-0.5 * _PAYBACK_SIGMA ** 2, _PAYBACK_SIGMA)
        amount = invested[i] * ratio * jitter
        if is_ponzi:
            # pay strictly after every investment this contract received
            t2, t3 = np.sort(rng.choice(cfg.time_horizon - half, size=2,
                                        replace=False) + half)
        else:
            t2 = int(rng.integers(0, cfg.time_horizon))
            t3 = int(rng.integers(0, cfg.time_horizon))
        if routed[j] and forwarder is not None:
            sink.add(ca, forwarder, KIND_CALL, int(t2), amount)
            sink.add(ca, forwarder, KIND_TRANS, int(t2), amount)
            sink.add(forwarder, e, KIND_TRANS, int(t3), amount)
        else:
            sink.add(ca, e, KIND_TRANS, int(t3), amount)

    if not is_ponzi and not background \
            and rng.random() < cfg.self_call_rate_normal:
        for _ in range(int(rng.integers(1, 3))):
            sink.add(ca, ca, KIND_CALL, int(rng.integers(0, cfg.time_horizon)),
                     _amount(rng))


def _noise_edges(rng: np.random.Generator, sink: _EdgeSink, cfg: SynthConfig,
                 n_nodes: int, cas: list[int]) -> None:
    n_noise = int(round(cfg.noise_edge_rate * len(sink)))
    for _ in range(n_noise):
        if cas and rng.random() < 0.3:
            dst = cas[int(rng.integers(len(cas)))]
            src = int(rng.integers(n_nodes))
            while src == dst:
                src = int(rng.integers(n_nodes))
            kind = KIND_CALL
        else:
            src = int(rng.integers(n_nodes))
            dst = int(rng.integers(n_nodes))
            while dst == src:
                dst = int(rng.integers(n_nodes))
            kind = KIND_TRANS
        sink.add(src, dst, kind, int(rng.integers(0, cfg.time_horizon)),
                 _amount(rng))


def generate(cfg: SynthConfig) -> tuple[HeterogeneousGraph, LabelSet]:
    """Deterministic labeled graph for the given config and seed.

    Isolated EOAs stay in the node set, every labeled account is a CA, and
    scheme contracts never self-call.
    """
    rng = np.random.default_rng(cfg.seed)

    ponzi = [f"P{i:04d}" for i in range(cfg.n_ponzi_ca)]
    normal = [f"N{i:04d}" for i in range(cfg.n_normal_ca)]
    # one private forwarder per contract keeps the routed chains disjoint
    n_contract = cfg.n_ponzi_ca + cfg.n_normal_ca
    n_fwd = n_contract if cfg.p2_fraction > 0 else 0
    fwd = [f"F{i:04d}" for i in range(n_fwd)]
    eoa = [f"E{i:06d}" for i in range(cfg.n_eoa)]

    accounts = ponzi + normal + fwd + eoa
    node_type = np.array([CA] * (len(ponzi) + len(normal) + len(fwd))
                         + [EOA] * len(eoa), dtype=np.uint8)
    eoa_base = len(ponzi) + len(normal) + len(fwd)
    fwd_base = n_contract

    sink = _EdgeSink()
    if cfg.n_eoa:
        for i in range(n_contract):
            _wire_contract(rng, sink, cfg, i, eoa_base,
                           fwd_base + i if n_fwd else None,
                           is_ponzi=i < cfg.n_ponzi_ca)
        # forwarders carry ordinary traffic of their own, so money-flow
        # features alone cannot tell them from contracts
        for i in range(n_fwd):
            _wire_contract(rng, sink, cfg, fwd_base + i, eoa_base, None,
                           is_ponzi=False, background=True)
    _noise_edges(rng, sink, cfg, len(accounts), list(range(eoa_base)))

    g = HeterogeneousGraph.from_arrays(
        accounts, node_type,
        np.array(sink.src, dtype=np.int64), np.array(sink.dst, dtype=np.int64),
        np.array(sink.kind, dtype=np.uint8), np.array(sink.ts, dtype=np.int64),
        np.array(sink.val, dtype=np.float64))
    return g, LabelSet(frozenset(ponzi), source="synthetic")


def write_labels(labels: LabelSet, path: str | Path) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        for account in sorted(labels.ponzi_accounts):
            fh.write(account + "\n")
    return path


def write_synth(g: HeterogeneousGraph, labels: LabelSet,
                directory: str | Path) -> dict[str, Path]:
    """Emit the standard edge CSV, type CSV and label file."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    edges_path, types_path = save_graph(g, directory)
    labels_path = write_labels(labels, directory / "labels.txt")
    return {"edges": edges_path, "types": types_path, "labels": labels_path}
