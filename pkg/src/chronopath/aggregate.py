"""Top-K filtering, importance normalization and feature aggregation.

The retained supers are selected per behaviour class (or per coarse pattern
when refinement is disabled), importance is normalized within head-account
groups, and each contract account receives the weighted sum of the feature
vectors along every retained super that targets it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

import numpy as np

from .errors import ConfigError
from .features import FeatureMatrix
from .metapaths import P1, P2, SuperSet

COMBINE_MODES = ("replace", "sum", "concat")
PATTERN_CHOICES = ("P1", "P2", "P1+P2")


@dataclass(frozen=True)
class TopKConfig:
    """Retention fraction in percent; ties break toward the lexically
    smaller node sequence so retained sets nest as k grows."""

    k_percent: float = 10.0

    def __post_init__(self):
        if not 0.0 < float(self.k_percent) <= 100.0:
            raise ConfigError(f"k_percent must be in (0, 100], got {self.k_percent}")


def _retain_count(k_percent: float, group_size: int) -> int:
    # exact decimal arithmetic: 7% of 100 must be 7 kept, not 8
    frac = Fraction(str(float(k_percent))) * group_size / 100
    return max(1, math.ceil(frac))


def top_k_filter(supers: SuperSet, cfg: TopKConfig,
                 use_refinement: bool = True) -> SuperSet:
    """Keep the ceil(k% x size) largest-importance supers of each group.

    Groups are refined classes, or the whole pattern when refinement is off.
    Importance values pass through unchanged; canonical row order is kept.
    """
    n = len(supers)
    if n == 0:
        return supers
    if use_refinement:
        groups = [np.flatnonzero(supers.refined == code)
                  for code in np.unique(supers.refined)]
    else:
        groups = [np.arange(n)]
    keep = np.zeros(n, dtype=bool)
    for idx in groups:
        n_keep = _retain_count(cfg.k_percent, idx.size)
        # stable sort on descending importance: ties stay in canonical
        # node-sequence order, which makes retained(k1) a prefix of retained(k2)
        order = np.argsort(-supers.importance[idx], kind="stable")
        keep[idx[order[:n_keep]]] = True
    return supers.subset(keep)


@dataclass(frozen=True)
class NormalizedSuper:
    node_sequence: tuple[str, ...]
    relation_sequence: tuple[str, ...]
    pattern: str
    refined_class: str
    importance: int
    omega_hat: float


class NormalizedSupers:
    """Retained supers plus their per-head-group normalized importance."""

    def __init__(self, supers: SuperSet, weight: np.ndarray):
        self.supers = supers
        self.weight = weight

    def __len__(self) -> int:
        return len(self.supers)

    def __iter__(self) -> Iterator[NormalizedSuper]:
        for row, sm in enumerate(self.supers):
            yield NormalizedSuper(sm.node_sequence, sm.relation_sequence,
                                  sm.pattern, sm.refined_class, sm.importance,
                                  float(self.weight[row]))

    def head_sums(self) -> dict[str, float]:
        """Summed omega_hat per head account (each should be 1)."""
        acc = self.supers.graph.accounts
        out: dict[str, float] = {}
        heads = self.supers.head_column()
        for row in range(len(self)):
            name = acc[heads[row]]
            out[name] = out.get(name, 0.0) + float(self.weight[row])
        return out


def normalize(retained: SuperSet) -> NormalizedSupers:
    """omega_hat = omega / sum of omega over supers sharing the head account.

    Head groups are formed within one coarse pattern (a SuperSet holds a
    single pattern by construction), so each group's weights sum to 1.
    """
    g = retained.graph
    heads = retained.head_column()
    omega = retained.importance.astype(np.float64)
    sums = np.bincount(heads, weights=omega, minlength=g.n_nodes)
    weight = omega / sums[heads] if len(retained) else np.empty(0, np.float64)
    return NormalizedSupers(retained, weight)


def aggregate(normalized: NormalizedSupers, base: FeatureMatrix) -> np.ndarray:
    """Weighted path-feature sums folded into each target contract account.

    Returns a matrix aligned with the graph's account order. Row of account
    a = sum over retained supers whose second node is a of
    omega_hat x (sum of base features of every node in the sequence, the
    target included). Accounts targeted by nothing keep a zero row.
    """
    supers = normalized.supers
    g = supers.graph
    dim = base.values.shape[1]
    out = np.zeros((g.n_nodes, dim), dtype=np.float64)
    if len(supers) == 0:
        return out

    row_of = np.full(g.n_nodes, -1, dtype=np.int64)
    for node in np.unique(supers.nodes):
        row = base.index.get(g.accounts[node])
        if row is None:
            raise ConfigError(
                f"no base feature row for account {g.accounts[node]!r}")
        row_of[node] = row

    path_sum = np.zeros((len(supers), dim), dtype=np.float64)
    for j in range(supers.nodes.shape[1]):
        path_sum += base.values[row_of[supers.nodes[:, j]]]
    contrib = normalized.weight[:, None] * path_sum
    np.add.at(out, supers.target_column(), contrib)
    return out


@dataclass
class AugmentedFeatures:
    """Per-pattern aggregates over the full account universe of one graph."""

    accounts: list[str]
    parts: dict[str, np.ndarray]

    def part(self, pattern: str) -> np.ndarray:
        try:
            return self.parts[pattern]
        except KeyError:
            raise ConfigError(f"no aggregated part for pattern {pattern!r}")


def _patterns_of(choice: str) -> list[str]:
    if choice == "P1+P2":
        return [P1, P2]
    if choice in (P1, P2):
        return [choice]
    raise ConfigError(f"patterns must be one of {PATTERN_CHOICES}, got {choice!r}")


def combine(base: FeatureMatrix, aug: AugmentedFeatures, mode: str,
            patterns: str) -> FeatureMatrix:
    """Fold the aggregates into a final per-account matrix.

    replace: the aggregate alone (parts summed for P1+P2); account rows that
    head nothing, EOAs included, stay zero. sum: base + aggregate. concat:
    base alongside each pattern's aggregate (30 or 45 columns).
    """
    if mode not in COMBINE_MODES:
        raise ConfigError(f"combine_mode must be one of {COMBINE_MODES}, got {mode!r}")
    wanted = _patterns_of(patterns)
    parts = [aug.part(p) for p in wanted]
    dim = base.values.shape[1]
    for p, part in zip(wanted, parts):
        if part.shape[1] != dim:
            raise ConfigError(
                f"aggregate for {p} has {part.shape[1]} columns, base has {dim}")

    base_rows = np.empty((len(aug.accounts), dim), dtype=np.float64)
    for i, account in enumerate(aug.accounts):
        row = base.index.get(account)
        if row is None:
            raise ConfigError(f"no base feature row for account {account!r}")
        base_rows[i] = base.values[row]

    if mode == "replace":
        values = parts[0].copy() if len(parts) == 1 else parts[0] + parts[1]
    elif mode == "sum":
        values = base_rows + (parts[0] if len(parts) == 1 else parts[0] + parts[1])
    else:
        values = np.concatenate([base_rows, *parts], axis=1)
    return FeatureMatrix(list(aug.accounts), values)


def build_augmented(supers_by_pattern: dict[str, SuperSet], base: FeatureMatrix,
                    cfg: TopKConfig, use_refinement: bool = True,
                    use_filtering: bool = True) -> tuple[AugmentedFeatures, dict[str, SuperSet]]:
    """Filter, normalize and aggregate each pattern; also return what was kept."""
    accounts = None
    parts: dict[str, np.ndarray] = {}
    retained_by_pattern: dict[str, SuperSet] = {}
    for pattern, supers in supers_by_pattern.items():
        retained = (top_k_filter(supers, cfg, use_refinement)
                    if use_filtering else supers)
        retained_by_pattern[pattern] = retained
        parts[pattern] = aggregate(normalize(retained), base)
        accounts = supers.graph.accounts
    if accounts is None:
        raise ConfigError("no patterns given")
    return AugmentedFeatures(list(accounts), parts), retained_by_pattern
