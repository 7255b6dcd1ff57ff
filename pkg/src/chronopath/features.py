"""Per-account transaction features.

Fifteen statistics per account, all derived from incident edges: monetary
in/out aggregates over ``trans`` edges, their ratio and balance, trans-edge
counts, Gini dispersion of incoming and outgoing amounts, and the account's
active lifespan across edges of both kinds.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ParseError
from .graph import KIND_CALL, KIND_TRANS, HeterogeneousGraph

FEATURE_NAMES = [
    "income_total", "income_avg", "income_max", "income_var",
    "expense_total", "expense_avg", "expense_max", "expense_var",
    "expense_income_ratio", "balance", "n_sent", "n_received",
    "gini_invest", "gini_return", "lifecycle",
]
N_FEATURES = len(FEATURE_NAMES)


def gini(amounts: Sequence[float] | np.ndarray) -> float:
    """Mean-absolute-difference Gini coefficient in [0, 1).

    Defined as sum_ij |x_i - x_j| / (2 n^2 mu); 0 for empty input or zero
    mean. Computed from the sorted array in O(n log n).
    """
    x = np.asarray(amounts, dtype=np.float64)
    if x.size == 0:
        return 0.0
    if np.any(x < 0):
        raise ValueError("gini is defined for non-negative amounts only")
    total = float(x.sum())
    if total == 0.0:
        return 0.0
    x = np.sort(x)
    n = x.size
    weights = 2.0 * np.arange(n, dtype=np.float64) - n + 1.0
    return float(np.dot(weights, x) / (n * total))


def _money_stats(values: np.ndarray) -> tuple[float, float, float, float]:
    if values.size == 0:
        return 0.0, 0.0, 0.0, 0.0
    total = float(values.sum())
    avg = total / values.size
    peak = float(values.max())
    var = float(np.mean((values - avg) ** 2)) if values.size > 1 else 0.0
    return total, avg, peak, var


def compute_features(g: HeterogeneousGraph, account: str) -> np.ndarray:
    """The 15-entry feature vector for one account (see FEATURE_NAMES)."""
    i = g.account_id(account)
    trans = g.block(KIND_TRANS)
    call = g.block(KIND_CALL)

    inc = trans.in_val[trans.in_indptr[i]:trans.in_indptr[i + 1]]
    out = trans.out_val[trans.out_indptr[i]:trans.out_indptr[i + 1]]

    income_total, income_avg, income_max, income_var = _money_stats(inc)
    expense_total, expense_avg, expense_max, expense_var = _money_stats(out)
    ratio = expense_total / income_total if income_total > 0 else 0.0
    balance = income_total - expense_total

    ts_parts = [
        trans.in_ts[trans.in_indptr[i]:trans.in_indptr[i + 1]],
        trans.out_ts[trans.out_indptr[i]:trans.out_indptr[i + 1]],
        call.in_ts[call.in_indptr[i]:call.in_indptr[i + 1]],
        call.out_ts[call.out_indptr[i]:call.out_indptr[i + 1]],
    ]
    incident = np.concatenate(ts_parts)
    lifecycle = float(incident.max() - incident.min()) if incident.size >= 2 else 0.0

    return np.array([
        income_total, income_avg, income_max, income_var,
        expense_total, expense_avg, expense_max, expense_var,
        ratio, balance, float(out.size), float(inc.size),
        gini(inc), gini(out), lifecycle,
    ], dtype=np.float64)


class FeatureMatrix:
    """Dense per-account feature rows with a stable account order."""

    def __init__(self, accounts: Sequence[str], values: np.ndarray):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != len(accounts):
            raise ValueError("values must be a 2-D array with one row per account")
        self.accounts = list(accounts)
        self.values = values
        self.index = {}
        for row, a in enumerate(self.accounts):
            self.index.setdefault(a, row)

    @property
    def n_features(self) -> int:
        return int(self.values.shape[1])

    def __len__(self) -> int:
        return len(self.accounts)

    def row(self, account: str) -> np.ndarray:
        return self.values[self.index[account]]

    def to_csv(self, path: str | Path, comment: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            w = csv.writer(fh)
            w.writerow(["account"] + [f"f{j + 1}" for j in range(self.n_features)])
            for a, row in zip(self.accounts, self.values):
                w.writerow([a] + [f"{v:.17g}" for v in row])

    @classmethod
    def from_csv(cls, path: str | Path) -> "FeatureMatrix":
        accounts: list[str] = []
        rows: list[list[float]] = []
        with open(path, newline="") as fh:
            lines = (ln for ln in fh if not ln.startswith("#"))
            reader = csv.reader(lines)
            header = next(reader, None)
            if header is None or header[0] != "account":
                raise ParseError("feature CSV must start with an 'account,f1,...' header", 1)
            width = len(header) - 1
            for line, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != width + 1:
                    raise ParseError(f"expected {width + 1} fields, got {len(row)}", line)
                accounts.append(row[0])
                rows.append([float(v) for v in row[1:]])
        values = np.array(rows, dtype=np.float64) if rows else np.empty((0, width))
        return cls(accounts, values)


def feature_matrix(g: HeterogeneousGraph, accounts: Sequence[str]) -> FeatureMatrix:
    """Stack compute_features rows in the given account order."""
    values = np.empty((len(accounts), N_FEATURES), dtype=np.float64)
    for row, a in enumerate(accounts):
        values[row] = compute_features(g, a)
    return FeatureMatrix(accounts, values)
