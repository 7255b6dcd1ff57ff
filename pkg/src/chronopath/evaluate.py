"""Experimental protocol: negative sampling, repeated stratified CV,
a built-in logistic regression and micro-F1 reporting.

The classifier is intentionally plain: full-batch gradient descent from a
zero start with a step size from a Lipschitz bound, so every fit is exactly
reproducible. Regularization strength comes from a fixed small grid chosen
on a deterministic inner holdout of the training split.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .features import FeatureMatrix
from .graph import HeterogeneousGraph, LabelSet

L2_GRID = (1e-3, 1e-2, 1e-1)
CLASSIFIERS = ("logreg", "scores")


@dataclass(frozen=True)
class EvalConfig:
    n_repeats: int = 5
    n_folds: int = 5
    seed: int = 7
    classifier: str = "logreg"
    scores_path: str | None = None
    l2_grid: tuple[float, ...] = L2_GRID
    max_iter: int = 500

    def __post_init__(self):
        if self.n_folds < 2:
            raise ConfigError("n_folds must be >= 2")
        if self.n_repeats < 1:
            raise ConfigError("n_repeats must be >= 1")
        if self.classifier not in CLASSIFIERS:
            raise ConfigError(f"classifier must be one of {CLASSIFIERS}")
        if self.classifier == "scores" and not self.scores_path:
            raise ConfigError("scores classifier needs scores_path")
        if not self.l2_grid:
            raise ConfigError("l2_grid must not be empty")


def sample_negatives(g: HeterogeneousGraph, labels: LabelSet,
                     seed: int) -> tuple[list[str], np.ndarray]:
    """All labeled CAs plus an equal-size uniform draw of unlabeled CAs.

    Returns (accounts, y) with y=1 for labeled rows. Deterministic in seed.
    """
    positives = sorted(labels.ponzi_accounts)
    ca_names = set(g.accounts_of_type("CA"))
    missing = [a for a in positives if a not in ca_names]
    if missing:
        raise ConfigError(f"labeled account is not a CA: {missing[0]!r}")
    pool = sorted(ca_names - set(positives))
    if len(pool) < len(positives):
        raise ConfigError(
            f"need {len(positives)} unlabeled CAs for negatives, have {len(pool)}")
    rng = np.random.default_rng(seed)
    picked = rng.choice(len(pool), size=len(positives), replace=False)
    negatives = [pool[i] for i in picked]
    accounts = positives + negatives
    y = np.array([1] * len(positives) + [0] * len(negatives), dtype=np.int64)
    return accounts, y


def micro_f1(predictions, truth) -> float:
    """Micro-averaged F1 over both classes (accuracy, for binary labels)."""
    p = np.asarray(predictions, dtype=np.int64)
    t = np.asarray(truth, dtype=np.int64)
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {t.shape}")
    if p.size == 0:
        raise ValueError("empty prediction set")
    tp = fp = fn = 0
    for cls in (0, 1):
        pred_c = p == cls
        true_c = t == cls
        tp += int(np.sum(pred_c & true_c))
        fp += int(np.sum(pred_c & ~true_c))
        fn += int(np.sum(~pred_c & true_c))
    return 2.0 * tp / (2.0 * tp + fp + fn)


# -- built-in classifier ---------------------------------------------------


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logreg_loss_grad(params: np.ndarray, X: np.ndarray, y: np.ndarray,
                     l2: float) -> tuple[float, np.ndarray]:
    """Mean cross-entropy + (l2/2)||w||^2; intercept is params[-1], unpenalized."""
    w, b = params[:-1], params[-1]
    z = X @ w + b
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z)) + 0.5 * l2 * float(w @ w)
    r = (_sigmoid(z) - y) / y.size
    grad = np.concatenate([X.T @ r + l2 * w, [r.sum()]])
    return loss, grad


def fit_logreg(X: np.ndarray, y: np.ndarray, l2: float,
               max_iter: int = 500, tol: float = 1e-10) -> np.ndarray:
    """Deterministic full-batch gradient descent from a zero start."""
    n, d = X.shape
    params = np.zeros(d + 1)
    # Hessian bound for the augmented design [X, 1]: sigma_max^2/(4n) + l2
    sigma_sq = float(np.linalg.norm(X, 2)) ** 2 if X.size else 0.0
    step = 1.0 / ((sigma_sq + n) / (4.0 * n) + l2)
    for _ in range(max_iter):
        _, grad = logreg_loss_grad(params, X, y, l2)
        if float(np.max(np.abs(grad))) < tol:
            break
        params = params - step * grad
    return params


def predict_logreg(params: np.ndarray, X: np.ndarray) -> np.ndarray:
    return (_sigmoid(X @ params[:-1] + params[-1]) >= 0.5).astype(np.int64)


def standardize(train: np.ndarray, *apply_to: np.ndarray):
    """Center/scale by train statistics only; constant columns pass through."""
    mu = train.mean(axis=0)
    sd = train.std(axis=0)
    sd = np.where(sd == 0.0, 1.0, sd)
    out = [(train - mu) / sd]
    out.extend((a - mu) / sd for a in apply_to)
    return tuple(out)


def _holdout_split(y: np.ndarray) -> tuple[np.ndarray, np.ndarray] | None:
    """Positional stratified 80/20 split; None when a class is too small."""
    val_idx = []
    for cls in np.unique(y):
        pos = np.flatnonzero(y == cls)
        if pos.size < 2:
            return None
        n_val = max(1, pos.size // 5)
        val_idx.append(pos[-n_val:])
    val = np.concatenate(val_idx)
    mask = np.ones(y.size, dtype=bool)
    mask[val] = False
    return np.flatnonzero(mask), np.sort(val)


def train_predict_logreg(X_train: np.ndarray, y_train: np.ndarray,
                         X_test: np.ndarray,
                         l2_grid: tuple[float, ...] = L2_GRID,
                         max_iter: int = 500) -> np.ndarray:
    """Pick l2 on an inner holdout, refit on the full split, hard-predict.

    Inputs are expected standardized by the caller; ties on the holdout go
    to the smaller l2. Degenerate splits fall back to the grid's middle.
    """
    for a in (X_train, X_test):
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite feature values")
    if len(l2_grid) == 1:
        best = l2_grid[0]
    else:
        split = _holdout_split(y_train)
        if split is None:
            best = l2_grid[len(l2_grid) // 2]
        else:
            tr, val = split
            best, best_score = None, -1.0
            for l2 in l2_grid:
                params = fit_logreg(X_train[tr], y_train[tr], l2, max_iter)
                score = micro_f1(predict_logreg(params, X_train[val]), y_train[val])
                if score > best_score:
                    best, best_score = l2, score
    params = fit_logreg(X_train, y_train, best, max_iter)
    return predict_logreg(params, X_test)


# -- external scores -------------------------------------------------------


def load_scores(path: str | Path) -> dict[str, float]:
    """CSV `account,score`; later duplicates override earlier ones."""
    out: dict[str, float] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["account", "score"]:
            raise ConfigError(f"scores file {path} must start with 'account,score'")
        for row in reader:
            if not row:
                continue
            if len(row) != 2:
                raise ConfigError(f"scores file {path}: bad row {row!r}")
            out[row[0]] = float(row[1])
    return out


def predict_scores(scores: dict[str, float], accounts: list[str]) -> np.ndarray:
    pred = np.empty(len(accounts), dtype=np.int64)
    for i, account in enumerate(accounts):
        if account not in scores:
            raise ConfigError(f"no score for account {account!r}")
        pred[i] = 1 if scores[account] >= 0.5 else 0
    return pred


# -- cross-validation ------------------------------------------------------


@dataclass(frozen=True)
class FoldScore:
    repeat: int
    fold: int
    f1: float


@dataclass
class EvalReport:
    config_hash: str
    seed: int
    folds: list[FoldScore]
    mean_f1: float
    std_f1: float

    def to_json(self) -> str:
        doc = {
            "config_hash": self.config_hash,
            "seed": self.seed,
            "folds": [{"repeat": f.repeat, "fold": f.fold, "f1": f.f1}
                      for f in self.folds],
            "mean_f1": self.mean_f1,
            "std_f1": self.std_f1,
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        doc = json.loads(text)
        folds = [FoldScore(int(f["repeat"]), int(f["fold"]), float(f["f1"]))
                 for f in doc["folds"]]
        return cls(doc["config_hash"], int(doc["seed"]), folds,
                   float(doc["mean_f1"]), float(doc["std_f1"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> "EvalReport":
        return cls.from_json(Path(path).read_text())


def _fold_assignment(y: np.ndarray, n_folds: int,
                     rng: np.random.Generator) -> np.ndarray:
    """Round-robin deal within each shuffled class: fold sizes differ by
    at most one sample per class."""
    fold_of = np.empty(y.size, dtype=np.int64)
    for cls in np.unique(y):
        idx = rng.permutation(np.flatnonzero(y == cls))
        fold_of[idx] = np.arange(idx.size) % n_folds
    return fold_of


def cross_validate(features: FeatureMatrix, y, cfg: EvalConfig,
                   config_hash: str = "") -> EvalReport:
    """n_repeats independent stratified shuffles, n_folds splits each."""
    y = np.asarray(y, dtype=np.int64)
    if y.size != len(features.accounts):
        raise ConfigError("labels and feature rows disagree in length")
    classes, counts = np.unique(y, return_counts=True)
    if classes.size < 2:
        raise ConfigError("need both classes present")
    if int(counts.min()) < cfg.n_folds:
        raise ConfigError(
            f"need >= {cfg.n_folds} samples per class, got {int(counts.min())}")

    scores = load_scores(cfg.scores_path) if cfg.classifier == "scores" else None
    X = features.values
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.n_repeats)
    folds: list[FoldScore] = []
    for repeat in range(cfg.n_repeats):
        rng = np.random.default_rng(children[repeat])
        fold_of = _fold_assignment(y, cfg.n_folds, rng)
        for fold in range(cfg.n_folds):
            test = fold_of == fold
            train = ~test
            if scores is not None:
                test_accounts = [features.accounts[i]
                                 for i in np.flatnonzero(test)]
                pred = predict_scores(scores, test_accounts)
            else:
                X_tr, X_te = standardize(X[train], X[test])
                pred = train_predict_logreg(X_tr, y[train], X_te,
                                            cfg.l2_grid, cfg.max_iter)
            folds.append(FoldScore(repeat, fold, micro_f1(pred, y[test])))

    values = np.array([f.f1 for f in folds])
    return EvalReport(config_hash, cfg.seed, folds,
                      float(values.mean()), float(values.std()))
