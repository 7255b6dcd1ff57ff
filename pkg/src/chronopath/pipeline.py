"""End-to-end batch pipeline: ingest, features, metapaths, aggregation,
evaluation, artifact writing.

Every artifact is a pure function of the config's semantic fields plus the
seed, so reruns are byte-identical; output location and thread count do not
participate in the config hash. Files land via a temp-then-rename so a
failed stage never leaves partial artifacts behind.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .aggregate import COMBINE_MODES, TopKConfig, build_augmented, combine
from .errors import ChronopathError, ConfigError
from .evaluate import EvalConfig, EvalReport, cross_validate, sample_negatives
from .features import FeatureMatrix, feature_matrix
from .graph import HeterogeneousGraph, LabelSet, ingest_edges, load_labels, stats
from .metapaths import (P1, P2, TIME_MODES, MetapathStats, SuperSet,
                        enumerate_pattern, metapath_stats, write_supers_csv)
from .synth import SynthConfig, generate

logger = logging.getLogger("chronopath")

PATTERN_KEYS = {"p1": (P1,), "p2": (P2,), "p1p2": (P1, P2)}
COMBINED_NAME = {"p1": "P1", "p2": "P2", "p1p2": "P1+P2"}

# stage-named exit codes; 0 is success, 1 is reserved for unexpected crashes
EXIT_CODES = {"config": 2, "ingest": 3, "features": 4, "metapaths": 5,
              "aggregate": 6, "evaluate": 7, "write": 8}

ARTIFACT_GRAPH_STATS = "graph_stats.json"
ARTIFACT_METAPATH_STATS = "metapath_stats.csv"
ARTIFACT_SUPERS = "supers.csv"
ARTIFACT_AUGMENTED = "augmented_features.csv"
ARTIFACT_RAW_FEATURES = "features.csv"
ARTIFACT_REPORT = "eval_report.json"


class StageError(ChronopathError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"{stage} stage failed: {cause}")
        self.stage = stage
        self.cause = cause


class _Stage:
    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None:
            if isinstance(exc, StageError):
                return False
            raise StageError(self.name, exc) from exc
        logger.info("[%s] %.2fs", self.name, time.perf_counter() - self.t0)
        return False


@dataclass
class PipelineConfig:
    """Declarative description of one pipeline run.

    Input is either the (edges, types, labels) file triple or an inline
    synthetic-benchmark config, never both. `outdir` and `threads` change
    where and how fast things happen but never what is computed.
    """

    edges: str | None = None
    types: str | None = None
    labels: str | None = None
    synth: SynthConfig | None = None
    pattern: str = "p2"
    time_mode: str = "time_aware"
    k_percent: float = 10.0
    combine_mode: str = "replace"
    use_refinement: bool = True
    use_filtering: bool = True
    raw_only: bool = False
    n_repeats: int = 5
    n_folds: int = 5
    classifier: str = "logreg"
    scores_path: str | None = None
    seed: int = 7
    outdir: str = "out"
    threads: int = 1

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        doc = dict(doc)
        if doc.get("synth") is not None:
            try:
                doc["synth"] = SynthConfig(**doc["synth"])
            except TypeError as e:
                raise ConfigError(f"bad synth config: {e}")
        return cls(**doc)

    def to_dict(self) -> dict:
        doc = dataclasses.asdict(self)
        return doc

    def semantic_dict(self) -> dict:
        """Config content that determines outputs; hash input.

        Fields a given run ignores are nulled out so that, say, two
        filtering-off runs differing only in k_percent hash identically.
        """
        doc = self.to_dict()
        doc.pop("outdir")
        doc.pop("threads")
        if self.raw_only:
            for key in ("pattern", "time_mode", "k_percent", "combine_mode",
                        "use_refinement", "use_filtering"):
                doc[key] = None
        elif not self.use_filtering:
            doc["k_percent"] = None
        if self.classifier != "scores":
            doc["scores_path"] = None
        return doc

    def config_hash(self) -> str:
        blob = json.dumps(self.semantic_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def validate(self) -> None:
        if self.synth is None:
            if not self.edges or not self.labels:
                raise ConfigError("need either synth or edges+labels input")
        elif self.edges or self.types or self.labels:
            raise ConfigError("give input files or synth, not both")
        if self.pattern not in PATTERN_KEYS:
            raise ConfigError(f"pattern must be one of {tuple(PATTERN_KEYS)}")
        if self.time_mode not in TIME_MODES:
            raise ConfigError(f"time_mode must be one of {TIME_MODES}")
        if self.combine_mode not in COMBINE_MODES:
            raise ConfigError(f"combine_mode must be one of {COMBINE_MODES}")
        if self.use_filtering:
            TopKConfig(self.k_percent)
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")


def _atomic_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _atomic_via(path: Path, writer) -> None:
    tmp = path.with_name(path.name + ".tmp")
    writer(tmp)
    os.replace(tmp, path)


def stats_csv(mstats: MetapathStats) -> str:
    lines = ["pattern,refined_class,n_supers,total_omega"]
    for pattern, name, n, omega in mstats.rows():
        lines.append(f"{pattern},{name},{n},{omega}")
    return "\n".join(lines) + "\n"


def _restrict(matrix: FeatureMatrix, accounts: list[str]) -> FeatureMatrix:
    rows = np.stack([matrix.row(a) for a in accounts])
    return FeatureMatrix(accounts, rows)


def load_inputs(cfg: PipelineConfig) -> tuple[HeterogeneousGraph, LabelSet]:
    if cfg.synth is not None:
        return generate(cfg.synth)
    g = ingest_edges(cfg.edges, cfg.types)
    labels = load_labels(cfg.labels, g)
    return g, labels


def run_pipeline(cfg: PipelineConfig) -> dict[str, Path]:
    """Execute every stage and return {artifact name: path}.

    Failures surface as StageError carrying the stage name; nothing is
    half-written in that case.
    """
    with _Stage("config"):
        cfg.validate()
        outdir = Path(cfg.outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        chash = cfg.config_hash()

    with _Stage("ingest"):
        g, labels = load_inputs(cfg)
        gstats = stats(g, labels)

    with _Stage("features"):
        base = feature_matrix(g, g.accounts)

    final = base
    mstats = None
    retained: dict[str, SuperSet] = {}
    if not cfg.raw_only:
        with _Stage("metapaths"):
            sets = {p: enumerate_pattern(g, p, cfg.time_mode, cfg.threads)
                    for p in PATTERN_KEYS[cfg.pattern]}
            mstats = metapath_stats(list(sets.values()))
        with _Stage("aggregate"):
            aug, retained = build_augmented(
                sets, base, TopKConfig(cfg.k_percent if cfg.use_filtering else 100.0),
                cfg.use_refinement, cfg.use_filtering)
            final = combine(base, aug, cfg.combine_mode, COMBINED_NAME[cfg.pattern])

    with _Stage("evaluate"):
        accounts, y = sample_negatives(g, labels, cfg.seed)
        ecfg = EvalConfig(n_repeats=cfg.n_repeats, n_folds=cfg.n_folds,
                          seed=cfg.seed, classifier=cfg.classifier,
                          scores_path=cfg.scores_path)
        report = cross_validate(_restrict(final, accounts), y, ecfg,
                                config_hash=chash)

    with _Stage("write"):
        artifacts: dict[str, Path] = {}

        def put(name: str, text: str) -> None:
            path = outdir / name
            _atomic_text(path, text)
            artifacts[name] = path

        put(ARTIFACT_GRAPH_STATS,
            json.dumps(gstats.to_dict(), sort_keys=True, indent=2) + "\n")
        if cfg.raw_only:
            path = outdir / ARTIFACT_RAW_FEATURES
            _atomic_via(path, lambda p: final.to_csv(p, comment="raw manual features"))
            artifacts[ARTIFACT_RAW_FEATURES] = path
        else:
            put(ARTIFACT_METAPATH_STATS, stats_csv(mstats))
            path = outdir / ARTIFACT_SUPERS
            kept = [retained[p] for p in sorted(retained)]
            _atomic_via(path, lambda p: write_supers_csv(kept, p))
            artifacts[ARTIFACT_SUPERS] = path
            comment = (f"pattern={cfg.pattern} time_mode={cfg.time_mode} "
                       f"k_percent={cfg.k_percent if cfg.use_filtering else 100} "
                       f"combine_mode={cfg.combine_mode}")
            path = outdir / ARTIFACT_AUGMENTED
            _atomic_via(path, lambda p: final.to_csv(p, comment=comment))
            artifacts[ARTIFACT_AUGMENTED] = path
        put(ARTIFACT_REPORT, report.to_json())

    logger.info("mean micro-F1 %.4f (config %s)", report.mean_f1, chash[:12])
    return artifacts


def compare_runs(a: EvalReport, b: EvalReport) -> str:
    """Per-fold and mean relative improvement of b over a, as a CSV table."""
    if a.seed != b.seed:
        raise ConfigError("incompatible reports: seeds differ")
    if [(f.repeat, f.fold) for f in a.folds] != [(f.repeat, f.fold) for f in b.folds]:
        raise ConfigError("incompatible reports: fold structure differs")
    lines = ["repeat,fold,f1_a,f1_b,gain"]
    for fa, fb in zip(a.folds, b.folds):
        lines.append(f"{fa.repeat},{fa.fold},{fa.f1:.6f},{fb.f1:.6f},"
                     f"{_gain(fa.f1, fb.f1)}")
    lines.append(f"mean,,{a.mean_f1:.6f},{b.mean_f1:.6f},"
                 f"{_gain(a.mean_f1, b.mean_f1)}")
    return "\n".join(lines) + "\n"


def _gain(a: float, b: float) -> str:
    if a == 0.0:
        return "n/a" if b == 0.0 else "+inf%"
    return f"{(b - a) / a * 100.0:+.2f}%"
