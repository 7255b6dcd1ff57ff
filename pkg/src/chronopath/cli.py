"""Command line front end.

Subcommands: `run` (full pipeline from a JSON config plus flag overrides),
`compare` (gain table between two eval reports), `synth` (emit a synthetic
benchmark as CSV files), `stats` (graph and metapath summary tables).
Failures exit with a stage-named code (see pipeline.EXIT_CODES); bad usage
or config exits 2.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .errors import ChronopathError
from .evaluate import EvalReport
from .graph import ingest_edges, load_labels, stats
from .metapaths import PATTERNS, enumerate_pattern, metapath_stats
from .pipeline import (EXIT_CODES, PipelineConfig, StageError, stats_csv,
                       compare_runs, run_pipeline)
from .synth import SynthConfig, generate, write_synth

_RUN_FIELDS = ("edges", "types", "labels", "pattern", "time_mode", "k_percent",
               "combine_mode", "n_repeats", "n_folds", "classifier",
               "scores_path", "seed", "outdir", "threads")


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="chronopath",
        description="Time-aware metapath feature augmentation for account graphs")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the full pipeline")
    run.add_argument("--config", help="JSON config file; flags override it")
    run.add_argument("--edges", help="edge CSV (src,dst,kind,timestamp,value)")
    run.add_argument("--types", help="account type CSV (account,type)")
    run.add_argument("--labels", help="label file, one account id per line")
    run.add_argument("--synth", action="store_true",
                     help="use the built-in synthetic benchmark as input")
    run.add_argument("--pattern", choices=("p1", "p2", "p1p2"))
    run.add_argument("--time-mode", dest="time_mode",
                     choices=("time_aware", "timeless"))
    run.add_argument("--k-percent", dest="k_percent", type=float)
    run.add_argument("--combine-mode", dest="combine_mode",
                     choices=("replace", "sum", "concat"))
    run.add_argument("--no-refinement", action="store_true",
                     help="group Top-K by coarse pattern instead of refined class")
    run.add_argument("--no-filtering", action="store_true",
                     help="keep every super metapath")
    run.add_argument("--raw-only", action="store_true",
                     help="skip metapath stages; evaluate manual features alone")
    run.add_argument("--repeats", dest="n_repeats", type=int)
    run.add_argument("--folds", dest="n_folds", type=int)
    run.add_argument("--classifier", choices=("logreg", "scores"))
    run.add_argument("--scores", dest="scores_path",
                     help="account,score CSV for the external classifier")
    run.add_argument("--seed", type=int)
    run.add_argument("--outdir", help="default: $CHRONOPATH_OUTDIR or ./out")
    run.add_argument("--threads", type=int)

    cmp_p = sub.add_parser("compare", help="gain table between two eval reports")
    cmp_p.add_argument("report_a")
    cmp_p.add_argument("report_b")

    synth = sub.add_parser("synth", help="write a synthetic benchmark to disk")
    synth.add_argument("--out", required=True, help="output directory")
    synth.add_argument("--seed", type=int)
    synth.add_argument("--n-ponzi", dest="n_ponzi_ca", type=int)
    synth.add_argument("--n-normal", dest="n_normal_ca", type=int)
    synth.add_argument("--n-eoa", dest="n_eoa", type=int)
    synth.add_argument("--investors", dest="investors_per_ca", type=float)
    synth.add_argument("--reward-probability", dest="reward_probability", type=float)
    synth.add_argument("--payback-ratio", dest="payback_ratio", type=float)
    synth.add_argument("--p2-fraction", dest="p2_fraction", type=float)
    synth.add_argument("--self-call-rate", dest="self_call_rate_normal", type=float)
    synth.add_argument("--horizon", dest="time_horizon", type=int)
    synth.add_argument("--noise-rate", dest="noise_edge_rate", type=float)

    st = sub.add_parser("stats", help="graph summary (and metapath table)")
    st.add_argument("--edges", required=True)
    st.add_argument("--types")
    st.add_argument("--labels")
    st.add_argument("--metapaths", action="store_true",
                    help="also enumerate P1/P2 and print per-class totals")
    st.add_argument("--time-mode", dest="time_mode", default="time_aware",
                    choices=("time_aware", "timeless"))
    st.add_argument("--threads", type=int, default=1)
    return p


def _run_config(args: argparse.Namespace) -> PipelineConfig:
    doc = json.loads(Path(args.config).read_text()) if args.config else {}
    if args.synth and doc.get("synth") is None:
        doc["synth"] = {}
    for name in _RUN_FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            doc[name] = value
    if args.no_refinement:
        doc["use_refinement"] = False
    if args.no_filtering:
        doc["use_filtering"] = False
    if args.raw_only:
        doc["raw_only"] = True
    if not doc.get("outdir"):
        doc["outdir"] = os.environ.get("CHRONOPATH_OUTDIR", "out")
    if doc.get("synth") is not None and args.seed is not None \
            and isinstance(doc["synth"], dict):
        doc["synth"].setdefault("seed", args.seed)
    return PipelineConfig.from_dict(doc)


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = _run_config(args)
    artifacts = run_pipeline(cfg)
    for name in sorted(artifacts):
        print(f"wrote {artifacts[name]}")
    report = EvalReport.load(artifacts["eval_report.json"])
    print(f"mean micro-F1: {report.mean_f1:.4f}")
    return 0


def _cmd_compare(args: argparse.Namespace) -> int:
    table = compare_runs(EvalReport.load(args.report_a),
                         EvalReport.load(args.report_b))
    print(table, end="")
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    overrides = {name: getattr(args, name) for name in (
        "seed", "n_ponzi_ca", "n_normal_ca", "n_eoa", "investors_per_ca",
        "reward_probability", "payback_ratio", "p2_fraction",
        "self_call_rate_normal", "time_horizon", "noise_edge_rate")
        if getattr(args, name) is not None}
    g, labels = generate(SynthConfig(**overrides))
    paths = write_synth(g, labels, args.out)
    for name in ("edges", "types", "labels"):
        print(f"wrote {paths[name]}")
    return 0


def _cmd_stats(args: argparse.Namespace) -> int:
    g = ingest_edges(args.edges, args.types)
    labels = load_labels(args.labels, g) if args.labels else None
    print(json.dumps(stats(g, labels).to_dict(), sort_keys=True, indent=2))
    if args.metapaths:
        sets = [enumerate_pattern(g, pat, args.time_mode, args.threads)
                for pat in PATTERNS]
        print(stats_csv(metapath_stats(sets)), end="")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s",
                        stream=sys.stderr)
    handlers = {"run": _cmd_run, "compare": _cmd_compare,
                "synth": _cmd_synth, "stats": _cmd_stats}
    try:
        return handlers[args.command](args)
    except StageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CODES.get(e.stage, 1)
    except ChronopathError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
