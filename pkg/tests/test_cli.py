"""End-to-end command line behavior and pipeline configuration rules."""

import json

import pytest

from chronopath.cli import main
from chronopath.errors import ConfigError
from chronopath.evaluate import EvalReport, FoldScore
from chronopath.pipeline import PipelineConfig, compare_runs

SMALL_SYNTH = {"n_ponzi_ca": 8, "n_normal_ca": 8, "n_eoa": 100,
               "time_horizon": 100, "seed": 2}


def _write_config(tmp_path, **extra):
    doc = {"synth": SMALL_SYNTH, "n_repeats": 2, "n_folds": 2,
           "outdir": str(tmp_path / "out")}
    doc.update(extra)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc))
    return path


def test_run_synth_writes_all_artifacts(tmp_path, capsys):
    cfg = _write_config(tmp_path)
    assert main(["run", "--config", str(cfg)]) == 0
    out = capsys.readouterr().out
    outdir = tmp_path / "out"
    for name in ("graph_stats.json", "metapath_stats.csv", "supers.csv",
                 "augmented_features.csv", "eval_report.json"):
        assert (outdir / name).is_file(), name
        assert f"wrote {outdir / name}" in out
    assert not (outdir / "features.csv").exists()
    assert "mean micro-F1: " in out

    gstats = json.loads((outdir / "graph_stats.json").read_text())
    assert gstats["n_labels"] == 8
    report = EvalReport.load(outdir / "eval_report.json")
    assert len(report.folds) == 4
    header = (outdir / "supers.csv").read_text().splitlines()[0]
    assert header == "pattern,refined_class,node_sequence,omega"
    comment = (outdir / "augmented_features.csv").read_text().splitlines()[0]
    assert comment.startswith("# pattern=p2 time_mode=time_aware k_percent=10")


def test_run_raw_only_writes_feature_matrix(tmp_path, capsys):
    cfg = _write_config(tmp_path)
    assert main(["run", "--config", str(cfg), "--raw-only"]) == 0
    outdir = tmp_path / "out"
    text = (outdir / "features.csv").read_text()
    assert text.startswith("# raw manual features\n")
    assert not (outdir / "supers.csv").exists()
    assert (outdir / "eval_report.json").is_file()


def test_run_is_deterministic(tmp_path):
    cfg_a = _write_config(tmp_path, outdir=str(tmp_path / "a"))
    assert main(["run", "--config", str(cfg_a)]) == 0
    cfg_b = _write_config(tmp_path, outdir=str(tmp_path / "b"))
    assert main(["run", "--config", str(cfg_b)]) == 0
    for name in ("graph_stats.json", "metapath_stats.csv", "supers.csv",
                 "augmented_features.csv", "eval_report.json"):
        assert (tmp_path / "a" / name).read_bytes() == \
            (tmp_path / "b" / name).read_bytes(), name


def test_flag_overrides_beat_config_file(tmp_path):
    cfg = _write_config(tmp_path, k_percent=50.0)
    assert main(["run", "--config", str(cfg), "--k-percent", "25",
                 "--pattern", "p1"]) == 0
    comment = (tmp_path / "out" / "augmented_features.csv").read_text() \
        .splitlines()[0]
    assert "pattern=p1" in comment
    assert "k_percent=25.0" in comment


def test_run_from_csv_files(tmp_path, capsys):
    assert main(["synth", "--out", str(tmp_path / "data"), "--seed", "2",
                 "--n-ponzi", "8", "--n-normal", "8", "--n-eoa", "100",
                 "--horizon", "100"]) == 0
    out = capsys.readouterr().out
    assert out.count("wrote ") == 3
    for name in ("edges.csv", "types.csv", "labels.txt"):
        assert (tmp_path / "data" / name).is_file()

    assert main(["run",
                 "--edges", str(tmp_path / "data" / "edges.csv"),
                 "--types", str(tmp_path / "data" / "types.csv"),
                 "--labels", str(tmp_path / "data" / "labels.txt"),
                 "--repeats", "2", "--folds", "2",
                 "--outdir", str(tmp_path / "from_csv")]) == 0
    report = EvalReport.load(tmp_path / "from_csv" / "eval_report.json")
    assert 0.0 <= report.mean_f1 <= 1.0


def test_outdir_env_default(tmp_path, monkeypatch):
    monkeypatch.setenv("CHRONOPATH_OUTDIR", str(tmp_path / "envout"))
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"synth": SMALL_SYNTH,
                               "n_repeats": 2, "n_folds": 2}))
    assert main(["run", "--config", str(cfg)]) == 0
    assert (tmp_path / "envout" / "eval_report.json").is_file()


def test_unknown_config_key_exits_2(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"synth": SMALL_SYNTH, "kpercent": 10}))
    assert main(["run", "--config", str(cfg)]) == 2
    assert "kpercent" in capsys.readouterr().err


def test_missing_edge_file_exits_with_ingest_code(tmp_path, capsys):
    assert main(["run", "--edges", str(tmp_path / "nope.csv"),
                 "--labels", str(tmp_path / "nope.txt"),
                 "--outdir", str(tmp_path / "out")]) == 3
    assert "error" in capsys.readouterr().err


def test_no_input_at_all_exits_2(tmp_path, capsys):
    assert main(["run", "--outdir", str(tmp_path / "out")]) == 2


def test_bad_labels_exit_with_ingest_code(tmp_path):
    assert main(["synth", "--out", str(tmp_path / "data"), "--seed", "2",
                 "--n-ponzi", "4", "--n-normal", "4", "--n-eoa", "60",
                 "--horizon", "100"]) == 0
    (tmp_path / "data" / "labels.txt").write_text("GHOST\n")
    assert main(["run",
                 "--edges", str(tmp_path / "data" / "edges.csv"),
                 "--types", str(tmp_path / "data" / "types.csv"),
                 "--labels", str(tmp_path / "data" / "labels.txt"),
                 "--outdir", str(tmp_path / "out")]) == 3


def test_compare_command_and_gain_math(tmp_path, capsys):
    folds_a = [FoldScore(0, 0, 0.80), FoldScore(0, 1, 0.90)]
    folds_b = [FoldScore(0, 0, 0.84), FoldScore(0, 1, 0.90)]
    a = EvalReport("ha", 7, folds_a, 0.85, 0.05)
    b = EvalReport("hb", 7, folds_b, 0.87, 0.03)
    a.save(tmp_path / "a.json")
    b.save(tmp_path / "b.json")
    assert main(["compare", str(tmp_path / "a.json"),
                 str(tmp_path / "b.json")]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "repeat,fold,f1_a,f1_b,gain"
    assert lines[1] == "0,0,0.800000,0.840000,+5.00%"
    assert lines[2] == "0,1,0.900000,0.900000,+0.00%"
    assert lines[3].startswith("mean,,0.850000,0.870000,+2.3")

    mismatched = EvalReport("hc", 8, folds_b, 0.87, 0.03)
    with pytest.raises(ConfigError):
        compare_runs(a, mismatched)
    zero = EvalReport("hz", 7, [FoldScore(0, 0, 0.0), FoldScore(0, 1, 0.0)],
                      0.0, 0.0)
    table = compare_runs(zero, b)
    assert "+inf%" in table
    assert compare_runs(zero, zero).splitlines()[1].endswith("n/a")


def test_stats_command(tmp_path, capsys):
    assert main(["synth", "--out", str(tmp_path / "data"), "--seed", "2",
                 "--n-ponzi", "4", "--n-normal", "4", "--n-eoa", "60",
                 "--horizon", "100"]) == 0
    capsys.readouterr()
    assert main(["stats", "--edges", str(tmp_path / "data" / "edges.csv"),
                 "--types", str(tmp_path / "data" / "types.csv"),
                 "--labels", str(tmp_path / "data" / "labels.txt"),
                 "--metapaths"]) == 0
    out = capsys.readouterr().out
    doc = json.loads(out[:out.index("pattern,")])
    assert doc["n_labels"] == 4
    assert doc["n_ca"] >= 8
    table = out[out.index("pattern,"):].splitlines()
    assert table[0] == "pattern,refined_class,n_supers,total_omega"
    assert any(ln.startswith("P1,Sum,") for ln in table)
    assert any(ln.startswith("P2,Sum,") for ln in table)


def test_config_hash_semantics():
    base = {"synth": SMALL_SYNTH, "outdir": "x", "threads": 1}
    h = PipelineConfig.from_dict(base).config_hash()
    moved = PipelineConfig.from_dict({**base, "outdir": "y", "threads": 8})
    assert moved.config_hash() == h
    changed = PipelineConfig.from_dict({**base, "k_percent": 30.0})
    assert changed.config_hash() != h
    # fields without effect in raw-only mode do not disturb the hash
    raw1 = PipelineConfig.from_dict({**base, "raw_only": True,
                                     "k_percent": 30.0})
    raw2 = PipelineConfig.from_dict({**base, "raw_only": True,
                                     "k_percent": 70.0})
    assert raw1.config_hash() == raw2.config_hash()
    unfiltered1 = PipelineConfig.from_dict({**base, "use_filtering": False,
                                            "k_percent": 30.0})
    unfiltered2 = PipelineConfig.from_dict({**base, "use_filtering": False,
                                            "k_percent": 70.0})
    assert unfiltered1.config_hash() == unfiltered2.config_hash()


def test_pipeline_config_validation():
    def invalid(doc):
        with pytest.raises(ConfigError):
            PipelineConfig.from_dict(doc).validate()

    invalid({"synth": SMALL_SYNTH, "pattern": "p9"})
    invalid({"synth": SMALL_SYNTH, "time_mode": "sometimes"})
    invalid({"synth": SMALL_SYNTH, "combine_mode": "average"})
    invalid({"synth": SMALL_SYNTH, "k_percent": 0.0})
    invalid({"synth": SMALL_SYNTH, "threads": 0})
    invalid({"edges": "e.csv"})  # labels required alongside edges
    invalid({"synth": SMALL_SYNTH, "edges": "e.csv", "labels": "l.txt"})
    invalid({})
    with pytest.raises(ConfigError):
        PipelineConfig.from_dict({"synth": {"n_eoa": -3}})
    # unfiltered runs may carry any k_percent; it is ignored
    PipelineConfig.from_dict({"synth": SMALL_SYNTH, "use_filtering": False,
                              "k_percent": 0.0}).validate()
