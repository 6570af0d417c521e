import json

import pytest

from temsa.cli import build_experiment_config, main, parse_config_file
from temsa.records import load_record


def write_config(path, **pairs):
    lines = ["# run settings", ""]
    lines += [f"{k} = {v}" for k, v in pairs.items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


class TestConfigFile:

    def test_comments_and_blanks_ignored(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("# a comment\n\nexperiment = 2\n  model=bilstm \n")
        assert parse_config_file(path) == {"experiment": "2",
                                           "model": "bilstm"}

    def test_bad_line_rejected(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("experiment 2\n")
        with pytest.raises(ValueError, match="key=value"):
            parse_config_file(path)

    def test_unknown_key_rejected(self, tmp_path):
        path = write_config(tmp_path / "run.cfg", experiment=2,
                            model="bilstm", manifest_path="m.csv",
                            out_dir="out", learning_rte="0.01")
        with pytest.raises(ValueError, match="unknown config key"):
            build_experiment_config(str(path), {})

    def test_boolean_coercion(self, tmp_path, fixture_corpus):
        path = write_config(tmp_path / "run.cfg", experiment=2,
                            model="bilstm",
                            manifest_path=fixture_corpus["manifest"],
                            out_dir=tmp_path / "out", augment="false",
                            pretrained="no")
        cfg = build_experiment_config(str(path), {})
        assert cfg.augment is False
        assert cfg.pretrained is False

    def test_bad_boolean_rejected(self, tmp_path, fixture_corpus):
        path = write_config(tmp_path / "run.cfg", experiment=2,
                            model="bilstm",
                            manifest_path=fixture_corpus["manifest"],
                            out_dir=tmp_path / "out", augment="maybe")
        with pytest.raises(ValueError, match="boolean"):
            build_experiment_config(str(path), {})

    def test_numeric_coercion(self, tmp_path, fixture_corpus):
        path = write_config(tmp_path / "run.cfg", experiment=2,
                            model="bilstm",
                            manifest_path=fixture_corpus["manifest"],
                            out_dir=tmp_path / "out", epochs=3,
                            learning_rate="2e-3", split_ratio="0.75")
        cfg = build_experiment_config(str(path), {})
        assert cfg.epochs == 3
        assert cfg.learning_rate == 2e-3
        assert cfg.split_ratio == 0.75

    def test_missing_required_keys(self, tmp_path):
        path = write_config(tmp_path / "run.cfg", experiment=2)
        with pytest.raises(ValueError, match="missing required"):
            build_experiment_config(str(path), {})

    def test_overrides_beat_file_values(self, tmp_path, fixture_corpus):
        path = write_config(tmp_path / "run.cfg", experiment=2,
                            model="bilstm",
                            manifest_path=fixture_corpus["manifest"],
                            out_dir=tmp_path / "out", epochs=10, seed=1)
        cfg = build_experiment_config(str(path), {"epochs": 2, "seed": None})
        assert cfg.epochs == 2
        assert cfg.seed == 1


class TestPipelineCommands:

    def test_prepare_prints_label_table(self, fixture_corpus, tmp_path,
                                        capsys):
        out = tmp_path / "prepared.csv"
        rc = main(["prepare", "--manifest", str(fixture_corpus["manifest"]),
                   "--out", str(out), "--derive-joint"])
        assert rc == 0
        text = capsys.readouterr().out
        assert "wrote 60 samples" in text
        assert "joint_labels:" in text
        assert out.exists()

    def test_detect_objstats_build_tems(self, fixture_corpus, tmp_path,
                                        capsys):
        cache = tmp_path / "cache.jsonl"
        rc = main(["detect", "--manifest", str(fixture_corpus["manifest"]),
                   "--cache", str(cache), "--detector", "fixture"])
        assert rc == 0
        assert "source=fixture" in capsys.readouterr().out

        stats_csv = tmp_path / "hist.csv"
        rc = main(["objstats", "--cache", str(cache),
                   "--out", str(stats_csv)])
        assert rc == 0
        lines = stats_csv.read_text().splitlines()
        assert lines[0].startswith("objects,")
        assert len(lines) == 3
        out = capsys.readouterr().out
        assert "percent" in out

        fused = tmp_path / "tems.jsonl"
        rc = main(["build-tems", "--manifest", str(fixture_corpus["manifest"]),
                   "--cache", str(cache), "--dataset", "simpson",
                   "--out", str(fused)])
        assert rc == 0
        rows = [json.loads(line) for line in fused.read_text().splitlines()]
        assert len(rows) == 60
        assert all("combined" in r for r in rows)

    def test_train_evaluate_flow(self, fixture_corpus, tmp_path, capsys):
        out = tmp_path / "exp2"
        rc = main(["train", "--experiment", "2", "--model", "bilstm",
                   "--manifest", str(fixture_corpus["manifest"]),
                   "--out", str(out), "--epochs", "2", "--seed", "5",
                   "--hidden-units", "8", "--embed-dim", "16"])
        assert rc == 0
        ckpt = out / "checkpoint"
        assert "checkpoint written" in capsys.readouterr().out

        eval_dir = tmp_path / "eval"
        rc = main(["evaluate", "--checkpoint", str(ckpt),
                   "--out", str(eval_dir)])
        assert rc == 0
        text = capsys.readouterr().out
        assert "exp2 bilstm on simpson (test)" in text
        assert "acc=" in text and "wilcoxon" in text
        assert (eval_dir / "report.json").exists()
        assert (eval_dir / "metrics.csv").exists()

    def test_run_and_compare_flow(self, fixture_corpus, tmp_path, capsys):
        records = []
        for seed in (3, 4):
            out = tmp_path / f"run{seed}"
            rc = main(["run", "--experiment", "2", "--model", "bilstm",
                       "--manifest", str(fixture_corpus["manifest"]),
                       "--out", str(out), "--epochs", "1", "--seed",
                       str(seed), "--hidden-units", "8",
                       "--embed-dim", "16"])
            assert rc == 0
            records.append(out / "record.json")
        capsys.readouterr()

        plots = tmp_path / "figs"
        comparison = tmp_path / "comparison.json"
        rc = main(["compare", "--reports", *map(str, records),
                   "--plots", str(plots), "--out", str(comparison)])
        assert rc == 0
        out_text = capsys.readouterr().out
        assert "figures" in out_text
        payload = json.loads(comparison.read_text())
        assert payload["alpha"] == 0.05
        assert len(payload["rows"]) == 2
        assert sorted(p.name for p in plots.iterdir()) == [
            "baseline_simpson.png", "comparison_simpson.png"]

    def test_run_with_config_file(self, fixture_corpus, tmp_path, capsys):
        cfg_path = write_config(
            tmp_path / "run.cfg", experiment=2, model="bilstm",
            manifest_path=fixture_corpus["manifest"],
            out_dir=tmp_path / "out", epochs=1, seed=7, hidden_units=8,
            embed_dim=16)
        rc = main(["run", "--config", str(cfg_path)])
        assert rc == 0
        record = load_record(tmp_path / "out" / "record.json")
        assert record.seed == 7
        assert "record written" in capsys.readouterr().out

    def test_run_multiple_configs(self, fixture_corpus, tmp_path, capsys):
        paths = []
        for seed in (1, 2):
            paths.append(write_config(
                tmp_path / f"c{seed}.cfg", experiment=2, model="bilstm",
                manifest_path=fixture_corpus["manifest"],
                out_dir=tmp_path / f"out{seed}", epochs=1, seed=seed,
                hidden_units=8, embed_dim=16))
        rc = main(["run", "--configs", *map(str, paths)])
        assert rc == 0
        out = capsys.readouterr().out
        assert out.count("exp2 bilstm") == 2
        for seed in (1, 2):
            assert (tmp_path / f"out{seed}" / "record.json").exists()


class TestErrorPaths:

    def test_missing_manifest_returns_2(self, tmp_path, capsys):
        rc = main(["prepare", "--manifest", str(tmp_path / "absent.csv"),
                   "--out", str(tmp_path / "o.csv")])
        assert rc == 2
        assert "error:" in capsys.readouterr().err

    def test_bad_config_returns_2(self, tmp_path, capsys):
        path = (tmp_path / "run.cfg")
        path.write_text("experiment=9\nmodel=bilstm\n"
                        "manifest_path=m.csv\nout_dir=o\n")
        rc = main(["run", "--config", str(path)])
        assert rc == 2
        assert "experiment" in capsys.readouterr().err

    def test_unknown_config_key_returns_2(self, tmp_path, capsys):
        path = (tmp_path / "run.cfg")
        path.write_text("wat=1\n")
        rc = main(["train", "--config", str(path)])
        assert rc == 2
        assert "unknown config key" in capsys.readouterr().err

    def test_evaluate_missing_checkpoint_returns_2(self, tmp_path, capsys):
        rc = main(["evaluate", "--checkpoint", str(tmp_path / "none")])
        assert rc == 2
        assert "manifest" in capsys.readouterr().err
