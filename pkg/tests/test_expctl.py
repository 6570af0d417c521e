import dataclasses
import json

import numpy as np
import pytest

from temsa.corpus import Dataset, Sample, load_manifest, save_manifest
from temsa.detect import DetectionCache
from temsa.expctl import (
    DEFAULT_LR,
    ExperimentConfig,
    config_from_manifest,
    derive_seeds,
    evaluate_checkpoint,
    run_experiment,
    tems_rows,
    train_experiment,
)
from temsa.models.training import LR_BILSTM, LR_ENCODER, LR_IMAGE
from temsa.records import ResultRecord, load_record, load_records, save_record
from temsa.tems import POLICIES

CORE_METRICS = ("accuracy", "precision", "recall", "f1")


def base_config(fixture_corpus, out_dir, **overrides):
    kwargs = dict(experiment=2, model="bilstm",
                  manifest_path=str(fixture_corpus["manifest"]),
                  out_dir=str(out_dir), dataset="simpson",
                  seed=11, epochs=2, hidden_units=8, embed_dim=16)
    kwargs.update(overrides)
    return ExperimentConfig(**kwargs)


class TestSeeds:

    def test_deterministic(self):
        assert derive_seeds(7) == derive_seeds(7)

    def test_streams_are_distinct(self):
        for master in (0, 1, 42):
            s = derive_seeds(master)
            values = (s.split, s.init, s.shuffle, s.augment)
            assert len(set(values)) == 4

    def test_masters_differ(self):
        assert derive_seeds(0).split != derive_seeds(1).split


class TestConfig:

    def test_defaults(self, fixture_corpus, tmp_path):
        cfg = base_config(fixture_corpus, tmp_path)
        assert cfg.split_ratio == 0.8
        assert cfg.batch_size == 32
        assert cfg.policy is POLICIES["simpson"]
        assert cfg.label_field == "text_label"

    @pytest.mark.parametrize("overrides,fragment", [
        ({"experiment": 5}, "experiment"),
        ({"dataset": "flickr"}, "dataset"),
        ({"experiment": 1, "model": "bilstm"}, "image model"),
        ({"experiment": 2, "model": "vgg16"}, "text model"),
        ({"experiment": 3}, "cache_path"),
        ({"joint_policy": "majority"}, "joint_policy"),
        ({"averaging": "micro"}, "averaging"),
    ])
    def test_validation(self, fixture_corpus, tmp_path, overrides, fragment):
        with pytest.raises(ValueError, match=fragment):
            base_config(fixture_corpus, tmp_path, **overrides)

    def test_label_fields_per_experiment(self, fixture_corpus, tmp_path):
        cache = str(fixture_corpus["cache"])
        fields = {
            1: base_config(fixture_corpus, tmp_path, experiment=1,
                           model="resnet50").label_field,
            2: base_config(fixture_corpus, tmp_path).label_field,
            3: base_config(fixture_corpus, tmp_path, experiment=3,
                           cache_path=cache).label_field,
            4: base_config(fixture_corpus, tmp_path, experiment=4,
                           cache_path=cache).label_field,
        }
        assert fields == {1: "image_label", 2: "text_label",
                          3: "joint_label", 4: "joint_label"}

    def test_default_learning_rates(self, fixture_corpus, tmp_path):
        assert DEFAULT_LR["bilstm"] == LR_BILSTM == 1e-2
        assert DEFAULT_LR["encoder"] == LR_ENCODER == 6e-6
        assert DEFAULT_LR["vgg16"] == LR_IMAGE == 8e-4
        cfg = base_config(fixture_corpus, tmp_path)
        assert cfg.train_config(0).learning_rate == LR_BILSTM
        explicit = base_config(fixture_corpus, tmp_path, learning_rate=0.5)
        assert explicit.train_config(0).learning_rate == 0.5

    def test_train_config_carries_settings(self, fixture_corpus, tmp_path):
        cfg = base_config(fixture_corpus, tmp_path, batch_size=16, epochs=7)
        tc = cfg.train_config(99)
        assert (tc.batch_size, tc.epochs, tc.seed) == (16, 7, 99)


class TestTemsRows:

    @pytest.fixture()
    def parts(self, fixture_corpus):
        dataset = fixture_corpus["dataset"]
        cache = DetectionCache.load(fixture_corpus["cache"])
        return dataset, cache

    def test_none_mode_has_no_names(self, parts):
        dataset, cache = parts
        rows = tems_rows(Dataset("d", dataset.samples[:4]), cache,
                         POLICIES["simpson"], "none")
        assert all(row["object_names"] == [] for row in rows)
        assert all(row["combined"] == row["text_tokens"] for row in rows)

    def test_merged_mode_appends_names_after_text(self, parts):
        dataset, cache = parts
        # Sample s003 has 3 coco + 1 vg detections.
        rows = tems_rows(Dataset("d", dataset.samples[3:4]), cache,
                         POLICIES["simpson"], "merged")
        row = rows[0]
        assert row["object_names"] == ["person", "chair", "dog", "water"]
        n_text = len(row["text_tokens"])
        assert row["combined"][:n_text] == row["text_tokens"]
        assert row["combined"][n_text:] == row["object_names"]

    def test_single_coco_mode(self, parts):
        dataset, cache = parts
        rows = tems_rows(Dataset("d", dataset.samples[1:2]), cache,
                         POLICIES["simpson"], "single_coco")
        assert rows[0]["object_names"] == ["person"]

    def test_single_coco_rejects_multi_object_samples(self, parts):
        dataset, cache = parts
        with pytest.raises(ValueError, match="single-object"):
            tems_rows(Dataset("d", dataset.samples[2:3]), cache,
                      POLICIES["simpson"], "single_coco")

    def test_unknown_mode(self, parts):
        dataset, cache = parts
        with pytest.raises(ValueError, match="names_mode"):
            tems_rows(dataset, cache, POLICIES["simpson"], "everything")


@pytest.fixture(scope="module")
def exp2_record(fixture_corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("exp2")
    cfg = base_config(fixture_corpus, out)
    return cfg, run_experiment(cfg)


@pytest.fixture(scope="module")
def checkpoint(fixture_corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("ckpt")
    cfg = base_config(fixture_corpus, out)
    ckpt_dir = train_experiment(cfg)
    return cfg, ckpt_dir


class TestRunExperiment:

    def test_metrics_ranges(self, exp2_record):
        _, record = exp2_record
        for key in CORE_METRICS:
            assert 0.0 <= record.metrics[key] <= 1.0
        assert record.metrics["wall_clock_s"] > 0

    def test_split_sizes(self, exp2_record):
        _, record = exp2_record
        assert len(record.gold) == 12
        assert len(record.predictions) == 12

    def test_record_persisted(self, exp2_record):
        cfg, record = exp2_record
        from pathlib import Path
        loaded = load_record(Path(cfg.out_dir) / "record.json")
        assert loaded == record

    def test_artifact_digests_match_files(self, exp2_record):
        import hashlib
        from pathlib import Path
        cfg, record = exp2_record
        for rel, digest in record.artifacts.items():
            data = (Path(cfg.out_dir) / rel).read_bytes()
            assert hashlib.sha256(data).hexdigest() == digest

    def test_experiment4_trains_on_subset(self, fixture_corpus, tmp_path):
        cfg = base_config(fixture_corpus, tmp_path, experiment=4,
                          cache_path=str(fixture_corpus["cache"]))
        record = run_experiment(cfg)
        # 15 single-object samples, 80/20 split.
        assert len(record.gold) == 3
        assert record.experiment == 4

    def test_encoder_model_via_factory(self, fixture_corpus, tmp_path,
                                       small_encoder_factory):
        cfg = base_config(fixture_corpus, tmp_path, model="encoder",
                          epochs=1, batch_size=16)
        record = run_experiment(cfg, encoder_factory=small_encoder_factory)
        assert record.model == "encoder"
        for key in CORE_METRICS:
            assert 0.0 <= record.metrics[key] <= 1.0

    def test_encoder_without_factory_or_weights_fails(self, fixture_corpus,
                                                      tmp_path):
        cfg = base_config(fixture_corpus, tmp_path, model="encoder", epochs=1)
        with pytest.raises(ValueError, match="encoder_factory"):
            run_experiment(cfg)

    def test_missing_label_column_is_an_error(self, tmp_path):
        samples = tuple(
            Sample(id=f"u{i}", image_ref="", text=f"words about thing {i}",
                   image_label="positive", text_label=None, joint_label=None)
            for i in range(6)
        )
        path = tmp_path / "manifest.csv"
        save_manifest(Dataset("unlabeled", samples), path)
        cfg = ExperimentConfig(experiment=2, model="bilstm",
                               manifest_path=str(path),
                               out_dir=str(tmp_path / "out"), epochs=1)
        with pytest.raises(ValueError, match="text_label"):
            run_experiment(cfg)

    def test_empty_single_object_subset_is_an_error(self, tmp_path):
        from temsa.detect import Detection, Detections, append_cache_record
        samples = tuple(
            Sample(id=f"m{i}", image_ref="", text=f"words about thing {i}",
                   image_label="positive", text_label="positive",
                   joint_label="positive")
            for i in range(5)
        )
        manifest = tmp_path / "manifest.csv"
        save_manifest(Dataset("multi", samples), manifest)
        cache = tmp_path / "cache.jsonl"
        for s in samples:
            dets = Detections(sample_id=s.id, items=(
                Detection(name="dog", confidence=0.9, box=(0, 0, 1, 1),
                          source="coco"),
                Detection(name="person", confidence=0.8, box=(1, 1, 2, 2),
                          source="coco"),
            ))
            append_cache_record(cache, dets, source="coco")
        cfg = ExperimentConfig(experiment=4, model="bilstm",
                               manifest_path=str(manifest),
                               out_dir=str(tmp_path / "out"),
                               cache_path=str(cache), epochs=1)
        with pytest.raises(ValueError, match="empty subset"):
            run_experiment(cfg)


class TestEvaluateCheckpoint:

    def test_report_contents(self, checkpoint, tmp_path):
        cfg, ckpt_dir = checkpoint
        report = evaluate_checkpoint(ckpt_dir, out_dir=tmp_path)
        assert report["experiment"] == 2
        assert report["model"] == "bilstm"
        assert report["split"] == "test"
        assert report["metrics"]["averaging"] == "macro"
        for key in CORE_METRICS:
            assert 0.0 <= report["metrics"][key] <= 1.0
        cm = np.asarray(report["confusion"])
        assert cm.shape == (3, 3)
        assert cm.sum() == 12
        assert len(report["wilcoxon"]) == 1
        assert report["wilcoxon"][0]["a"] == "gold"

    def test_files_written(self, checkpoint, tmp_path):
        _, ckpt_dir = checkpoint
        evaluate_checkpoint(ckpt_dir, out_dir=tmp_path)
        assert (tmp_path / "report.json").exists()
        assert (tmp_path / "record.json").exists()
        lines = (tmp_path / "metrics.csv").read_text().splitlines()
        assert lines[0] == "Model,Acc,Pre,F1,Rec"
        assert lines[1].startswith("bilstm,")

    def test_report_matches_persisted_record(self, checkpoint, tmp_path):
        _, ckpt_dir = checkpoint
        report = evaluate_checkpoint(ckpt_dir, out_dir=tmp_path)
        record = load_record(tmp_path / "record.json")
        for key in CORE_METRICS:
            assert record.metrics[key] == report["metrics"][key]

    def test_train_split_scoring(self, checkpoint, tmp_path):
        _, ckpt_dir = checkpoint
        report = evaluate_checkpoint(ckpt_dir, out_dir=tmp_path, split="train")
        assert report["split"] == "train"
        assert int(np.asarray(report["confusion"]).sum()) == 48

    def test_bad_split_rejected(self, checkpoint):
        _, ckpt_dir = checkpoint
        with pytest.raises(ValueError, match="split"):
            evaluate_checkpoint(ckpt_dir, split="dev")

    def test_vocab_guard_catches_changed_manifest(self, checkpoint,
                                                  fixture_corpus, tmp_path):
        cfg, ckpt_dir = checkpoint
        original = load_manifest(cfg.manifest_path, dataset_name="simpson")
        altered = Dataset("simpson", tuple(
            dataclasses.replace(s, text=s.text.replace("scene", "zebra"))
            for s in original))
        altered_path = tmp_path / "altered.csv"
        save_manifest(altered, altered_path)
        with pytest.raises(ValueError, match="vocabulary"):
            evaluate_checkpoint(ckpt_dir, out_dir=tmp_path,
                                manifest_path=str(altered_path))


class TestManifestRoundTrip:

    def test_config_survives_checkpoint_manifest(self, fixture_corpus,
                                                 tmp_path):
        from temsa.expctl import _checkpoint_extra
        cfg = base_config(fixture_corpus, tmp_path, experiment=3,
                          cache_path=str(fixture_corpus["cache"]),
                          joint_policy="keep_polar", averaging="weighted",
                          batch_size=16, learning_rate=2e-3)
        manifest = _checkpoint_extra(cfg)
        rebuilt = config_from_manifest(manifest, out_dir="elsewhere")
        assert rebuilt == dataclasses.replace(cfg, out_dir="elsewhere")


class TestRecords:

    def test_round_trip_random_records(self, tmp_path):
        rng = np.random.default_rng(83)
        for i in range(20):
            n = int(rng.integers(1, 30))
            record = ResultRecord(
                experiment=int(rng.integers(1, 5)),
                dataset=rng.choice(["simpson", "mvsa"]),
                model=rng.choice(["bilstm", "encoder", "vgg16"]),
                seed=int(rng.integers(0, 1000)),
                metrics={"accuracy": float(rng.random()),
                         "f1": float(rng.random())},
                predictions=tuple(int(v) for v in rng.integers(0, 3, n)),
                gold=tuple(int(v) for v in rng.integers(0, 3, n)),
                artifacts={"checkpoint/state.pt": "ab" * 32},
            )
            path = tmp_path / f"r{i}.json"
            save_record(record, path)
            assert load_record(path) == record

    def test_misaligned_vectors_rejected(self):
        with pytest.raises(ValueError, match="align"):
            ResultRecord(experiment=1, dataset="simpson", model="vgg16",
                         seed=0, metrics={}, predictions=(0, 1), gold=(0,))

    def test_version_mismatch(self, tmp_path):
        record = ResultRecord(experiment=1, dataset="simpson", model="vgg16",
                              seed=0, metrics={}, predictions=(0,), gold=(1,))
        path = tmp_path / "r.json"
        save_record(record, path)
        doc = json.loads(path.read_text())
        doc["schema_version"] = 9
        path.write_text(json.dumps(doc))
        with pytest.raises(ValueError, match="version"):
            load_record(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_record(tmp_path / "absent.json")

    def test_load_records_many(self, tmp_path):
        records = []
        for i in range(3):
            r = ResultRecord(experiment=2, dataset="simpson", model="bilstm",
                             seed=i, metrics={"accuracy": 0.5},
                             predictions=(0, 1), gold=(1, 1))
            save_record(r, tmp_path / f"{i}.json")
            records.append(r)
        paths = [tmp_path / f"{i}.json" for i in range(3)]
        assert load_records(paths) == records

    def test_metric_values_coerced_to_float(self, tmp_path):
        record = ResultRecord(experiment=1, dataset="simpson", model="vgg16",
                              seed=0, metrics={"accuracy": 1},
                              predictions=(0,), gold=(1,))
        path = tmp_path / "r.json"
        save_record(record, path)
        assert isinstance(load_record(path).metrics["accuracy"], float)
