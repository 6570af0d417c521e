"""Shared fixtures and the acceptance-summary hook.

The fixture corpus is deliberately hand-scripted: detection counts per sample
follow a known arithmetic pattern so subset selection and histogram tests can
compare against paper-and-pencil expectations.
"""

from __future__ import annotations

import numpy as np
import pytest
from PIL import Image

from temsa.corpus import Dataset, Sample, save_manifest
from temsa.detect import Detection, Detections, append_cache_record

LABELS = ("positive", "negative", "neutral")
COCO_NAMES = ("person", "chair", "dog", "tree")
VG_NAMES = ("water", "sky", "building")


def _detections(sample_id: str, names: list[str], source: str) -> Detections:
    items = tuple(
        Detection(name=n, confidence=round(0.9 - 0.05 * i, 4),
                  box=(float(i), 0.0, 5.0, 5.0), source=source)
        for i, n in enumerate(names)
    )
    return Detections(sample_id=sample_id, items=items)


@pytest.fixture(scope="session")
def fixture_corpus(tmp_path_factory):
    """60 samples with images, manifest, and a scripted detection cache.

    Sample i has (i % 4) coco detections and ((i + 1) % 3) vg detections, so
    ids with i % 4 == 1 form the single-object subset (15 samples).
    """
    root = tmp_path_factory.mktemp("corpus")
    img_dir = root / "imgs"
    img_dir.mkdir()
    rng = np.random.default_rng(1234)

    samples = []
    for i in range(60):
        arr = rng.integers(0, 256, size=(64, 64, 3), dtype=np.uint8)
        path = img_dir / f"img{i:03d}.png"
        Image.fromarray(arr).save(path)
        label = LABELS[i % 3]
        samples.append(Sample(
            id=f"s{i:03d}",
            image_ref=str(path),
            text=f"sample number {i} shows a scene with things",
            image_label=label,
            text_label=label,
            joint_label=None,
        ))
    dataset = Dataset(name="fixture", samples=tuple(samples))
    manifest_path = root / "manifest.csv"
    save_manifest(dataset, manifest_path)

    cache_path = root / "cache.jsonl"
    coco_counts = {}
    for i, sample in enumerate(samples):
        n_coco = i % 4
        n_vg = (i + 1) % 3
        coco_counts[sample.id] = n_coco
        coco = _detections(sample.id, [COCO_NAMES[j % 4] for j in range(n_coco)], "coco")
        vg = _detections(sample.id, [VG_NAMES[j % 3] for j in range(n_vg)], "vg")
        append_cache_record(cache_path, coco, source="coco", threshold=0.7)
        append_cache_record(cache_path, vg, source="vg", threshold=0.5)

    return {
        "root": root,
        "dataset": dataset,
        "manifest": manifest_path,
        "cache": cache_path,
        "coco_counts": coco_counts,
    }


BERT_VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "the", "a", "an", "and", "sample", "number", "shows", "scene", "with",
    "things", "person", "chair", "dog", "tree", "water", "sky", "building",
    "happy", "sad", "meh", "good", "bad", "fine", "words", "about", "thing",
    "0", "1", "2", "3", "4", "5", "6", "7", "8", "9",
    "##0", "##1", "##2", "##3", "##4", "##5", "##6", "##7", "##8", "##9",
]


@pytest.fixture(scope="session")
def bert_vocab_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("bert") / "vocab.txt"
    path.write_text("\n".join(BERT_VOCAB) + "\n", encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def small_encoder_factory(bert_vocab_file):
    """Offline encoder factory: tiny random-weight encoder + file tokenizer."""
    from temsa.models.encoder import TextEncoderAdapter, WordpieceTokenizerAdapter

    def factory(init_seed: int):
        adapter = TextEncoderAdapter.from_config(
            vocab_size=len(BERT_VOCAB), hidden_size=32, num_layers=2,
            num_heads=2, intermediate_size=64, max_position=96, seed=init_seed)
        tokenizer = WordpieceTokenizerAdapter.from_vocab_file(bert_vocab_file)
        return adapter, tokenizer

    return factory


# --------------------------------------------------------------------------
# Acceptance summary: one line per criterion at the end of the run
# --------------------------------------------------------------------------

_CRITERION_PREFIX = "test_criterion_"
_acceptance_outcomes: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    name = report.nodeid.rsplit("::", 1)[-1]
    if name.startswith(_CRITERION_PREFIX):
        _acceptance_outcomes[name] = report.outcome


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_acceptance_outcomes):
        rest = name[len(_CRITERION_PREFIX):]
        num, _, slug = rest.partition("_")
        outcome = _acceptance_outcomes[name]
        tag = {"passed": "PASS", "failed": "FAIL"}.get(outcome, outcome.upper())
        terminalreporter.write_line(
            f"criterion {int(num):2d} [{tag}] {slug.replace('_', ' ')}")
