"""Dataset ingestion: manifests, joint-label derivation, filtering, splits, stats.

A manifest is a CSV/TSV file with the fixed header
``id,image_path,text,image_label,text_label,joint_label``.  Empty label cells
mean "no label".  All operations return new Dataset values; nothing mutates in
place, so datasets are safe to share across threads.
"""

from __future__ import annotations

import csv
import logging
import re
import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Iterator, Sequence

import numpy as np

from .labels import SENTIMENTS, LabelError, validate_label
from .words import ENGLISH_WORDS

logger = logging.getLogger(__name__)

MANIFEST_SCHEMA = "temsa-manifest-v1"
MANIFEST_COLUMNS = ("id", "image_path", "text", "image_label", "text_label", "joint_label")

# Joint-label policies.  The neutral-vs-polar case is genuinely ambiguous, so it
# is an explicit switch rather than a silent choice.
STRICT_EQUAL = "strict_equal"
KEEP_POLAR = "keep_polar"
JOINT_POLICIES = (STRICT_EQUAL, KEEP_POLAR)

_POLAR = {"positive", "negative"}

ENGLISH_COVERAGE_THRESHOLD = 0.2
_WORD_RE = re.compile(r"[a-zA-Z']+")


class ManifestError(ValueError):
    """Raised for unreadable or malformed manifest files."""


@dataclass(frozen=True)
class Sample:
    """One image-text pair with its per-modality labels and optional joint label."""

    id: str
    image_ref: str | None
    text: str
    image_label: str | None
    text_label: str | None
    joint_label: str | None

    def __post_init__(self):
        validate_label(self.image_label, context=f"sample {self.id!r} image_label")
        validate_label(self.text_label, context=f"sample {self.id!r} text_label")
        validate_label(self.joint_label, context=f"sample {self.id!r} joint_label")


@dataclass(frozen=True)
class Dataset:
    name: str
    samples: tuple[Sample, ...]

    def __post_init__(self):
        ids = [s.id for s in self.samples]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ManifestError(f"duplicate sample ids in dataset {self.name!r}: {dupes[:5]}")

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[Sample]:
        return iter(self.samples)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.samples)


@dataclass(frozen=True)
class LabelStats:
    """Per-sentiment counts for each label modality, Table-2 style.

    Count tuples follow the (positive, negative, neutral) class order; totals
    count samples whose label for that modality is non-null.
    """

    image_counts: tuple[int, int, int]
    text_counts: tuple[int, int, int]
    joint_counts: tuple[int, int, int]
    image_total: int
    text_total: int
    joint_total: int
    n_samples: int

    def rows(self) -> list[tuple[str, int, int, int, int]]:
        return [
            ("image_labels", *self.image_counts, self.image_total),
            ("text_labels", *self.text_counts, self.text_total),
            ("joint_labels", *self.joint_counts, self.joint_total),
        ]


def _parse_label(value: str, row_no: int, column: str) -> str | None:
    value = value.strip()
    if value == "":
        return None
    if value not in SENTIMENTS:
        raise LabelError(f"unknown label {value!r} in column {column!r} at row {row_no}")
    return value


def load_manifest(path: str | Path, schema: str = MANIFEST_SCHEMA,
                  dataset_name: str | None = None) -> Dataset:
    """Load a manifest file into a Dataset.

    Text is preserved verbatim (cleaning happens downstream); empty label cells
    become None.  Raises ManifestError for structural problems (naming the row)
    and LabelError for unknown label strings (naming the value).
    """
    path = Path(path)
    if schema != MANIFEST_SCHEMA:
        raise ManifestError(f"unknown manifest schema {schema!r}; expected {MANIFEST_SCHEMA!r}")
    if not path.exists():
        raise ManifestError(f"manifest file not found: {path}")

    with path.open(newline="", encoding="utf-8") as fh:
        first = fh.readline()
        if not first:
            raise ManifestError(f"empty manifest file: {path}")
        delimiter = "\t" if "\t" in first else ","
        header = next(csv.reader([first], delimiter=delimiter))
        if tuple(h.strip() for h in header) != MANIFEST_COLUMNS:
            raise ManifestError(
                f"bad manifest header {header!r}; expected {list(MANIFEST_COLUMNS)}")
        samples = []
        # Row numbers are 1-based file lines; the header is row 1.
        for row_no, row in enumerate(csv.reader(fh, delimiter=delimiter), start=2):
            if not row:
                continue
            if len(row) != len(MANIFEST_COLUMNS):
                raise ManifestError(
                    f"malformed row {row_no}: expected {len(MANIFEST_COLUMNS)} fields, "
                    f"got {len(row)}")
            sid, image_path, text, img_l, txt_l, joint_l = row
            samples.append(Sample(
                id=sid,
                image_ref=image_path.strip() or None,
                text=text,
                image_label=_parse_label(img_l, row_no, "image_label"),
                text_label=_parse_label(txt_l, row_no, "text_label"),
                joint_label=_parse_label(joint_l, row_no, "joint_label"),
            ))
    name = dataset_name if dataset_name is not None else path.stem
    return Dataset(name=name, samples=tuple(samples))


def save_manifest(dataset: Dataset, path: str | Path) -> Path:
    """Write a Dataset back out in the manifest schema (round-trips sample order)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_COLUMNS)
        for s in dataset:
            writer.writerow([s.id, s.image_ref or "", s.text,
                             s.image_label or "", s.text_label or "", s.joint_label or ""])
    return path


def derive_joint_labels(dataset: Dataset, policy: str = STRICT_EQUAL) -> Dataset:
    """Drop opposing-polarity pairs and assign joint labels per policy.

    Samples whose image/text labels are (positive, negative) or
    (negative, positive) are always removed.  Under STRICT_EQUAL only samples
    with image_label == text_label survive, carrying that value as the joint
    label.  Under KEEP_POLAR a neutral-polar pair survives with the polar label.
    """
    if policy not in JOINT_POLICIES:
        raise ValueError(f"unknown joint-label policy {policy!r}; expected one of {JOINT_POLICIES}")
    kept = []
    for s in dataset:
        if s.image_label is None or s.text_label is None:
            raise LabelError(
                f"sample {s.id!r} is missing an image or text label; cannot derive joint label")
        img, txt = s.image_label, s.text_label
        if img in _POLAR and txt in _POLAR and img != txt:
            continue
        if img == txt:
            kept.append(replace(s, joint_label=img))
        elif policy == KEEP_POLAR:
            polar = img if img in _POLAR else txt
            kept.append(replace(s, joint_label=polar))
        # STRICT_EQUAL drops the remaining neutral-polar mixes.
    return Dataset(name=dataset.name, samples=tuple(kept))


def english_predicate(threshold: float = ENGLISH_COVERAGE_THRESHOLD,
                      min_ascii_fraction: float = 0.8) -> Callable[[str], bool]:
    """Default language-identification heuristic: ASCII letters plus
    dictionary coverage of at least `threshold` over the word tokens."""

    def predicate(text: str) -> bool:
        letters = [c for c in text if c.isalpha()]
        if not letters:
            return False
        ascii_fraction = sum(c.isascii() for c in letters) / len(letters)
        if ascii_fraction < min_ascii_fraction:
            return False
        word_tokens = _WORD_RE.findall(text.lower())
        if not word_tokens:
            return False
        hits = sum(tok.strip("'") in ENGLISH_WORDS for tok in word_tokens)
        return hits / len(word_tokens) >= threshold

    return predicate


def filter_english_text(dataset: Dataset,
                        lang_id: Callable[[str], bool] | None = None) -> Dataset:
    """Drop samples with empty text or text the predicate classifies as non-English.

    Predicate exceptions are logged and treated as non-English.
    """
    predicate = lang_id if lang_id is not None else english_predicate()
    kept = []
    for s in dataset:
        if not s.text.strip():
            continue
        try:
            is_english = predicate(s.text)
        except Exception:
            logger.warning("language predicate failed on sample %r; treating as non-English",
                           s.id, exc_info=True)
            is_english = False
        if is_english:
            kept.append(s)
    return Dataset(name=dataset.name, samples=tuple(kept))


def split_train_test(dataset: Dataset, ratio: float, seed: int,
                     stratify_on: str | None = None) -> tuple[Dataset, Dataset]:
    """Disjoint shuffle-then-cut split with |train| = round(ratio * N).

    The same seed always yields the same partition.  With `stratify_on` set to
    a label field name, the cut is applied per label group instead.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"split ratio must be in (0, 1), got {ratio}")
    n = len(dataset)
    rng = np.random.default_rng(seed)
    if stratify_on is None:
        perm = rng.permutation(n)
        n_train = round(ratio * n)
        train_idx = sorted(perm[:n_train].tolist())
        test_idx = sorted(perm[n_train:].tolist())
    else:
        groups: dict[object, list[int]] = {}
        for i, s in enumerate(dataset):
            groups.setdefault(getattr(s, stratify_on), []).append(i)
        train_idx, test_idx = [], []
        for key in sorted(groups, key=repr):
            idx = np.asarray(groups[key])
            perm = idx[rng.permutation(len(idx))]
            cut = round(ratio * len(idx))
            train_idx.extend(perm[:cut].tolist())
            test_idx.extend(perm[cut:].tolist())
        train_idx.sort()
        test_idx.sort()
    if not train_idx or not test_idx:
        warnings.warn(
            f"degenerate split of {n} samples at ratio {ratio}: "
            f"{len(train_idx)} train / {len(test_idx)} test", stacklevel=2)
    train = Dataset(name=f"{dataset.name}-train",
                    samples=tuple(dataset.samples[i] for i in train_idx))
    test = Dataset(name=f"{dataset.name}-test",
                   samples=tuple(dataset.samples[i] for i in test_idx))
    return train, test


def summarize(dataset: Dataset) -> LabelStats:
    """Exact per-sentiment counts for each label modality."""

    def count(field: str) -> tuple[tuple[int, int, int], int]:
        values = [getattr(s, field) for s in dataset]
        triple = tuple(sum(v == lab for v in values) for lab in SENTIMENTS)
        return triple, sum(triple)

    image_counts, image_total = count("image_label")
    text_counts, text_total = count("text_label")
    joint_counts, joint_total = count("joint_label")
    return LabelStats(
        image_counts=image_counts, text_counts=text_counts, joint_counts=joint_counts,
        image_total=image_total, text_total=text_total, joint_total=joint_total,
        n_samples=len(dataset),
    )
