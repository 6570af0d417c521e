"""Object detection adapters, detection merging, and the JSONL detection cache.

Detectors are consumed as black boxes behind a small adapter interface; all
pipeline stages read detections from a cache file so training runs never invoke
a detector.  Names are the payload: boxes and confidences are cached for
traceability but nothing downstream uses them.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np

from .corpus import Dataset

SOURCE_ORDER = ("coco", "vg", "fixture")

ObjectNameList = list[str]


class DetectorError(RuntimeError):
    """Raised when an adapter cannot produce detections; carries the adapter id."""

    def __init__(self, adapter_id: str, message: str):
        super().__init__(f"adapter {adapter_id!r}: {message}")
        self.adapter_id = adapter_id


@dataclass(frozen=True)
class Detection:
    name: str
    confidence: float
    box: tuple[float, float, float, float]  # (x, y, w, h) in pixels
    source: str

    def __post_init__(self):
        object.__setattr__(self, "name", self.name.lower())
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")
        if len(self.box) != 4 or self.box[2] < 0 or self.box[3] < 0:
            raise ValueError(f"box must be (x, y, w, h) with w, h >= 0, got {self.box}")


@dataclass(frozen=True)
class Detections:
    sample_id: str
    items: tuple[Detection, ...]

    def __len__(self) -> int:
        return len(self.items)

    def count(self, source: str | None = None) -> int:
        if source is None or source == "all":
            return len(self.items)
        return sum(1 for d in self.items if d.source == source)

    def names(self, source: str | None = None) -> ObjectNameList:
        if source is None or source == "all":
            return [d.name for d in self.items]
        return [d.name for d in self.items if d.source == source]


class DetectorAdapter(Protocol):
    adapter_id: str
    threshold: float

    def raw_detections(self, image: np.ndarray) -> list[Detection]: ...


def load_image(path: str | Path) -> np.ndarray:
    """Decode an image file to an RGB uint8 array (H, W, 3)."""
    from PIL import Image, UnidentifiedImageError
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB"))
    except (UnidentifiedImageError, OSError) as exc:
        raise ValueError(f"cannot decode image {path}: {exc}") from exc


def detect_objects(detector: DetectorAdapter, image: np.ndarray,
                   sample_id: str = "") -> Detections:
    """Run one adapter over one image, keeping detections at or above the
    adapter threshold, sorted by confidence descending (stable)."""
    try:
        raw = detector.raw_detections(image)
    except DetectorError:
        raise
    except Exception as exc:
        raise DetectorError(detector.adapter_id, f"inference failed: {exc}") from exc
    kept = [d for d in raw if d.confidence >= detector.threshold]
    kept.sort(key=lambda d: -d.confidence)
    return Detections(sample_id=sample_id, items=tuple(kept))


# --------------------------------------------------------------------------
# Adapters
# --------------------------------------------------------------------------

# Names the content-hash fixture detector draws from.
FIXTURE_NAMES = (
    "person", "tree", "water", "sky", "building", "house", "chair", "dog",
    "cat", "car", "plant", "wall", "roof", "hat", "grass", "flag",
)


class FixtureDetector:
    """Deterministic stand-in detector for tests and desk runs.

    With a script, every non-blank image yields exactly the scripted
    (name, confidence) list.  Without one, detections are derived from a hash
    of the image bytes, so the same image always produces the same output.
    Blank (all-zero) images yield no detections in either mode.
    """

    def __init__(self, script: Sequence[tuple[str, float]] | None = None,
                 threshold: float = 0.5, source: str = "fixture",
                 max_objects: int = 5):
        self.adapter_id = "fixture"
        self.threshold = threshold
        self.source = source
        self.script = list(script) if script is not None else None
        self.max_objects = max_objects

    def raw_detections(self, image: np.ndarray) -> list[Detection]:
        image = np.asarray(image)
        if image.size == 0 or not image.any():
            return []
        if self.script is not None:
            return [Detection(name=n, confidence=c, box=(0.0, 0.0, 1.0, 1.0),
                              source=self.source)
                    for n, c in self.script]
        digest = hashlib.sha256(np.ascontiguousarray(image).tobytes()).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
        k = int(rng.integers(0, self.max_objects + 1))
        out = []
        for _ in range(k):
            name = FIXTURE_NAMES[int(rng.integers(len(FIXTURE_NAMES)))]
            conf = float(np.round(rng.uniform(0.3, 1.0), 6))
            x, y = (float(v) for v in rng.integers(0, 32, size=2))
            w, h = (float(v) for v in rng.integers(1, 32, size=2))
            out.append(Detection(name=name, confidence=conf, box=(x, y, w, h),
                                 source=self.source))
        return out


# The 91-category COCO label space; "n/a" marks ids unused by the checkpoint.
COCO_CLASSES = (
    "n/a", "person", "bicycle", "car", "motorcycle", "airplane", "bus",
    "train", "truck", "boat", "traffic light", "fire hydrant", "n/a",
    "stop sign", "parking meter", "bench", "bird", "cat", "dog", "horse",
    "sheep", "cow", "elephant", "bear", "zebra", "giraffe", "n/a", "backpack",
    "umbrella", "n/a", "n/a", "handbag", "tie", "suitcase", "frisbee", "skis",
    "snowboard", "sports ball", "kite", "baseball bat", "baseball glove",
    "skateboard", "surfboard", "tennis racket", "bottle", "n/a", "wine glass",
    "cup", "fork", "knife", "spoon", "bowl", "banana", "apple", "sandwich",
    "orange", "broccoli", "carrot", "hot dog", "pizza", "donut", "cake",
    "chair", "couch", "potted plant", "bed", "n/a", "dining table", "n/a",
    "n/a", "toilet", "n/a", "tv", "laptop", "mouse", "remote", "keyboard",
    "cell phone", "microwave", "oven", "toaster", "sink", "refrigerator",
    "n/a", "book", "clock", "vase", "scissors", "teddy bear", "hair drier",
    "toothbrush",
)

DEFAULT_COCO_THRESHOLD = 0.7
DEFAULT_VG_THRESHOLD = 0.5


class CocoDetrAdapter:
    """DETR detector over the 91 COCO categories.

    Loads a transformer-detection checkpoint on first use (network or a local
    cache under TEMSA_CACHE_DIR is required); not exercised in CI.
    """

    adapter_id = "coco"
    label_space = COCO_CLASSES

    def __init__(self, checkpoint: str = "facebook/detr-resnet-50",
                 threshold: float = DEFAULT_COCO_THRESHOLD, device: str = "cpu"):
        self.checkpoint = checkpoint
        self.threshold = threshold
        self.device = device
        self._model = None
        self._processor = None

    def _load(self):  # pragma: no cover - requires checkpoint download
        import torch  # noqa: F401
        from transformers import AutoImageProcessor, AutoModelForObjectDetection
        cache_dir = os.environ.get("TEMSA_CACHE_DIR")
        try:
            self._processor = AutoImageProcessor.from_pretrained(
                self.checkpoint, cache_dir=cache_dir)
            self._model = AutoModelForObjectDetection.from_pretrained(
                self.checkpoint, cache_dir=cache_dir).to(self.device).eval()
        except Exception as exc:
            raise DetectorError(self.adapter_id,
                                f"cannot load checkpoint {self.checkpoint!r}: {exc}") from exc

    def raw_detections(self, image: np.ndarray) -> list[Detection]:  # pragma: no cover
        import torch
        if self._model is None:
            self._load()
        inputs = self._processor(images=image, return_tensors="pt").to(self.device)
        with torch.no_grad():
            outputs = self._model(**inputs)
        target_size = torch.tensor([image.shape[:2]])
        processed = self._processor.post_process_object_detection(
            outputs, threshold=0.0, target_sizes=target_size)[0]
        out = []
        for score, label, box in zip(processed["scores"], processed["labels"],
                                     processed["boxes"]):
            name = self._model.config.id2label.get(int(label), "n/a")
            if name.lower() == "n/a":
                continue
            x0, y0, x1, y1 = (float(v) for v in box)
            out.append(Detection(name=name, confidence=float(score),
                                 box=(x0, y0, max(x1 - x0, 0.0), max(y1 - y0, 0.0)),
                                 source=self.adapter_id))
        return out


class VisualGenomeAdapter:
    """Faster R-CNN detector over the top-200 Visual Genome categories.

    There is no stock checkpoint for this label space, so both the weights and
    the 200-line labels file are supplied by the caller; not exercised in CI.
    """

    adapter_id = "vg"

    def __init__(self, checkpoint_path: str | Path, labels_path: str | Path,
                 threshold: float = DEFAULT_VG_THRESHOLD, device: str = "cpu"):
        self.checkpoint_path = Path(checkpoint_path)
        self.threshold = threshold
        self.device = device
        labels = [ln.strip().lower() for ln in Path(labels_path).read_text().splitlines()
                  if ln.strip()]
        if len(labels) != 200:
            raise DetectorError(self.adapter_id,
                                f"labels file must list 200 classes, got {len(labels)}")
        self.label_space = tuple(labels)
        self._model = None

    def _load(self):  # pragma: no cover - requires externally supplied weights
        import torch
        from torchvision.models.detection import FasterRCNN
        from torchvision.models.detection.backbone_utils import resnet_fpn_backbone
        try:
            backbone = resnet_fpn_backbone(backbone_name="resnet101", weights=None)
            model = FasterRCNN(backbone, num_classes=len(self.label_space) + 1)
            state = torch.load(self.checkpoint_path, map_location=self.device)
            model.load_state_dict(state)
            self._model = model.to(self.device).eval()
        except Exception as exc:
            raise DetectorError(self.adapter_id,
                                f"cannot load checkpoint {self.checkpoint_path}: {exc}") from exc

    def raw_detections(self, image: np.ndarray) -> list[Detection]:  # pragma: no cover
        import torch
        if self._model is None:
            self._load()
        tensor = torch.from_numpy(image).permute(2, 0, 1).float() / 255.0
        with torch.no_grad():
            pred = self._model([tensor.to(self.device)])[0]
        out = []
        for score, label, box in zip(pred["scores"], pred["labels"], pred["boxes"]):
            idx = int(label) - 1  # index 0 is background
            if not 0 <= idx < len(self.label_space):
                continue
            x0, y0, x1, y1 = (float(v) for v in box)
            out.append(Detection(name=self.label_space[idx], confidence=float(score),
                                 box=(x0, y0, max(x1 - x0, 0.0), max(y1 - y0, 0.0)),
                                 source=self.adapter_id))
        return out


def build_adapter(kind: str, threshold: float | None = None, **kwargs) -> DetectorAdapter:
    if kind == "fixture":
        return FixtureDetector(threshold=0.5 if threshold is None else threshold, **kwargs)
    if kind == "coco":
        return CocoDetrAdapter(
            threshold=DEFAULT_COCO_THRESHOLD if threshold is None else threshold, **kwargs)
    if kind == "vg":
        return VisualGenomeAdapter(
            threshold=DEFAULT_VG_THRESHOLD if threshold is None else threshold, **kwargs)
    raise ValueError(f"unknown detector adapter {kind!r}")


# --------------------------------------------------------------------------
# Pure operations on detections
# --------------------------------------------------------------------------

def merge_detections(coco: Detections, vg: Detections) -> ObjectNameList:
    """COCO names first, then VG names, detector order preserved and duplicates
    retained (repeated objects are signal, not noise)."""
    if coco.sample_id != vg.sample_id:
        raise ValueError(
            f"cannot merge detections for different samples: "
            f"{coco.sample_id!r} vs {vg.sample_id!r}")
    return [d.name for d in coco.items] + [d.name for d in vg.items]


@dataclass(frozen=True)
class Histogram:
    """Share of samples with exactly k detections, for k = 0..max observed."""

    counts: tuple[int, ...]
    n_samples: int
    source_filter: str

    @property
    def percentages(self) -> tuple[float, ...]:
        if self.n_samples == 0:
            return tuple(0.0 for _ in self.counts)
        return tuple(100.0 * c / self.n_samples for c in self.counts)

    def csv_rows(self) -> list[list[str]]:
        ks = list(range(len(self.counts)))
        return [
            ["objects"] + [str(k) for k in ks],
            ["count"] + [str(c) for c in self.counts],
            ["percent"] + [f"{p:.2f}" for p in self.percentages],
        ]


def object_count_histogram(all_detections: Mapping[str, Detections],
                           source_filter: str = "all") -> Histogram:
    per_sample = [det.count(source_filter) for det in all_detections.values()]
    max_k = max(per_sample, default=0)
    counts = [0] * (max_k + 1)
    for k in per_sample:
        counts[k] += 1
    return Histogram(counts=tuple(counts), n_samples=len(per_sample),
                     source_filter=source_filter)


def single_object_subset(dataset: Dataset,
                         all_detections: Mapping[str, Detections]) -> Dataset:
    """Samples whose COCO-source detection count is exactly one.

    Membership looks only at COCO detections; in the single-object experiment
    the TEMS object part is that lone COCO name.
    """
    kept = []
    for sample in dataset:
        det = all_detections.get(sample.id)
        if det is None:
            raise KeyError(f"missing detections for sample {sample.id!r}")
        if det.count("coco") == 1:
            kept.append(sample)
    return Dataset(name=f"{dataset.name}-single-object", samples=tuple(kept))


# --------------------------------------------------------------------------
# JSONL cache
# --------------------------------------------------------------------------

def append_cache_record(path: str | Path, detections: Detections, source: str,
                        threshold: float | None = None) -> None:
    """Append one per-(sample, source) record; all items must share `source`."""
    for d in detections.items:
        if d.source != source:
            raise ValueError(
                f"record for source {source!r} contains detection from {d.source!r}")
    record = {
        "sample_id": detections.sample_id,
        "source": source,
        "detections": [
            {"name": d.name, "confidence": d.confidence, "box": list(d.box)}
            for d in detections.items
        ],
    }
    if threshold is not None:
        record["threshold"] = threshold
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a", encoding="utf-8") as fh:
        fh.write(json.dumps(record) + "\n")


class DetectionCache:
    """In-memory view of a JSONL detection cache.

    Holds one record per (sample_id, source); appending a newer record for the
    same key replaces the older one.  The merged per-sample view concatenates
    sources in the fixed order coco, vg, fixture so TEMS sequences are
    deterministic.
    """

    def __init__(self):
        self._records: dict[tuple[str, str], Detections] = {}

    @classmethod
    def load(cls, path: str | Path) -> "DetectionCache":
        cache = cls()
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"detection cache not found: {path}")
        with path.open(encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ValueError(f"bad cache record at line {line_no}: {exc}") from exc
                cache.add_record(record)
        return cache

    def add_record(self, record: Mapping) -> None:
        sample_id = record["sample_id"]
        source = record["source"]
        items = tuple(
            Detection(name=d["name"], confidence=float(d["confidence"]),
                      box=tuple(float(v) for v in d.get("box", (0, 0, 0, 0))),
                      source=source)
            for d in record["detections"]
        )
        self._records[(sample_id, source)] = Detections(sample_id=sample_id, items=items)

    def add(self, detections: Detections, source: str) -> None:
        self._records[(detections.sample_id, source)] = detections

    @property
    def sample_ids(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for sid, _ in self._records:
            seen.setdefault(sid)
        return tuple(seen)

    def per_source(self, sample_id: str, source: str) -> Detections | None:
        return self._records.get((sample_id, source))

    def merged(self, sample_id: str) -> Detections:
        items: list[Detection] = []
        for source in SOURCE_ORDER:
            det = self._records.get((sample_id, source))
            if det is not None:
                items.extend(det.items)
        return Detections(sample_id=sample_id, items=tuple(items))

    def by_sample(self) -> dict[str, Detections]:
        return {sid: self.merged(sid) for sid in self.sample_ids}

    def names(self, sample_id: str, source: str | None = None) -> ObjectNameList:
        return self.merged(sample_id).names(source)
