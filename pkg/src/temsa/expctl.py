"""End-to-end experiment control.

One config drives the full pipeline for each of the four experiments:

1. image-only sentiment from a frozen backbone plus trained head,
2. text-only sentiment from the caption tokens,
3. multimodal sentiment from the fused text + object-name sequence,
4. the same fusion restricted to samples with exactly one COCO detection.

Experiments 3 and 4 read object names from a detection cache; detectors never
run inside a training pipeline.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .corpus import (
    Dataset,
    JOINT_POLICIES,
    STRICT_EQUAL,
    derive_joint_labels,
    load_manifest,
    split_train_test,
)
from .detect import DetectionCache, load_image, single_object_subset
from .labels import LABEL_TO_INDEX
from .records import ResultRecord, save_record
from .tems import (
    LengthPolicy,
    POLICIES,
    Vocabulary,
    build_tems,
    clean_text,
    encode_pad,
    load_embeddings,
    tokenize,
)
from .eval.metrics import AVERAGING_MODES, confusion, metrics
from .eval.report import gold_vs_pred_wilcoxon, write_metrics_csv, write_report_json
from .models.bilstm import BiLstmClassifier, BiLstmConfig
from .models.encoder import EncoderClassifier, TextEncoderAdapter, WordpieceTokenizerAdapter
from .models.image import IMAGE_BACKBONES, IMAGE_SIZE, ImageClassifier, image_augment
from .models.training import (
    LR_BILSTM,
    LR_ENCODER,
    LR_IMAGE,
    TrainConfig,
    load_checkpoint,
    predict,
    save_checkpoint,
    train,
)

EXPERIMENTS = (1, 2, 3, 4)
TEXT_MODELS = ("bilstm", "encoder")
LABEL_FIELDS = {1: "image_label", 2: "text_label", 3: "joint_label", 4: "joint_label"}
DEFAULT_LR = {"bilstm": LR_BILSTM, "encoder": LR_ENCODER,
              **{m: LR_IMAGE for m in IMAGE_BACKBONES}}

# encoder_factory(init_seed) -> (adapter, tokenizer adapter)
EncoderFactory = Callable[[int], tuple[TextEncoderAdapter, WordpieceTokenizerAdapter]]


@dataclass(frozen=True)
class ExperimentSeeds:
    """The master seed fans out into four independent streams."""

    split: int
    init: int
    shuffle: int
    augment: int


def derive_seeds(master: int) -> ExperimentSeeds:
    state = np.random.SeedSequence(master).generate_state(4)
    return ExperimentSeeds(*(int(s) for s in state))


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: int
    model: str
    manifest_path: str
    out_dir: str
    dataset: str = "simpson"
    cache_path: str | None = None
    seed: int = 0
    split_ratio: float = 0.8
    joint_policy: str = STRICT_EQUAL
    averaging: str = "macro"
    learning_rate: float | None = None
    batch_size: int = 32
    epochs: int = 10
    embed_dim: int = 300
    hidden_units: int = 32
    dropout: float = 0.1
    embeddings_path: str | None = None
    pretrained: bool = False
    augment: bool = True

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"experiment must be one of {EXPERIMENTS}, "
                             f"got {self.experiment}")
        if self.dataset not in POLICIES:
            raise ValueError(f"dataset must be one of {tuple(POLICIES)}, "
                             f"got {self.dataset!r}")
        if self.experiment == 1:
            if self.model not in IMAGE_BACKBONES:
                raise ValueError(
                    f"experiment 1 classifies images and needs an image model "
                    f"from {IMAGE_BACKBONES}, got {self.model!r}")
        else:
            if self.model not in TEXT_MODELS:
                raise ValueError(
                    f"experiment {self.experiment} classifies token sequences "
                    f"and needs a text model from {TEXT_MODELS}, got {self.model!r}")
        if self.experiment in (3, 4) and not self.cache_path:
            raise ValueError(
                f"experiment {self.experiment} fuses detected object names and "
                f"requires cache_path pointing at a detection cache")
        if self.joint_policy not in JOINT_POLICIES:
            raise ValueError(f"joint_policy must be one of {JOINT_POLICIES}, "
                             f"got {self.joint_policy!r}")
        if self.averaging not in AVERAGING_MODES:
            raise ValueError(f"averaging must be one of {AVERAGING_MODES}, "
                             f"got {self.averaging!r}")

    @property
    def policy(self) -> LengthPolicy:
        return POLICIES[self.dataset]

    @property
    def label_field(self) -> str:
        return LABEL_FIELDS[self.experiment]

    def train_config(self, seed: int) -> TrainConfig:
        lr = self.learning_rate
        if lr is None:
            lr = DEFAULT_LR[self.model]
        return TrainConfig(learning_rate=lr, batch_size=self.batch_size,
                           epochs=self.epochs, seed=seed)


# --------------------------------------------------------------------------
# Dataset preparation per experiment
# --------------------------------------------------------------------------

def _require_label(dataset: Dataset, cfg: ExperimentConfig) -> Dataset:
    """Keep samples carrying the experiment's label; empty result is an error."""
    f = cfg.label_field
    kept = tuple(s for s in dataset if getattr(s, f) is not None)
    if not kept:
        raise ValueError(
            f"experiment {cfg.experiment} trains on {f} values and "
            f"{dataset.name!r} has none")
    return Dataset(name=dataset.name, samples=kept)


def _prepare_dataset(cfg: ExperimentConfig,
                     cache: DetectionCache | None) -> Dataset:
    dataset = load_manifest(cfg.manifest_path, dataset_name=cfg.dataset)
    if cfg.experiment in (3, 4):
        if any(s.joint_label is None for s in dataset):
            dataset = derive_joint_labels(dataset, policy=cfg.joint_policy)
    dataset = _require_label(dataset, cfg)
    if cfg.experiment == 4:
        assert cache is not None
        subset = single_object_subset(dataset, cache.by_sample())
        if len(subset) == 0:
            raise ValueError(
                "empty subset: no sample has exactly one coco-detected object")
        dataset = subset
    return dataset


def _gold_indices(dataset: Dataset, cfg: ExperimentConfig) -> np.ndarray:
    f = cfg.label_field
    return np.asarray([LABEL_TO_INDEX[getattr(s, f)] for s in dataset],
                      dtype=np.int64)


def tems_rows(dataset: Dataset, cache: DetectionCache | None,
              policy: LengthPolicy, names_mode: str = "merged") -> list[dict]:
    """Per-sample fusion rows: cleaned text tokens, object names, combined
    sequence.  names_mode 'merged' takes every cached name in source order;
    'single_coco' takes the lone COCO name; 'none' uses no names (text only)."""
    rows = []
    for sample in dataset:
        text_tokens = tokenize(clean_text(sample.text))
        if names_mode == "none":
            names: list[str] = []
        elif names_mode == "merged":
            assert cache is not None
            names = cache.names(sample.id)
        elif names_mode == "single_coco":
            assert cache is not None
            coco = cache.per_source(sample.id, "coco")
            names = coco.names() if coco is not None else []
            if len(names) != 1:
                raise ValueError(
                    f"sample {sample.id!r} is not a single-object sample "
                    f"({len(names)} coco detections)")
        else:
            raise ValueError(f"unknown names_mode {names_mode!r}")
        rows.append({
            "sample_id": sample.id,
            "text_tokens": text_tokens,
            "object_names": names,
            "combined": build_tems(text_tokens, names, policy).combined,
        })
    return rows


def _names_mode(experiment: int) -> str:
    return {2: "none", 3: "merged", 4: "single_coco"}[experiment]


def _seq_len(cfg: ExperimentConfig) -> int:
    return cfg.policy.text_max if cfg.experiment == 2 else cfg.policy.tems_max


# --------------------------------------------------------------------------
# Model assembly
# --------------------------------------------------------------------------

def _default_encoder_factory(cfg: ExperimentConfig) -> EncoderFactory:
    def factory(init_seed: int):
        if cfg.pretrained:  # pragma: no cover - needs checkpoint download
            return (TextEncoderAdapter.from_pretrained(),
                    WordpieceTokenizerAdapter.from_pretrained())
        raise ValueError(
            "the encoder model needs either pretrained=true or an injected "
            "encoder_factory; a randomly initialized encoder without a "
            "tokenizer cannot encode text")
    return factory


def _encode_for_encoder(rows: Sequence[dict], tokenizer: WordpieceTokenizerAdapter,
                        max_len: int) -> np.ndarray:
    out = np.zeros((len(rows), 2, max_len), dtype=np.int64)
    for i, row in enumerate(rows):
        ids, mask = tokenizer.encode(" ".join(row["combined"]), max_len)
        out[i, 0] = ids
        out[i, 1] = mask
    return out


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@dataclass
class _Prepared:
    """Everything the train and evaluate halves share."""

    cfg: ExperimentConfig
    seeds: ExperimentSeeds
    train_set: Dataset
    test_set: Dataset
    x_train: np.ndarray
    x_test: np.ndarray
    y_train: np.ndarray
    y_test: np.ndarray
    model: object
    vocab_itos: list[str] | None
    augment_fn: Callable | None
    model_config: dict = field(default_factory=dict)


def _prepare_run(cfg: ExperimentConfig,
                 encoder_factory: EncoderFactory | None = None) -> _Prepared:
    import torch

    seeds = derive_seeds(cfg.seed)
    cache = DetectionCache.load(cfg.cache_path) if cfg.cache_path else None
    dataset = _prepare_dataset(cfg, cache)
    train_set, test_set = split_train_test(dataset, cfg.split_ratio, seeds.split)
    y_train = _gold_indices(train_set, cfg)
    y_test = _gold_indices(test_set, cfg)

    vocab_itos: list[str] | None = None
    augment_fn = None
    model_config: dict = {}

    if cfg.experiment == 1:
        torch.manual_seed(seeds.init)
        model = ImageClassifier(cfg.model, pretrained=cfg.pretrained,
                                dropout=cfg.dropout)
        x_train = _load_images(train_set)
        x_test = _load_images(test_set)
        if cfg.augment:
            aug_rng = np.random.default_rng(seeds.augment)
            augment_fn = lambda img, _rng: image_augment(img, aug_rng)  # noqa: E731
        model_config = {"backbone": cfg.model, "dropout": cfg.dropout,
                        "pretrained": cfg.pretrained}
    else:
        mode = _names_mode(cfg.experiment)
        train_rows = tems_rows(train_set, cache, cfg.policy, mode)
        test_rows = tems_rows(test_set, cache, cfg.policy, mode)
        if cfg.model == "bilstm":
            vocab = Vocabulary.from_sequences(r["combined"] for r in train_rows)
            vocab_itos = list(vocab.tokens)
            max_len = _seq_len(cfg)
            x_train = np.stack([
                encode_pad(r["combined"], max_len, vocab).indices
                for r in train_rows])
            x_test = np.stack([
                encode_pad(r["combined"], max_len, vocab).indices
                for r in test_rows])
            table = None
            if cfg.embeddings_path:
                table = load_embeddings(vocab, cfg.embeddings_path,
                                        seed=seeds.init)
            torch.manual_seed(seeds.init)
            bcfg = BiLstmConfig(vocab_size=len(vocab), hidden_units=cfg.hidden_units,
                                embed_dim=cfg.embed_dim, dropout=cfg.dropout)
            model = BiLstmClassifier(bcfg, pretrained_embeddings=table)
            model_config = bcfg.as_dict()
        else:
            factory = encoder_factory or _default_encoder_factory(cfg)
            adapter, tokenizer = factory(seeds.init)
            torch.manual_seed(seeds.init)
            model = EncoderClassifier(adapter, dropout=cfg.dropout)
            max_len = _seq_len(cfg) + 2  # room for the specials
            x_train = _encode_for_encoder(train_rows, tokenizer, max_len)
            x_test = _encode_for_encoder(test_rows, tokenizer, max_len)
            model_config = {"hidden_size": adapter.hidden_size,
                            "dropout": cfg.dropout, "max_len": max_len}

    return _Prepared(cfg=cfg, seeds=seeds, train_set=train_set, test_set=test_set,
                     x_train=x_train, x_test=x_test, y_train=y_train,
                     y_test=y_test, model=model, vocab_itos=vocab_itos,
                     augment_fn=augment_fn, model_config=model_config)


def _load_images(dataset: Dataset) -> np.ndarray:
    from PIL import Image
    out = np.zeros((len(dataset), IMAGE_SIZE, IMAGE_SIZE, 3), dtype=np.uint8)
    for i, sample in enumerate(dataset):
        arr = load_image(sample.image_ref)
        if arr.shape[:2] != (IMAGE_SIZE, IMAGE_SIZE):
            img = Image.fromarray(arr).resize((IMAGE_SIZE, IMAGE_SIZE))
            arr = np.asarray(img)
        out[i] = arr
    return out


def _checkpoint_extra(cfg: ExperimentConfig) -> dict:
    return {
        "experiment": cfg.experiment,
        "dataset": cfg.dataset,
        "model": cfg.model,
        "master_seed": cfg.seed,
        "split_ratio": cfg.split_ratio,
        "manifest_path": str(cfg.manifest_path),
        "cache_path": str(cfg.cache_path) if cfg.cache_path else None,
        "joint_policy": cfg.joint_policy,
        "averaging": cfg.averaging,
        "embed_dim": cfg.embed_dim,
        "hidden_units": cfg.hidden_units,
        "dropout": cfg.dropout,
        "pretrained": cfg.pretrained,
        "augment": cfg.augment,
        "learning_rate": cfg.learning_rate,
        "batch_size": cfg.batch_size,
        "epochs": cfg.epochs,
        "embeddings_path": cfg.embeddings_path,
    }


def config_from_manifest(manifest: Mapping, out_dir: str,
                         manifest_path: str | None = None) -> ExperimentConfig:
    """Rebuild the ExperimentConfig a checkpoint was trained with."""
    return ExperimentConfig(
        experiment=int(manifest["experiment"]),
        model=str(manifest["model"]),
        manifest_path=str(manifest_path or manifest["manifest_path"]),
        out_dir=out_dir,
        dataset=str(manifest["dataset"]),
        cache_path=manifest.get("cache_path"),
        seed=int(manifest["master_seed"]),
        split_ratio=float(manifest["split_ratio"]),
        joint_policy=str(manifest["joint_policy"]),
        averaging=str(manifest["averaging"]),
        learning_rate=manifest.get("learning_rate"),
        batch_size=int(manifest.get("batch_size", 32)),
        epochs=int(manifest.get("epochs", 10)),
        embed_dim=int(manifest.get("embed_dim", 300)),
        hidden_units=int(manifest.get("hidden_units", 32)),
        dropout=float(manifest.get("dropout", 0.1)),
        embeddings_path=manifest.get("embeddings_path"),
        pretrained=bool(manifest.get("pretrained", False)),
        augment=bool(manifest.get("augment", True)),
    )


# --------------------------------------------------------------------------
# Public operations
# --------------------------------------------------------------------------

def train_experiment(cfg: ExperimentConfig,
                     encoder_factory: EncoderFactory | None = None) -> Path:
    """Run the training half and write a checkpoint; returns its directory."""
    prepared = _prepare_run(cfg, encoder_factory)
    history = train(prepared.model, prepared.x_train, prepared.y_train,
                    cfg.train_config(seeds_seed(prepared.seeds)),
                    augment_fn=prepared.augment_fn)
    ckpt_dir = Path(cfg.out_dir) / "checkpoint"
    extra = _checkpoint_extra(cfg)
    extra["history"] = history
    save_checkpoint(ckpt_dir, prepared.model, kind=cfg.model,
                    config=prepared.model_config, seed=cfg.seed,
                    vocab_itos=prepared.vocab_itos, extra=extra)
    return ckpt_dir


def seeds_seed(seeds: ExperimentSeeds) -> int:
    """The stream that drives batch shuffling (and in-loop torch state)."""
    return seeds.shuffle


def run_experiment(cfg: ExperimentConfig,
                   encoder_factory: EncoderFactory | None = None) -> ResultRecord:
    """prepare -> (fuse) -> train -> evaluate; persists and returns the record."""
    started = time.monotonic()
    prepared = _prepare_run(cfg, encoder_factory)
    train(prepared.model, prepared.x_train, prepared.y_train,
          cfg.train_config(seeds_seed(prepared.seeds)),
          augment_fn=prepared.augment_fn)
    preds = predict(prepared.model, prepared.x_test, batch_size=cfg.batch_size)
    cm = confusion(preds.tolist(), prepared.y_test.tolist())
    mset = metrics(cm, averaging=cfg.averaging)

    out_dir = Path(cfg.out_dir)
    ckpt_dir = out_dir / "checkpoint"
    save_checkpoint(ckpt_dir, prepared.model, kind=cfg.model,
                    config=prepared.model_config, seed=cfg.seed,
                    vocab_itos=prepared.vocab_itos,
                    extra=_checkpoint_extra(cfg))
    artifacts = {
        "checkpoint/state.pt": _sha256(ckpt_dir / "state.pt"),
        "checkpoint/manifest.json": _sha256(ckpt_dir / "manifest.json"),
    }
    record = ResultRecord(
        experiment=cfg.experiment,
        dataset=cfg.dataset,
        model=cfg.model,
        seed=cfg.seed,
        metrics={**mset.as_dict(), "wall_clock_s": time.monotonic() - started},
        predictions=tuple(int(p) for p in preds),
        gold=tuple(int(g) for g in prepared.y_test),
        artifacts=artifacts,
    )
    save_record(record, out_dir / "record.json")
    return record


def evaluate_checkpoint(ckpt_dir: str | Path, out_dir: str | Path | None = None,
                        split: str = "test",
                        manifest_path: str | None = None,
                        encoder_factory: EncoderFactory | None = None) -> dict:
    """Rebuild the model and its exact data split from a checkpoint, score the
    requested split, and emit the JSON report plus its CSV mirror."""
    import torch

    if split not in ("train", "test"):
        raise ValueError(f"split must be 'train' or 'test', got {split!r}")
    manifest, state, itos = load_checkpoint(ckpt_dir)
    cfg = config_from_manifest(manifest, out_dir=str(out_dir or ckpt_dir),
                               manifest_path=manifest_path)
    prepared = _prepare_run(cfg, encoder_factory)
    if itos is not None and prepared.vocab_itos != itos:
        raise ValueError(
            "checkpoint vocabulary does not match the rebuilt training split; "
            "was the manifest file changed since training?")
    model = prepared.model
    model.load_state_dict({k: torch.as_tensor(v) for k, v in state.items()})

    x = prepared.x_test if split == "test" else prepared.x_train
    y = prepared.y_test if split == "test" else prepared.y_train
    preds = predict(model, x, batch_size=cfg.batch_size)
    cm = confusion(preds.tolist(), y.tolist())
    mset = metrics(cm, averaging=cfg.averaging)

    record = ResultRecord(
        experiment=cfg.experiment, dataset=cfg.dataset, model=cfg.model,
        seed=cfg.seed, metrics=mset.as_dict(),
        predictions=tuple(int(p) for p in preds),
        gold=tuple(int(g) for g in y),
    )
    report = {
        "experiment": cfg.experiment,
        "dataset": cfg.dataset,
        "model": cfg.model,
        "split": split,
        "metrics": {**mset.as_dict(), "averaging": cfg.averaging},
        "confusion": cm.counts.tolist(),
        "wilcoxon": [gold_vs_pred_wilcoxon(record)],
    }
    if out_dir is not None:
        out_dir = Path(out_dir)
        write_report_json(report, out_dir / "report.json")
        write_metrics_csv([(cfg.model, mset.as_dict())], out_dir / "metrics.csv")
        save_record(record, out_dir / "record.json")
    return report
