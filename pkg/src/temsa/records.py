"""Persisted experiment result records.

A record is the portable unit of comparison: it survives to disk as JSON and
is the input for significance testing between experiments.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ResultRecord:
    """Outcome of one (experiment, dataset, model) run.

    `predictions` and `gold` hold label indices aligned with the evaluation
    samples.  `metrics` is a flat name -> float map.  `artifacts` maps artifact
    names (checkpoints, plots) to sha256 hex digests of their bytes.
    """

    experiment: int
    dataset: str
    model: str
    seed: int
    metrics: Mapping[str, float]
    predictions: tuple[int, ...]
    gold: tuple[int, ...]
    artifacts: Mapping[str, str] = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if len(self.predictions) != len(self.gold):
            raise ValueError(
                f"predictions ({len(self.predictions)}) and gold "
                f"({len(self.gold)}) must align")
        object.__setattr__(self, "metrics", dict(self.metrics))
        object.__setattr__(self, "artifacts", dict(self.artifacts))
        object.__setattr__(self, "predictions", tuple(int(p) for p in self.predictions))
        object.__setattr__(self, "gold", tuple(int(g) for g in self.gold))

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "experiment": self.experiment,
            "dataset": self.dataset,
            "model": self.model,
            "seed": self.seed,
            "metrics": dict(self.metrics),
            "predictions": list(self.predictions),
            "gold": list(self.gold),
            "artifacts": dict(self.artifacts),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ResultRecord":
        version = data.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ValueError(
                f"unsupported record schema version {version!r}; "
                f"this build reads version {SCHEMA_VERSION}")
        return cls(
            experiment=int(data["experiment"]),
            dataset=str(data["dataset"]),
            model=str(data["model"]),
            seed=int(data["seed"]),
            metrics={k: float(v) for k, v in data["metrics"].items()},
            predictions=tuple(data["predictions"]),
            gold=tuple(data["gold"]),
            artifacts={str(k): str(v) for k, v in data.get("artifacts", {}).items()},
        )


def save_record(record: ResultRecord, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(record.to_dict(), indent=2) + "\n", encoding="utf-8")


def load_record(path: str | Path) -> ResultRecord:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return ResultRecord.from_dict(data)


def load_records(paths: Sequence[str | Path]) -> list[ResultRecord]:
    return [load_record(p) for p in paths]
