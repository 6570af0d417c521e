"""Cross-experiment comparison tables, significance rows, plots, and the
JSON/CSV report writers."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from ..labels import SENTIMENTS, WILCOXON_CODES
from ..records import ResultRecord
from .wilcoxon import DEFAULT_ALPHA, wilcoxon_signed_rank

# Published reference scores (percent scale) the emitted figures compare
# against, keyed by dataset then model.  Metric order follows the reporting
# convention Acc, Pre, F1, Rec.
BASELINES: dict[str, dict[str, dict[str, float]]] = {
    "simpson": {
        "Vgg16 (BL)": {"accuracy": 74, "precision": 72, "f1": 73, "recall": 74},
        "RsNet50 (BL)": {"accuracy": 73, "precision": 69, "f1": 70, "recall": 71},
        "Zhang (BL)": {"accuracy": 57, "precision": 54, "f1": 52, "recall": 53},
        "Kim (BL)": {"accuracy": 68, "precision": 67, "f1": 63, "recall": 63},
    },
    "mvsa-single": {
        "Vgg16 (BL)": {"accuracy": 54, "precision": 46, "f1": 46, "recall": 45},
        "RsNet50 (BL)": {"accuracy": 59, "precision": 56, "f1": 54, "recall": 55},
        "Zhang (BL)": {"accuracy": 58, "precision": 57, "f1": 58, "recall": 55},
        "Kim (BL)": {"accuracy": 63, "precision": 64, "f1": 64, "recall": 62},
    },
}

METRIC_ORDER = ("accuracy", "precision", "f1", "recall")
METRIC_SHORT = {"accuracy": "Acc", "precision": "Pre", "f1": "F1", "recall": "Rec"}


def _dataset_key(name: str) -> str:
    key = name.strip().lower()
    return {"mvsa": "mvsa-single", "mvsa_single": "mvsa-single"}.get(key, key)


def _slug(name: str) -> str:
    return "".join(ch if ch.isalnum() else "-" for ch in name.strip().lower())


def _record_tag(record: ResultRecord) -> str:
    return f"exp{record.experiment}:{record.model}"


def _codes(indices: Sequence[int]) -> list[int]:
    return [WILCOXON_CODES[SENTIMENTS[int(i)]] for i in indices]


@dataclass(frozen=True)
class ComparisonReport:
    rows: tuple[dict, ...]
    group_means: tuple[dict, ...]
    wilcoxon: tuple[dict, ...]
    alpha: float

    @property
    def datasets(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for row in self.rows:
            seen.setdefault(row["dataset"])
        return tuple(seen)


def gold_vs_pred_wilcoxon(record: ResultRecord,
                          alpha: float = DEFAULT_ALPHA) -> dict:
    """The published significance check: gold label codes against predicted
    label codes over one test split."""
    row = {"a": "gold", "b": _record_tag(record), "dataset": record.dataset}
    try:
        res = wilcoxon_signed_rank(_codes(record.gold), _codes(record.predictions),
                                   alpha=alpha)
    except ValueError as exc:
        row["note"] = str(exc)
        return row
    row.update(statistic=res.statistic, n_effective=res.n_effective,
               p_value=res.p_value, method=res.method,
               significant=res.significant)
    return row


def _pair_row(a: ResultRecord, b: ResultRecord, alpha: float) -> dict:
    row = {"a": _record_tag(a), "b": _record_tag(b), "dataset": a.dataset}
    try:
        res = wilcoxon_signed_rank(_codes(a.predictions), _codes(b.predictions),
                                   alpha=alpha)
    except ValueError as exc:
        row["note"] = str(exc)
        return row
    row.update(statistic=res.statistic, n_effective=res.n_effective,
               p_value=res.p_value, method=res.method,
               significant=res.significant)
    return row


def _same_split(a: ResultRecord, b: ResultRecord) -> bool:
    return a.dataset == b.dataset and a.gold == b.gold


def compare_experiments(records: Sequence[ResultRecord],
                        pairs: Sequence[tuple[int, int]] | None = None,
                        alpha: float = DEFAULT_ALPHA) -> ComparisonReport:
    """Side-by-side metric table over records, grouped means, and a Wilcoxon
    row per record pair sharing a test split.

    Metric values pass through untouched.  With `pairs=None` every unordered
    pair of records on the same split is tested; explicitly requested pairs
    on different splits raise.
    """
    if not records:
        raise ValueError("need at least one record to compare")
    rows = tuple(
        {"experiment": r.experiment, "dataset": r.dataset, "model": r.model,
         "metrics": dict(r.metrics)}
        for r in records
    )

    groups: dict[tuple[int, str], list[ResultRecord]] = {}
    for r in records:
        groups.setdefault((r.experiment, r.dataset), []).append(r)
    group_means = []
    for (experiment, dataset), members in groups.items():
        keys = [k for k in members[0].metrics if all(k in m.metrics for m in members)]
        means = {k: sum(m.metrics[k] for m in members) / len(members) for k in keys}
        group_means.append({"experiment": experiment, "dataset": dataset,
                            "mean_metrics": means, "n_models": len(members)})

    tests = []
    if pairs is None:
        for i in range(len(records)):
            for j in range(i + 1, len(records)):
                if _same_split(records[i], records[j]):
                    tests.append(_pair_row(records[i], records[j], alpha))
    else:
        for i, j in pairs:
            a, b = records[i], records[j]
            if not _same_split(a, b):
                raise ValueError(
                    f"records {_record_tag(a)} and {_record_tag(b)} were "
                    f"evaluated on different test splits and cannot be paired")
            tests.append(_pair_row(a, b, alpha))

    return ComparisonReport(rows=rows, group_means=tuple(group_means),
                            wilcoxon=tuple(tests), alpha=alpha)


# --------------------------------------------------------------------------
# Plots
# --------------------------------------------------------------------------

def _save_deterministic(fig, path: Path) -> None:
    # Matplotlib stamps its version into PNG metadata by default; suppressing
    # it keeps reruns byte-comparable once text chunks are ignored.
    fig.savefig(path, format="png", metadata={"Software": None})


def emit_plots(report: ComparisonReport, out_dir: str | Path,
               baselines: Mapping[str, Mapping[str, Mapping[str, float]]] | None = None,
               ) -> list[Path]:
    """Write two figures per dataset: one comparing the report's own models
    (group means marked with 'x') and one against published baselines."""
    if not report.rows:
        raise ValueError("empty report: nothing to plot")
    if baselines is None:
        baselines = BASELINES
    import matplotlib
    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    for dataset in report.datasets:
        rows = [r for r in report.rows if r["dataset"] == dataset]
        labels = [f"exp{r['experiment']} {r['model']}" for r in rows]
        slug = _slug(dataset)

        fig, ax = plt.subplots(figsize=(8, 4.5))
        width = 0.8 / max(len(rows), 1)
        xs = range(len(METRIC_ORDER))
        for k, row in enumerate(rows):
            vals = [100.0 * row["metrics"].get(m, 0.0) for m in METRIC_ORDER]
            ax.bar([x + k * width for x in xs], vals, width=width,
                   label=labels[k])
        means = [
            sum(100.0 * r["metrics"].get(m, 0.0) for r in rows) / len(rows)
            for m in METRIC_ORDER
        ]
        ax.scatter([x + 0.4 - width / 2 for x in xs], means, marker="x",
                   color="black", zorder=3, label="mean")
        ax.set_xticks([x + 0.4 - width / 2 for x in xs])
        ax.set_xticklabels([METRIC_SHORT[m] for m in METRIC_ORDER])
        ax.set_ylabel("%")
        ax.set_ylim(0, 100)
        ax.set_title(f"model comparison: {dataset}")
        ax.legend(fontsize="small")
        path = out_dir / f"comparison_{slug}.png"
        _save_deterministic(fig, path)
        plt.close(fig)
        written.append(path)

        base = baselines.get(_dataset_key(dataset), {})
        series = [(name, [float(vals[m]) for m in METRIC_ORDER])
                  for name, vals in base.items()]
        series += [(label, [100.0 * row["metrics"].get(m, 0.0) for m in METRIC_ORDER])
                   for label, row in zip(labels, rows)]
        fig, ax = plt.subplots(figsize=(8, 4.5))
        width = 0.8 / max(len(series), 1)
        for k, (name, vals) in enumerate(series):
            ax.bar([x + k * width for x in xs], vals, width=width, label=name)
        ax.set_xticks([x + 0.4 - width / 2 for x in xs])
        ax.set_xticklabels([METRIC_SHORT[m] for m in METRIC_ORDER])
        ax.set_ylabel("%")
        ax.set_ylim(0, 100)
        ax.set_title(f"baseline comparison: {dataset}")
        ax.legend(fontsize="small")
        path = out_dir / f"baseline_{slug}.png"
        _save_deterministic(fig, path)
        plt.close(fig)
        written.append(path)

    return written


# --------------------------------------------------------------------------
# Writers
# --------------------------------------------------------------------------

def write_report_json(payload: Mapping, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def write_metrics_csv(rows: Sequence[tuple[str, Mapping[str, float]]],
                      path: str | Path, percent: bool = True) -> None:
    """One line per model in the table layout Model, Acc, Pre, F1, Rec."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["Model"] + [METRIC_SHORT[m] for m in METRIC_ORDER])
        for model, vals in rows:
            scale = 100.0 if percent else 1.0
            writer.writerow([model] + [f"{scale * vals[m]:.2f}" for m in METRIC_ORDER])
