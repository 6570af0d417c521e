"""Sentiment label vocabulary shared across the pipeline.

The class order (positive, negative, neutral) is the canonical ordering for
confusion matrices, one-hot targets, and model output columns.  The signed-rank
test instead uses the numeric coding negative=0, neutral=1, positive=2, so both
mappings live here to keep them from drifting apart.
"""

from __future__ import annotations

SENTIMENTS: tuple[str, ...] = ("positive", "negative", "neutral")

LABEL_TO_INDEX: dict[str, int] = {label: i for i, label in enumerate(SENTIMENTS)}
INDEX_TO_LABEL: dict[int, str] = {i: label for i, label in enumerate(SENTIMENTS)}

# Rank-test coding: labels mapped onto an ordinal scale.
WILCOXON_CODES: dict[str, int] = {"negative": 0, "neutral": 1, "positive": 2}

NUM_CLASSES = len(SENTIMENTS)


class LabelError(ValueError):
    """Raised for labels outside the three-class sentiment vocabulary."""


def validate_label(value: str | None, *, context: str = "") -> str | None:
    """Return `value` if it is a known sentiment or None, else raise LabelError."""
    if value is None:
        return None
    if value not in LABEL_TO_INDEX:
        where = f" ({context})" if context else ""
        raise LabelError(f"unknown label {value!r}{where}; expected one of {SENTIMENTS}")
    return value


def labels_to_indices(labels) -> list[int]:
    return [LABEL_TO_INDEX[validate_label(l)] for l in labels]


def labels_to_codes(labels) -> list[int]:
    """Map sentiment labels to the ordinal coding used by the signed-rank test."""
    return [WILCOXON_CODES[validate_label(l)] for l in labels]
