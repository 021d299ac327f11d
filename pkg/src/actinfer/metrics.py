"""Evaluation metrics for open-world and zero-shot activity recognition."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .actionmap import EmbeddingTable, word_similarity
from .concepts import canon_concept
from .errors import DataError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Metric:
    value: float
    support: int  # number of clips (or labels for mAP) actually scored


@dataclass(frozen=True)
class MetricReport:
    object_accuracy: Metric | None = None
    action_accuracy: Metric | None = None
    activity_word_accuracy: Metric | None = None
    mean_word_similarity: Metric | None = None
    class_mean_ap: Metric | None = None

    def to_dict(self) -> dict:
        out = {}
        for name in (
            "object_accuracy",
            "action_accuracy",
            "activity_word_accuracy",
            "mean_word_similarity",
            "class_mean_ap",
        ):
            metric = getattr(self, name)
            if metric is not None:
                out[name] = {"value": metric.value, "support": metric.support}
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        rows = [("metric", "value", "support")]
        for name, metric in sorted(self.to_dict().items()):
            rows.append((name, f"{metric['value']:.6f}", str(metric["support"])))
        widths = [max(len(r[i]) for r in rows) for i in range(3)]
        lines = [
            "  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip()
            for row in rows
        ]
        return "\n".join(lines)


def _check_clips(preds: Mapping[str, object], gt: Mapping[str, object]) -> list[str]:
    missing = sorted(set(gt) - set(preds))
    extra = sorted(set(preds) - set(gt))
    if missing or extra:
        parts = []
        if missing:
            parts.append(f"clips without predictions: {', '.join(missing)}")
        if extra:
            parts.append(f"predictions for unknown clips: {', '.join(extra)}")
        raise DataError("; ".join(parts))
    return sorted(gt)


def accuracy(preds: Mapping[str, str], gt: Mapping[str, str]) -> Metric:
    """Fraction of clips whose top-1 concept matches the ground truth."""
    clips = _check_clips(preds, gt)
    if not clips:
        raise DataError("no clips to score")
    hits = sum(1 for c in clips if preds[c] == gt[c])
    return Metric(value=hits / len(clips), support=len(clips))


def word_level_accuracy(
    preds: Mapping[str, tuple[str, str]], gt: Mapping[str, tuple[str, str]]
) -> Metric:
    """Mean per-clip fraction of matching activity words (verb, noun)."""
    clips = _check_clips(preds, gt)
    if not clips:
        raise DataError("no clips to score")
    total = 0.0
    for c in clips:
        pv, pn = preds[c]
        gv, gn = gt[c]
        total += (float(pv == gv) + float(pn == gn)) / 2.0
    return Metric(value=total / len(clips), support=len(clips))


def mean_nbws(
    preds: Mapping[str, str], gt: Mapping[str, str], emb: EmbeddingTable
) -> Metric:
    """Mean embedding cosine similarity between predicted and true verbs.

    Clips whose predicted or true verb has no embedding are skipped with
    a warning; the support count reflects the skips.
    """
    clips = _check_clips(preds, gt)
    sims = []
    for c in clips:
        if preds[c] not in emb or gt[c] not in emb:
            log.warning("clip %r skipped: verb without embedding (%r vs %r)", c, preds[c], gt[c])
            continue
        sims.append(word_similarity(preds[c], gt[c], emb))
    if not sims:
        raise DataError("no clips could be scored: every verb lacks an embedding")
    return Metric(value=math.fsum(sims) / len(sims), support=len(sims))


def average_precision(ranked_positives: Sequence[bool]) -> float:
    """Mean of precision at each positive hit down a ranked list."""
    hits = 0
    precisions = []
    for rank, is_pos in enumerate(ranked_positives, start=1):
        if is_pos:
            hits += 1
            precisions.append(hits / rank)
    if not precisions:
        raise DataError("average precision needs at least one positive")
    return math.fsum(precisions) / len(precisions)


def class_map(
    scores: Mapping[str, Mapping[str, float]],
    gt: Mapping[str, set[str]],
) -> Metric:
    """Class-wise mean average precision.

    `scores` maps clip -> label -> score (every label scored for every
    clip); `gt` maps clip -> set of positive labels.  Labels without any
    positive clip are excluded; ranking ties break by clip id.
    """
    clips = _check_clips(scores, gt)
    if not clips:
        raise DataError("no clips to score")
    labels = sorted({label for c in clips for label in scores[c]})
    if not labels:
        raise DataError("no labels scored")
    for c in clips:
        missing = [label for label in labels if label not in scores[c]]
        if missing:
            raise DataError(f"clip {c!r} lacks scores for labels: {', '.join(missing)}")
    aps = []
    for label in labels:
        positives = {c for c in clips if label in gt[c]}
        if not positives:
            continue
        ranking = sorted(clips, key=lambda c: (-scores[c][label], c))
        aps.append(average_precision([c in positives for c in ranking]))
    if not aps:
        raise DataError("no label has a positive clip")
    return Metric(value=math.fsum(aps) / len(aps), support=len(aps))


# -- ground-truth loaders ----------------------------------------------------


def load_ground_truth(path: str | Path) -> dict[str, tuple[str, str]]:
    """Load a CSV with header clip_id,verb,noun."""
    out: dict[str, tuple[str, str]] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["clip_id", "verb", "noun"]:
            raise DataError(f"{path}: expected header 'clip_id,verb,noun'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            clip_id = row[0]
            if clip_id in out:
                raise DataError(f"{path}:{lineno}: duplicate clip {clip_id!r}")
            out[clip_id] = (canon_concept(row[1]), canon_concept(row[2]))
    if not out:
        raise DataError(f"{path}: no ground-truth rows")
    return out


def load_zeroshot_ground_truth(path: str | Path) -> dict[str, set[str]]:
    """Load a CSV with header clip_id,label_id (multiple rows per clip)."""
    out: dict[str, set[str]] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["clip_id", "label_id"]:
            raise DataError(f"{path}: expected header 'clip_id,label_id'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise DataError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            out.setdefault(row[0], set()).add(row[1])
    if not out:
        raise DataError(f"{path}: no ground-truth rows")
    return out
