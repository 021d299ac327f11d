"""Posterior-based activity refinement and zero-shot label mapping.

The loop alternates energy-based inference with training of the
visual-semantic action map: each iteration re-infers activities under the
current action priors, consolidates clip-level targets, retrains the map,
and replaces the priors with its predictions.  It stops when the
generalization error on held-out (unseen) actions stops improving, and
returns the interpretations of the best iteration by that error.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .actionmap import (
    ClipActionTargets,
    ClipInterpretation,
    EmbeddingTable,
    FeatureTable,
    LinearMap,
    Sample,
    TrainConfig,
    clip_interpretations,
    make_training_set,
    predict_actions,
    temporal_smooth,
    train_map,
)
from .concepts import canon_concept
from .errors import DataError, UsageError
from .grounding import GroundedScore, SearchSpace
from .inference import (
    ActionPriorTable,
    AnnealSchedule,
    EnergyTransform,
    Interpretation,
    infer_exhaustive,
    infer_mcmc,
)
from .kgraph import AffinityParams, KnowledgeGraph
from .seeding import substream

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RefinementConfig:
    max_iterations: int = 3
    saturation_delta: float = 0.005
    unseen_actions: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise DataError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.saturation_delta < 0:
            raise DataError(f"saturation_delta must be >= 0, got {self.saturation_delta}")


@dataclass(frozen=True)
class IterationReport:
    index: int
    heldout_mse: float  # nan when no held-out samples existed
    agreement: float  # top-1 activity agreement with the previous iteration (nan at 0)

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "heldout_mse": None if math.isnan(self.heldout_mse) else self.heldout_mse,
            "agreement": None if math.isnan(self.agreement) else self.agreement,
        }


@dataclass
class ClipData:
    clip_id: str
    frames: list[str]


@dataclass
class IterationState:
    """Everything one refinement iteration produced."""

    index: int
    frame_interps: dict[str, list[list[Interpretation]]]  # clip -> per-frame rankings
    clip_rankings: dict[str, list[ClipInterpretation]]
    targets: list[ClipActionTargets]
    linmap: LinearMap | None
    priors_after: ActionPriorTable
    report: IterationReport

    def top1(self) -> dict[str, tuple[str, str]]:
        """Per-clip (verb, noun) of the best clip-level interpretation."""
        out = {}
        for clip_id, ranking in self.clip_rankings.items():
            best = ranking[0]
            out[clip_id] = (best.action, best.object)
        return out


@dataclass
class RefineResult:
    iterations: list[IterationState]  # only the iterations THIS call executed
    best_index: int  # may point into a resumed run's persisted history

    @property
    def best(self) -> IterationState:
        """Best iteration's state; raises if it ran before a resume point."""
        for s in self.iterations:
            if s.index == self.best_index:
                return s
        raise DataError(
            f"iteration {self.best_index} was not executed by this call; "
            "load its persisted snapshot instead"
        )

    @property
    def reports(self) -> list[IterationReport]:
        return [s.report for s in self.iterations]


def _infer_clip(
    clip: ClipData,
    space: SearchSpace,
    grounded: Mapping[str, dict[str, GroundedScore]],
    graph: KnowledgeGraph,
    priors: ActionPriorTable,
    params: AffinityParams,
    transform: EnergyTransform,
    mode: str,
    schedule: AnnealSchedule,
    top_k: int,
    affinities: np.ndarray,
    seed: int,
) -> list[list[Interpretation]]:
    per_frame = []
    for frame_idx, frame in enumerate(clip.frames):
        if frame not in grounded:
            raise DataError(f"no grounded scores for frame {frame!r} of clip {clip.clip_id!r}")
        if mode == "exhaustive":
            interps = infer_exhaustive(
                space,
                frame,
                grounded[frame],
                graph,
                priors,
                params,
                top_k,
                transform,
                affinities,
                prior_scope=clip.clip_id,
            )
        else:
            frame_schedule = AnnealSchedule(
                t0=schedule.t0,
                alpha=schedule.alpha,
                iterations=schedule.iterations,
                seed=substream(seed, "infer", clip.clip_id, frame_idx),
            )
            interps = infer_mcmc(
                space,
                frame,
                grounded[frame],
                graph,
                priors,
                frame_schedule,
                params,
                top_k,
                transform,
                affinities,
                prior_scope=clip.clip_id,
            )
        per_frame.append(interps)
    return per_frame


def refine_loop(
    clips: Sequence[ClipData],
    grounded: Mapping[str, dict[str, GroundedScore]],
    feats: FeatureTable,
    space: SearchSpace,
    emb: EmbeddingTable,
    graph: KnowledgeGraph,
    cfg: RefinementConfig,
    train_cfg: TrainConfig,
    params: AffinityParams | None = None,
    transform: EnergyTransform | None = None,
    mode: str = "exhaustive",
    schedule: AnnealSchedule | None = None,
    top_k: int = 10,
    top_m: int = 10,
    per_frame_a: int = 5,
    temperature: float = 0.1,
    seed: int = 0,
    initial_priors: ActionPriorTable | None = None,
    start_iteration: int = 0,
    history: Sequence[IterationReport] = (),
    prev_top1: Mapping[str, tuple[str, str]] | None = None,
    observer: Callable[[IterationState], None] | None = None,
) -> RefineResult:
    """Run the alternating inference / action-grounding refinement loop.

    Iteration 0 starts from all-ones priors (every action equally
    plausible).  Each iteration infers, smooths, trains the map on
    targets outside cfg.unseen_actions, measures the held-out MSE on the
    unseen-action targets, and predicts fresh per-clip priors.  Stops at
    cfg.max_iterations or once the held-out MSE improves by at most
    cfg.saturation_delta.  The resume parameters (initial_priors,
    start_iteration, history, prev_top1) let a caller continue a loop
    from persisted artifacts; `observer` is invoked after each iteration.
    """
    if not clips:
        raise DataError("refine_loop needs at least one clip")
    if mode not in ("exhaustive", "mcmc"):
        raise UsageError(f"unknown inference mode {mode!r}")
    params = params or AffinityParams()
    transform = transform or EnergyTransform()
    schedule = schedule or AnnealSchedule()
    if not cfg.unseen_actions:
        log.warning(
            "no unseen actions configured: saturation cannot be measured, "
            "loop runs to max_iterations"
        )
    unseen = set(cfg.unseen_actions)
    affinities = graph.affinity_matrix(space.actions, space.objects, params)
    priors = initial_priors if initial_priors is not None else ActionPriorTable()
    states: list[IterationState] = []
    mses: list[float] = [r.heldout_mse for r in history]
    prev_assign = dict(prev_top1) if prev_top1 else None

    # A resumed loop must honor a stop the uninterrupted run would already
    # have taken: if the persisted history ends in saturation, run nothing.
    if history and not math.isnan(mses[-1]):
        prev = mses[-2] if len(mses) >= 2 else math.inf
        if prev - mses[-1] <= cfg.saturation_delta:
            log.info(
                "resume: history already saturated at iteration %d; no further iterations",
                history[-1].index,
            )
            return RefineResult(iterations=[], best_index=_best_iteration(history, []))

    for iteration in range(start_iteration, cfg.max_iterations):
        frame_interps: dict[str, list[list[Interpretation]]] = {}
        clip_rankings: dict[str, list[ClipInterpretation]] = {}
        targets: list[ClipActionTargets] = []
        for clip in clips:
            per_frame = _infer_clip(
                clip,
                space,
                grounded,
                graph,
                priors,
                params,
                transform,
                mode,
                schedule,
                top_k,
                affinities,
                substream(seed, "iter", iteration),
            )
            frame_interps[clip.clip_id] = per_frame
            clip_rankings[clip.clip_id] = clip_interpretations(per_frame, top_m)
            targets.append(temporal_smooth(clip.clip_id, per_frame, top_m, per_frame_a))

        agreement = math.nan
        assign = {
            clip_id: (r[0].action, r[0].object) for clip_id, r in clip_rankings.items()
        }
        if prev_assign is not None:
            matches = sum(1 for c, pair in assign.items() if prev_assign.get(c) == pair)
            agreement = matches / len(assign)
        prev_assign = assign

        try:
            all_samples = make_training_set(targets, feats, emb)
        except DataError as err:
            log.warning("iteration %d: degenerate training set (%s); stopping early", iteration, err)
            states.append(
                IterationState(
                    index=iteration,
                    frame_interps=frame_interps,
                    clip_rankings=clip_rankings,
                    targets=targets,
                    linmap=None,
                    priors_after=priors,
                    report=IterationReport(iteration, math.nan, agreement),
                )
            )
            if observer:
                observer(states[-1])
            break
        train_samples = [s for s in all_samples if s.action not in unseen]
        heldout_samples = [s for s in all_samples if s.action in unseen]
        if not train_samples:
            log.warning(
                "iteration %d: every target action is in the unseen list; stopping early",
                iteration,
            )
            states.append(
                IterationState(
                    index=iteration,
                    frame_interps=frame_interps,
                    clip_rankings=clip_rankings,
                    targets=targets,
                    linmap=None,
                    priors_after=priors,
                    report=IterationReport(iteration, math.nan, agreement),
                )
            )
            if observer:
                observer(states[-1])
            break

        iter_train_cfg = TrainConfig(
            epochs=train_cfg.epochs,
            batch_size=train_cfg.batch_size,
            learning_rate=train_cfg.learning_rate,
            seed=substream(seed, "train", iteration),
        )
        linmap, stats = train_map(train_samples, iter_train_cfg, heldout_samples)
        if heldout_samples:
            heldout_mse = min(s.heldout_mse for s in stats)
        else:
            heldout_mse = math.nan

        new_priors = ActionPriorTable()
        for clip in clips:
            probs = predict_actions(
                linmap, feats[clip.clip_id], space.actions, emb, temperature
            )
            for action, p in probs.items():
                new_priors.set(clip.clip_id, action, max(p, 1e-308))
        priors = new_priors

        report = IterationReport(iteration, heldout_mse, agreement)
        states.append(
            IterationState(
                index=iteration,
                frame_interps=frame_interps,
                clip_rankings=clip_rankings,
                targets=targets,
                linmap=linmap,
                priors_after=priors,
                report=report,
            )
        )
        if observer:
            observer(states[-1])

        prev_mse = mses[-1] if mses else math.inf
        mses.append(heldout_mse)
        if not math.isnan(heldout_mse):
            improvement = prev_mse - heldout_mse
            if improvement <= cfg.saturation_delta:
                log.info(
                    "iteration %d: held-out MSE improvement %.6g <= delta %.6g; saturated",
                    iteration,
                    improvement,
                    cfg.saturation_delta,
                )
                break

    if not states and not history:
        raise DataError("refine_loop produced no iterations (check start_iteration)")
    best_index = _best_iteration(history, states)
    return RefineResult(iterations=states, best_index=best_index)


def _best_iteration(
    history: Sequence[IterationReport], states: Sequence[IterationState]
) -> int:
    """Least held-out MSE across all completed iterations; final one if none measured."""
    reports = list(history) + [s.report for s in states]
    candidates = [
        (r.heldout_mse, r.index) for r in reports if not math.isnan(r.heldout_mse)
    ]
    if not candidates:
        return reports[-1].index
    return min(candidates)[1]


# -- zero-shot label mapping -------------------------------------------------


@dataclass(frozen=True)
class Label:
    label_id: str
    verb: str
    noun: str | None = None


class LabelSet:
    def __init__(self, labels: Sequence[Label]):
        if not labels:
            raise DataError("label set is empty")
        ids = [l.label_id for l in labels]
        if len(set(ids)) != len(ids):
            raise DataError("duplicate label ids in the label set")
        self.labels: tuple[Label, ...] = tuple(labels)

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self):
        return iter(self.labels)


def load_labels(path: str | Path) -> LabelSet:
    """Load a CSV with header label_id,verb,noun (noun may be empty)."""
    labels = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["label_id", "verb", "noun"]:
            raise DataError(f"{path}: expected header 'label_id,verb,noun'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            noun = canon_concept(row[2]) if row[2].strip() else None
            labels.append(Label(label_id=row[0], verb=canon_concept(row[1]), noun=noun))
    return LabelSet(labels)


def _pair_vector(verb: str, noun: str | None, emb: EmbeddingTable) -> np.ndarray | None:
    """Average of the verb and noun embeddings; None if either is missing."""
    v = emb.get(verb)
    if v is None:
        return None
    if noun is None:
        return v
    n = emb.get(noun)
    if n is None:
        return None
    return (v + n) / 2.0


def zero_shot_scores(
    interps: Sequence[ClipInterpretation],
    labels: LabelSet,
    emb: EmbeddingTable,
) -> dict[str, float]:
    """Similarity of a clip to every label: max cosine over interpretations."""
    vecs = []
    for it in interps:
        v = _pair_vector(it.action, it.object, emb)
        if v is None:
            log.warning("interpretation (%s, %s) skipped: missing embedding", it.action, it.object)
            continue
        norm = float(np.linalg.norm(v))
        if norm == 0.0:
            log.warning("interpretation (%s, %s) skipped: zero vector", it.action, it.object)
            continue
        vecs.append(v / norm)
    if not vecs:
        raise DataError("no interpretation could be embedded for zero-shot mapping")
    scores = {}
    for label in labels:
        lv = _pair_vector(label.verb, label.noun, emb)
        if lv is None:
            raise DataError(f"label {label.label_id!r} has concepts without embeddings")
        norm = float(np.linalg.norm(lv))
        if norm == 0.0:
            raise DataError(f"label {label.label_id!r} embeds to a zero vector")
        lv = lv / norm
        scores[label.label_id] = max(float(np.dot(v, lv)) for v in vecs)
    return scores


def zero_shot_map(
    interps: Sequence[ClipInterpretation],
    labels: LabelSet,
    emb: EmbeddingTable,
) -> tuple[str, float]:
    """Nearest label to the clip's interpretations in embedding space.

    Returns (label_id, cosine distance); distance = 1 - best similarity.
    Ties break by lexicographic label id.
    """
    scores = zero_shot_scores(interps, labels, emb)
    best_id = min(scores, key=lambda label_id: (1.0 - scores[label_id], label_id))
    return best_id, 1.0 - scores[best_id]
