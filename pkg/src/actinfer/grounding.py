"""Evidence-based object grounding.

Per frame, each candidate object's oracle likelihood is reweighted by the
support its compositional evidence concepts receive from the same oracle,
with knowledge-graph edge weights acting as priors.  Evidence sums are
normalized across the candidate object space so the grounded score stays
a probability.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .concepts import canon_concept
from .errors import DataError
from .kgraph import EgoGraph, KnowledgeGraph

log = logging.getLogger(__name__)


class LikelihoodTable:
    """Per-frame oracle probabilities for concepts."""

    def __init__(self, entries: Iterable[tuple[str, str, float]]):
        self.frames: list[str] = []
        self._frame_set: set[str] = set()
        self._entries: dict[tuple[str, str], float] = {}
        for frame, concept, prob in entries:
            if not 0.0 <= prob <= 1.0:
                raise DataError(
                    f"probability {prob} for ({frame}, {concept}) outside [0, 1]"
                )
            key = (frame, concept)
            if key in self._entries:
                raise DataError(f"duplicate likelihood row for frame {frame!r}, concept {concept!r}")
            self._entries[key] = prob
            if frame not in self._frame_set:
                self._frame_set.add(frame)
                self.frames.append(frame)

    def __len__(self) -> int:
        return len(self._entries)

    def has_frame(self, frame: str) -> bool:
        return frame in self._frame_set

    def prob(self, frame: str, concept: str) -> float | None:
        return self._entries.get((frame, concept))


def load_likelihoods(path: str | Path) -> LikelihoodTable:
    """Load a likelihood CSV with header frame_id,concept,probability."""
    entries = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["frame_id", "concept", "probability"]:
            raise DataError(f"{path}: expected header 'frame_id,concept,probability'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            frame, concept_raw, prob_raw = row
            try:
                prob = float(prob_raw)
            except ValueError:
                raise DataError(f"{path}:{lineno}: probability {prob_raw!r} is not a number") from None
            if not 0.0 <= prob <= 1.0:
                raise DataError(f"{path}:{lineno}: probability {prob_raw!r} outside [0, 1]")
            entries.append((frame, canon_concept(concept_raw), prob))
    try:
        return LikelihoodTable(entries)
    except DataError as err:
        raise DataError(f"{path}: {err}") from None


@dataclass(frozen=True)
class EvidenceTerm:
    evidence: str
    relation: str
    prior_weight: float
    likelihood: float  # 0.0 when the oracle never scored the concept
    contribution: float


@dataclass(frozen=True)
class GroundedScore:
    object: str
    frame: str
    score: float
    oracle_likelihood: float
    evidence_sum: float
    normalized_evidence: float
    evidence_breakdown: tuple[EvidenceTerm, ...] = field(default=())


@dataclass
class SearchSpace:
    """Candidate objects and actions the engine reasons over."""

    objects: list[str]
    actions: list[str]

    def __post_init__(self) -> None:
        for name, values in (("object", self.objects), ("action", self.actions)):
            if not values:
                raise DataError(f"{name} search space is empty")
            if len(set(values)) != len(values):
                raise DataError(f"duplicate concepts in the {name} search space")

    def resolve(self, graph: KnowledgeGraph) -> "SearchSpace":
        """Drop concepts missing from the graph, warning for each."""
        kept_obj = [o for o in self.objects if o in graph]
        kept_act = [a for a in self.actions if a in graph]
        for dropped in sorted(set(self.objects) - set(kept_obj)):
            log.warning("object %r not in the knowledge graph; dropped", dropped)
        for dropped in sorted(set(self.actions) - set(kept_act)):
            log.warning("action %r not in the knowledge graph; dropped", dropped)
        return SearchSpace(objects=kept_obj, actions=kept_act)


def load_concept_list(path: str | Path) -> list[str]:
    """One concept per line; blank lines and '#' comments ignored."""
    concepts = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            concepts.append(canon_concept(line))
    return concepts


def load_search_space(objects_path: str | Path, actions_path: str | Path) -> SearchSpace:
    return SearchSpace(
        objects=load_concept_list(objects_path),
        actions=load_concept_list(actions_path),
    )


def evidence_terms(
    obj: str, ego: EgoGraph, frame: str, table: LikelihoodTable
) -> tuple[EvidenceTerm, ...]:
    """Per-neighbor contributions; missing oracle entries contribute 0."""
    if ego.center != obj:
        raise DataError(f"ego-graph center {ego.center!r} does not match object {obj!r}")
    terms = []
    for nb in ego.neighbors:
        likelihood = table.prob(frame, nb.evidence)
        if likelihood is None:
            log.warning(
                "no oracle likelihood for evidence %r in frame %r; contributes 0",
                nb.evidence,
                frame,
            )
            likelihood = 0.0
        terms.append(
            EvidenceTerm(
                evidence=nb.evidence,
                relation=nb.relation.name,
                prior_weight=nb.weight,
                likelihood=likelihood,
                contribution=nb.weight * likelihood,
            )
        )
    return tuple(terms)


def evidence_sum(obj: str, ego: EgoGraph, frame: str, table: LikelihoodTable) -> float:
    """Knowledge-weighted oracle support for an object's evidence concepts."""
    total = 0.0
    for term in evidence_terms(obj, ego, frame, table):
        total += term.contribution
    return total


def ground_frame(
    space: SearchSpace,
    frame: str,
    table: LikelihoodTable,
    graph: KnowledgeGraph,
) -> dict[str, GroundedScore]:
    """Grounded score for every candidate object in one frame.

    score = oracle_likelihood * normalized_evidence, where evidence sums
    are normalized across the candidate objects (uniform when all are 0).
    """
    if not table.has_frame(frame):
        raise DataError(f"frame {frame!r} not present in the likelihood table")
    sums: list[float] = []
    breakdowns: list[tuple[EvidenceTerm, ...]] = []
    for obj in space.objects:
        ego = graph.ego_graph(obj)
        terms = evidence_terms(obj, ego, frame, table)
        breakdowns.append(terms)
        sums.append(sum(t.contribution for t in terms))
    denom = sum(sums)
    out: dict[str, GroundedScore] = {}
    for obj, ev_sum, terms in zip(space.objects, sums, breakdowns):
        if denom > 0.0:
            norm = ev_sum / denom
        else:
            norm = 1.0 / len(space.objects)
        oracle = table.prob(frame, obj)
        if oracle is None:
            log.warning("no oracle likelihood for object %r in frame %r; treated as 0", obj, frame)
            oracle = 0.0
        out[obj] = GroundedScore(
            object=obj,
            frame=frame,
            score=oracle * norm,
            oracle_likelihood=oracle,
            evidence_sum=ev_sum,
            normalized_evidence=norm,
            evidence_breakdown=terms,
        )
    return out
