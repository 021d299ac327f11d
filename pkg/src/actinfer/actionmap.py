"""Temporal smoothing and the visual-semantic action grounding map.

Frame-level rankings are consolidated into clip-level action targets;
a linear map from clip features to the 300-dim concept embedding space
is trained on those targets with MSE and plain mini-batch gradient
descent, then queried with cosine similarity to produce action priors.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .concepts import canon_concept
from .errors import DataError, TrainingError
from .inference import Interpretation

log = logging.getLogger(__name__)

EMBEDDING_DIM = 300


class EmbeddingTable:
    """Concept -> fixed-dimension semantic vector."""

    def __init__(self, vectors: Mapping[str, np.ndarray]):
        if not vectors:
            raise DataError("embedding table is empty")
        self._vectors: dict[str, np.ndarray] = {}
        self.dim: int | None = None
        for concept, vec in vectors.items():
            arr = np.asarray(vec, dtype=np.float64)
            if arr.ndim != 1 or arr.size == 0:
                raise DataError(f"embedding for {concept!r} must be a non-empty vector")
            if self.dim is None:
                self.dim = arr.size
            elif arr.size != self.dim:
                raise DataError(
                    f"embedding for {concept!r} has dimension {arr.size}, expected {self.dim}"
                )
            if not np.any(arr):
                raise DataError(f"embedding for {concept!r} is all zeros")
            self._vectors[concept] = arr

    def __contains__(self, concept: str) -> bool:
        return concept in self._vectors

    def __len__(self) -> int:
        return len(self._vectors)

    def __getitem__(self, concept: str) -> np.ndarray:
        try:
            return self._vectors[concept]
        except KeyError:
            raise DataError(f"concept {concept!r} has no embedding") from None

    def get(self, concept: str) -> np.ndarray | None:
        return self._vectors.get(concept)


def load_embeddings(path: str | Path, dim: int = EMBEDDING_DIM) -> EmbeddingTable:
    """Load 'concept v1 ... vN' rows (space-separated, N = dim)."""
    vectors: dict[str, np.ndarray] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != dim + 1:
                raise DataError(
                    f"{path}:{lineno}: expected 1 + {dim} fields, got {len(parts)}"
                )
            concept = canon_concept(parts[0])
            if concept in vectors:
                raise DataError(f"{path}:{lineno}: duplicate concept {concept!r}")
            try:
                vectors[concept] = np.array([float(v) for v in parts[1:]])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric embedding value") from None
    try:
        return EmbeddingTable(vectors)
    except DataError as err:
        raise DataError(f"{path}: {err}") from None


class FeatureTable:
    """Clip id -> fixed-dimension visual feature vector."""

    def __init__(self, vectors: Mapping[str, np.ndarray]):
        self._vectors: dict[str, np.ndarray] = {}
        self.dim: int | None = None
        for clip_id, vec in vectors.items():
            arr = np.asarray(vec, dtype=np.float64)
            if self.dim is None:
                self.dim = arr.size
            elif arr.size != self.dim:
                raise DataError(
                    f"feature for clip {clip_id!r} has dimension {arr.size}, expected {self.dim}"
                )
            self._vectors[clip_id] = arr

    def __contains__(self, clip_id: str) -> bool:
        return clip_id in self._vectors

    def __len__(self) -> int:
        return len(self._vectors)

    def __getitem__(self, clip_id: str) -> np.ndarray:
        try:
            return self._vectors[clip_id]
        except KeyError:
            raise DataError(f"clip {clip_id!r} has no feature vector") from None

    def clip_ids(self) -> list[str]:
        return list(self._vectors.keys())


def load_features(path: str | Path) -> FeatureTable:
    """Load a feature CSV with header clip_id,v1,...,vD."""
    vectors: dict[str, np.ndarray] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0].strip() != "clip_id":
            raise DataError(f"{path}: expected header 'clip_id,v1,...,vD'")
        dim = len(header) - 1
        if dim < 1:
            raise DataError(f"{path}: feature file carries no feature columns")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != dim + 1:
                raise DataError(f"{path}:{lineno}: expected {dim + 1} fields, got {len(row)}")
            clip_id = row[0]
            if clip_id in vectors:
                raise DataError(f"{path}:{lineno}: duplicate clip {clip_id!r}")
            try:
                vectors[clip_id] = np.array([float(v) for v in row[1:]])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric feature value") from None
    if not vectors:
        raise DataError(f"{path}: no feature rows")
    return FeatureTable(vectors)


# -- temporal consolidation -----------------------------------------------


@dataclass(frozen=True)
class ActionTarget:
    action: str
    energy: float  # consolidated (summed) energy across frames
    frames: int  # number of frames whose shortlist contained the action


@dataclass(frozen=True)
class ClipActionTargets:
    clip_id: str
    top_actions: tuple[ActionTarget, ...]


def temporal_smooth(
    clip_id: str,
    frame_interps: Sequence[Sequence[Interpretation]],
    top_m: int = 10,
    per_frame_a: int = 5,
) -> ClipActionTargets:
    """Consolidate per-frame rankings into the clip's top-5 action targets.

    Per frame: actions of the top_m interpretations, shortlisted to the
    per_frame_a most frequent (ties by lower summed energy, then name).
    Across frames: actions ranked by how many frame shortlists they
    appear in, ties by lower total energy, then name.  Energy totals use
    exact summation, so the result is invariant to frame order.
    """
    if not frame_interps:
        raise DataError("temporal_smooth needs at least one frame")
    frame_hits: dict[str, int] = {}
    energy_parts: dict[str, list[float]] = {}
    for interps in frame_interps:
        if not interps:
            raise DataError("every frame needs at least one interpretation")
        head = interps[:top_m]
        count: dict[str, int] = {}
        esum: dict[str, list[float]] = {}
        for it in head:
            count[it.action] = count.get(it.action, 0) + 1
            esum.setdefault(it.action, []).append(it.energy)
        shortlist = sorted(
            count, key=lambda a: (-count[a], math.fsum(esum[a]), a)
        )[:per_frame_a]
        for a in shortlist:
            frame_hits[a] = frame_hits.get(a, 0) + 1
            energy_parts.setdefault(a, []).extend(esum[a])
    totals = {a: math.fsum(parts) for a, parts in energy_parts.items()}
    ranked = sorted(frame_hits, key=lambda a: (-frame_hits[a], totals[a], a))[:5]
    return ClipActionTargets(
        clip_id=clip_id,
        top_actions=tuple(
            ActionTarget(action=a, energy=totals[a], frames=frame_hits[a]) for a in ranked
        ),
    )


@dataclass(frozen=True)
class ClipInterpretation:
    action: str
    object: str
    frames: int
    energy: float


def clip_interpretations(
    frame_interps: Sequence[Sequence[Interpretation]],
    top_m: int = 10,
) -> list[ClipInterpretation]:
    """Clip-level (action, object) ranking by frame frequency, then energy."""
    if not frame_interps:
        raise DataError("clip_interpretations needs at least one frame")
    freq: dict[tuple[str, str], int] = {}
    energy_parts: dict[tuple[str, str], list[float]] = {}
    for interps in frame_interps:
        for it in interps[:top_m]:
            key = (it.object, it.action)
            freq[key] = freq.get(key, 0) + 1
            energy_parts.setdefault(key, []).append(it.energy)
    totals = {k: math.fsum(parts) for k, parts in energy_parts.items()}
    ranked = sorted(freq, key=lambda k: (-freq[k], totals[k], k))
    return [
        ClipInterpretation(action=a, object=o, frames=freq[(o, a)], energy=totals[(o, a)])
        for o, a in ranked
    ]


# -- training --------------------------------------------------------------


@dataclass(frozen=True)
class Sample:
    clip_id: str
    action: str
    x: np.ndarray
    y: np.ndarray


@dataclass
class LinearMap:
    """Affine projection from feature space to the embedding space."""

    weights: np.ndarray  # (D, K)
    bias: np.ndarray  # (K,)

    def __post_init__(self) -> None:
        if self.weights.ndim != 2 or self.bias.ndim != 1:
            raise DataError("linear map needs a 2-D weight matrix and 1-D bias")
        if self.weights.shape[1] != self.bias.shape[0]:
            raise DataError(
                f"weight columns {self.weights.shape[1]} != bias size {self.bias.shape[0]}"
            )

    def project(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x) @ self.weights + self.bias

    def save(self, path: str | Path) -> None:
        d, k = self.weights.shape
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{d} {k}\n")
            for row in self.weights:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")
            fh.write(" ".join(repr(float(v)) for v in self.bias) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "LinearMap":
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln for ln in (l.strip() for l in fh) if ln]
        try:
            d, k = (int(v) for v in lines[0].split())
            rows = [[float(v) for v in ln.split()] for ln in lines[1:]]
        except (ValueError, IndexError):
            raise DataError(f"{path}: malformed linear-map file") from None
        if len(rows) != d + 1 or any(len(r) != k for r in rows):
            raise DataError(f"{path}: linear-map payload does not match header {d} {k}")
        return cls(weights=np.array(rows[:d]), bias=np.array(rows[d]))


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 256
    learning_rate: float = 1e-3
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1 or self.batch_size < 1 or self.learning_rate <= 0:
            raise DataError("epochs, batch_size, learning_rate must all be positive")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_mse: float
    heldout_mse: float  # nan when no heldout samples exist


def mse_loss(weights: np.ndarray, bias: np.ndarray, x: np.ndarray, y: np.ndarray) -> float:
    """Mean squared error over all elements of the residual matrix."""
    r = x @ weights + bias - y
    return float(np.mean(r * r))


def mse_grad(
    weights: np.ndarray, bias: np.ndarray, x: np.ndarray, y: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Analytic gradient of mse_loss w.r.t. weights and bias."""
    r = x @ weights + bias - y
    scale = 2.0 / r.size
    return scale * (x.T @ r), scale * r.sum(axis=0)


def _stack(samples: Sequence[Sample]) -> tuple[np.ndarray, np.ndarray]:
    x = np.stack([s.x for s in samples])
    y = np.stack([s.y for s in samples])
    return x, y


def train_map(
    samples: Sequence[Sample],
    cfg: TrainConfig,
    heldout: Sequence[Sample] = (),
) -> tuple[LinearMap, list[EpochStats]]:
    """Mini-batch gradient descent on MSE; returns the best epoch's map.

    Shuffling and initialization are seeded, so training is
    bit-deterministic given (samples, cfg).  Model selection minimizes
    heldout MSE, falling back to train MSE when no heldout samples are
    given.
    """
    if not samples:
        raise DataError("train_map needs at least one sample")
    x, y = _stack(samples)
    n, d = x.shape
    k = y.shape[1]
    xh, yh = _stack(heldout) if heldout else (None, None)
    rng = np.random.default_rng(cfg.seed)
    bound = 1.0 / math.sqrt(d)
    weights = rng.uniform(-bound, bound, size=(d, k))
    bias = np.zeros(k)
    stats: list[EpochStats] = []
    best_key = math.inf
    best = (weights.copy(), bias.copy())
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            dw, db = mse_grad(weights, bias, x[idx], y[idx])
            weights = weights - cfg.learning_rate * dw
            bias = bias - cfg.learning_rate * db
        train_mse = mse_loss(weights, bias, x, y)
        if not math.isfinite(train_mse):
            raise TrainingError(
                f"training diverged at epoch {epoch}: train MSE = {train_mse}; "
                f"lower the learning rate (currently {cfg.learning_rate})"
            )
        heldout_mse = mse_loss(weights, bias, xh, yh) if xh is not None else math.nan
        stats.append(EpochStats(epoch=epoch, train_mse=train_mse, heldout_mse=heldout_mse))
        key = heldout_mse if xh is not None else train_mse
        if key < best_key:
            best_key = key
            best = (weights.copy(), bias.copy())
    return LinearMap(weights=best[0], bias=best[1]), stats


def make_training_set(
    targets: Sequence[ClipActionTargets],
    feats: FeatureTable,
    emb: EmbeddingTable,
) -> list[Sample]:
    """One (feature, embedding) sample per (clip, target action) pair."""
    samples: list[Sample] = []
    for t in targets:
        x = feats[t.clip_id]
        for at in t.top_actions:
            y = emb.get(at.action)
            if y is None:
                log.warning(
                    "target action %r of clip %r has no embedding; sample dropped",
                    at.action,
                    t.clip_id,
                )
                continue
            samples.append(Sample(clip_id=t.clip_id, action=at.action, x=x, y=y))
    if not samples:
        raise DataError("no valid training samples (embeddings missing for every target)")
    return samples


# -- prediction ------------------------------------------------------------


def predict_actions(
    linmap: LinearMap,
    feature: np.ndarray,
    actions: Sequence[str],
    emb: EmbeddingTable,
    temperature: float = 0.1,
) -> dict[str, float]:
    """Action probabilities from cosine similarity in embedding space.

    The clip feature is projected, compared to each action's embedding,
    and the similarities pass through a temperature softmax.  A zero-norm
    projection degrades to the uniform distribution.
    """
    if temperature <= 0:
        raise DataError(f"temperature must be positive, got {temperature}")
    if not actions:
        raise DataError("predict_actions needs at least one action")
    z = linmap.project(feature)
    nz = float(np.linalg.norm(z))
    if nz == 0.0:
        log.warning("projected feature has zero norm; returning uniform action priors")
        return {a: 1.0 / len(actions) for a in actions}
    sims = np.array([float(np.dot(z, emb[a]) / (nz * np.linalg.norm(emb[a]))) for a in actions])
    logits = sims / temperature
    logits -= logits.max()
    weights = np.exp(logits)
    probs = weights / weights.sum()
    return {a: float(p) for a, p in zip(actions, probs)}


def word_similarity(a: str, b: str, emb: EmbeddingTable) -> float:
    """Cosine similarity of two concept embeddings."""
    va = emb[a]
    vb = emb[b]
    return float(np.dot(va, vb) / (np.linalg.norm(va) * np.linalg.norm(vb)))
