"""Energy-based activity inference.

Every (action, object) hypothesis becomes a configuration: the grounded
object generator bonded to its evidence generators, the action generator,
and any intermediate concepts along the best knowledge path.  The energy
is the sum of negative log probabilities of the three components; the
least-energy configuration wins.  Search is exhaustive (exact) or a
Metropolis chain with geometric cooling.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from . import _kernels
from .errors import DataError, UsageError
from .grounding import GroundedScore, SearchSpace
from .kgraph import AffinityParams, EgoGraph, KnowledgeGraph, KPath

GeneratorKind = str  # grounded_object | ungrounded_evidence | action | affinity_node


@dataclass(frozen=True)
class Generator:
    concept: str
    kind: GeneratorKind


@dataclass(frozen=True)
class Bond:
    source: Generator
    target: Generator
    label: str
    weight: float

    def __post_init__(self) -> None:
        if self.source == self.target:
            raise DataError("bond endpoints must be distinct generators")


@dataclass
class Configuration:
    object: Generator
    action: Generator
    evidence: tuple[Generator, ...]
    affinity_path: tuple[Generator, ...]
    bonds: tuple[Bond, ...]
    energy: float | None = None


@dataclass(frozen=True)
class EnergyTransform:
    """phi(p) = -ln(max(p, epsilon)); additive energies, phi(1) = 0."""

    epsilon: float = 1e-6

    def __post_init__(self) -> None:
        if self.epsilon <= 0:
            raise DataError(f"epsilon must be positive, got {self.epsilon}")

    def __call__(self, p: float) -> float:
        return -math.log(max(p, self.epsilon))


@dataclass(frozen=True)
class AnnealSchedule:
    """Staged geometric cooling: T_i = t0 * alpha^i over cooling_steps
    rungs, each held for iterations / cooling_steps proposals."""

    t0: float = 1.0
    alpha: float = 0.95
    iterations: int = 2000
    seed: int = 0
    cooling_steps: int = 100

    def __post_init__(self) -> None:
        if self.t0 <= 0:
            raise DataError(f"t0 must be positive, got {self.t0}")
        if not 0.0 < self.alpha < 1.0:
            raise DataError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.iterations < 1:
            raise DataError(f"iterations must be >= 1, got {self.iterations}")
        if self.cooling_steps < 1:
            raise DataError(f"cooling_steps must be >= 1, got {self.cooling_steps}")

    @property
    def stage_length(self) -> int:
        return max(self.iterations // self.cooling_steps, 1)


class ActionPriorTable:
    """Per-scope action priors in (0, 1]; anything unset defaults to 1."""

    def __init__(self, entries: Mapping[tuple[str, str], float] | None = None):
        self._entries: dict[tuple[str, str], float] = {}
        if entries:
            for (scope, action), prob in entries.items():
                self.set(scope, action, prob)

    def set(self, scope: str, action: str, prob: float) -> None:
        if not 0.0 < prob <= 1.0:
            raise DataError(f"prior for ({scope}, {action}) must be in (0, 1], got {prob}")
        self._entries[(scope, action)] = prob

    def get(self, scope: str, action: str) -> float:
        return self._entries.get((scope, action), 1.0)

    def __len__(self) -> int:
        return len(self._entries)

    def items(self):
        return self._entries.items()

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["scope_id", "action", "probability"])
            for (scope, action), prob in sorted(self._entries.items()):
                writer.writerow([scope, action, repr(float(prob))])

    @classmethod
    def load(cls, path: str | Path) -> "ActionPriorTable":
        table = cls()
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["scope_id", "action", "probability"]:
                raise DataError(f"{path}: expected header 'scope_id,action,probability'")
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != 3:
                    raise DataError(f"{path}:{lineno}: expected 3 fields")
                try:
                    table.set(row[0], row[1], float(row[2]))
                except (ValueError, DataError) as err:
                    raise DataError(f"{path}:{lineno}: {err}") from None
        return table


@dataclass(frozen=True)
class Interpretation:
    frame: str
    action: str
    object: str
    energy: float
    grounded_score: float
    affinity: float
    affinity_norm: float  # normalizer: sum of the object's affinities over actions
    action_prior: float

    def to_record(self) -> dict:
        return {
            "action": self.action,
            "object": self.object,
            "energy": self.energy,
            "grounded_score": self.grounded_score,
            "affinity": self.affinity,
            "affinity_norm": self.affinity_norm,
            "action_prior": self.action_prior,
        }


def build_configuration(
    obj: str,
    action: str,
    ego: EgoGraph,
    path: KPath | None = None,
) -> Configuration:
    """Assemble the generator/bond structure for one hypothesis.

    The grounded object is bonded to one evidence generator per ego
    neighbor; the action connects to the object along the knowledge path
    (intermediate nodes become affinity generators), or by a bare
    hypothesis bond when no path exists.
    """
    if ego.center != obj:
        raise DataError(f"ego-graph center {ego.center!r} does not match object {obj!r}")
    obj_gen = Generator(concept=obj, kind="grounded_object")
    act_gen = Generator(concept=action, kind="action")
    evidence = tuple(
        Generator(concept=nb.evidence, kind="ungrounded_evidence") for nb in ego.neighbors
    )
    bonds = [
        Bond(source=obj_gen, target=ev, label=nb.relation.name, weight=nb.weight)
        for ev, nb in zip(evidence, ego.neighbors)
    ]
    affinity_path: tuple[Generator, ...] = ()
    if path is not None and path.hop_count > 0:
        inner = path.nodes[1:-1]
        affinity_path = tuple(Generator(concept=c, kind="affinity_node") for c in inner)
        chain = [act_gen, *affinity_path, obj_gen]
        for (a, b), edge in zip(zip(chain, chain[1:]), path.edges):
            bonds.append(Bond(source=a, target=b, label=edge.relation.name, weight=edge.weight))
    else:
        bonds.append(Bond(source=obj_gen, target=act_gen, label="hypothesis", weight=0.0))
    return Configuration(
        object=obj_gen,
        action=act_gen,
        evidence=evidence,
        affinity_path=affinity_path,
        bonds=tuple(bonds),
    )


def energy(
    grounded_score: float,
    affinity: float,
    action_prior: float,
    transform: EnergyTransform | None = None,
    affinity_normalizer: float = 1.0,
) -> float:
    """Configuration energy: phi(grounded) + phi(affinity/normalizer) + phi(prior)."""
    transform = transform or EnergyTransform()
    if affinity_normalizer <= 0:
        raise DataError(f"affinity_normalizer must be positive, got {affinity_normalizer}")
    return (
        transform(grounded_score)
        + transform(affinity / affinity_normalizer)
        + transform(action_prior)
    )


def configuration_energy(
    cfg: Configuration,
    grounded: GroundedScore,
    affinity: float,
    action_prior: float,
    transform: EnergyTransform | None = None,
    affinity_normalizer: float = 1.0,
) -> float:
    """Score a configuration and record the energy on it."""
    value = energy(grounded.score, affinity, action_prior, transform, affinity_normalizer)
    cfg.energy = value
    return value


@dataclass
class EnergyTable:
    """Precomputed per-frame energies over the (object, action) lattice."""

    objects: list[str]
    actions: list[str]
    energies: np.ndarray  # (n_obj, n_act)
    grounded: dict[str, GroundedScore]
    affinities: np.ndarray  # (n_obj, n_act), raw path scores
    normalizers: np.ndarray  # (n_obj,)
    priors: np.ndarray  # (n_obj, n_act) after scope lookup

    def interpretation(self, frame: str, i: int, j: int) -> Interpretation:
        obj = self.objects[i]
        act = self.actions[j]
        return Interpretation(
            frame=frame,
            action=act,
            object=obj,
            energy=float(self.energies[i, j]),
            grounded_score=self.grounded[obj].score,
            affinity=float(self.affinities[i, j]),
            affinity_norm=float(self.normalizers[i]),
            action_prior=float(self.priors[i, j]),
        )


def build_energy_table(
    space: SearchSpace,
    frame: str,
    grounded: dict[str, GroundedScore],
    graph: KnowledgeGraph,
    priors: ActionPriorTable,
    params: AffinityParams | None = None,
    transform: EnergyTransform | None = None,
    affinities: np.ndarray | None = None,
    prior_scope: str | None = None,
) -> EnergyTable:
    """Score every (object, action) pair for one frame.

    `affinities` may carry a precomputed matrix from
    KnowledgeGraph.affinity_matrix (it is frame-independent).
    `prior_scope` is the id used for prior lookups (the frame's clip);
    defaults to the frame id itself.
    """
    params = params or AffinityParams()
    transform = transform or EnergyTransform()
    scope = prior_scope if prior_scope is not None else frame
    for obj in space.objects:
        if obj not in grounded:
            raise DataError(f"no grounded score for object {obj!r} in frame {frame!r}")
    if affinities is None:
        affinities = graph.affinity_matrix(space.actions, space.objects, params)
    n_obj, n_act = len(space.objects), len(space.actions)
    if affinities.shape != (n_obj, n_act):
        raise DataError(
            f"affinity matrix shape {affinities.shape} does not match space ({n_obj}, {n_act})"
        )
    normalizers = affinities.sum(axis=1)
    normalizers[normalizers <= 0.0] = 1.0
    priors_arr = np.ones((n_obj, n_act))
    for j, act in enumerate(space.actions):
        p = priors.get(scope, act)
        for i in range(n_obj):
            priors_arr[i, j] = p
    energies = np.zeros((n_obj, n_act))
    for i, obj in enumerate(space.objects):
        gs = grounded[obj].score
        for j in range(n_act):
            energies[i, j] = energy(
                gs,
                float(affinities[i, j]),
                float(priors_arr[i, j]),
                transform,
                float(normalizers[i]),
            )
    return EnergyTable(
        objects=list(space.objects),
        actions=list(space.actions),
        energies=energies,
        grounded=grounded,
        affinities=affinities,
        normalizers=normalizers,
        priors=priors_arr,
    )


def _ranked(table: EnergyTable, frame: str, pairs: Iterable[tuple[int, int]], k: int):
    interps = [table.interpretation(frame, i, j) for i, j in pairs]
    interps.sort(key=lambda it: (it.energy, it.object, it.action))
    return interps[:k]


def infer_exhaustive(
    space: SearchSpace,
    frame: str,
    grounded: dict[str, GroundedScore],
    graph: KnowledgeGraph,
    priors: ActionPriorTable,
    params: AffinityParams | None = None,
    k: int = 10,
    transform: EnergyTransform | None = None,
    affinities: np.ndarray | None = None,
    prior_scope: str | None = None,
) -> list[Interpretation]:
    """Exact least-energy ranking over every (action, object) pair."""
    if k < 1:
        raise UsageError(f"k must be >= 1, got {k}")
    table = build_energy_table(
        space, frame, grounded, graph, priors, params, transform, affinities, prior_scope
    )
    pairs = [(i, j) for i in range(len(table.objects)) for j in range(len(table.actions))]
    return _ranked(table, frame, pairs, k)


def infer_mcmc(
    space: SearchSpace,
    frame: str,
    grounded: dict[str, GroundedScore],
    graph: KnowledgeGraph,
    priors: ActionPriorTable,
    schedule: AnnealSchedule,
    params: AffinityParams | None = None,
    k: int = 10,
    transform: EnergyTransform | None = None,
    affinities: np.ndarray | None = None,
    prior_scope: str | None = None,
) -> list[Interpretation]:
    """Simulated-annealing search; returns the k best distinct states visited.

    The chain starts at a seeded random state and flips one coordinate
    (object or action) per proposal; acceptance follows
    min(1, exp((E_cur - E_prop) / T)) with the T_i = t0 * alpha^i ladder
    advancing every schedule.stage_length proposals.  Deterministic given
    schedule.seed.
    """
    if k < 1:
        raise UsageError(f"k must be >= 1, got {k}")
    table = build_energy_table(
        space, frame, grounded, graph, priors, params, transform, affinities, prior_scope
    )
    rng = np.random.default_rng(schedule.seed)
    u_init = rng.random(2)
    u_steps = rng.random((schedule.iterations, 3))
    visited = _kernels.anneal_scan(
        table.energies, schedule.t0, schedule.alpha, schedule.stage_length, u_init, u_steps
    )
    pairs = [(int(i), int(j)) for i, j in zip(*np.nonzero(visited))]
    return _ranked(table, frame, pairs, k)
