"""Concept identifiers and the relation registry.

Concepts are plain strings: lowercase, words joined by single underscores.
Relations are case-sensitive names drawn from a fixed registry; each carries
two flags deciding whether it counts as compositional when building
ego-graphs and when scoring action-object paths.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import DataError

_UNDERSCORE_RUN = re.compile(r"[\s_]+")


def canon_concept(text: str) -> str:
    """Canonicalize a concept label: strip, lowercase, single underscores."""
    cleaned = _UNDERSCORE_RUN.sub("_", text.strip().lower()).strip("_")
    if not cleaned:
        raise DataError(f"empty concept label: {text!r}")
    return cleaned


@dataclass(frozen=True)
class RelationKind:
    name: str
    compositional_for_egograph: bool
    compositional_for_affinity: bool


# Relations that express compositional properties of a concept.  Only these
# contribute neighbors to an ego-graph; the affinity set additionally drops
# SynonymOf because a synonym says nothing about affordances.
EGO_COMPOSITIONAL = frozenset({"IsA", "UsedFor", "HasProperty", "SynonymOf"})
AFFINITY_COMPOSITIONAL = frozenset({"UsedFor", "HasProperty", "IsA"})

# ConceptNet-style relation vocabulary.  Names are case-sensitive.
_RELATION_NAMES = (
    "Antonym",
    "AtLocation",
    "CapableOf",
    "Causes",
    "CausesDesire",
    "CreatedBy",
    "DefinedAs",
    "DerivedFrom",
    "Desires",
    "DistinctFrom",
    "Entails",
    "EtymologicallyDerivedFrom",
    "EtymologicallyRelatedTo",
    "FormOf",
    "HasA",
    "HasContext",
    "HasFirstSubevent",
    "HasLastSubevent",
    "HasPrerequisite",
    "HasProperty",
    "HasSubevent",
    "InstanceOf",
    "IsA",
    "LocatedNear",
    "MadeOf",
    "MannerOf",
    "MotivatedByGoal",
    "NotCapableOf",
    "NotDesires",
    "NotHasProperty",
    "PartOf",
    "ReceivesAction",
    "RelatedTo",
    "SimilarTo",
    "SymbolOf",
    "Synonym",
    "SynonymOf",
    "UsedFor",
)

RELATIONS: dict[str, RelationKind] = {
    name: RelationKind(
        name=name,
        compositional_for_egograph=name in EGO_COMPOSITIONAL,
        compositional_for_affinity=name in AFFINITY_COMPOSITIONAL,
    )
    for name in _RELATION_NAMES
}


def relation(name: str) -> RelationKind:
    """Look up a relation by its case-sensitive name."""
    try:
        return RELATIONS[name]
    except KeyError:
        raise DataError(f"unknown relation {name!r} (names are case-sensitive)") from None
