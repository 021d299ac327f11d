"""Deterministic stub oracle: pseudo-random outputs from hashing.

Stub values depend only on (seed, frame/clip id, concept), so repeated
runs, resumed runs, and parallel runs all emit identical files.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _hash64(*parts: object) -> int:
    text = "|".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")


def stub_probability(seed: int, frame_id: str, concept: str) -> float:
    """Uniform [0, 1) probability keyed by (seed, frame, concept)."""
    return _hash64("likelihood", seed, frame_id, concept) / 2.0**64


def stub_feature(seed: int, clip_id: str, dim: int) -> np.ndarray:
    """Standard-normal feature vector keyed by (seed, clip)."""
    rng = np.random.default_rng(_hash64("feature", seed, clip_id))
    return rng.standard_normal(dim)
