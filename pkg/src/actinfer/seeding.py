"""Deterministic seed substreams.

All randomness in a run flows from one root seed.  Named substreams keep
components independent: reordering frames or resuming a refinement loop
mid-way never shifts another component's random draws.
"""

from __future__ import annotations

import hashlib


def substream(root_seed: int, *tags: object) -> int:
    """Derive a child seed from a root seed and a tag path.

    Stable across processes and platforms (sha256 of the repr'd tag path).
    """
    text = repr((int(root_seed),) + tuple(str(t) for t in tags))
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")
