"""Counter-based keyed randomness.

Every random draw in the harness comes from a generator keyed by a tag built
from the run seed plus the operation's identifying inputs. There is no global
RNG state, so results are reproducible under any concurrency schedule.
"""

from __future__ import annotations

import hashlib

import numpy as np

_SEPARATOR = "\x1f"


def stream_tag(*parts) -> str:
    """Canonical tag string for a keyed stream."""
    return _SEPARATOR.join(str(p) for p in parts)


def keyed_rng(*parts) -> np.random.Generator:
    """Deterministic Philox generator keyed by the given parts.

    The key is the first 128 bits of SHA-256 over the joined parts, so equal
    parts always yield identical streams and distinct parts collide only with
    cryptographically negligible probability.
    """
    digest = hashlib.sha256(stream_tag(*parts).encode("utf-8")).digest()
    key = np.frombuffer(digest[:16], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
