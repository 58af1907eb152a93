"""Seed fan-out.

Every random decision in the toolkit flows from one top-level seed.  A
consumer derives its own independent stream by naming itself, e.g.
``derive_rng(seed, "segment", sample_id)`` or
``derive_rng(seed, "train", "shuffle", epoch)``.  Identical (seed, labels)
always yield the same stream, so concurrent or reordered work cannot change
results.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _label_key(label) -> int:
    # 64-bit stable hash; python's hash() is salted per process.
    digest = hashlib.sha256(str(label).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def derive_rng(seed: int, *labels) -> np.random.Generator:
    """Return a PCG64 generator for the stream named by ``labels``."""
    entropy = [int(seed)] + [_label_key(lab) for lab in labels]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def derive_seed(seed: int, *labels) -> int:
    """Collapse (seed, labels) into a plain integer seed for sub-configs."""
    entropy = [int(seed)] + [_label_key(lab) for lab in labels]
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])
