"""Deterministic sub-seed derivation.

One experiment seed fans out into per-model / per-tree / per-fold streams.
Derivation hashes the (seed, *tags) tuple with SHA-256 so it is stable
across processes and interpreter runs (unlike ``hash``).
"""
from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(root: int, *tags) -> int:
    """Derive a 63-bit sub-seed from a root seed and a tag path."""
    h = hashlib.sha256()
    h.update(str(int(root)).encode())
    for tag in tags:
        h.update(b"/")
        h.update(str(tag).encode())
    return int.from_bytes(h.digest()[:8], "big") >> 1


def derive_rng(root: int, *tags) -> np.random.Generator:
    return np.random.default_rng(derive_seed(root, *tags))
