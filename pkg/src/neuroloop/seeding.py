"""Deterministic child-seed derivation.

A single master seed fans out to one stream per component so that adding
or reordering draws in one component never shifts another component's stream.
Derivation is hash-based (never Python's randomized ``hash()``).
"""

from __future__ import annotations

import hashlib

import numpy as np


def child_seed(master: int, name: str, index: int = 0) -> int:
    """Derive a 64-bit child seed from (master, component name, index)."""
    payload = f"{master}:{name}:{index}".encode()
    digest = hashlib.blake2b(payload, digest_size=8).digest()
    return int.from_bytes(digest, "little")


def child_rng(master: int, name: str, index: int = 0) -> np.random.Generator:
    """A numpy Generator seeded from :func:`child_seed`."""
    return np.random.default_rng(child_seed(master, name, index))
