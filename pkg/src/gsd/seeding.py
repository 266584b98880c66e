"""Seed derivation.

Every stochastic phase draws from its own generator, derived by hashing the
master seed together with a phase name. Phases therefore never share a
stream, and adding draws to one phase cannot shift another.
"""
import hashlib

import numpy as np


def derive_seed(seed, phase):
    """Return a 64-bit integer seed for ``phase`` under master ``seed``."""
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise TypeError(f"seed must be an integer, got {seed!r}")
    if seed < 0:
        raise ValueError("seed must be non-negative")
    digest = hashlib.blake2b(f"{int(seed)}/{phase}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def substream(seed, phase):
    """Generator dedicated to one phase of a seeded computation."""
    return np.random.default_rng(derive_seed(seed, phase))
