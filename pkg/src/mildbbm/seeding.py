"""Deterministic per-replicate seeds.

A replicate's stream depends only on ``(master, index)``, never on which
worker ran it or in what order, so results are identical for any thread
count.
"""
from __future__ import annotations

import numpy as np


def derive_seed(master: int, index: int, *path: int) -> int:
    """64-bit seed for replicate ``index`` (plus optional sub-stream ``path``).

    Hashes the tuple through :class:`numpy.random.SeedSequence`, whose mixing
    function makes nearby keys produce unrelated seeds.  The key length is
    appended because SeedSequence ignores trailing zero words, which would
    otherwise make ``(m, i)`` and ``(m, i, 0)`` collide.
    """
    if master < 0 or index < 0 or any(p < 0 for p in path):
        raise ValueError("seed components must be non-negative")
    key = [int(master), int(index), *map(int, path)]
    ss = np.random.SeedSequence(key + [len(key)])
    return int(ss.generate_state(1, np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator (Philox) for a derived seed."""
    return np.random.Generator(np.random.Philox(int(seed)))
