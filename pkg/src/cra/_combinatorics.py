"""Lexicographic k-subset ranking helpers shared by both kernel backends."""
from __future__ import annotations

from math import comb

import numpy as np


def unrank_combination(p, k, rank):
    """Return the k-subset of ``range(p)`` at lexicographic position ``rank``."""
    total = comb(p, k)
    if not 0 <= rank < max(total, 1):
        raise ValueError(f"rank {rank} out of range for C({p}, {k}) = {total}")
    out = np.empty(k, dtype=np.intp)
    x = 0
    for i in range(k):
        while True:
            c = comb(p - x - 1, k - i - 1)
            if rank < c:
                break
            rank -= c
            x += 1
        out[i] = x
        x += 1
    return out


def next_combination(combo, p):
    """Advance ``combo`` in place to its lexicographic successor.

    Returns False (leaving ``combo`` untouched) when it is already the last one.
    """
    k = combo.shape[0]
    i = k - 1
    while i >= 0 and combo[i] == p - k + i:
        i -= 1
    if i < 0:
        return False
    combo[i] += 1
    for j in range(i + 1, k):
        combo[j] = combo[j - 1] + 1
    return True
