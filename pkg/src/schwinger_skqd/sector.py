"""Fixed Hamming-weight basis with combinatorial-number-system ranking.

For bitstrings of a fixed weight, ascending integer order coincides with
colexicographic order of the set-bit positions, so the rank of a string
with set positions p_1 < p_2 < ... < p_w is sum_i C(p_i, i).
"""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations
from math import comb

import numpy as np

from .bits import popcount


@lru_cache(maxsize=None)
def _binomial_table(n: int) -> np.ndarray:
    table = np.zeros((n + 1, n + 2), dtype=np.int64)
    for p in range(n + 1):
        for c in range(n + 2):
            table[p, c] = comb(p, c)
    return table


class SectorBasis:
    """All ``n_sites``-bit strings of Hamming weight ``weight``, ascending."""

    def __init__(self, n_sites: int, weight: int | None = None):
        if weight is None:
            weight = n_sites // 2
        if not 0 <= weight <= n_sites:
            raise ValueError(f"weight {weight} out of range for {n_sites} sites")
        if n_sites > 62:
            raise ValueError("bitstrings are stored as int64")
        self.n_sites = n_sites
        self.weight = weight
        self._binom = _binomial_table(n_sites)
        self._states = None

    def __len__(self) -> int:
        return comb(self.n_sites, self.weight)

    @property
    def dim(self) -> int:
        return len(self)

    def __repr__(self):
        return f"SectorBasis(n_sites={self.n_sites}, weight={self.weight})"

    @property
    def states(self) -> np.ndarray:
        """Sorted int64 array of all member bitstrings (built lazily)."""
        if self._states is None:
            out = np.fromiter(
                (sum(1 << p for p in combo) for combo in combinations(range(self.n_sites), self.weight)),
                dtype=np.int64,
                count=len(self),
            )
            # combinations() is lexicographic in positions, not colex
            out.sort()
            self._states = out
        return self._states

    def rank(self, b):
        """Index of bitstring(s) ``b`` in the sorted basis."""
        arr = np.asarray(b, dtype=np.int64)
        if np.any(popcount(arr) != self.weight):
            raise ValueError("bitstring outside this weight sector")
        r = np.zeros(arr.shape, dtype=np.int64)
        seen = np.zeros(arr.shape, dtype=np.int64)
        for p in range(self.n_sites):
            bit = (arr >> p) & 1
            seen += bit
            r += bit * self._binom[p, seen]
        return int(r) if r.ndim == 0 else r

    def unrank(self, r):
        """Inverse of :meth:`rank`."""
        arr = np.asarray(r, dtype=np.int64)
        if np.any((arr < 0) | (arr >= len(self))):
            raise IndexError("rank out of range")
        rem = arr.copy()
        left = np.full(arr.shape, self.weight, dtype=np.int64)
        out = np.zeros(arr.shape, dtype=np.int64)
        for p in range(self.n_sites - 1, -1, -1):
            c = self._binom[p, left]
            take = (left > 0) & (c <= rem)
            out |= take.astype(np.int64) << p
            rem -= np.where(take, c, 0)
            left -= take
        return int(out) if out.ndim == 0 else out
