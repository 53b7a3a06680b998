"""Bitstring conventions.

A bitstring is a plain Python ``int`` (or an ``int64`` numpy array of them).
Bit ``n`` is lattice site ``n``.  A set bit is the qubit state ``|1>`` and
has Z eigenvalue -1; a clear bit is ``|0>`` with Z eigenvalue +1.  Labels
are written most-significant site first, ``q_{N-1} ... q_1 q_0``, so the
label ``"0011"`` has sites 0 and 1 occupied.
"""

from __future__ import annotations

import numpy as np


def label(b: int, n_sites: int) -> str:
    """Render ``b`` as an ``n_sites`` wide label ``q_{N-1}...q_0``."""
    b = int(b)
    if b < 0 or b >> n_sites:
        raise ValueError(f"bitstring {b} does not fit in {n_sites} sites")
    return format(b, f"0{n_sites}b")


def parse(text: str, n_sites: int | None = None) -> int:
    text = text.strip()
    if text.startswith("|") and text.endswith(">"):
        text = text[1:-1]
    if not text or set(text) - {"0", "1"}:
        raise ValueError(f"not a bitstring label: {text!r}")
    if n_sites is not None and len(text) != n_sites:
        raise ValueError(f"label {text!r} has {len(text)} sites, expected {n_sites}")
    return int(text, 2)


def weight(b: int) -> int:
    return int(b).bit_count()


def z_values(b: int, n_sites: int) -> list[int]:
    """Z eigenvalues ``[z_0, ..., z_{N-1}]`` of a basis state."""
    return [-1 if (b >> n) & 1 else 1 for n in range(n_sites)]


def bit_matrix(states, n_sites: int) -> np.ndarray:
    """``(len(states), n_sites)`` array of 0/1 occupations, column ``n`` = site ``n``."""
    states = np.asarray(states, dtype=np.int64)
    return ((states[:, None] >> np.arange(n_sites, dtype=np.int64)) & 1).astype(np.int8)


def alternating(n_sites: int, first: int) -> int:
    """Pattern with bit ``first`` set on site 0 and alternating from there.

    ``alternating(N, 1)`` is ``|01...01>`` (even sites set) and
    ``alternating(N, 0)`` is ``|10...10>`` (odd sites set).
    """
    start = 0 if first else 1
    return sum(1 << n for n in range(start, n_sites, 2))


def popcount(states) -> np.ndarray:
    states = np.asarray(states, dtype=np.int64)
    out = np.zeros(states.shape, dtype=np.int64)
    s = states.copy()
    while np.any(s):
        out += s & 1
        s >>= 1
    return out
