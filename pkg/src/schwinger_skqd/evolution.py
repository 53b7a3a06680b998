"""Kinetic-only Trotter evolution restricted to the zero-charge sector.

One Trotter step applies exp(i dt/4 (X_n X_{n+1} + Y_n Y_{n+1})) for
n = 0, 1, ..., N-2 in that order.  Each gate only mixes the pair
(...01..., ...10...) on sites n, n+1, so it never leaves the sector and
is applied as a 2x2 rotation on precomputed index pairs.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import bits
from .sector import SectorBasis

REFERENCE_KINDS = ("alternating-10", "mass-ground")


@dataclass
class SectorState:
    basis: SectorBasis
    amplitudes: np.ndarray

    @property
    def n_sites(self) -> int:
        return self.basis.n_sites

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def copy(self) -> "SectorState":
        return SectorState(self.basis, self.amplitudes.copy())

    def amplitude(self, b: int) -> complex:
        return complex(self.amplitudes[self.basis.rank(b)])


@lru_cache(maxsize=8)
def _sector(n_sites: int) -> SectorBasis:
    return SectorBasis(n_sites, n_sites // 2)


def reference_bitstring(kind, n_sites: int) -> int:
    """Resolve a reference-state name or label to a bitstring.

    ``kind`` is ``"alternating-10"`` (|10...10>), ``"mass-ground"``
    (|01...01>, the ground state of the mass term alone), a label such as
    ``"0011"``, or an int.
    """
    if isinstance(kind, (int, np.integer)):
        b = int(kind)
    elif kind == "alternating-10":
        b = bits.alternating(n_sites, 0)
    elif kind == "mass-ground":
        b = bits.alternating(n_sites, 1)
    else:
        b = bits.parse(kind, n_sites)
    if b >> n_sites:
        raise ValueError(f"reference {kind!r} does not fit in {n_sites} sites")
    if bits.weight(b) != n_sites // 2:
        raise ValueError(
            f"reference {bits.label(b, n_sites)} has nonzero total charge"
        )
    return b


def reference_state(kind, n_sites: int) -> SectorState:
    b = reference_bitstring(kind, n_sites)
    basis = _sector(n_sites)
    amps = np.zeros(len(basis), dtype=complex)
    amps[basis.rank(b)] = 1.0
    return SectorState(basis, amps)


@lru_cache(maxsize=8)
def _link_pairs(n_sites: int, weight: int) -> tuple[tuple[np.ndarray, np.ndarray], ...]:
    """Per link n: sector indices of strings with (b_n, b_{n+1}) = (1, 0) and of their swaps."""
    basis = SectorBasis(n_sites, weight)
    states = basis.states
    pairs = []
    for n in range(n_sites - 1):
        sel = ((states >> n) & 1 == 1) & ((states >> (n + 1)) & 1 == 0)
        src = np.flatnonzero(sel)
        dst = basis.rank(states[src] ^ (3 << n))
        pairs.append((src, np.asarray(dst, dtype=np.int64)))
    return tuple(pairs)


def apply_trotter_step(state: SectorState, dt: float) -> SectorState:
    """Return U(dt)|state> for one first-order Trotter step (input untouched)."""
    c, s = np.cos(dt / 2), 1j * np.sin(dt / 2)
    amps = state.amplitudes.copy()
    for src, dst in _link_pairs(state.basis.n_sites, state.basis.weight):
        a, b = amps[src], amps[dst]
        amps[src] = c * a + s * b
        amps[dst] = s * a + c * b
    return SectorState(state.basis, amps)


def evolve(psi0: SectorState, dt: float, k: int) -> SectorState:
    if k < 0:
        raise ValueError("k must be non-negative")
    state = psi0
    for _ in range(k):
        state = apply_trotter_step(state, dt)
    return state


def trotter_states(psi0: SectorState, dt: float):
    """Yield |psi_1>, |psi_2>, ... indefinitely."""
    state = psi0
    while True:
        state = apply_trotter_step(state, dt)
        yield state
