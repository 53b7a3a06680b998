"""Charge and particle-number observables (both diagonal in the computational basis).

Particle number is taken as P = N/2 + (1/2) sum_n (-1)^n Z_n, which gives
0 for the bare vacuum |01...01> and N for |10...10>.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bits import bit_matrix, z_values


@dataclass
class ObservableRecord:
    l0: float
    E0: float
    particle_number: float
    dim_subspace: int
    dim_sector: int
    E0_exact: float | None = None
    k_used: int | None = None
    degenerate: bool = False
    failed: str | None = None

    @property
    def rel_dev(self) -> float | None:
        if self.E0_exact is None:
            return None
        return abs(self.E0 - self.E0_exact) / abs(self.E0_exact)


def total_charge(b: int, n_sites: int) -> int:
    """sum_n (z_n + (-1)^n)/2, i.e. N/2 minus the Hamming weight."""
    z = z_values(b, n_sites)
    return sum(zn + (1 if n % 2 == 0 else -1) for n, zn in enumerate(z)) // 2


def particle_number_of(b: int, n_sites: int) -> int:
    z = z_values(b, n_sites)
    staggered = sum(zn if n % 2 == 0 else -zn for n, zn in enumerate(z))
    return n_sites // 2 + staggered // 2


def particle_numbers(states, n_sites: int) -> np.ndarray:
    occ = bit_matrix(states, n_sites).astype(np.int64)
    stagger = np.where(np.arange(n_sites) % 2 == 0, 1, -1)
    return n_sites // 2 + ((1 - 2 * occ) @ stagger) // 2


def expected_particle_number(basis, vec) -> float:
    vec = np.asarray(vec)
    states = np.asarray(list(basis), dtype=np.int64)
    if len(states) != len(vec):
        raise ValueError(f"basis has {len(states)} strings but vector has {len(vec)} entries")
    return float(np.abs(vec) ** 2 @ particle_numbers(states, basis.n_sites))
