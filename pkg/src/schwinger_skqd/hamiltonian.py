"""Lattice Schwinger Hamiltonian with a background field and charge penalty.

Two independent routes to the matrix elements are provided:

* :func:`diagonal_energy` / :func:`hopping_neighbors` evaluate elements
  directly from the cumulative staggered charge in O(N) per bitstring.
  This is what the solvers use.
* :func:`build_pauli_terms` expands the same operator into Pauli strings;
  :func:`dense_matrix` assembles it on the full 2^N space.  It exists to
  check the fast route.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from functools import reduce
from typing import Mapping

import numpy as np

from .bits import bit_matrix, z_values
from .errors import ConfigError

DEFAULT_PENALTY = 100.0
DEFAULT_VOLUME = 30.0


@dataclass(frozen=True)
class SchwingerParams:
    """Model constants in lattice units.

    ``x`` is 1/(ag)^2, ``mass_ratio`` is m_lat/g, ``l0`` the background
    field theta/2pi and ``penalty`` the weight of the squared total charge.
    """

    n_sites: int
    x: float
    mass_ratio: float = 10.0
    l0: float = 0.0
    penalty: float = DEFAULT_PENALTY

    def __post_init__(self):
        if int(self.n_sites) != self.n_sites or self.n_sites < 2 or self.n_sites % 2:
            raise ConfigError(f"n_sites must be an even integer >= 2, got {self.n_sites}")
        if not self.x > 0:
            raise ConfigError(f"x must be positive, got {self.x}")
        if self.penalty < 0:
            raise ConfigError(f"penalty must be non-negative, got {self.penalty}")

    @classmethod
    def fixed_volume(cls, n_sites, volume=DEFAULT_VOLUME, **kwargs) -> "SchwingerParams":
        """Parameters with N/sqrt(x) = ``volume``, i.e. x = (N/volume)^2."""
        return cls(n_sites=n_sites, x=(n_sites / volume) ** 2, **kwargs)

    @property
    def mass_coefficient(self) -> float:
        return self.mass_ratio * math.sqrt(self.x)

    def with_l0(self, l0: float) -> "SchwingerParams":
        return dataclasses.replace(self, l0=float(l0))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_mapping(cls, section: Mapping[str, object]) -> "SchwingerParams":
        """Read a flat key-value section.

        Either ``x`` or ``volume`` must be present; ``volume`` sets
        x = (n_sites/volume)^2.
        """
        try:
            n_sites = int(section["n_sites"])
        except KeyError:
            raise ConfigError("model section is missing n_sites") from None
        except (TypeError, ValueError):
            raise ConfigError(f"n_sites is not an integer: {section['n_sites']!r}") from None
        kwargs = {}
        for key in ("mass_ratio", "l0", "penalty"):
            if key in section and section[key] not in (None, ""):
                try:
                    kwargs[key] = float(section[key])
                except (TypeError, ValueError):
                    raise ConfigError(f"{key} is not a number: {section[key]!r}") from None
        has_x = section.get("x") not in (None, "")
        has_volume = section.get("volume") not in (None, "")
        if has_x and has_volume:
            raise ConfigError("give either x or volume, not both")
        try:
            if has_x:
                return cls(n_sites=n_sites, x=float(section["x"]), **kwargs)
            volume = float(section["volume"]) if has_volume else DEFAULT_VOLUME
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        return cls.fixed_volume(n_sites, volume=volume, **kwargs)


@dataclass(frozen=True)
class PauliTerm:
    """``coefficient * prod(P_site)``; an empty ``factors`` tuple is the identity."""

    coefficient: float
    factors: tuple[tuple[int, str], ...] = ()

    def __post_init__(self):
        sites = [s for s, _ in self.factors]
        if any(b <= a for a, b in zip(sites, sites[1:])):
            raise ValueError(f"sites must be strictly increasing: {sites}")
        if any(axis not in "XYZ" or len(axis) != 1 for _, axis in self.factors):
            raise ValueError(f"bad Pauli axis in {self.factors}")


def build_pauli_terms(params: SchwingerParams) -> list[PauliTerm]:
    """Pauli expansion of the Hamiltonian plus the charge penalty.

    The penalty lambda*(sum Q)^2 reduces to (lambda/4)(sum Z)^2 for even N,
    so it only adds lambda/2 to every ZZ pair and lambda*N/4 to the constant.
    """
    N, x, l0, lam = params.n_sites, params.x, params.l0, params.penalty
    terms: list[PauliTerm] = []

    def add(coef, factors=()):
        if coef != 0:
            terms.append(PauliTerm(float(coef), tuple(factors)))

    for n in range(N - 1):
        add(x / 2, ((n, "X"), (n + 1, "X")))
        add(x / 2, ((n, "Y"), (n + 1, "Y")))
    for n in range(N):
        add(params.mass_coefficient * (-1) ** n, ((n, "Z"),))
    for n in range(N - 1):
        for k in range(n + 1, N):
            add(0.5 * (N - k - 1 + lam), ((n, "Z"), (k, "Z")))
    for n in range(N - 1):
        add(math.fsum([N / 4, -0.5 * math.ceil(n / 2), l0 * (N - n - 1)]), ((n, "Z"),))
    add(math.fsum([l0**2 * (N - 1), 0.5 * l0 * N, N**2 / 8, lam * N / 4]))
    return terms


_PAULI = {
    "I": np.eye(2),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.diag([1.0, -1.0]),
}


def dense_matrix(terms, n_sites: int) -> np.ndarray:
    """Assemble Pauli terms into a dense 2^N x 2^N matrix.

    Row/column index ``i`` is the bitstring ``i`` (site n = bit n), so the
    Kronecker product runs from site N-1 down to site 0.
    """
    if n_sites > 12:
        raise ValueError("dense assembly is only meant for small verification sizes")
    out = np.zeros((2**n_sites, 2**n_sites), dtype=complex)
    # Z-only terms are diagonal with entries +-coefficient; summing them with
    # fsum keeps the diagonal exact to one rounding even for large penalties
    index = np.arange(2**n_sites)
    diagonal = []
    for term in terms:
        if all(axis == "Z" for _, axis in term.factors):
            sign = np.ones(2**n_sites)
            for site, _ in term.factors:
                sign *= 1 - 2 * ((index >> site) & 1)
            diagonal.append(term.coefficient * sign)
            continue
        ops = ["I"] * n_sites
        for site, axis in term.factors:
            ops[site] = axis
        out += term.coefficient * reduce(np.kron, [_PAULI[a] for a in reversed(ops)])
    if diagonal:
        stacked = np.array(diagonal)
        out[index, index] += [math.fsum(col) for col in stacked.T]
    return out


def diagonal_energy(b: int, params: SchwingerParams) -> float:
    """<b|W|b> from the cumulative staggered charge, O(N)."""
    N = params.n_sites
    z = z_values(b, N)
    mass = sum(zn if n % 2 == 0 else -zn for n, zn in enumerate(z))
    parts = [params.mass_coefficient * mass]
    cumulative = 0
    for n in range(N):
        cumulative += (z[n] + (1 if n % 2 == 0 else -1)) // 2
        if n < N - 1:
            parts.append((params.l0 + cumulative) ** 2)
    parts.append(params.penalty * cumulative**2)
    return math.fsum(parts)


def diagonal_energies(states, params: SchwingerParams) -> np.ndarray:
    """Vectorised :func:`diagonal_energy` over an array of bitstrings."""
    N = params.n_sites
    occ = bit_matrix(states, N).astype(np.int64)
    z = 1 - 2 * occ
    stagger = np.where(np.arange(N) % 2 == 0, 1, -1)
    charge = (z + stagger) // 2
    cumulative = np.cumsum(charge, axis=1)
    electric = ((params.l0 + cumulative[:, :-1]) ** 2).sum(axis=1)
    return (
        params.mass_coefficient * (z @ stagger)
        + electric
        + params.penalty * cumulative[:, -1] ** 2
    )


def hopping_neighbors(b: int, params: SchwingerParams) -> list[tuple[int, float]]:
    """All ``(b', <b'|W|b>)`` with b' != b and a nonzero element.

    The XX+YY hop swaps unequal neighbouring bits with element x.
    """
    out = []
    for n in range(params.n_sites - 1):
        if ((b >> n) ^ (b >> (n + 1))) & 1:
            out.append((b ^ (3 << n), params.x))
    return out
