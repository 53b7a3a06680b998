"""Sampled subspace, projected Hamiltonian and the adaptive SKQD loop."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from . import bits
from .errors import InfeasibleError
from .evolution import reference_state, trotter_states
from .hamiltonian import SchwingerParams, diagonal_energies
from .lanczos import DENSE_MAX_DIM, Eigenpair, lowest_eigenpair
from .sampling import NoiseSpec, ShotCounts, postselect, sample, step_seed
from .sector import SectorBasis

DEGENERACY_GAP = 1e-8
DEFAULT_MEMORY_BUDGET = 4 * 2**30


class SubspaceBasis:
    """Insertion-ordered set of zero-charge bitstrings with first-seen step."""

    def __init__(self, n_sites: int, bitstrings: Iterable[int] = (), provenance: Iterable[int] | None = None):
        self.n_sites = n_sites
        self._strings: list[int] = []
        self._steps: list[int] = []
        self._index: dict[int, int] = {}
        provenance = list(provenance) if provenance is not None else None
        for i, b in enumerate(bitstrings):
            self._add(int(b), provenance[i] if provenance else 0)

    def _add(self, b: int, step: int) -> None:
        if b in self._index:
            return
        if b >> self.n_sites or bits.weight(b) != self.n_sites // 2:
            raise ValueError(f"{b:b} is not a zero-charge string of {self.n_sites} sites")
        self._index[b] = len(self._strings)
        self._strings.append(b)
        self._steps.append(step)

    def __len__(self):
        return len(self._strings)

    def __contains__(self, b):
        return int(b) in self._index

    def __iter__(self):
        return iter(self._strings)

    def __repr__(self):
        return f"SubspaceBasis(n_sites={self.n_sites}, dim={len(self)})"

    @property
    def dim(self) -> int:
        return len(self._strings)

    @property
    def bitstrings(self) -> list[int]:
        return list(self._strings)

    @property
    def provenance(self) -> list[int]:
        return list(self._steps)

    def index(self, b: int) -> int:
        return self._index[int(b)]

    def as_array(self) -> np.ndarray:
        return np.array(self._strings, dtype=np.int64)

    def prefix(self, dim: int) -> "SubspaceBasis":
        """The basis as it was when it held ``dim`` strings."""
        return SubspaceBasis(self.n_sites, self._strings[:dim], self._steps[:dim])

    def copy(self) -> "SubspaceBasis":
        return self.prefix(len(self))

    @classmethod
    def full_sector(cls, n_sites: int) -> "SubspaceBasis":
        return cls(n_sites, SectorBasis(n_sites).states.tolist())


def extend_basis(basis: SubspaceBasis, counts: ShotCounts | Iterable[int], step: int) -> SubspaceBasis:
    """Union of ``basis`` with the strings in ``counts``; new entries get provenance ``step``.

    Strings are added in ascending integer order so the result does not
    depend on dict ordering of the counts.
    """
    strings = counts.counts.keys() if isinstance(counts, ShotCounts) else counts
    out = basis.copy()
    for b in sorted(int(s) for s in strings):
        out._add(b, step)
    return out


@dataclass
class ProjectedHamiltonian:
    """H restricted to a subspace: diagonal vector plus symmetric hopping entries."""

    basis: SubspaceBasis
    diagonal: np.ndarray
    offdiag: sp.csr_matrix

    @property
    def dim(self) -> int:
        return len(self.diagonal)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return self.diagonal * v + self.offdiag @ v

    def toarray(self) -> np.ndarray:
        out = self.offdiag.toarray()
        out[np.diag_indices_from(out)] += self.diagonal
        return out

    def entries(self) -> list[tuple[int, int, float]]:
        coo = self.offdiag.tocoo()
        return list(zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()))

    def with_params(self, params: SchwingerParams) -> "ProjectedHamiltonian":
        """Same subspace, new diagonal (hopping depends only on x, which must match)."""
        return ProjectedHamiltonian(self.basis, diagonal_energies(self.basis.as_array(), params), self.offdiag)


def hopping_matrix(states: np.ndarray, n_sites: int, x: float) -> sp.csr_matrix:
    """Symmetric hopping entries x between members of ``states`` that differ by one hop."""
    dim = len(states)
    order = np.argsort(states, kind="stable")
    ordered = states[order]
    rows, cols = [], []
    for n in range(n_sites - 1):
        src = np.flatnonzero(((states >> n) & 1 == 1) & ((states >> (n + 1)) & 1 == 0))
        partner = states[src] ^ (3 << n)
        pos = np.searchsorted(ordered, partner)
        pos = np.minimum(pos, dim - 1)
        found = ordered[pos] == partner
        rows.append(src[found])
        cols.append(order[pos[found]])
    r = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
    c = np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)
    data = np.full(2 * len(r), float(x))
    return sp.csr_matrix((data, (np.concatenate([r, c]), np.concatenate([c, r]))), shape=(dim, dim))


def project(params: SchwingerParams, basis: SubspaceBasis) -> ProjectedHamiltonian:
    if len(basis) == 0:
        raise ValueError("cannot project onto an empty basis")
    if basis.n_sites != params.n_sites:
        raise ValueError("basis and parameters disagree on n_sites")
    states = basis.as_array()
    return ProjectedHamiltonian(
        basis,
        diagonal_energies(states, params),
        hopping_matrix(states, params.n_sites, params.x),
    )


def ground_state(hp: ProjectedHamiltonian, dense_max: int = DENSE_MAX_DIM, v0=None, tol=1e-10) -> Eigenpair:
    """Lowest eigenpair of the projected Hamiltonian.

    The result unpacks as ``energy, vector`` and also carries the residual
    and an estimate of the gap to the next level.
    """
    return lowest_eigenpair(hp, hp.dim, dense_max=dense_max, v0=v0, tol=tol)


def sector_memory_estimate(n_sites: int, krylov_dim: int = 64) -> int:
    """Rough peak bytes for an exact sector solve (Lanczos vectors + sparse H + states)."""
    dim = comb(n_sites, n_sites // 2)
    nnz = dim * (n_sites // 2 + 1)
    return dim * 8 * (krylov_dim + 6) + nnz * 24


def check_feasible(n_sites: int, budget: int = DEFAULT_MEMORY_BUDGET) -> int:
    need = sector_memory_estimate(n_sites)
    if need > budget:
        raise InfeasibleError(
            f"N={n_sites}: sector dimension {comb(n_sites, n_sites // 2)} needs about "
            f"{need / 2**30:.1f} GiB, budget is {budget / 2**30:.1f} GiB",
            required_bytes=need,
        )
    return need


def exact_ground_state(params: SchwingerParams, budget: int = DEFAULT_MEMORY_BUDGET, v0=None):
    """Exact zero-charge ground state: ``(E0, vec, basis)`` over the full sector."""
    check_feasible(params.n_sites, budget)
    basis = SubspaceBasis.full_sector(params.n_sites)
    pair = ground_state(project(params, basis), v0=v0)
    return pair.energy, pair.vector, basis


# ---------------------------------------------------------------------------
# adaptive loop


@dataclass
class StepRecord:
    k: int
    dim: int
    energies: np.ndarray
    accepted: np.ndarray
    new_strings: int = 0


@dataclass
class SkqdResult:
    """Outcome of :func:`run_skqd` for one or several background fields.

    ``basis`` holds every string sampled up to the last executed step; the
    subspace used for l0 value ``i`` is its prefix of length ``final_dims[i]``.
    """

    params: SchwingerParams
    l0_values: np.ndarray
    steps: list[StepRecord]
    basis: SubspaceBasis
    k_max: np.ndarray
    final_dims: np.ndarray
    energies: np.ndarray
    vectors: list[np.ndarray]
    gaps: np.ndarray
    settings: dict = field(default_factory=dict)

    # single-l0 conveniences
    @property
    def energy(self) -> float:
        return float(self.energies[0])

    @property
    def vector(self) -> np.ndarray:
        return self.vectors[0]

    @property
    def stopping_step(self) -> int:
        return int(self.k_max[0])

    def final_basis(self, i: int = 0) -> SubspaceBasis:
        return self.basis.prefix(int(self.final_dims[i]))

    def dims(self) -> list[tuple[int, int]]:
        """``(k, dim)`` after each step: the cumulative unique-string count."""
        return [(s.k, s.dim) for s in self.steps]

    def degenerate(self, i: int = 0) -> bool:
        return bool(self.gaps[i] < DEGENERACY_GAP)

    def to_record(self) -> dict:
        return {
            "parameters": {k: v for k, v in self.params.to_dict().items() if k != "l0"},
            "settings": self.settings,
            "l0_values": self.l0_values.tolist(),
            "steps": [
                {
                    "k": s.k,
                    "dim": s.dim,
                    "new_strings": s.new_strings,
                    "E0": s.energies.tolist(),
                    "accepted": s.accepted.tolist(),
                }
                for s in self.steps
            ],
            "final": [
                {
                    "l0": float(l0),
                    "E0": float(self.energies[i]),
                    "k_max": int(self.k_max[i]),
                    "dim": int(self.final_dims[i]),
                    "degenerate": self.degenerate(i),
                }
                for i, l0 in enumerate(self.l0_values)
            ],
        }


def simulated_counts(params: SchwingerParams, dt, reference, shots, seed, noise=None) -> Callable[[int], ShotCounts]:
    """Shot source for step k = 1, 2, ...: evolve once per step, sample with a per-step seed."""
    states = trotter_states(reference_state(reference, params.n_sites), dt)
    cache: dict[int, ShotCounts] = {}

    def source(k: int) -> ShotCounts:
        while len(cache) < k:
            j = len(cache) + 1
            cache[j] = sample(next(states), shots, step_seed(seed, j), noise)
        return cache[k]

    return source


def run_skqd(
    params: SchwingerParams,
    dt: float,
    reference="alternating-10",
    shots: int = 1000,
    seed: int = 0,
    p_min: float = 0.0,
    c: float = 1e-2,
    patience: int = 10,
    *,
    l0_values: Sequence[float] | None = None,
    shared: bool = True,
    max_steps: int = 200,
    noise: NoiseSpec | None = None,
    counts_source: Callable[[int], ShotCounts | None] | None = None,
) -> SkqdResult:
    """Adaptive SKQD.

    Each step k evolves one more Trotter step, samples, post-selects, grows
    the basis and re-diagonalises for every value in ``l0_values`` (default
    ``[params.l0]``).  Step 1 is always accepted; step k > 1 is accepted
    when the relative change of E0 against the last accepted step exceeds
    ``c``.  An l0 value stops after ``patience`` consecutive rejections and
    keeps its last accepted subspace.  With ``shared=True`` acceptance is
    decided jointly (accepted if any l0 improves by more than ``c``) so all
    values end on the same subspace.

    ``counts_source(k)`` replaces simulation (e.g. replayed hardware counts);
    returning ``None`` ends the run.
    """
    if c <= 0:
        raise ValueError("c must be positive")
    if patience < 1:
        raise ValueError("patience must be >= 1")
    l0s = np.atleast_1d(np.asarray(params.l0 if l0_values is None else l0_values, dtype=float))
    n_l0 = len(l0s)
    if counts_source is None:
        counts_source = simulated_counts(params, dt, reference, shots, seed, noise)
    else:
        # still validate the reference so a bad reference fails the same way
        reference_state(reference, params.n_sites)

    basis = SubspaceBasis(params.n_sites)
    hop = None
    steps: list[StepRecord] = []
    last_e = np.full(n_l0, np.nan)
    misses = np.zeros(n_l0, dtype=int)
    active = np.ones(n_l0, dtype=bool)
    k_max = np.zeros(n_l0, dtype=int)
    final_dims = np.zeros(n_l0, dtype=int)
    energies = np.full(n_l0, np.nan)
    gaps = np.full(n_l0, np.inf)
    vectors: list[np.ndarray | None] = [None] * n_l0

    for k in range(1, max_steps + 1):
        if not active.any():
            break
        raw = counts_source(k)
        if raw is None:
            break
        kept = postselect(raw, params.n_sites, p_min)
        before = len(basis)
        basis = extend_basis(basis, kept, k)
        if len(basis) == 0:
            steps.append(StepRecord(k, 0, np.full(n_l0, np.nan), np.zeros(n_l0, bool), 0))
            continue
        states = basis.as_array()
        hop = hopping_matrix(states, params.n_sites, params.x)
        e_k = np.full(n_l0, np.nan)
        pairs: list[Eigenpair | None] = [None] * n_l0
        for i in np.flatnonzero(active):
            # no warm start: near the level crossing the previous vector is
            # almost orthogonal to the new ground state and Lanczos would settle on it
            hp = ProjectedHamiltonian(basis, diagonal_energies(states, params.with_l0(l0s[i])), hop)
            pairs[i] = ground_state(hp)
            e_k[i] = pairs[i].energy
        first = np.isnan(last_e)
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.abs(e_k - last_e) / np.abs(last_e)
        improved = first | (rel > c)
        if shared:
            improved = np.where(active, improved[active].any(), False)
        accepted = active & improved
        for i in np.flatnonzero(active):
            if accepted[i]:
                last_e[i] = e_k[i]
                misses[i] = 0
                k_max[i] = k
                final_dims[i] = len(basis)
                energies[i] = e_k[i]
                vectors[i] = pairs[i].vector
                gaps[i] = pairs[i].gap
            else:
                misses[i] += 1
                if misses[i] >= patience:
                    active[i] = False
        steps.append(StepRecord(k, len(basis), e_k, accepted, len(basis) - before))

    settings = {
        "dt": dt,
        "reference": reference if isinstance(reference, str) else bits.label(reference, params.n_sites),
        "shots": shots,
        "seed": seed,
        "p_min": p_min,
        "c": c,
        "patience": patience,
        "shared": shared,
        "max_steps": max_steps,
        "bitflip_prob": (noise or NoiseSpec()).bitflip_prob,
    }
    return SkqdResult(
        params=params,
        l0_values=l0s,
        steps=steps,
        basis=basis,
        k_max=k_max,
        final_dims=final_dims,
        energies=energies,
        vectors=[v if v is not None else np.zeros(0) for v in vectors],
        gaps=gaps,
        settings=settings,
    )
