"""Experiment drivers: background-field scans, transition location, size-scaling fit, deviation and dimension summaries."""

from __future__ import annotations

import io
import csv
from dataclasses import dataclass, field
from math import comb
from typing import Callable, Sequence

import numpy as np

from .errors import DetectionError, EigensolverError, FitError
from .hamiltonian import SchwingerParams
from .krylov import (
    ProjectedHamiltonian,
    SkqdResult,
    SubspaceBasis,
    check_feasible,
    ground_state,
    project,
    run_skqd,
)
from .observables import ObservableRecord, expected_particle_number

CSV_COLUMNS = ("l0", "E0", "E0_exact", "rel_dev", "P", "dimK", "dimH", "k_used", "seed")
P_THRESHOLD = 1.0


def l0_grid(start: float = 0.0, stop: float = 2.0, count: int = 41) -> np.ndarray:
    if count < 1:
        raise ValueError("grid needs at least one point")
    return np.linspace(start, stop, count)


@dataclass
class ScanResult:
    params: SchwingerParams
    l0_grid: np.ndarray
    records: list[ObservableRecord]
    method: str
    seed: int | None = None
    run: SkqdResult | None = None

    def __post_init__(self):
        if len(self.records) != len(self.l0_grid):
            raise ValueError("one record per grid point required")
        if np.any(np.diff(self.l0_grid) <= 0):
            raise ValueError("l0 grid must be strictly increasing")

    @property
    def energies(self) -> np.ndarray:
        return np.array([r.E0 for r in self.records])

    @property
    def particle_numbers(self) -> np.ndarray:
        return np.array([r.particle_number for r in self.records])

    @property
    def rel_devs(self) -> np.ndarray:
        return np.array([np.nan if r.rel_dev is None else r.rel_dev for r in self.records])

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in self.records:
            writer.writerow([
                _num(r.l0),
                _num(r.E0),
                _num(r.E0_exact),
                _num(r.rel_dev),
                _num(r.particle_number),
                r.dim_subspace,
                r.dim_sector,
                "" if r.k_used is None else r.k_used,
                "" if self.seed is None else self.seed,
            ])
        return buf.getvalue()


def _num(v) -> str:
    if v is None or (isinstance(v, float) and np.isnan(v)):
        return ""
    return format(float(v), ".15g")


def _solve_on(hp_base: ProjectedHamiltonian, params: SchwingerParams, grid):
    """Ground states on one subspace for each l0.

    Every solve starts from the solver's own random vector.  Reusing the
    previous point's eigenvector is unsafe: across the transition the two
    phases are nearly orthogonal and Lanczos converges to the wrong one.
    """
    out = []
    for l0 in grid:
        hp = hp_base.with_params(params.with_l0(l0))
        try:
            out.append(ground_state(hp))
        except EigensolverError as exc:
            out.append(exc)
    return out


def _records_from_pairs(basis, pairs, grid, dim_sector, k_used=None):
    records = []
    for l0, pair in zip(grid, pairs):
        if isinstance(pair, Exception):
            records.append(ObservableRecord(float(l0), np.nan, np.nan, len(basis), dim_sector, k_used=k_used, failed=str(pair)))
            continue
        records.append(ObservableRecord(
            l0=float(l0),
            E0=pair.energy,
            particle_number=expected_particle_number(basis, pair.vector),
            dim_subspace=len(basis),
            dim_sector=dim_sector,
            k_used=k_used,
            degenerate=pair.gap < 1e-8,
        ))
    return records


def exact_energies(params: SchwingerParams, grid) -> np.ndarray:
    return exact_scan(params, grid).energies


def exact_scan(params: SchwingerParams, grid) -> ScanResult:
    check_feasible(params.n_sites)
    basis = SubspaceBasis.full_sector(params.n_sites)
    grid = np.asarray(grid, dtype=float)
    pairs = _solve_on(project(params, basis), params, grid)
    return ScanResult(params, grid, _records_from_pairs(basis, pairs, grid, len(basis)), "exact")


def scan_l0(
    params: SchwingerParams,
    grid,
    method: str = "exact",
    *,
    basis: SubspaceBasis | None = None,
    compare_exact: bool = False,
    **skqd_options,
) -> ScanResult:
    """Ground-state observables across a background-field grid.

    ``method="exact"`` diagonalises the full zero-charge sector.
    ``method="skqd"`` either reuses a given ``basis`` (e.g. replayed
    hardware strings) or performs one :func:`run_skqd` over the whole grid;
    sampling never depends on l0, so it happens once.  Failed points are
    kept in the scan with ``failed`` set.
    """
    grid = np.asarray(grid, dtype=float)
    dim_sector = comb(params.n_sites, params.n_sites // 2)
    seed = None
    run = None
    if method == "exact":
        scan = exact_scan(params, grid)
    elif method == "skqd":
        if basis is not None:
            pairs = _solve_on(project(params, basis), params, grid)
            records = _records_from_pairs(basis, pairs, grid, dim_sector)
        else:
            run = run_skqd(params, l0_values=grid, **skqd_options)
            seed = run.settings.get("seed")
            records = []
            for i, l0 in enumerate(grid):
                sub = run.final_basis(i)
                if len(sub) == 0:
                    records.append(ObservableRecord(float(l0), np.nan, np.nan, 0, dim_sector, failed="empty basis"))
                    continue
                records.append(ObservableRecord(
                    l0=float(l0),
                    E0=float(run.energies[i]),
                    particle_number=expected_particle_number(sub, run.vectors[i]),
                    dim_subspace=len(sub),
                    dim_sector=dim_sector,
                    k_used=int(run.k_max[i]),
                    degenerate=run.degenerate(i),
                ))
        scan = ScanResult(params, grid, records, "skqd", seed=seed, run=run)
    else:
        raise ValueError(f"unknown method {method!r}")
    if compare_exact:
        ref = exact_scan(params, grid) if method != "exact" else scan
        for r, e in zip(scan.records, ref.records):
            r.E0_exact = e.E0
    return scan


# ---------------------------------------------------------------------------
# transition location


def detect_l0c(scan_or_grid, particle_numbers=None, threshold: float = P_THRESHOLD) -> tuple[float, float]:
    """Midpoint and half-width of the grid interval where <P> crosses ``threshold``.

    Accepts a :class:`ScanResult` or ``(grid, particle_numbers)``.
    Exactly one crossing is required.
    """
    if isinstance(scan_or_grid, ScanResult):
        grid, P = scan_or_grid.l0_grid, scan_or_grid.particle_numbers
    else:
        grid, P = np.asarray(scan_or_grid, float), np.asarray(particle_numbers, float)
    if np.any(np.isnan(P)):
        raise DetectionError("scan contains failed points")
    above = P >= threshold
    idx = np.flatnonzero(above[1:] != above[:-1])
    if len(idx) == 0:
        raise DetectionError(f"<P> never crosses {threshold} on [{grid[0]}, {grid[-1]}]")
    if len(idx) > 1:
        raise DetectionError(f"<P> crosses {threshold} {len(idx)} times, at l0 ~ {grid[idx].tolist()}")
    i = idx[0]
    return float((grid[i] + grid[i + 1]) / 2), float((grid[i + 1] - grid[i]) / 2)


def refine_l0c(
    particle_number: Callable[[float], float],
    lo: float,
    hi: float,
    rounds: int = 3,
    points: int = 11,
) -> tuple[float, float]:
    """Repeatedly re-grid the bracketing interval; each round shrinks it by ``points - 1``."""
    l0c, sigma = (lo + hi) / 2, (hi - lo) / 2
    for _ in range(rounds):
        g = np.linspace(lo, hi, points)
        P = np.array([particle_number(l0) for l0 in g])
        l0c, sigma = detect_l0c(g, P)
        lo, hi = l0c - sigma, l0c + sigma
    return l0c, sigma


@dataclass
class TransitionPoint:
    n_sites: int
    l0c: float
    sigma: float
    coarse: tuple[float, float]
    scan: ScanResult
    dim_subspace: int


def particle_number_on(params: SchwingerParams, basis: SubspaceBasis) -> Callable[[float], float]:
    hp = project(params, basis)

    def evaluate(l0: float) -> float:
        pair = ground_state(hp.with_params(params.with_l0(l0)))
        return expected_particle_number(basis, pair.vector)

    return evaluate


def locate_l0c(
    params: SchwingerParams,
    grid,
    method: str = "exact",
    rounds: int = 3,
    points: int = 11,
    **skqd_options,
) -> TransitionPoint:
    """Coarse detection on ``grid`` followed by ``rounds`` of refinement.

    Refinement for SKQD reuses the larger of the two subspaces that
    bracket the coarse crossing.
    """
    scan = scan_l0(params, grid, method, **skqd_options)
    coarse = detect_l0c(scan)
    i = int(np.searchsorted(scan.l0_grid, coarse[0]))
    if method == "exact":
        basis = SubspaceBasis.full_sector(params.n_sites)
    elif scan.run is not None:
        dim = max(scan.run.final_dims[i - 1], scan.run.final_dims[i])
        basis = scan.run.basis.prefix(int(dim))
    else:
        basis = skqd_options["basis"]
    evaluate = particle_number_on(params, basis)
    l0c, sigma = refine_l0c(evaluate, coarse[0] - coarse[1], coarse[0] + coarse[1], rounds, points)
    return TransitionPoint(params.n_sites, l0c, sigma, coarse, scan, len(basis))


# ---------------------------------------------------------------------------
# finite-size fit


@dataclass
class FitResult:
    """Mass-shift model MS(N) = a/sqrt(N) + b/N + c/N^2 fitted to l0c(N)."""

    a: float
    b: float
    c: float
    errors: np.ndarray
    covariance: np.ndarray
    residual_norm: float
    points: list[tuple[int, float, float]]
    mass_ratio: float

    @property
    def params(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c])

    def predict(self, n_sites) -> np.ndarray:
        return l0c_model(n_sites, self.a, self.b, self.c, self.mass_ratio)

    def report(self) -> str:
        lines = ["# l0c(N) = (m/g + a/sqrt(N) + b/N + c/N^2) / (15 (1 - 1/N)) + 1/2"]
        lines.append(f"mass_ratio = {self.mass_ratio!r}")
        for name, value, err in zip("abc", self.params, self.errors):
            lines.append(f"{name} = {value!r} +- {err!r}")
        lines.append(f"residual_norm = {self.residual_norm!r}")
        lines.append("covariance =")
        for row in self.covariance:
            lines.append("  " + " ".join(format(v, ".10e") for v in row))
        lines.append("points (N, l0c, sigma) =")
        for n, l0c, sigma in self.points:
            lines.append(f"  {n} {l0c!r} {sigma!r}")
        return "\n".join(lines) + "\n"


def l0c_model(n_sites, a, b, c, mass_ratio=10.0):
    N = np.asarray(n_sites, dtype=float)
    ms = a / np.sqrt(N) + b / N + c / N**2
    return (mass_ratio + ms) / 15.0 / (1.0 - 1.0 / N) + 0.5


def fit_l0c_model(points: Sequence[tuple[int, float, float]], mass_ratio: float = 10.0) -> FitResult:
    """Weighted linear least squares for (a, b, c).

    Inverting the known prefactor gives
    MS(N) = 15 (l0c - 1/2)(1 - 1/N) - m/g, which is linear in (a, b, c).
    Each point is weighted by the inverse of its propagated sigma (all
    weights equal if any sigma is zero).  The system is solved through a
    QR factorisation; the covariance is (R^T R)^-1 scaled by the reduced
    chi-square.
    """
    pts = [(int(n), float(l), float(s)) for n, l, s in points]
    if len(pts) < 4:
        raise FitError(f"need at least 4 points for 3 parameters, got {len(pts)}")
    N = np.array([p[0] for p in pts], dtype=float)
    if np.any(N <= 1) or np.any(N % 2):
        raise FitError("system sizes must be even and > 1")
    l0c = np.array([p[1] for p in pts])
    sigma = np.array([p[2] for p in pts])
    target = 15.0 * (l0c - 0.5) * (1.0 - 1.0 / N) - mass_ratio
    design = np.column_stack([1 / np.sqrt(N), 1 / N, 1 / N**2])
    scale = 15.0 * sigma * (1.0 - 1.0 / N)
    w = 1.0 / scale if np.all(scale > 0) else np.ones_like(N)
    A = design * w[:, None]
    y = target * w
    Q, R = np.linalg.qr(A)
    diag = np.abs(np.diag(R))
    if np.any(diag <= 1e-12 * diag.max()):
        raise FitError("design matrix is rank deficient (need at least 3 distinct sizes)")
    coef = np.linalg.solve(R, Q.T @ y)
    resid = y - A @ coef
    dof = len(y) - 3
    chi2 = float(resid @ resid)
    Rinv = np.linalg.inv(R)
    cov = Rinv @ Rinv.T * (chi2 / dof)
    return FitResult(
        a=float(coef[0]),
        b=float(coef[1]),
        c=float(coef[2]),
        errors=np.sqrt(np.diag(cov)),
        covariance=cov,
        residual_norm=float(np.sqrt(chi2)),
        points=pts,
        mass_ratio=mass_ratio,
    )


# ---------------------------------------------------------------------------
# deviation and dimension summary table


@dataclass
class Table1Config:
    n_sites: int
    dt: float
    shots: int
    seeds: Sequence[int] = (0,)
    reference: str = "alternating-10"
    grid_points: int = 21
    l0_set: str = "interval"  # "interval": uniform grid on [0, 2]; "endpoints": {0, 2}
    c: float = 1e-2
    patience: int = 10
    p_min: float = 0.0
    shared: bool = True
    bitflip_prob: float = 0.0
    max_steps: int = 200
    mass_ratio: float = 10.0
    volume: float = 30.0

    def grid(self) -> np.ndarray:
        if self.l0_set == "endpoints":
            return np.array([0.0, 2.0])
        if self.l0_set != "interval":
            raise ValueError(f"unknown l0_set {self.l0_set!r}")
        return l0_grid(0.0, 2.0, self.grid_points)


@dataclass
class Table1Row:
    n_sites: int
    k_max: int
    mean_rel_dev: float
    dim_ratio: float
    seed: int
    dim_krylov: int = 0
    dim_sector: int = 0
    rel_devs: np.ndarray = field(default_factory=lambda: np.zeros(0))


def table1_row(cfg: Table1Config, seed: int, exact: np.ndarray | None = None, counts_source=None) -> Table1Row:
    from .sampling import NoiseSpec

    params = SchwingerParams.fixed_volume(cfg.n_sites, volume=cfg.volume, mass_ratio=cfg.mass_ratio)
    grid = cfg.grid()
    if exact is None:
        exact = exact_energies(params, grid)
    run = run_skqd(
        params,
        cfg.dt,
        reference=cfg.reference,
        shots=cfg.shots,
        seed=seed,
        p_min=cfg.p_min,
        c=cfg.c,
        patience=cfg.patience,
        l0_values=grid,
        shared=cfg.shared,
        max_steps=cfg.max_steps,
        noise=NoiseSpec(cfg.bitflip_prob),
        counts_source=counts_source,
    )
    dev = np.abs(run.energies - exact) / np.abs(exact)
    dim_sector = comb(cfg.n_sites, cfg.n_sites // 2)
    dim_k = float(np.mean(run.final_dims))
    return Table1Row(
        n_sites=cfg.n_sites,
        k_max=int(run.k_max.max()),
        mean_rel_dev=float(np.mean(dev)),
        dim_ratio=dim_k / dim_sector,
        seed=seed,
        dim_krylov=int(round(dim_k)),
        dim_sector=dim_sector,
        rel_devs=dev,
    )


def table1_report(configs: Sequence[Table1Config]) -> list[Table1Row]:
    rows = []
    for cfg in configs:
        params = SchwingerParams.fixed_volume(cfg.n_sites, volume=cfg.volume, mass_ratio=cfg.mass_ratio)
        exact = exact_energies(params, cfg.grid())
        for seed in cfg.seeds:
            rows.append(table1_row(cfg, seed, exact))
    return rows


def format_table1(rows: Sequence[Table1Row]) -> str:
    head = f"{'N':>4} {'k_max':>6} {'mean dE0/E0':>12} {'dimK/dimH':>10} {'seed':>6}"
    lines = [head, "-" * len(head)]
    for r in rows:
        lines.append(f"{r.n_sites:>4} {r.k_max:>6} {r.mean_rel_dev:>12.1e} {r.dim_ratio:>10.2f} {r.seed:>6}")
    return "\n".join(lines) + "\n"
