"""Command line front end.

Every command resolves a :class:`~schwinger_skqd.config.RunConfig` from an
optional ``--config`` file plus flags, and writes into ``--out-dir``:

* ``config.ini``   the resolved configuration
* ``meta.json``    schema version, command, seed and PRNG name
* command outputs (CSV is always written; JSON and SVG on request)

Files are written atomically.  Exit codes follow the exception classes in
:mod:`schwinger_skqd.errors`.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from math import comb
from pathlib import Path

import numpy as np

from . import svg
from .config import SCHEMA_VERSION, RunConfig, apply_overrides
from .errors import ConfigError, CountsSchemaError, FitError, SkqdError
from .experiments import (
    Table1Config,
    fit_l0c_model,
    format_table1,
    locate_l0c,
    scan_l0,
    table1_report,
)
from .krylov import check_feasible
from .sampling import PRNG_NAME, NoiseSpec, ShotCounts, atomic_write_text, format_counts, ingest_counts, postselect

log = logging.getLogger("schwinger_skqd")

MODEL_FLAGS = {"n_sites": int, "x": float, "volume": float, "mass_ratio": float, "penalty": float}
RUN_FLAGS = {
    "dt": float,
    "shots": int,
    "seed": int,
    "p_min": float,
    "c": float,
    "patience": int,
    "max_steps": int,
    "reference": str,
    "bitflip_prob": float,
    "l0_grid": str,
    "method": str,
    "sizes": str,
    "seeds": str,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="schwinger-skqd",
        description="Sample-based Krylov diagonalisation of the lattice Schwinger model with a background field.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="sectioned key = value config file")
    common.add_argument("--out-dir", type=Path, help="output directory")
    common.add_argument("--format", action="append", help="output formats: csv, json, svg (comma list or repeated)")
    for name, typ in MODEL_FLAGS.items():
        common.add_argument("--" + name.replace("_", "-"), type=typ, default=None)
    for name, typ in RUN_FLAGS.items():
        common.add_argument("--" + name.replace("_", "-"), type=typ, default=None)
    common.add_argument("--compare-exact", action="store_true", default=None, help="also diagonalise the full sector")
    common.add_argument(
        "--per-l0", action="store_true", help="stop each l0 independently instead of on a shared subspace"
    )

    sub.add_parser("exact", parents=[common], help="exact diagonalisation scan over l0")
    p = sub.add_parser("skqd", parents=[common], help="SKQD run and scan over l0")
    p.add_argument(
        "--counts-file",
        action="append",
        type=Path,
        default=[],
        help="replay measured counts; give once per Trotter step, in order",
    )
    sub.add_parser("scan-fit", parents=[common], help="locate l0c for several N and fit the size dependence")
    sub.add_parser("table1", parents=[common], help="SKQD accuracy and subspace size summary over N and seeds")
    p = sub.add_parser("ingest-check", help="validate counts files")
    p.add_argument("files", nargs="+", type=Path)
    p.add_argument("--n-sites", type=int, default=None, help="expected register width")
    return parser


def resolve_config(args) -> RunConfig:
    cfg = RunConfig.from_ini(args.config.read_text()) if args.config else RunConfig()
    model = {k: getattr(args, k) for k in MODEL_FLAGS if getattr(args, k) is not None}
    if "x" in model:
        cfg.model.volume = None
    elif "volume" in model:
        cfg.model.x = None
    apply_overrides(cfg.model, model)
    run = {k: getattr(args, k) for k in RUN_FLAGS if getattr(args, k) is not None}
    if args.compare_exact:
        run["compare_exact"] = True
    if args.per_l0:
        run["shared"] = False
    apply_overrides(cfg.run, run)
    if args.out_dir is not None:
        cfg.output.directory = str(args.out_dir)
    if args.format:
        apply_overrides(cfg.output, {"formats": ",".join(args.format)})
    return cfg.validate()


class Output:
    def __init__(self, cfg: RunConfig, command: str):
        self.cfg = cfg
        self.dir = Path(cfg.output.directory)
        self.formats = set(cfg.output.formats) | {"csv"}
        self.command = command

    def write(self, name: str, text: str) -> Path:
        path = self.dir / name
        atomic_write_text(path, text)
        log.info("wrote %s", path)
        return path

    def provenance(self, seed, **extra) -> None:
        self.write("config.ini", self.cfg.to_ini())
        meta = {"schema_version": SCHEMA_VERSION, "command": self.command, "seed": seed, "prng": PRNG_NAME}
        meta.update(extra)
        self.write("meta.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")


def skqd_options(cfg: RunConfig) -> dict:
    r = cfg.run
    return dict(
        dt=r.dt,
        reference=r.reference,
        shots=r.shots,
        seed=r.seed,
        p_min=r.p_min,
        c=r.c,
        patience=r.patience,
        shared=r.shared,
        max_steps=r.max_steps,
        noise=NoiseSpec(r.bitflip_prob),
    )


def cmd_exact(cfg: RunConfig) -> int:
    params = cfg.model.params()
    dim = comb(params.n_sites, params.n_sites // 2)
    check_feasible(params.n_sites)
    log.info("N = %d, dimH = %d", params.n_sites, dim)
    print(f"dimH = {dim}", file=sys.stderr)
    out = Output(cfg, "exact")
    scan = scan_l0(params, cfg.run.grid(), "exact")
    out.provenance(None, dim_sector=dim)
    out.write("scan.csv", scan.to_csv())
    if "svg" in out.formats:
        out.write("energy.svg", svg.energy_scan_svg(scan))
        out.write("particle_number.svg", svg.particle_number_svg(scan))
    return 0


def replay_source(paths, n_sites: int):
    """Counts source reading one file per Trotter step; ``None`` once the files run out."""
    paths = list(paths)

    def source(k: int):
        if k > len(paths):
            return None
        counts = ingest_counts(paths[k - 1])
        if counts.n_sites != n_sites:
            raise CountsSchemaError(f"{paths[k - 1]}: register width {counts.n_sites}, run has N={n_sites}")
        return counts

    return source


def cmd_skqd(cfg: RunConfig, counts_files=()) -> int:
    params = cfg.model.params()
    opts = skqd_options(cfg)
    recorded: dict[int, ShotCounts] = {}
    if counts_files:
        inner = replay_source(counts_files, params.n_sites)
    else:
        from .krylov import simulated_counts

        inner = simulated_counts(params, opts["dt"], opts["reference"], opts["shots"], opts["seed"], opts["noise"])

    def source(k):
        counts = inner(k)
        if counts is not None:
            recorded[k] = counts
        return counts

    out = Output(cfg, "skqd")
    scan = scan_l0(params, cfg.run.grid(), "skqd", compare_exact=cfg.run.compare_exact, counts_source=source, **opts)
    out.provenance(
        cfg.run.seed,
        counts_files=[str(p) for p in counts_files],
        dim_sector=comb(params.n_sites, params.n_sites // 2),
    )
    out.write("scan.csv", scan.to_csv())
    for k in sorted(recorded):
        out.write(f"counts/step_{k:03d}.txt", format_counts(recorded[k]))
        kept = postselect(recorded[k], params.n_sites, cfg.run.p_min)
        out.write(f"counts/step_{k:03d}.postselected.txt", format_counts(kept))
    run = scan.run
    out.write("steps.csv", steps_csv(run))
    if "json" in out.formats:
        out.write("run.json", json.dumps(run.to_record(), indent=2, sort_keys=True) + "\n")
    if "svg" in out.formats:
        out.write("energy.svg", svg.energy_scan_svg(scan))
        out.write("particle_number.svg", svg.particle_number_svg(scan))
        out.write("dims.svg", svg.dims_svg(run))
    print(f"steps = {len(run.steps)}, k_max = {int(run.k_max.max())}, dimK = {int(run.final_dims.max())}", file=sys.stderr)
    return 0


def steps_csv(run) -> str:
    lines = ["k,dimK,new_strings,accepted,E0_first"]
    for s in run.steps:
        e = "" if np.isnan(s.energies[0]) else format(float(s.energies[0]), ".15g")
        lines.append(f"{s.k},{s.dim},{s.new_strings},{int(bool(np.any(s.accepted)))},{e}")
    return "\n".join(lines) + "\n"


def cmd_scan_fit(cfg: RunConfig) -> int:
    sizes = cfg.run.sizes
    if len(sizes) < 4:
        raise FitError(f"the fit needs at least 4 system sizes, got {list(sizes)}")
    points, rows = [], ["N,l0c,sigma,coarse_l0c,coarse_sigma,dim_subspace"]
    extra = skqd_options(cfg) if cfg.run.method == "skqd" else {}
    for n in sizes:
        params = cfg.model.params(n_sites=n)
        if cfg.run.method == "exact":
            check_feasible(n)
        tp = locate_l0c(
            params, cfg.run.grid(), cfg.run.method, cfg.run.refine_rounds, cfg.run.refine_points, **extra
        )
        log.info("N = %d: l0c = %.6f +- %.1e", n, tp.l0c, tp.sigma)
        points.append((n, tp.l0c, tp.sigma))
        rows.append(f"{n},{tp.l0c!r},{tp.sigma!r},{tp.coarse[0]!r},{tp.coarse[1]!r},{tp.dim_subspace}")
    fit = fit_l0c_model(points, cfg.model.mass_ratio)
    out = Output(cfg, "scan-fit")
    out.provenance(cfg.run.seed if cfg.run.method == "skqd" else None)
    out.write("points.csv", "\n".join(rows) + "\n")
    out.write("fit.txt", fit.report())
    if "json" in out.formats:
        record = {
            "a": fit.a,
            "b": fit.b,
            "c": fit.c,
            "errors": fit.errors.tolist(),
            "covariance": fit.covariance.tolist(),
            "residual_norm": fit.residual_norm,
            "points": [list(p) for p in points],
        }
        out.write("fit.json", json.dumps(record, indent=2) + "\n")
    if "svg" in out.formats:
        out.write("l0c_fit.svg", svg.l0c_fit_svg(fit))
    sys.stdout.write(fit.report())
    return 0


def cmd_table1(cfg: RunConfig) -> int:
    r = cfg.run
    configs = [
        Table1Config(
            n_sites=n,
            dt=r.dt,
            shots=r.shots,
            seeds=r.seeds,
            reference=r.reference,
            c=r.c,
            patience=r.patience,
            p_min=r.p_min,
            shared=r.shared,
            bitflip_prob=r.bitflip_prob,
            max_steps=r.max_steps,
            mass_ratio=cfg.model.mass_ratio,
            volume=cfg.model.volume if cfg.model.volume is not None else 30.0,
            grid_points=r.l0_grid[2],
        )
        for n in r.sizes
    ]
    for c in configs:
        check_feasible(c.n_sites)
    rows = table1_report(configs)
    out = Output(cfg, "table1")
    out.provenance(list(r.seeds))
    text = format_table1(rows)
    out.write("table1.txt", text)
    csv_lines = ["N,k_max,mean_rel_dev,dimK,dimH,ratio,seed"]
    for row in rows:
        csv_lines.append(
            f"{row.n_sites},{row.k_max},{row.mean_rel_dev!r},{row.dim_krylov},{row.dim_sector},{row.dim_ratio!r},{row.seed}"
        )
    out.write("table1.csv", "\n".join(csv_lines) + "\n")
    if "svg" in out.formats:
        out.write("ratio.svg", svg.ratio_svg(rows))
    sys.stdout.write(text)
    return 0


def cmd_ingest_check(files, n_sites=None) -> int:
    for path in files:
        try:
            counts = ingest_counts(path)
        except SkqdError as exc:
            raise type(exc)(f"{path}: {exc}") from None
        if n_sites is not None and counts.n_sites != n_sites:
            raise CountsSchemaError(f"{path}: register width {counts.n_sites}, expected {n_sites}")
        kept = postselect(counts)
        print(
            f"{path}: N={counts.n_sites} shots={counts.n_shots} strings={len(counts)} "
            f"zero-charge={len(kept)} ({sum(kept.counts.values())} shots)"
        )
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "ingest-check":
            return cmd_ingest_check(args.files, args.n_sites)
        cfg = resolve_config(args)
        if args.command == "exact":
            return cmd_exact(cfg)
        if args.command == "skqd":
            return cmd_skqd(cfg, args.counts_file)
        if args.command == "scan-fit":
            return cmd_scan_fit(cfg)
        if args.command == "table1":
            return cmd_table1(cfg)
    except SkqdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ConfigError.exit_code
    parser.error(f"unknown command {args.command}")
    return 2


if __name__ == "__main__":
    sys.exit(main())
