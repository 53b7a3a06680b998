"""Run configuration: a flat, sectioned key = value file.

Grammar (read with :mod:`configparser`, ``#`` and ``;`` start comments)::

    [model]
    n_sites = 14
    volume = 30          # or x = ..., not both
    mass_ratio = 10
    penalty = 100

    [run]
    dt = 0.2
    shots = 1000
    seed = 0
    l0_grid = 0:2:41     # start:stop:count
    ...

    [output]
    directory = out
    formats = csv,json

Unknown keys are rejected so typos do not silently fall back to defaults.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .hamiltonian import SchwingerParams

SCHEMA_VERSION = "schwinger-skqd/1"
FORMATS = ("csv", "json", "svg")


def parse_grid(text: str) -> tuple[float, float, int]:
    """``"start:stop:count"`` -> (start, stop, count)."""
    parts = str(text).split(":")
    if len(parts) != 3:
        raise ConfigError(f"l0 grid must look like start:stop:count, got {text!r}")
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigError(f"bad l0 grid {text!r}") from None
    if count < 1:
        raise ConfigError("l0 grid needs at least one point")
    if count > 1 and not stop > start:
        raise ConfigError("l0 grid must be increasing")
    return start, stop, count


def format_grid(grid: tuple[float, float, int]) -> str:
    return f"{grid[0]!r}:{grid[1]!r}:{grid[2]}"


def parse_int_list(text) -> tuple[int, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(int(v) for v in text)
    try:
        return tuple(int(v) for v in str(text).replace(" ", "").split(",") if v)
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of integers, got {text!r}") from None


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


@dataclass
class ModelSection:
    n_sites: int = 4
    x: float | None = None
    volume: float | None = 30.0
    mass_ratio: float = 10.0
    penalty: float = 100.0

    def params(self, n_sites: int | None = None) -> SchwingerParams:
        section = dataclasses.asdict(self)
        if n_sites is not None:
            section["n_sites"] = n_sites
        if self.x is not None:
            section["volume"] = None
        return SchwingerParams.from_mapping(section)


@dataclass
class RunSection:
    dt: float = 0.2
    max_steps: int = 200
    shots: int = 1000
    seed: int = 0
    p_min: float = 0.0
    c: float = 1e-2
    patience: int = 10
    reference: str = "alternating-10"
    bitflip_prob: float = 0.0
    shared: bool = True
    l0_grid: tuple[float, float, int] = (0.0, 2.0, 41)
    method: str = "exact"
    sizes: tuple[int, ...] = (8, 10, 12, 14, 16)
    seeds: tuple[int, ...] = (0,)
    refine_rounds: int = 3
    refine_points: int = 11
    compare_exact: bool = False

    def grid(self) -> np.ndarray:
        start, stop, count = self.l0_grid
        return np.linspace(start, stop, count)


@dataclass
class OutputSection:
    directory: str = "out"
    formats: tuple[str, ...] = ("csv", "json")


@dataclass
class RunConfig:
    model: ModelSection = field(default_factory=ModelSection)
    run: RunSection = field(default_factory=RunSection)
    output: OutputSection = field(default_factory=OutputSection)

    def validate(self) -> "RunConfig":
        self.model.params()
        r = self.run
        if not r.dt > 0:
            raise ConfigError("dt must be positive")
        if r.shots < 1 or r.max_steps < 1 or r.patience < 1:
            raise ConfigError("shots, max_steps and patience must be positive")
        if not 0 <= r.p_min < 1 or not 0 <= r.bitflip_prob < 1:
            raise ConfigError("p_min and bitflip_prob must lie in [0, 1)")
        if not r.c > 0:
            raise ConfigError("c must be positive")
        if r.method not in ("exact", "skqd"):
            raise ConfigError(f"method must be exact or skqd, got {r.method!r}")
        bad = set(self.output.formats) - set(FORMATS)
        if bad:
            raise ConfigError(f"unknown output formats {sorted(bad)}; choose from {FORMATS}")
        return self

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        for name in ("model", "run", "output"):
            section = getattr(self, name)
            cp[name] = {}
            for f in dataclasses.fields(section):
                value = getattr(section, f.name)
                if value is None:
                    continue
                cp[name][f.name] = _render(f.name, value)
        buf = io.StringIO()
        buf.write(f"# {SCHEMA_VERSION}\n")
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str) -> "RunConfig":
        cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"unreadable config: {exc}") from None
        unknown = set(cp.sections()) - {"model", "run", "output"}
        if unknown:
            raise ConfigError(f"unknown config sections {sorted(unknown)}")
        cfg = cls()
        for name in ("model", "run", "output"):
            if cp.has_section(name):
                apply_overrides(getattr(cfg, name), dict(cp[name]))
        if cp.has_section("model") and "x" in cp["model"] and "volume" not in cp["model"]:
            cfg.model.volume = None
        return cfg.validate()


def _render(name, value) -> str:
    if name == "l0_grid":
        return format_grid(value)
    if isinstance(value, (list, tuple)):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def apply_overrides(section, values: dict) -> None:
    """Set dataclass fields from strings (or already typed values), coercing by field type."""
    names = {f.name: f for f in dataclasses.fields(section)}
    for key, raw in values.items():
        if key not in names:
            raise ConfigError(f"unknown key {key!r} in [{type(section).__name__.removesuffix('Section').lower()}]")
        if raw is None:
            continue
        setattr(section, key, _coerce(key, raw, getattr(section, key)))


def _coerce(key, raw, current):
    try:
        if key == "l0_grid":
            return raw if isinstance(raw, tuple) else parse_grid(raw)
        if key in ("sizes", "seeds"):
            return parse_int_list(raw)
        if key == "formats":
            items = raw if isinstance(raw, (list, tuple)) else str(raw).split(",")
            return tuple(s.strip() for s in items if s.strip())
        if key in ("x", "volume"):
            return None if raw in ("", "none") else float(raw)
        if isinstance(current, bool):
            return _bool(raw)
        if isinstance(current, int):
            return int(raw)
        if isinstance(current, float):
            return float(raw)
        return str(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
