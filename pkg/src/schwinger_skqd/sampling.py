"""Shot sampling, zero-charge post-selection and the counts file format.

Random numbers come from numpy's PCG64.  A run's master seed is split per
Trotter step with ``SeedSequence(seed, spawn_key=(k,))`` (see
:func:`step_seed`), so step k draws the same shots regardless of how many
steps run before it.

Counts file::

    N=4 shots=400
    0011,168
    0101,40

Bitstrings are written ``q_{N-1}...q_0``.  Blank lines and ``#`` comments
are ignored.
"""

from __future__ import annotations

import os
import tempfile
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bits
from .errors import CountsParseError, CountsSchemaError

PRNG_NAME = "numpy.random.PCG64"


@dataclass(frozen=True)
class NoiseSpec:
    """Independent readout bit flips with probability ``bitflip_prob`` per qubit per shot."""

    bitflip_prob: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.bitflip_prob < 1.0:
            raise ValueError(f"bitflip_prob must be in [0, 1), got {self.bitflip_prob}")


@dataclass
class ShotCounts:
    n_sites: int
    n_shots: int
    counts: dict[int, int] = field(default_factory=dict)
    origin: str = "simulated"

    def __post_init__(self):
        if self.n_shots < 1:
            raise ValueError("n_shots must be positive")
        if sum(self.counts.values()) > self.n_shots:
            raise ValueError("more counts than shots")

    def __len__(self):
        return len(self.counts)

    def support(self) -> set[int]:
        return set(self.counts)

    def probability(self, b: int) -> float:
        return self.counts.get(b, 0) / self.n_shots

    def labelled(self) -> dict[str, int]:
        return {bits.label(b, self.n_sites): c for b, c in self.counts.items()}

    def merged(self, other: "ShotCounts") -> "ShotCounts":
        if other.n_sites != self.n_sites:
            raise ValueError("cannot merge counts over different register widths")
        total = Counter(self.counts)
        total.update(other.counts)
        return ShotCounts(self.n_sites, self.n_shots + other.n_shots, dict(total), "merged")


def step_seed(seed: int, step: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(step,))


def sample(state, n_shots: int, seed, noise: NoiseSpec | None = None) -> ShotCounts:
    """Draw ``n_shots`` bitstrings from |amplitude|^2, then apply readout noise.

    Uses one inverse-CDF pass: a cumulative sum over the sector probabilities
    and a binary search per shot.
    """
    if n_shots < 1:
        raise ValueError("n_shots must be positive")
    noise = noise or NoiseSpec()
    rng = np.random.Generator(np.random.PCG64(seed))
    cdf = np.cumsum(state.probabilities())
    u = rng.random(n_shots) * cdf[-1]
    idx = np.minimum(np.searchsorted(cdf, u, side="right"), len(cdf) - 1)
    drawn = state.basis.states[idx]
    if noise.bitflip_prob > 0:
        n_sites = state.basis.n_sites
        flips = rng.random((n_shots, n_sites)) < noise.bitflip_prob
        drawn = drawn ^ (flips.astype(np.int64) << np.arange(n_sites, dtype=np.int64)).sum(axis=1)
    values, counts = np.unique(drawn, return_counts=True)
    origin = f"simulated(seed={_seed_repr(seed)})"
    return ShotCounts(
        state.basis.n_sites, n_shots, {int(v): int(c) for v, c in zip(values, counts)}, origin
    )


def _seed_repr(seed) -> str:
    if isinstance(seed, np.random.SeedSequence):
        return f"{seed.entropy}/{','.join(map(str, seed.spawn_key))}"
    return str(seed)


def postselect(counts: ShotCounts, n_sites: int | None = None, p_min: float = 0.0) -> ShotCounts:
    """Drop nonzero-charge strings, then strings with count/n_shots < p_min.

    Probabilities are relative to the original shot total.
    """
    if not 0.0 <= p_min < 1.0:
        raise ValueError(f"p_min must be in [0, 1), got {p_min}")
    n_sites = counts.n_sites if n_sites is None else n_sites
    half = n_sites // 2
    kept = {
        b: c
        for b, c in counts.counts.items()
        if bits.weight(b) == half and c / counts.n_shots >= p_min
    }
    return ShotCounts(counts.n_sites, counts.n_shots, kept, counts.origin)


def _parse_header(line: str, lineno: int) -> tuple[int, int]:
    fields = {}
    for token in line.split():
        key, sep, value = token.partition("=")
        if not sep:
            raise CountsParseError(f"malformed header token {token!r}", lineno)
        fields[key.strip()] = value.strip()
    try:
        n_sites, n_shots = int(fields["N"]), int(fields["shots"])
    except KeyError as exc:
        raise CountsParseError(f"header is missing {exc.args[0]}=", lineno) from None
    except ValueError:
        raise CountsParseError(f"non-integer header value in {line!r}", lineno) from None
    if n_sites < 1 or n_shots < 1:
        raise CountsSchemaError("header values must be positive", lineno)
    return n_sites, n_shots


def parse_counts(text: str, source: str = "<string>") -> ShotCounts:
    header = None
    counts: dict[int, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if header is None:
            header = _parse_header(line, lineno)
            continue
        n_sites = header[0]
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 2:
            raise CountsParseError(f"expected 'bitstring,count', got {raw!r}", lineno)
        label, count = parts
        if not label or set(label) - {"0", "1"}:
            raise CountsParseError(f"not a bitstring: {label!r}", lineno)
        if len(label) != n_sites:
            raise CountsSchemaError(
                f"bitstring {label!r} has width {len(label)}, header says N={n_sites}", lineno
            )
        try:
            value = int(count)
        except ValueError:
            raise CountsParseError(f"count is not an integer: {count!r}", lineno) from None
        if value < 0:
            raise CountsParseError("negative count", lineno)
        b = int(label, 2)
        if b in counts:
            raise CountsParseError(f"duplicate bitstring {label}", lineno)
        counts[b] = value
    if header is None:
        raise CountsParseError("missing 'N=<int> shots=<int>' header", 1)
    n_sites, n_shots = header
    if sum(counts.values()) > n_shots:
        raise CountsSchemaError(f"counts sum to more than shots={n_shots}")
    return ShotCounts(n_sites, n_shots, counts, f"ingested({source})")


def ingest_counts(path) -> ShotCounts:
    path = Path(path)
    return parse_counts(path.read_text(), source=path.name)


def format_counts(counts: ShotCounts) -> str:
    lines = [f"N={counts.n_sites} shots={counts.n_shots}"]
    for b in sorted(counts.counts):
        lines.append(f"{bits.label(b, counts.n_sites)},{counts.counts[b]}")
    return "\n".join(lines) + "\n"


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_counts(counts: ShotCounts, path) -> None:
    atomic_write_text(path, format_counts(counts))
