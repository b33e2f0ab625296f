"""Seeded piecewise-linear line environments.

A line ensemble is a stack of functions sampled on a uniform time grid and
read as piecewise linear in between. Row 0 is line 1, the top line; a path
always travels from a larger line index to a smaller one.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DomainError


@dataclass(frozen=True)
class GridSpec:
    t_start: float
    t_end: float
    steps: int

    def __post_init__(self):
        if not (math.isfinite(self.t_start) and math.isfinite(self.t_end)):
            raise ConfigurationError("grid endpoints must be finite")
        if self.t_start >= self.t_end:
            raise ConfigurationError(
                f"grid needs t_start < t_end, got [{self.t_start}, {self.t_end}]"
            )
        if int(self.steps) != self.steps or self.steps < 1:
            raise ConfigurationError(f"grid needs steps >= 1, got {self.steps}")

    @property
    def dt(self) -> float:
        return (self.t_end - self.t_start) / self.steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, self.steps + 1)

    def nearest_index(self, t: float) -> int:
        """Column whose time is closest to ``t``; rejects times off the grid."""
        pos = (t - self.t_start) / self.dt
        j = int(np.floor(pos + 0.5))
        if j < 0 or j > self.steps or abs(pos - j) > 0.5 + 1e-9:
            raise DomainError(f"time {t} outside grid [{self.t_start}, {self.t_end}]")
        return j


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream keyed by (master_seed, stream_id).

    The generator is Philox seeded from ``SeedSequence(master_seed,
    spawn_key=(stream_id,))``; sub-streams hash the parent id together with a
    child index through the same SeedSequence mixing, so any sample can be
    regenerated from its index alone.
    """

    master_seed: int
    stream_id: int = 0

    def _seed_sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence(int(self.master_seed), spawn_key=(int(self.stream_id),))

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(self._seed_sequence()))

    def child(self, index: int) -> "RngStream":
        mixed = np.random.SeedSequence(
            int(self.master_seed), spawn_key=(int(self.stream_id), int(index))
        )
        return RngStream(self.master_seed, int(mixed.generate_state(1, np.uint64)[0]))


@dataclass(frozen=True, eq=False)
class LineEnsemble:
    values: np.ndarray
    grid: GridSpec
    top_index: int = 0
    seed: int = 0
    stream_id: int = 0

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise ConfigurationError("ensemble values must be a matrix (lines x grid points)")
        if values.shape[1] != self.grid.steps + 1:
            raise ConfigurationError(
                f"expected {self.grid.steps + 1} columns, got {values.shape[1]}"
            )
        if values.shape[0] < 1:
            raise ConfigurationError("ensemble needs at least one line")
        if not np.all(np.isfinite(values)):
            raise ConfigurationError("ensemble values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_lines(self) -> int:
        return self.values.shape[0]

    @property
    def steps(self) -> int:
        return self.grid.steps

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def row_of(self, global_index: int) -> int:
        """Matrix row of a line given its global label."""
        row = int(global_index) - self.top_index
        if not 0 <= row < self.n_lines:
            raise DomainError(
                f"line {global_index} outside window "
                f"[{self.top_index}, {self.top_index + self.n_lines - 1}]"
            )
        return row


def sample_brownian_ensemble(
    n: int, grid: GridSpec, stream: RngStream, initial=None, top_index: int = 0
) -> LineEnsemble:
    """n independent Brownian motions sampled on ``grid``."""
    if n < 1:
        raise ConfigurationError(f"need at least one line, got {n}")
    start = np.zeros(n) if initial is None else np.asarray(initial, dtype=float)
    if start.shape != (n,):
        raise ConfigurationError("initial values must have one entry per line")
    rng = stream.generator()
    increments = rng.standard_normal((n, grid.steps)) * math.sqrt(grid.dt)
    values = np.empty((n, grid.steps + 1))
    values[:, 0] = start
    np.cumsum(increments, axis=1, out=values[:, 1:])
    values[:, 1:] += start[:, None]
    return LineEnsemble(values, grid, top_index, stream.master_seed, stream.stream_id)


def window_lines(n: int, t_min: float, t_max: float) -> tuple[int, int]:
    """Global labels (top, bottom) of the lines used by landscape times in [t_min, t_max]."""
    return -math.floor(t_max * n), -math.floor(t_min * n)


def sample_landscape_window(
    n: int,
    t_min: float,
    t_max: float,
    x_pad: float,
    stream: RngStream,
    resolution: int | None = None,
) -> LineEnsemble:
    """Two-sided Brownian window for landscape points with times in [t_min, t_max].

    The grid has spacing ``1 / resolution`` and is anchored at time 0, so any
    time that is a multiple of the spacing falls exactly on a column.
    """
    if n < 1:
        raise ConfigurationError(f"scale parameter must be >= 1, got {n}")
    if not t_min < t_max:
        raise ConfigurationError(f"need t_min < t_max, got {t_min}, {t_max}")
    if x_pad < 0:
        raise ConfigurationError("x_pad must be nonnegative")
    top, bottom = window_lines(n, t_min, t_max)
    if bottom < top:
        raise ConfigurationError("window contains no lines")
    resolution = 8 * n if resolution is None else int(resolution)
    if resolution < 1:
        raise ConfigurationError("resolution must be a positive integer")
    lo = math.floor((t_min - x_pad) * resolution + 1e-9)
    hi = math.ceil((t_max + x_pad) * resolution - 1e-9)
    grid = GridSpec(lo / resolution, hi / resolution, hi - lo)
    return sample_brownian_ensemble(bottom - top + 1, grid, stream, top_index=top)


_HEADER = ["n_lines", "top_index", "t_start", "t_end", "steps", "seed", "stream_id"]


def write_ensemble_csv(path, ensemble, extra: dict | None = None) -> None:
    """Header row, one row of header values, then one row per line."""
    head = list(_HEADER)
    vals = [
        ensemble.n_lines,
        ensemble.top_index,
        repr(float(ensemble.grid.t_start)),
        repr(float(ensemble.grid.t_end)),
        ensemble.grid.steps,
        ensemble.seed,
        ensemble.stream_id,
    ]
    for key, value in (extra or {}).items():
        head.append(key)
        vals.append(value)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(head)
        writer.writerow(vals)
        for row in np.asarray(ensemble.values):
            writer.writerow([repr(float(v)) for v in row])


def read_ensemble_csv(path) -> LineEnsemble:
    with open(Path(path), newline="") as fh:
        rows = list(csv.reader(fh))
    meta = dict(zip(rows[0], rows[1]))
    grid = GridSpec(float(meta["t_start"]), float(meta["t_end"]), int(meta["steps"]))
    values = np.array([[float(v) for v in row] for row in rows[2:]])
    if values.shape[0] != int(meta["n_lines"]):
        raise ConfigurationError("line count in header does not match body")
    return LineEnsemble(
        values, grid, int(meta["top_index"]), int(meta["seed"]), int(meta.get("stream_id", 0))
    )
