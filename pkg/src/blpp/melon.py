"""Melons: ordered line ensembles produced by sorting networks of pairwise sorts.

Sorting two piecewise-linear lines produces kinks where the running maximum
of their difference starts to move. With ``refine=True`` those crossing
times are inserted as new knots, so the result is again exactly piecewise
linear on its own (finer) time grid and last passage identities hold to
rounding error. ``refine=False`` keeps the original grid and is the cheap
approximation used for large ensembles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .env import GridSpec, LineEnsemble, RngStream
from .errors import CapacityError, DomainError
from .lpp import EndpointPair, multi_path_last_passage

DEFAULT_MAX_KNOTS = 200_000


@dataclass(frozen=True, eq=False)
class MelonEnsemble:
    """Ordered lines starting at 0.

    ``times`` holds the knot times (the original grid plus any inserted
    crossing knots) and ``grid_columns[j]`` is the knot index of original grid
    point j. Last passage functions index columns of ``values``, i.e. knots.
    """

    values: np.ndarray
    times: np.ndarray
    grid: GridSpec
    grid_columns: np.ndarray
    route: str
    seed: int = 0
    stream_id: int = 0
    top_index: int = 0

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        times = np.array(self.times, dtype=float)
        cols = np.array(self.grid_columns, dtype=np.int64)
        if values.ndim != 2 or values.shape[1] != times.shape[0]:
            raise DomainError("melon values must have one column per knot time")
        if cols.shape != (self.grid.steps + 1,):
            raise DomainError("grid_columns must map every original grid point")
        for arr in (values, times, cols):
            arr.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "grid_columns", cols)

    @property
    def n_lines(self) -> int:
        return self.values.shape[0]

    @property
    def steps(self) -> int:
        return self.values.shape[1] - 1

    def column(self, grid_index: int) -> int:
        """Knot column of an original grid index."""
        return int(self.grid_columns[grid_index])

    def on_grid(self) -> np.ndarray:
        """Values at the original grid points only."""
        return self.values[:, self.grid_columns]

    def knot_index(self, t: float) -> int:
        """Knot whose time is nearest to ``t``."""
        if t < self.times[0] - 1e-12 or t > self.times[-1] + 1e-12:
            raise DomainError(f"time {t} outside melon domain [{self.times[0]}, {self.times[-1]}]")
        j = int(np.searchsorted(self.times, t))
        if j == len(self.times):
            return j - 1
        if j > 0 and t - self.times[j - 1] <= self.times[j] - t:
            return j - 1
        return j


def pairwise_sort(f1, f2) -> tuple[np.ndarray, np.ndarray]:
    """Sort two lines sampled on the same grid, using grid points only."""
    a = np.asarray(f1, dtype=float)
    b = np.asarray(f2, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise DomainError("pairwise_sort needs two lines on the same grid")
    running = np.maximum.accumulate(b - a)
    return a - b[0] + running, b - a[0] - running


def bubble_word(n: int) -> list[int]:
    """(s_1)(s_2 s_1)...(s_{n-1}...s_1) as a list of 1-based generator indices."""
    return [i for r in range(1, n) for i in range(r, 0, -1)]


def reversed_bubble_word(n: int) -> list[int]:
    """(s_{n-1})(s_{n-2} s_{n-1})...(s_1...s_{n-1}), a second reduced word."""
    return [i for r in range(n - 1, 0, -1) for i in range(r, n)]


def _refined_sort(times, F, a):
    """Exact sort of rows a, a+1 of a piecewise-linear ensemble, inserting crossing knots."""
    D = F[a + 1] - F[a]
    record = np.maximum.accumulate(D)
    prev_record = np.concatenate(([-np.inf], record[:-1]))
    # the running max starts following D strictly inside cell (j-1, j)
    cross = np.nonzero((D[1:] > prev_record[1:]) & (D[:-1] < prev_record[1:]))[0] + 1
    if cross.size:
        g = prev_record[cross]
        lam = (g - D[cross - 1]) / (D[cross] - D[cross - 1])
        t_new = times[cross - 1] + lam * (times[cross] - times[cross - 1])
        keep = (t_new > times[cross - 1]) & (t_new < times[cross])
        cross, lam, t_new = cross[keep], lam[keep], t_new[keep]
        if cross.size:
            inserted = F[:, cross - 1] * (1.0 - lam) + F[:, cross] * lam
            times = np.insert(times, cross, t_new)
            F = np.insert(F, cross, inserted, axis=1)
    D = F[a + 1] - F[a]
    running = np.maximum.accumulate(D)
    upper, lower = F[a].copy(), F[a + 1].copy()
    F[a] = upper - lower[0] + running
    F[a + 1] = lower - upper[0] - running
    return times, F


def _apply_word(times, F, word, refine, max_knots):
    # the word is an operator product, so its rightmost letter acts first
    order = [int(i) - 1 for i in reversed(word)]
    if not refine:
        F = np.ascontiguousarray(F)
        _kernels.melon_grid(F, np.array(order, dtype=np.int64))
        return times, F
    for a in order:
        times, F = _refined_sort(times, F, a)
        if len(times) > max_knots:
            raise CapacityError(
                f"refined melon exceeded {max_knots} knots; use refine=False for large ensembles"
            )
    return times, F


def _require_origin(env):
    if env.grid.t_start != 0.0:
        raise DomainError("melon needs a one-sided ensemble whose grid starts at time 0")


def melon(env: LineEnsemble, refine: bool = True, word=None, max_knots: int = DEFAULT_MAX_KNOTS) -> MelonEnsemble:
    """Melon of ``env`` through the sorting network of ``word`` (bubble sort by default)."""
    _require_origin(env)
    n = env.n_lines
    word = bubble_word(n) if word is None else list(word)
    if any(not 1 <= i < n for i in word):
        raise DomainError(f"word letters must lie in 1..{n - 1}")
    grid_times = env.grid.times
    F = np.array(env.values, dtype=float)
    F -= F[:, :1]
    times, F = _apply_word(grid_times.copy(), F, word, refine, max_knots)
    cols = np.searchsorted(times, grid_times)
    route = "network" if refine else "network-grid"
    return MelonEnsemble(F, times, env.grid, cols, route, env.seed, env.stream_id)


def melon_via_lpp(env: LineEnsemble, max_lines: int = 4, max_steps: int = 12) -> MelonEnsemble:
    """Melon read off multi-path last passage values at every grid time."""
    _require_origin(env)
    n, steps = env.n_lines, env.steps
    if n > max_lines or steps > max_steps:
        raise CapacityError(
            f"melon_via_lpp handles n <= {max_lines}, steps <= {max_steps}; got n={n}, steps={steps}"
        )
    F = np.asarray(env.values, dtype=float)
    W = np.zeros((n, steps + 1))
    if n == 1:
        W[0] = F[0] - F[0, 0]
    else:
        for t in range(1, steps + 1):
            prefix = [0.0]
            for k in range(1, n + 1):
                ep = EndpointPair([(0, n)] * k, [(t, 1)] * k)
                prefix.append(multi_path_last_passage(F, ep, engine="transfer"))
            W[:, t] = np.diff(prefix)
    cols = np.arange(steps + 1)
    return MelonEnsemble(W, env.grid.times, env.grid, cols, "lpp-definition", env.seed, env.stream_id)


def reversed_ensemble(env: LineEnsemble, z: int) -> LineEnsemble:
    """Lines -f_{n+1-i}(z - t) on the grid rebased so column 0 is time z."""
    if not 1 <= z <= env.steps:
        raise DomainError(f"opening column {z} must lie in 1..{env.steps}")
    times = env.grid.times
    grid = GridSpec(0.0, float(times[z] - times[0]), z)
    values = -np.asarray(env.values)[::-1, z::-1]
    return LineEnsemble(values, grid, 0, env.seed, env.stream_id)


def reverse_melon(env: LineEnsemble, z: int, refine: bool = True, max_knots: int = DEFAULT_MAX_KNOTS) -> MelonEnsemble:
    """Melon of the reversed ensemble opened up at grid column ``z``."""
    return melon(reversed_ensemble(env, z), refine=refine, max_knots=max_knots)


def gap_process(m) -> np.ndarray:
    values = np.asarray(m.values)
    if values.shape[0] < 2:
        raise DomainError("gap process needs at least two lines")
    return values[:-1] - values[1:]


def sample_dyson_melon(n: int, grid: GridSpec, stream: RngStream) -> MelonEnsemble:
    """Ordered eigenvalues of an n x n Hermitian Brownian motion on ``grid``.

    The melon of n independent Brownian motions has this law, so this is an
    exact-in-law sampler with no discretisation bias at the grid times.
    """
    if grid.t_start != 0.0:
        raise DomainError("Dyson melon grid must start at time 0")
    rng = stream.generator()
    H = np.zeros((n, n), dtype=complex)
    out = np.zeros((n, grid.steps + 1))
    scale = math.sqrt(grid.dt)
    for j in range(1, grid.steps + 1):
        A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        H += (A + A.conj().T) * (0.5 * scale)
        out[:, j] = np.linalg.eigvalsh(H)[::-1]
    cols = np.arange(grid.steps + 1)
    return MelonEnsemble(out, grid.times, grid, cols, "dyson", stream.master_seed, stream.stream_id)
