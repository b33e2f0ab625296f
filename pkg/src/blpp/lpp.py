"""Last passage values, paths and first passage values on piecewise-linear lines.

Every function takes an ensemble-like object exposing a ``values`` matrix
(rows are lines, row 0 = line 1) and works in column indices of that matrix.
Jumps happen at columns; for piecewise-linear lines the objective is linear
in each jump time inside a cell, so grid-aligned optima are exact.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import CapacityError, DomainError

ENUMERATE_MAX_PATHS = 3
ENUMERATE_MAX_SPAN = 16
ENUMERATE_MAX_PAIRS = 4_000_000


@dataclass(frozen=True, order=True)
class Point:
    grid_index: int
    line: int


@dataclass(frozen=True)
class LatticePath:
    """A path from ``start`` down to ``end`` in line index.

    ``jump_indices[i]`` is the column where the path leaves line
    ``start.line - i`` for line ``start.line - i - 1``.
    """

    start: Point
    end: Point
    jump_indices: tuple[int, ...]

    def __post_init__(self):
        jumps = tuple(int(j) for j in self.jump_indices)
        object.__setattr__(self, "jump_indices", jumps)
        if len(jumps) != self.start.line - self.end.line:
            raise DomainError(
                f"path from line {self.start.line} to {self.end.line} "
                f"needs {self.start.line - self.end.line} jumps, got {len(jumps)}"
            )
        if any(b < a for a, b in zip(jumps, jumps[1:])):
            raise DomainError("jump columns must be nondecreasing")
        if jumps and (jumps[0] < self.start.grid_index or jumps[-1] > self.end.grid_index):
            raise DomainError("jump columns must lie between the endpoints")

    def segments(self):
        """Yield (line, first column, last column) for each visited line."""
        begin = self.start.grid_index
        for i, j in enumerate(self.jump_indices):
            yield self.start.line - i, begin, j
            begin = j
        yield self.end.line, begin, self.end.grid_index

    def line_at(self, column: int) -> int:
        """Line occupied right after ``column`` (right-continuous reading)."""
        if not self.start.grid_index <= column <= self.end.grid_index:
            raise DomainError(f"column {column} outside the path's domain")
        passed = sum(1 for j in self.jump_indices if j <= column)
        return self.start.line - passed

    def cell_lines(self) -> np.ndarray:
        """Line occupied on each open cell (c, c+1) of the path's domain."""
        cols = np.arange(self.start.grid_index, self.end.grid_index)
        jumps = np.asarray(self.jump_indices, dtype=np.int64)
        passed = np.searchsorted(jumps, cols, side="right")
        return self.start.line - passed


@dataclass(frozen=True)
class MultiPath:
    paths: tuple[LatticePath, ...]


@dataclass(frozen=True)
class EndpointPair:
    """Starts ``U`` and ends ``V`` as lists of (grid_index, line) pairs."""

    U: tuple[tuple[int, int], ...]
    V: tuple[tuple[int, int], ...]

    def __post_init__(self):
        U = tuple((int(x), int(l)) for x, l in self.U)
        V = tuple((int(y), int(m)) for y, m in self.V)
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "V", V)
        if not U or len(U) != len(V):
            raise DomainError("U and V must be nonempty and of equal length")
        for (x, l), (y, m) in zip(U, V):
            if not (x < y and l > m):
                raise DomainError(f"need x < y and l > m, got ({x},{l}) -> ({y},{m})")
        for i in range(len(U) - 1):
            if U[i][0] > U[i + 1][0] or V[i][0] > V[i + 1][0]:
                raise DomainError("start and end columns must be nondecreasing in i")

    @property
    def k(self) -> int:
        return len(self.U)


def _matrix(env) -> np.ndarray:
    return np.asarray(env.values if hasattr(env, "values") else env, dtype=float)


def _check_point(F, p: Point):
    n, cols = F.shape
    if not (0 <= p.grid_index < cols and 1 <= p.line <= n):
        raise DomainError(f"point {p} outside ensemble with {n} lines and {cols} columns")


def _check_pair(F, start: Point, end: Point):
    _check_point(F, start)
    _check_point(F, end)
    if start.grid_index > end.grid_index or start.line < end.line:
        raise DomainError(f"no path from {start} to {end}")


def last_passage(env, start: Point, end: Point) -> float:
    F = _matrix(env)
    _check_pair(F, start, end)
    F = np.ascontiguousarray(F[:, : end.grid_index + 1])
    prof = _kernels.forward_profile(F, start.grid_index, start.line - 1, end.line - 1)
    return float(prof[-1])


def passage_table(env, start: Point, end: Point) -> np.ndarray:
    """Values from ``start`` to every (column, line) in the box spanned with ``end``.

    Entry [line - end.line, column - start.grid_index].
    """
    F = _matrix(env)
    _check_pair(F, start, end)
    return _kernels.forward_table(
        np.ascontiguousarray(F), start.grid_index, start.line - 1, end.grid_index, end.line - 1
    )


def passage_profile_from(env, start: Point, line: int) -> np.ndarray:
    """Values from ``start`` to (c, line) for c = start.grid_index .. last column."""
    F = np.ascontiguousarray(_matrix(env))
    _check_point(F, start)
    if not 1 <= line <= start.line:
        raise DomainError(f"target line {line} not reachable from {start}")
    return _kernels.forward_profile(F, start.grid_index, start.line - 1, line - 1)


def passage_profile_to(env, end: Point, line: int) -> np.ndarray:
    """Values from (c, line) to ``end`` for c = 0 .. end.grid_index."""
    F = np.ascontiguousarray(_matrix(env))
    _check_point(F, end)
    if not end.line <= line <= F.shape[0]:
        raise DomainError(f"start line {line} cannot reach {end}")
    return _kernels.backward_profile(F, end.grid_index, end.line - 1, line - 1)


def last_passage_path(env, start: Point, end: Point, side: str = "rightmost") -> LatticePath:
    if side not in ("rightmost", "leftmost"):
        raise DomainError(f"side must be 'rightmost' or 'leftmost', got {side!r}")
    F = np.ascontiguousarray(_matrix(env))
    _check_pair(F, start, end)
    c0, r0, c1, r1 = start.grid_index, start.line - 1, end.grid_index, end.line - 1
    V = _kernels.forward_table(F, c0, r0, c1, r1)
    jumps = _kernels.backtrack(F, V, c0, r0, c1, r1, side == "rightmost")
    return LatticePath(start, end, tuple(jumps.tolist()))


def _check_path(F, path: LatticePath):
    _check_pair(F, path.start, path.end)


def path_length(env, path: LatticePath) -> float:
    F = _matrix(env)
    _check_path(F, path)
    return float(sum(F[line - 1, b] - F[line - 1, a] for line, a, b in path.segments()))


def gap_length(env, path: LatticePath) -> float:
    """End value minus start value minus the gaps crossed at each jump."""
    F = _matrix(env)
    _check_path(F, path)
    total = F[path.end.line - 1, path.end.grid_index] - F[path.start.line - 1, path.start.grid_index]
    for i, t in enumerate(path.jump_indices):
        below = path.start.line - i
        total -= F[below - 2, t] - F[below - 1, t]
    return float(total)


def multi_path_last_passage(env, ep: EndpointPair, engine: str = "enumerate") -> float:
    """Best total length of k paths that stay strictly ordered on shared cell interiors.

    ``engine="enumerate"`` scores every jump tuple of every path and combines
    consecutive compatible paths exhaustively (k <= 3, column span <= 16).
    ``engine="transfer"`` sweeps columns with the ordered line tuple as state
    and has no span limit.
    """
    F = _matrix(env)
    for x, l in ep.U:
        _check_point(F, Point(x, l))
    for y, m in ep.V:
        _check_point(F, Point(y, m))
    if engine == "enumerate":
        value = _enumerate_multi(F, ep)
    elif engine == "transfer":
        value = _transfer_multi(F, ep)
    else:
        raise DomainError(f"unknown engine {engine!r}")
    if not np.isfinite(value):
        raise DomainError("no admissible ordered paths between these endpoints")
    return value


def _enumerate_multi(F, ep: EndpointPair) -> float:
    span = max(y for y, _ in ep.V) - min(x for x, _ in ep.U)
    if ep.k > ENUMERATE_MAX_PATHS or span > ENUMERATE_MAX_SPAN:
        raise CapacityError(
            f"enumeration engine handles k <= {ENUMERATE_MAX_PATHS} and span <= "
            f"{ENUMERATE_MAX_SPAN}; got k={ep.k}, span={span}"
        )
    scored = []
    for (x, l), (y, m) in zip(ep.U, ep.V):
        lengths, lines = [], []
        for jumps in itertools.combinations_with_replacement(range(x, y + 1), l - m):
            p = LatticePath(Point(x, l), Point(y, m), jumps)
            lengths.append(path_length(F, p))
            lines.append(p.cell_lines())
        scored.append((np.array(lengths), np.array(lines, dtype=np.int64).reshape(len(lengths), y - x)))

    best = scored[0][0]
    for i in range(1, ep.k):
        lengths, lines = scored[i]
        prev_lines = scored[i - 1][1]
        lo = max(ep.U[i - 1][0], ep.U[i][0])
        hi = min(ep.V[i - 1][0], ep.V[i][0])
        if len(best) * len(lengths) > ENUMERATE_MAX_PAIRS:
            raise CapacityError("too many candidate pairs for exhaustive enumeration")
        if hi > lo:
            upper = prev_lines[:, lo - ep.U[i - 1][0] : hi - ep.U[i - 1][0]]
            lower = lines[:, lo - ep.U[i][0] : hi - ep.U[i][0]]
            ok = np.all(upper[:, None, :] < lower[None, :, :], axis=2)
        else:
            ok = np.ones((len(best), len(lengths)), dtype=bool)
        combined = np.where(ok, best[:, None], -np.inf)
        best = combined.max(axis=0) + lengths
    return float(best.max())


def _transfer_multi(F, ep: EndpointPair) -> float:
    U, V = ep.U, ep.V
    k = ep.k
    lo = min(x for x, _ in U)
    hi = max(y for y, _ in V)

    def active(c):
        return [i for i in range(k) if U[i][0] <= c < V[i][0]]

    states = {(): 0.0}
    prev_active: list[int] = []
    for j in range(lo, hi + 1):
        now = active(j) if j < hi else []
        new_states: dict[tuple[int, ...], float] = {}
        for lines, value in states.items():
            before = dict(zip(prev_active, lines))
            ceiling = [before.get(i, U[i][1]) for i in now]
            for choice in _ordered_choices(ceiling, [V[i][1] for i in now]):
                gain = sum(F[line - 1, j + 1] - F[line - 1, j] for line in choice)
                total = value + gain
                if total > new_states.get(choice, -np.inf):
                    new_states[choice] = total
        states = new_states
        prev_active = now
        if not states:
            return -np.inf
    return float(max(states.values()))


def _ordered_choices(ceiling, floor):
    """Strictly increasing tuples with floor[i] <= t[i] <= ceiling[i]."""

    def extend(i, last, acc):
        if i == len(ceiling):
            yield tuple(acc)
            return
        for line in range(max(floor[i], last + 1), ceiling[i] + 1):
            acc.append(line)
            yield from extend(i + 1, line, acc)
            acc.pop()

    yield from extend(0, 0, [])


def backwards_first_passage(env, start: Point, end: Point) -> float:
    """Minimal length over paths moving from ``start.line`` down to ``end.line``.

    The path is nondecreasing in line index, so it starts on an upper line
    and finishes on a lower one.
    """
    F = np.ascontiguousarray(_matrix(env))
    _check_point(F, start)
    _check_point(F, end)
    if start.grid_index > end.grid_index or start.line > end.line:
        raise DomainError(f"no nondecreasing path from {start} to {end}")
    U = _kernels.min_forward_table(
        F, start.grid_index, start.line - 1, end.grid_index, end.line - 1
    )
    return float(U[-1, -1])
