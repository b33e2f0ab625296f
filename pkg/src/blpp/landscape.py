"""Metric composition of sheets, dyadic assembly, geodesics and melon diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, lpp
from .env import GridSpec, LineEnsemble, RngStream, sample_brownian_ensemble
from .errors import CapacityError, DomainError
from .melon import MelonEnsemble, melon
from .scaling import (
    ScaledSheet,
    end_time,
    landscape_point,
    sheet_from_env,
    sheet_rescale,
    sheet_sample,
    start_time,
)

MAX_DYADIC_DEPTH = 6
MAX_GEODESIC_DEPTH = 12


@dataclass(frozen=True, eq=False)
class ComposedSheet:
    xs: np.ndarray
    zs: np.ndarray
    y_grid: np.ndarray
    values: np.ndarray
    argmax_left: np.ndarray
    argmax_right: np.ndarray

    def as_sheet(self, n: int) -> ScaledSheet:
        return ScaledSheet(n, self.xs, self.zs, self.values)


def metric_compose(sheet_a, sheet_b, y_grid) -> ComposedSheet:
    """Q(x, z) = max over y in ``y_grid`` of a(x, y) + b(y, z)."""
    y_grid = np.asarray(y_grid, dtype=float)
    if len(sheet_a.ys) != len(y_grid) or not np.allclose(sheet_a.ys, y_grid, atol=1e-9):
        raise DomainError("first sheet's end grid must equal the composition grid")
    if len(sheet_b.xs) != len(y_grid) or not np.allclose(sheet_b.xs, y_grid, atol=1e-9):
        raise DomainError("second sheet's start grid must equal the composition grid")
    total = sheet_a.values[:, :, None] + sheet_b.values[None, :, :]
    Q = total.max(axis=1)
    hit = total == Q[:, None, :]
    left = hit.argmax(axis=1)
    right = len(y_grid) - 1 - hit[:, ::-1, :].argmax(axis=1)
    return ComposedSheet(
        np.asarray(sheet_a.xs, dtype=float),
        np.asarray(sheet_b.ys, dtype=float),
        y_grid,
        Q,
        y_grid[left],
        y_grid[right],
    )


@dataclass(frozen=True, eq=False)
class SplitSheets:
    """A scale-1 sheet cut at line ``upper_lines`` into two independent-slab sheets.

    ``lower`` runs from x = 0 to every z at scale s = (1 - upper_lines / n)^{1/3},
    ``upper`` from every z to y = 0 at scale t = (upper_lines / n)^{1/3}, so
    s^3 + t^3 = 1. The candidate z are the crossing columns of the direct
    grid, and composing over all of them reproduces the direct value
    S_n(0, 0) exactly for the environment the two slabs were cut from.
    """

    n: int
    upper_lines: int
    zs: np.ndarray
    lower: ScaledSheet
    upper: ScaledSheet

    @property
    def scales(self) -> tuple[float, float]:
        return ((self.n - self.upper_lines) / self.n) ** (1 / 3), (self.upper_lines / self.n) ** (1 / 3)

    def composed(self) -> ComposedSheet:
        return metric_compose(self.lower, self.upper, self.zs)


def _split_sizes(n: int, upper_lines: int) -> tuple[int, int]:
    if not 1 <= upper_lines < n:
        raise DomainError(f"upper_lines must lie in 1..{n - 1}")
    return n - upper_lines, upper_lines


def split_grids(n: int, upper_lines: int, steps: int) -> tuple[GridSpec, GridSpec]:
    """Grids of the two slabs after Brownian rescaling to their own line counts.

    The lower slab's time is stretched by n / m1 and starts at 0; the upper
    slab's time is stretched by n / m2 and ends at 1.
    """
    m1, m2 = _split_sizes(n, upper_lines)
    return GridSpec(0.0, n / m1, steps), GridSpec(1.0 - n / m2, 1.0, steps)


def split_environment(env: LineEnsemble, upper_lines: int) -> tuple[LineEnsemble, LineEnsemble]:
    """Cut a one-sided n-line ensemble on [0, 1] into the two rescaled slabs."""
    n = env.n_lines
    m1, m2 = _split_sizes(n, upper_lines)
    if env.grid.t_start != 0.0 or abs(env.grid.t_end - 1.0) > 1e-12:
        raise DomainError("split needs an ensemble on [0, 1]")
    lower_grid, upper_grid = split_grids(n, upper_lines, env.steps)
    F = np.asarray(env.values)
    lower = LineEnsemble(F[m2:] * math.sqrt(n / m1), lower_grid, 0, env.seed, env.stream_id)
    upper = LineEnsemble(F[:m2] * math.sqrt(n / m2), upper_grid, 0, env.seed, env.stream_id)
    return lower, upper


def split_sheets(lower_env: LineEnsemble, upper_env: LineEnsemble, n: int) -> SplitSheets:
    m1, m2 = lower_env.n_lines, upper_env.n_lines
    if m1 + m2 != n or lower_env.steps != upper_env.steps:
        raise DomainError("slabs must share a step count and have n lines in total")
    steps = lower_env.steps
    zs = (np.arange(steps + 1) / steps - m1 / n) * n ** (1 / 3) / 2
    s, t = (m1 / n) ** (1 / 3), (m2 / n) ** (1 / 3)
    lower = sheet_from_env(lower_env, m1, [0.0], zs / s**2)
    upper = sheet_from_env(upper_env, m2, zs / t**2, [0.0])
    return SplitSheets(n, m2, zs, sheet_rescale(lower, s), sheet_rescale(upper, t))


def sample_split_sheets(n: int, upper_lines: int, steps: int, stream: RngStream) -> SplitSheets:
    """Two independent slabs whose composition has the law of S_n(0, 0) on a 1/steps grid."""
    m1, m2 = _split_sizes(n, upper_lines)
    lower_grid, upper_grid = split_grids(n, upper_lines, steps)
    lower = sample_brownian_ensemble(m1, lower_grid, stream.child(0))
    upper = sample_brownian_ensemble(m2, upper_grid, stream.child(1))
    return split_sheets(lower, upper, n)


@dataclass(frozen=True, eq=False)
class DyadicLandscape:
    """Values between dyadic times i/2^k and j/2^k (scaled by ``span``) on ``xs`` x ``xs``."""

    depth: int
    span: float
    xs: np.ndarray
    values: dict = field(default_factory=dict)

    def times(self) -> np.ndarray:
        return self.span * np.arange(2**self.depth + 1) / 2**self.depth

    def between(self, i: int, j: int) -> np.ndarray:
        return self.values[(i, j)]


def dyadic_landscape(depth: int, span: float, xs, n: int, stream: RngStream, dt=None) -> DyadicLandscape:
    """Independent slab sheets at scale (span / 2^depth)^{1/3}, composed over ``xs``."""
    if depth < 0 or depth > MAX_DYADIC_DEPTH:
        raise CapacityError(f"dyadic depth must lie in 0..{MAX_DYADIC_DEPTH}")
    xs = np.asarray(xs, dtype=float)
    if len(xs) > 400:
        raise CapacityError("dyadic assembly is limited to 400 spatial points")
    slabs = 2**depth
    scale = (span / slabs) ** (1.0 / 3.0)
    values = {}
    for i in range(slabs):
        unit = sheet_sample(n, xs / scale**2, xs / scale**2, stream.child(i), dt=dt)
        values[(i, i + 1)] = sheet_rescale(unit, scale).values
    for width in range(2, slabs + 1):
        for i in range(slabs - width + 1):
            j = i + width
            left = ScaledSheet(n, xs, xs, values[(i, i + 1)])
            right = ScaledSheet(n, xs, xs, values[(i + 1, j)])
            values[(i, j)] = metric_compose(left, right, xs).values
    return DyadicLandscape(depth, span, xs, values)


@dataclass(frozen=True, eq=False)
class GeodesicPolyline:
    times: np.ndarray
    positions: np.ndarray
    u: tuple
    n: int
    side: str = "rightmost"
    meta: dict = field(default_factory=dict)

    def at(self, r: float) -> float:
        return float(np.interp(r, self.times, self.positions))


def _endpoint_cells(env: LineEnsemble, u, n: int):
    x, t, y, s = u
    if not t < s:
        raise DomainError(f"need t < s, got t={t}, s={s}")
    t0, g0 = landscape_point(x, t, n)
    t1, g1 = landscape_point(y, s, n)
    r0, r1 = env.row_of(g0), env.row_of(g1)
    c0, c1 = env.grid.nearest_index(t0), env.grid.nearest_index(t1)
    if c0 > c1:
        raise DomainError("endpoints cross after snapping to the grid")
    return c0, r0, c1, r1


def extract_geodesic(env: LineEnsemble, u, n: int, side: str = "rightmost") -> GeodesicPolyline:
    """Optimal path between (x, t) and (y, s), in scaled space against scaled time.

    The path's line at environment time tau is read as a position through
    (line + n tau) / (2 n^{2/3}), which is the spatial coordinate of the
    landscape point sitting on that line at that time, and tau is pulled back
    to [t, s] by the affine map that matches the two endpoint times.
    """
    x, t, y, s = u
    c0, r0, c1, r1 = _endpoint_cells(env, u, n)
    path = lpp.last_passage_path(env, lpp.Point(c0, r0 + 1), lpp.Point(c1, r1 + 1), side)
    cols = np.arange(c0, c1 + 1)
    lines = np.empty(len(cols), dtype=np.int64)
    lines[:-1] = path.cell_lines() if c1 > c0 else []
    lines[-1] = path.end.line
    lines[0] = path.start.line
    global_lines = env.top_index + lines - 1
    tau = env.grid.times[cols]
    if c1 > c0:
        r = t + (tau - tau[0]) * (s - t) / (tau[-1] - tau[0])
    else:
        r = np.array([t])
    pos = (global_lines + n * tau) / (2.0 * n ** (2.0 / 3.0))
    return GeodesicPolyline(r, pos, tuple(u), n, side, {"jumps": path.jump_indices})


def dyadic_geodesic(env: LineEnsemble, u, n: int, depth: int, z_stride: int = 1) -> GeodesicPolyline:
    """Midpoint refinement: each dyadic time takes the rightmost maximiser of the two-piece sum.

    Candidate midpoints are the environment columns on the midpoint line,
    thinned by ``z_stride``; with stride 1 every two-piece maximum equals the
    direct value exactly and ``meta["defects"]`` records the shortfall otherwise.
    """
    if depth < 0 or depth > MAX_GEODESIC_DEPTH:
        raise CapacityError(f"dyadic geodesic depth must lie in 0..{MAX_GEODESIC_DEPTH}")
    if z_stride < 1:
        raise DomainError("z_stride must be a positive integer")
    x, t, y, s = u
    c0, r0, c1, r1 = _endpoint_cells(env, u, n)
    F = np.ascontiguousarray(env.values)
    times = env.grid.times
    # each chosen point: (scaled time, scaled position, column, row)
    pts = [(t, x, c0, r0), (s, y, c1, r1)]
    defects = []
    for _ in range(depth):
        refined = [pts[0]]
        for a, b in zip(pts, pts[1:]):
            r_mid = 0.5 * (a[0] + b[0])
            _, g = landscape_point(0.0, r_mid, n)
            row = env.row_of(g)
            if not b[3] <= row <= a[3]:
                raise DomainError("midpoint line outside the segment's lines")
            fwd = _kernels.forward_profile(F[:, : b[2] + 1].copy(), a[2], a[3], row)
            bwd = _kernels.backward_profile(F, b[2], b[3], row)
            cand = np.arange(a[2], b[2] + 1)
            cand = cand[(cand - a[2]) % z_stride == 0]
            total = fwd[cand - a[2]] + bwd[cand]
            best = total.max()
            c = int(cand[np.nonzero(total == best)[0][-1]])
            direct = _kernels.forward_profile(F[:, : b[2] + 1].copy(), a[2], a[3], b[3])[-1]
            defects.append(float(direct - best))
            z = (times[c] - r_mid) * n ** (1.0 / 3.0) / 2.0
            refined += [(r_mid, z, c, row), b]
        pts = refined
    r = np.array([p[0] for p in pts])
    pos = np.array([p[1] for p in pts])
    return GeodesicPolyline(r, pos, tuple(u), n, "rightmost", {"defects": defects, "z_stride": z_stride})


def holder_estimate(path: GeodesicPolyline, lags, n_bases: int = 16) -> tuple[float, float]:
    """Log-log slope and intercept of the windowed maximal increment against lag.

    For each lag L the statistic is the average, over ``n_bases`` base times
    b, of max_{0 <= v <= L} |P(b + v) - P(b)|. Averaging a local window
    maximum keeps exact power laws exact (a global maximum over all b adds a
    logarithmic factor that biases the slope downwards).
    """
    lags = np.unique(np.asarray(lags, dtype=float))
    if len(lags) < 8:
        raise DomainError("holder_estimate needs at least 8 distinct lags")
    if lags[0] <= 0 or lags[-1] / lags[0] < 10 - 1e-9:
        raise DomainError("lags must be positive and span at least one decade")
    times = np.asarray(path.times, dtype=float)
    pos = np.asarray(path.positions, dtype=float)
    if lags[-1] > times[-1] - times[0]:
        raise DomainError("largest lag exceeds the path's time span")
    step = np.diff(times)
    if not np.allclose(step, step[0], rtol=1e-6):
        grid = np.linspace(times[0], times[-1], len(times))
        pos = np.interp(grid, times, pos)
        times = grid
    dt = times[1] - times[0]
    last_base = len(times) - 1 - int(round(lags[-1] / dt))
    bases = np.unique(np.linspace(0, last_base, n_bases).round().astype(int))
    stat, used = [], []
    for L in lags:
        w = max(1, int(round(L / dt)))
        used.append(w * dt)
        stat.append(np.mean([np.max(np.abs(pos[b : b + w + 1] - pos[b])) for b in bases]))
    stat = np.asarray(stat)
    if np.any(stat <= 0):
        raise DomainError("path is constant on some window; no exponent can be fitted")
    # regress on the window lengths actually used, not the requested lags
    slope, intercept = np.polyfit(np.log(used), np.log(stat), 1)
    return float(slope), float(intercept)


def brownian_polyline(times, stream: RngStream) -> GeodesicPolyline:
    """Standard Brownian path on ``times``; calibration input for holder_estimate."""
    times = np.asarray(times, dtype=float)
    rng = stream.generator()
    steps = rng.standard_normal(len(times) - 1) * np.sqrt(np.diff(times))
    pos = np.concatenate(([0.0], np.cumsum(steps)))
    return GeodesicPolyline(times, pos, (0.0, times[0], 0.0, times[-1]), 0, "brownian")


def _as_melon(source, refine: bool) -> MelonEnsemble:
    if isinstance(source, MelonEnsemble):
        return source
    return melon(source, refine=refine)


@dataclass(frozen=True, eq=False)
class ZkProfile:
    ks: np.ndarray
    values: np.ndarray
    columns: np.ndarray
    x: float
    y: float
    n: int


def zk_profile(source, x: float, y: float, k_max: int | None = None, refine: bool = False) -> ZkProfile:
    """Last times Z_k on line k of the rightmost melon path from (x, n) to (y, 1).

    ``source`` is a one-sided ensemble (melonised here) or a melon. When the
    path crosses several lines at one column, all of them share that column.
    """
    m = _as_melon(source, refine)
    n = m.n_lines
    if not x > 0:
        raise DomainError("Z_k needs x > 0")
    k_max = n if k_max is None else int(k_max)
    if not 1 <= k_max <= n:
        raise DomainError(f"k_max must lie in 1..{n}")
    c0 = m.knot_index(float(start_time(x, n)))
    c1 = m.knot_index(float(end_time(y, n)))
    if c0 > c1:
        raise DomainError("start time after end time")
    path = lpp.last_passage_path(m, lpp.Point(c0, n), lpp.Point(c1, 1), "rightmost")
    ks = np.arange(1, k_max + 1)
    cols = np.empty(k_max, dtype=np.int64)
    cols[0] = c1
    for k in range(2, k_max + 1):
        cols[k - 1] = path.jump_indices[n - k]
    values = (m.times[cols] - 1.0) * n ** (1.0 / 3.0) / 2.0
    values[0] = y
    return ZkProfile(ks, values, cols, x, y, n)


@dataclass(frozen=True, eq=False)
class BusemannResult:
    ks: np.ndarray
    differences: np.ndarray
    successive: np.ndarray
    target: float


def busemann_differences(source, x: float, y: float, z: float, k_max: int, refine: bool = False, margin: float = 0.0) -> BusemannResult:
    """D_k: scaled value difference from ((-sqrt(k/(2x)), k)) to z versus to y in the melon.

    ``target`` is the same difference started from (x, n), the value D_k
    stabilises to as k grows.
    """
    m = _as_melon(source, refine)
    n = m.n_lines
    if not x > 0:
        raise DomainError("Busemann differences need x > 0")
    if not 1 <= k_max <= n:
        raise DomainError(f"k_max must lie in 1..{n}")
    earliest = 1.0 - 2.0 * math.sqrt(k_max / (2.0 * x)) * n ** (-1.0 / 3.0) - margin
    latest = float(max(end_time(y, n), end_time(z, n)))
    if earliest < m.times[0] - 1e-12 or latest > m.times[-1] + 1e-12:
        raise DomainError(
            f"melon covers [{m.times[0]}, {m.times[-1]}], needs [{earliest}, {latest}]"
        )
    cy = m.knot_index(float(end_time(y, n)))
    cz = m.knot_index(float(end_time(z, n)))
    scale = n ** (1.0 / 6.0)
    drift = 2.0 * (z - y) * n ** (1.0 / 3.0)

    def diff_from(col, line):
        vz = lpp.last_passage(m, lpp.Point(col, line), lpp.Point(cz, 1)) if col <= cz else -math.inf
        vy = lpp.last_passage(m, lpp.Point(col, line), lpp.Point(cy, 1)) if col <= cy else -math.inf
        return scale * (vz - vy) - drift

    ks = np.arange(1, k_max + 1)
    out = np.empty(k_max)
    for k in ks:
        w = 1.0 - 2.0 * math.sqrt(k / (2.0 * x)) * n ** (-1.0 / 3.0)
        out[k - 1] = diff_from(m.knot_index(w), int(k))
    target = diff_from(m.knot_index(float(start_time(x, n))), n)
    return BusemannResult(ks, out, np.abs(np.diff(out)), float(target))


def airy_lp_experiment(source, n: int, k_list, x: float, refine: bool = False) -> dict:
    """Last passage across the top k rescaled lines from (0, k) to (x, 1), minus 2 sqrt(2 k x)."""
    m = _as_melon(source, refine)
    if not x > 0:
        raise DomainError("x must be positive")
    c0 = m.knot_index(1.0)
    t1 = float(end_time(x, n))
    if t1 > m.times[-1] + 1e-12:
        raise DomainError("melon does not reach time 1 + 2 x n^{-1/3}")
    c1 = m.knot_index(t1)
    out = {}
    for k in k_list:
        k = int(k)
        if not 1 <= k <= m.n_lines:
            raise DomainError(f"k={k} exceeds the melon's {m.n_lines} lines")
        v = lpp.last_passage(m, lpp.Point(c0, k), lpp.Point(c1, 1))
        value = n ** (1.0 / 6.0) * v - 2.0 * x * n ** (1.0 / 3.0)
        out[k] = value - 2.0 * math.sqrt(2.0 * k * x)
    return out
