"""Coordinate and value rescalings: Airy lines, prelimiting sheets, landscape values.

Scale-n conventions used throughout:

* spatial start  x -> 2 x n^{-1/3},  spatial end  y -> 1 + 2 y n^{-1/3};
* landscape point (x, t) -> time t + 2 x n^{-1/3} on line -floor(t n);
* values are centred by 2 (elapsed) sqrt(n) + 2 (y - x) n^{1/6} and
  multiplied by n^{1/6}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import lpp
from .env import GridSpec, LineEnsemble, RngStream, sample_brownian_ensemble
from .errors import DomainError

# guards floor(t * n) against representation error such as 0.29 * 100
_FLOOR_EPS = 1e-9


def start_time(x, n):
    return 2.0 * np.asarray(x, dtype=float) * n ** (-1.0 / 3.0)


def end_time(y, n):
    return 1.0 + 2.0 * np.asarray(y, dtype=float) * n ** (-1.0 / 3.0)


@dataclass(frozen=True, eq=False)
class ScaledLines:
    n: int
    ys: np.ndarray
    lines: np.ndarray  # (k_top, len(ys))


@dataclass(frozen=True, eq=False)
class ScaledSheet:
    n: int
    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray  # (len(xs), len(ys))
    raw: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        ys = np.asarray(self.ys, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if values.shape != (len(xs), len(ys)):
            raise DomainError("sheet values must be len(xs) x len(ys)")
        if not np.all(np.isfinite(values)):
            raise DomainError("sheet values must be finite")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)
        object.__setattr__(self, "values", values)

    def value(self, x: float, y: float) -> float:
        i = int(np.argmin(np.abs(self.xs - x)))
        j = int(np.argmin(np.abs(self.ys - y)))
        return float(self.values[i, j])


def airy_rescale(m, n: int, k_top: int, y_grid) -> ScaledLines:
    """Top ``k_top`` melon lines read at times 1 + 2 y n^{-1/3} and centred."""
    ys = np.asarray(y_grid, dtype=float)
    if not 1 <= k_top <= m.n_lines:
        raise DomainError(f"k_top must lie in 1..{m.n_lines}")
    t = end_time(ys, n)
    if t.min() < m.times[0] - 1e-12 or t.max() > m.times[-1] + 1e-12:
        raise DomainError(
            f"melon covers [{m.times[0]}, {m.times[-1]}] but times up to "
            f"[{t.min()}, {t.max()}] were requested"
        )
    lines = np.empty((k_top, len(ys)))
    for i in range(k_top):
        lines[i] = np.interp(t, m.times, m.values[i])
    lines = n ** (1 / 6) * (lines - 2 * math.sqrt(n) - 2 * ys * n ** (1 / 6))
    return ScaledLines(n, ys, lines)


def _min_spacing(*grids) -> float:
    pts = np.unique(np.concatenate([np.asarray(g, dtype=float) for g in grids]))
    gaps = np.diff(pts)
    gaps = gaps[gaps > 1e-12]
    return float(gaps.min()) if gaps.size else 1.0


def sheet_grid(n: int, xs, ys, dt: float | None = None, anchor: float | None = None) -> GridSpec:
    """Environment grid for a sheet on xs x ys.

    The default spacing is 2 n^{-1/3} h / q for the coordinate quantum h,
    with q the smallest integer giving at most 1/(4n) and at most
    n^{-1/3} h / 4. Start times then land on columns exactly and every end
    time is off by the same amount.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    h = _min_spacing(xs, ys)
    scale = n ** (-1.0 / 3.0)
    if dt is None:
        q = max(8, math.ceil(8 * n * scale * h - 1e-9))
        dt = 2 * scale * h / q
    t0 = float(start_time(xs.min(), n)) if anchor is None else float(anchor)
    t1 = float(end_time(ys.max(), n))
    # the spacing bound only exists to limit snapping; coordinates that land
    # exactly on columns need no bound
    wanted = np.concatenate([start_time(xs, n), end_time(ys, n)])
    offsets = (wanted - t0) / dt
    on_columns = np.all(np.abs(offsets - np.round(offsets)) < 1e-7)
    if dt > scale * h / 4 + 1e-15 and not on_columns:
        raise DomainError(f"grid spacing {dt} exceeds n^(-1/3) * spacing / 4 = {scale * h / 4}")
    steps = max(1, math.ceil((t1 - t0) / dt - 1e-9))
    return GridSpec(t0, t0 + steps * dt, steps)


def center_sheet(raw, n: int, xs, ys, factor: float = 2.0) -> np.ndarray:
    """n^{1/6} (raw - 2 sqrt(n) - factor (y - x) n^{1/6})."""
    xs = np.asarray(xs, dtype=float)[:, None]
    ys = np.asarray(ys, dtype=float)[None, :]
    return n ** (1 / 6) * (np.asarray(raw) - 2 * math.sqrt(n) - factor * (ys - xs) * n ** (1 / 6))


def sheet_from_env(env: LineEnsemble, n: int, xs, ys, centering: float = 2.0) -> ScaledSheet:
    """Prelimiting sheet from one shared ensemble with n lines."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if env.n_lines != n:
        raise DomainError(f"sheet at scale {n} needs {n} lines, ensemble has {env.n_lines}")
    xt, yt = start_time(xs, n), end_time(ys, n)
    if xt.max() > yt.min() + 1e-12:
        raise DomainError("no start time may follow an end time")
    xc = np.array([env.grid.nearest_index(t) for t in xt])
    yc = np.array([env.grid.nearest_index(t) for t in yt])
    raw = np.empty((len(xs), len(ys)))
    if len(xs) <= len(ys):
        for i, c in enumerate(xc):
            prof = lpp.passage_profile_from(env, lpp.Point(int(c), n), 1)
            raw[i] = prof[yc - c]
    else:
        for j, c in enumerate(yc):
            prof = lpp.passage_profile_to(env, lpp.Point(int(c), 1), n)
            raw[:, j] = prof[xc]
    times = env.grid.times
    meta = {
        "dt": env.grid.dt,
        "t_start": env.grid.t_start,
        "steps": env.grid.steps,
        "start_snap": float(np.max(np.abs(times[xc] - xt))),
        "end_snap": float(np.max(np.abs(times[yc] - yt))),
        "centering": centering,
    }
    values = center_sheet(raw, n, xs, ys, centering)
    return ScaledSheet(n, xs, ys, values, raw, meta)


def sheet_sample(
    n: int,
    xs,
    ys,
    stream: RngStream,
    dt: float | None = None,
    centering: float = 2.0,
    anchor: float | None = None,
) -> ScaledSheet:
    grid = sheet_grid(n, xs, ys, dt, anchor)
    env = sample_brownian_ensemble(n, grid, stream)
    return sheet_from_env(env, n, xs, ys, centering)


def landscape_point(x: float, t: float, n: int) -> tuple[float, int]:
    """(time, global line) of the scaled point (x, t)."""
    return t + 2.0 * x * n ** (-1.0 / 3.0), -math.floor(t * n + _FLOOR_EPS)


def landscape_value(env: LineEnsemble, u, n: int) -> float:
    """Centred last passage value between (x, t) and (y, s); -inf if the points cross."""
    x, t, y, s = u
    if not t < s:
        raise DomainError(f"need t < s, got t={t}, s={s}")
    t0, g0 = landscape_point(x, t, n)
    t1, g1 = landscape_point(y, s, n)
    r0, r1 = env.row_of(g0), env.row_of(g1)
    c0, c1 = env.grid.nearest_index(t0), env.grid.nearest_index(t1)
    if c0 > c1:
        return -math.inf
    b = lpp.last_passage(env, lpp.Point(c0, r0 + 1), lpp.Point(c1, r1 + 1))
    return n ** (1 / 6) * (b - 2 * (s - t) * math.sqrt(n) - 2 * (y - x) * n ** (1 / 6))


def stationary_version(value: float, u) -> float:
    x, t, y, s = u
    if not s > t:
        raise DomainError("stationary version needs s > t")
    return value + (x - y) ** 2 / (s - t)


def sheet_rescale(sheet: ScaledSheet, s: float) -> ScaledSheet:
    """Sheet of scale s: values times s on coordinates times s^2."""
    if not s > 0:
        raise DomainError(f"scale must be positive, got {s}")
    meta = dict(sheet.meta, scale=sheet.meta.get("scale", 1.0) * s)
    return ScaledSheet(sheet.n, sheet.xs * s * s, sheet.ys * s * s, sheet.values * s, sheet.raw, meta)
