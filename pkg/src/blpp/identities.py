"""Exact identities and inequalities of last passage and melons, as violation measures.

Every check takes a small one-sided ensemble and a generator for whatever
random endpoints it needs, and returns the largest violation it saw: an
absolute difference for identities, the positive part of the wrong-way
difference for inequalities, and 0 or 1 for structural properties of paths.
"""

from __future__ import annotations

import numpy as np

from . import lpp
from .env import GridSpec, LineEnsemble
from .errors import DomainError
from .lpp import EndpointPair, Point
from .melon import (
    gap_process,
    melon,
    melon_via_lpp,
    reverse_melon,
    reversed_bubble_word,
)

TRIALS = 4


def _sorted_columns(rng, lo: int, hi: int, count: int) -> list[int]:
    return sorted(int(c) for c in rng.integers(lo, hi + 1, size=count))


def _line_pair(rng, n: int) -> tuple[int, int]:
    """Start line l >= end line m."""
    a, b = sorted(int(v) for v in rng.integers(1, n + 1, size=2))
    return b, a


def gap_formula(env, rng) -> float:
    n, steps = env.n_lines, env.steps
    x, y = _sorted_columns(rng, 0, steps, 2)
    start_line, end_line = _line_pair(rng, n)
    jumps = _sorted_columns(rng, x, y, start_line - end_line)
    path = lpp.LatticePath(Point(x, start_line), Point(y, end_line), tuple(jumps))
    return abs(lpp.path_length(env, path) - lpp.gap_length(env, path))


def rsk_single(env, rng) -> float:
    """f[(x, n) -> (y, 1)] against the same value in the melon, for every x <= y."""
    n, steps = env.n_lines, env.steps
    m = melon(env)
    worst = 0.0
    for a in range(steps + 1):
        direct = lpp.passage_profile_from(env, Point(a, n), 1)
        via = lpp.passage_profile_from(m, Point(m.column(a), n), 1)
        via = via[m.grid_columns[a:] - m.column(a)]
        worst = max(worst, float(np.max(np.abs(direct - via))))
    return worst


def rsk_pair(env, rng) -> float:
    """Two disjoint paths from line n to line 1, in the ensemble and in its melon."""
    n, steps = env.n_lines, env.steps
    if n < 2:
        return 0.0
    m = melon(env)
    worst = 0.0
    for _ in range(TRIALS):
        x1, x2 = _sorted_columns(rng, 0, steps - 1, 2)
        y1 = int(rng.integers(x1 + 1, steps + 1))
        y2 = int(rng.integers(max(y1, x2 + 1), steps + 1))
        ep = EndpointPair([(x1, n), (x2, n)], [(y1, 1), (y2, 1)])
        ep_m = EndpointPair(
            [(m.column(x1), n), (m.column(x2), n)], [(m.column(y1), 1), (m.column(y2), 1)]
        )
        a = lpp.multi_path_last_passage(env, ep, engine="transfer")
        b = lpp.multi_path_last_passage(m, ep_m, engine="transfer")
        worst = max(worst, abs(a - b))
    return worst


def melon_definition(env, rng) -> float:
    a = melon(env).on_grid()
    b = melon_via_lpp(env).values
    return float(np.max(np.abs(a - b)))


def network_independence(env, rng) -> float:
    n = env.n_lines
    if n < 2:
        return 0.0
    a = melon(env).on_grid()
    b = melon(env, word=reversed_bubble_word(n)).on_grid()
    return float(np.max(np.abs(a - b)))


def sum_conservation(env, rng) -> float:
    F = np.asarray(env.values)
    total = (F - F[:, :1]).sum(axis=0)
    return float(np.max(np.abs(melon(env).on_grid().sum(axis=0) - total)))


def melon_ordering(env, rng) -> float:
    if env.n_lines < 2:
        return 0.0
    return float(max(0.0, -gap_process(melon(env)).min()))


def corner_identity(env, rng) -> float:
    """Wf[(x, n) -> (z, k)] = (Wf)_k(z) - F(W*_z f)[(z - x, 1) -> (z, k)] for all x < z, k."""
    n, steps = env.n_lines, env.steps
    m = melon(env)
    worst = 0.0
    for z in range(1, steps + 1):
        mz = reverse_melon(env, z)
        cz = m.column(z)
        for x in range(z):
            for k in range(1, n + 1):
                lhs = lpp.last_passage(m, Point(m.column(x), n), Point(cz, k))
                first = lpp.backwards_first_passage(
                    mz, Point(mz.column(z - x), 1), Point(mz.column(z), k)
                )
                worst = max(worst, abs(lhs - (m.values[k - 1, cz] - first)))
    return worst


def reverse_fact(env, rng) -> float:
    """f[U -> V] = W*_z f[V_z -> U_z] for one and two paths and z >= the last end."""
    n, steps = env.n_lines, env.steps
    worst = 0.0
    for k in (1, 2) if n >= 2 else (1,):
        for _ in range(TRIALS // 2):
            xs = _sorted_columns(rng, 0, steps - 1, k)
            ys = []
            for x in xs:
                ys.append(int(rng.integers(max([x + 1] + ys), steps + 1)))
            z = int(rng.integers(ys[-1], steps + 1))
            if z == 0:
                continue
            mz = reverse_melon(env, z)
            ep = EndpointPair([(x, n) for x in xs], [(y, 1) for y in ys])
            back = EndpointPair(
                [(mz.column(z - y), n) for y in reversed(ys)],
                [(mz.column(z - x), 1) for x in reversed(xs)],
            )
            a = lpp.multi_path_last_passage(env, ep, engine="transfer")
            b = lpp.multi_path_last_passage(mz, back, engine="transfer")
            worst = max(worst, abs(a - b))
    return worst


def _random_pair(env, rng):
    x, y = _sorted_columns(rng, 0, env.steps, 2)
    start_line, end_line = _line_pair(rng, env.n_lines)
    return x, start_line, y, end_line


def metric_composition(env, rng) -> float:
    worst = 0.0
    for _ in range(TRIALS):
        x, l, y, m = _random_pair(env, rng)
        k = int(rng.integers(m, l + 1))
        direct = lpp.last_passage(env, Point(x, l), Point(y, m))
        head = lpp.passage_profile_from(env, Point(x, l), k)[: y - x + 1]
        tail = lpp.passage_profile_to(env, Point(y, m), k)[x : y + 1]
        worst = max(worst, abs(direct - float(np.max(head + tail))))
        if k > m:
            tail = lpp.passage_profile_to(env, Point(y, m), k - 1)[x : y + 1]
            worst = max(worst, abs(direct - float(np.max(head + tail))))
    return worst


def triangle(env, rng) -> float:
    worst = 0.0
    for _ in range(TRIALS):
        x, l, y, m = _random_pair(env, rng)
        k = int(rng.integers(m, l + 1))
        z = int(rng.integers(x, y + 1))
        direct = lpp.last_passage(env, Point(x, l), Point(y, m))
        split = lpp.last_passage(env, Point(x, l), Point(z, k)) + lpp.last_passage(
            env, Point(z, k), Point(y, m)
        )
        worst = max(worst, split - direct)
    return max(worst, 0.0)


def quadrangle(env, rng) -> float:
    n, steps = env.n_lines, env.steps
    worst = 0.0
    for _ in range(TRIALS):
        x1, x2 = _sorted_columns(rng, 0, steps - 1, 2)
        y1, y2 = _sorted_columns(rng, x2 + 1, steps, 2)

        def value(a, b):
            return lpp.last_passage(env, Point(a, n), Point(b, 1))

        worst = max(worst, value(x1, y2) + value(x2, y1) - value(x1, y1) - value(x2, y2))
    return max(worst, 0.0)


def double_monotonicity(env, rng) -> float:
    F = np.asarray(env.values)
    worst = 0.0
    for _ in range(TRIALS):
        x, l, y, m = _random_pair(env, rng)
        k = int(rng.integers(m, l + 1))
        zs = np.arange(x, y + 1)
        h1 = lpp.passage_profile_from(env, Point(x, l), k)[: y - x + 1] - F[k - 1, zs]
        h2 = lpp.passage_profile_to(env, Point(y, m), k)[zs] + F[k - 1, zs]
        if len(zs) > 1:
            worst = max(worst, float(np.max(-np.diff(h1))), float(np.max(np.diff(h2))))
    return max(worst, 0.0)


def _two_paths(env, rng, side, overlap_closed):
    n, steps = env.n_lines, env.steps
    if overlap_closed:
        # x1 <= x2 <= y1 <= y2 with a nonempty overlap (x2, y1)
        x1, x2 = _sorted_columns(rng, 0, steps - 1, 2)
        y1, y2 = _sorted_columns(rng, x2 + 1, steps, 2)
    else:
        x1, x2 = _sorted_columns(rng, 0, steps - 1, 2)
        y1 = int(rng.integers(x2 + 1, steps + 1))
        y2 = int(rng.integers(y1, steps + 1))
    p1 = lpp.last_passage_path(env, Point(x1, n), Point(y1, 1), side)
    p2 = lpp.last_passage_path(env, Point(x2, n), Point(y2, 1), side)
    lo, hi = x2, y1
    a = p1.cell_lines()[lo - x1 : hi - x1]
    b = p2.cell_lines()[lo - x2 : hi - x2]
    return a, b


def path_monotonicity(env, rng) -> float:
    """Rightmost paths with later endpoints sit on lines at least as low."""
    worst = 0.0
    for _ in range(TRIALS):
        a, b = _two_paths(env, rng, "rightmost", overlap_closed=False)
        worst = max(worst, float(np.any(b < a)))
    return worst


def tree_structure(env, rng) -> float:
    """On the shared window the two paths agree on one interval of cells and are strictly ordered elsewhere."""
    worst = 0.0
    for side in ("rightmost", "leftmost"):
        for _ in range(TRIALS // 2):
            a, b = _two_paths(env, rng, side, overlap_closed=True)
            equal = np.nonzero(a == b)[0]
            contiguous = equal.size == 0 or equal[-1] - equal[0] + 1 == equal.size
            ordered = bool(np.all(a <= b))
            worst = max(worst, float(not (contiguous and ordered)))
    return worst


def path_optimality(env, rng) -> float:
    """Both extreme paths attain the value, and the rightmost one dominates the leftmost."""
    worst = 0.0
    for _ in range(TRIALS):
        x, l, y, m = _random_pair(env, rng)
        start, end = Point(x, l), Point(y, m)
        value = lpp.last_passage(env, start, end)
        right = lpp.last_passage_path(env, start, end, "rightmost")
        left = lpp.last_passage_path(env, start, end, "leftmost")
        worst = max(
            worst,
            abs(lpp.path_length(env, right) - value),
            abs(lpp.path_length(env, left) - value),
            float(np.any(right.cell_lines() < left.cell_lines())),
        )
    return worst


def first_passage_duality(env, rng) -> float:
    n, steps = env.n_lines, env.steps
    flipped = -np.asarray(env.values)[::-1]
    worst = 0.0
    for _ in range(TRIALS):
        x, y = _sorted_columns(rng, 0, steps, 2)
        k = int(rng.integers(1, n + 1))
        first = lpp.backwards_first_passage(env, Point(x, 1), Point(y, k))
        last = lpp.last_passage(flipped, Point(x, n), Point(y, n + 1 - k))
        worst = max(worst, abs(first + last))
    return worst


def subadditivity(env, rng) -> float:
    """L(f) + F(g) <= L(f + g) <= L(f) + L(g) from (0, n) to (t, 1)."""
    n, steps = env.n_lines, env.steps
    f = np.asarray(env.values)
    g = np.concatenate(
        [np.zeros((n, 1)), np.cumsum(rng.standard_normal((n, steps)) * np.sqrt(env.grid.dt), axis=1)],
        axis=1,
    )
    worst = 0.0
    for _ in range(TRIALS):
        t = int(rng.integers(0, steps + 1))
        start, end = Point(0, n), Point(t, 1)
        lf = lpp.last_passage(f, start, end)
        lg = lpp.last_passage(g, start, end)
        fg = -lpp.last_passage(-g, start, end)
        lfg = lpp.last_passage(f + g, start, end)
        worst = max(worst, lf + fg - lfg, lfg - lf - lg)
    return max(worst, 0.0)


def _feasible_value(env, ep, engine):
    try:
        return lpp.multi_path_last_passage(env, ep, engine=engine)
    except DomainError:
        return None


def engine_agreement(env, rng) -> float:
    """Enumeration and column-transfer engines on random two-path endpoint pairs."""
    n, steps = env.n_lines, env.steps
    if n < 2:
        return 0.0
    worst = 0.0
    for _ in range(TRIALS // 2):
        x1, x2 = _sorted_columns(rng, 0, steps - 1, 2)
        y1 = int(rng.integers(x1 + 1, steps + 1))
        y2 = int(rng.integers(max(y1, x2 + 1), steps + 1))
        l1 = int(rng.integers(2, n + 1))
        m2 = int(rng.integers(1, n))
        ep = EndpointPair([(x1, l1), (x2, n)], [(y1, 1), (y2, m2)])
        a = _feasible_value(env, ep, "enumerate")
        b = _feasible_value(env, ep, "transfer")
        if (a is None) != (b is None):
            return 1.0
        if a is not None:
            worst = max(worst, abs(a - b))
    return worst


IDENTITIES = {
    "gap_formula": gap_formula,
    "rsk_single": rsk_single,
    "rsk_pair": rsk_pair,
    "melon_definition": melon_definition,
    "network_independence": network_independence,
    "sum_conservation": sum_conservation,
    "melon_ordering": melon_ordering,
    "corner_identity": corner_identity,
    "reverse_fact": reverse_fact,
    "metric_composition": metric_composition,
    "triangle": triangle,
    "quadrangle": quadrangle,
    "double_monotonicity": double_monotonicity,
    "path_monotonicity": path_monotonicity,
    "tree_structure": tree_structure,
    "path_optimality": path_optimality,
    "first_passage_duality": first_passage_duality,
    "subadditivity": subadditivity,
    "engine_agreement": engine_agreement,
}


def random_instance(rng, max_lines: int, max_steps: int, variant: str = "random") -> LineEnsemble:
    """Small one-sided ensemble on [0, 1].

    ``variant`` is ``random`` (independent Brownian lines), ``constant``
    (flat lines) or ``near_tie`` (one shared Brownian path plus independent
    perturbations of size 1e-12, so every gap sits near zero).
    """
    n = int(rng.integers(2, max_lines + 1)) if max_lines >= 2 else 1
    steps = int(rng.integers(2, max_steps + 1)) if max_steps >= 2 else 1
    grid = GridSpec(0.0, 1.0, steps)
    scale = np.sqrt(grid.dt)
    if variant == "random":
        inc = rng.standard_normal((n, steps)) * scale
    elif variant == "constant":
        inc = np.zeros((n, steps))
    elif variant == "near_tie":
        inc = rng.standard_normal((1, steps)) * scale + 1e-12 * rng.standard_normal((n, steps))
    else:
        raise DomainError(f"unknown instance variant {variant!r}")
    values = np.concatenate([np.zeros((n, 1)), np.cumsum(inc, axis=1)], axis=1)
    if variant == "constant":
        values += rng.standard_normal((n, 1))
    return LineEnsemble(values, grid)
