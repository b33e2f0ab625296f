import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blpp.env import GridSpec, RngStream, sample_brownian_ensemble, sample_landscape_window
from blpp.errors import DomainError
from blpp.lpp import Point, last_passage
from blpp.melon import melon, sample_dyson_melon
from blpp.scaling import (
    ScaledSheet,
    airy_rescale,
    end_time,
    landscape_value,
    sheet_from_env,
    sheet_grid,
    sheet_rescale,
    sheet_sample,
    start_time,
    stationary_version,
)


def test_airy_rescale_formula_and_ordering():
    n = 20
    env = sample_brownian_ensemble(n, GridSpec(0.0, 2.0, 400), RngStream(1))
    m = melon(env, refine=False)
    ys = np.linspace(-1.0, 1.0, 9)
    lines = airy_rescale(m, n, 5, ys).lines
    top_at_one = m.values[0, m.knot_index(1.0)]
    assert lines[0, 4] == pytest.approx(n ** (1 / 6) * (top_at_one - 2 * math.sqrt(n)))
    assert np.all(np.diff(lines, axis=0) <= 1e-12)


def test_airy_rescale_errors():
    m = melon(sample_brownian_ensemble(10, GridSpec(0.0, 1.0, 50), RngStream(0)), refine=False)
    with pytest.raises(DomainError):
        airy_rescale(m, 10, 11, [0.0])
    with pytest.raises(DomainError):
        airy_rescale(m, 10, 1, [0.5])


def test_sheet_row_equals_airy_top_line():
    n = 30
    ys = np.array([-0.5, 0.0, 0.5])
    grid = sheet_grid(n, [0.0], ys, anchor=0.0)
    env = sample_brownian_ensemble(n, grid, RngStream(4))
    sheet = sheet_from_env(env, n, [0.0], ys)
    snapped = np.array([grid.times[grid.nearest_index(t)] for t in end_time(ys, n)])
    exact_ys = (snapped - 1.0) * n ** (1 / 3) / 2
    top = airy_rescale(melon(env), n, 1, exact_ys).lines[0]
    # the sheet centres with the requested y, the Airy line with the snapped one
    correction = 2 * (exact_ys - ys) * n ** (1 / 3)
    assert np.allclose(sheet.values[0], top + correction, atol=1e-9)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_sheet_quadrangle_inequality(seed):
    xs = np.linspace(-1, 1, 5)
    ys = np.linspace(-0.5, 1.5, 5)
    S = sheet_sample(40, xs, ys, RngStream(seed)).values
    for i in range(4):
        for j in range(4):
            assert S[i, j] + S[i + 1, j + 1] >= S[i, j + 1] + S[i + 1, j] - 1e-9


def test_sheet_rejects_crossing_and_line_mismatch():
    env = sample_brownian_ensemble(10, GridSpec(0.0, 2.0, 100), RngStream(0))
    with pytest.raises(DomainError):
        sheet_from_env(env, 9, [0.0], [0.0])
    with pytest.raises(DomainError):
        sheet_from_env(env, 10, [2.0], [-1.5])


def test_sheet_grid_guard_and_alignment():
    n = 64
    xs = np.array([-1.0, 0.0, 1.0])
    g = sheet_grid(n, xs, xs)
    starts = start_time(xs, n)
    assert np.allclose((starts - g.t_start) / g.dt, np.round((starts - g.t_start) / g.dt))
    with pytest.raises(DomainError):
        sheet_grid(n, xs, xs, dt=0.3)
    # a coarse grid is fine when every coordinate sits exactly on a column
    coarse = sheet_grid(n, xs, xs, dt=0.5)
    assert coarse.steps == 4


def test_landscape_value_unit_interval():
    n = 12
    env = sample_landscape_window(n, 0.0, 1.0, 0.0, RngStream(3), resolution=10 * n)
    # n + 1 lines: line 0 is the bottom row, line -n the top row
    b = last_passage(env, Point(0, env.n_lines), Point(env.steps, 1))
    assert landscape_value(env, (0.0, 0.0, 0.0, 1.0), n) == pytest.approx(n ** (1 / 6) * (b - 2 * math.sqrt(n)))
    with pytest.raises(DomainError):
        landscape_value(env, (0.0, 1.0, 0.0, 0.5), n)
    with pytest.raises(DomainError):
        landscape_value(env, (0.0, 0.0, 0.0, 2.0), n)


def test_landscape_triangle_inequality():
    n, res = 16, 128
    env = sample_landscape_window(n, 0.0, 1.0, 0.6, RngStream(8), resolution=res)
    whole = landscape_value(env, (0.0, 0.0, 0.0, 1.0), n)
    # z = k n^{1/3} / (2 res) puts (z, 1/2) exactly on column k from time 1/2
    for k in range(-40, 41, 3):
        z = k * n ** (1 / 3) / (2 * res)
        pieces = landscape_value(env, (0.0, 0.0, z, 0.5), n) + landscape_value(env, (z, 0.5, 0.0, 1.0), n)
        assert whole >= pieces - 1e-9


def test_landscape_metric_composition_refines():
    n = 16
    res = 8 * n
    env = sample_landscape_window(n, 0.0, 1.0, 0.8, RngStream(9), resolution=res)
    whole = landscape_value(env, (0.0, 0.0, 0.0, 1.0), n)
    # every column at time 1/2 (shifted by 2 z n^{-1/3}) is a candidate
    col_z = (np.arange(-60, 61) / res) * n ** (1 / 3) / 2
    defects = []
    for stride in (8, 4, 2, 1):
        zs = col_z[::stride]
        best = max(landscape_value(env, (0.0, 0.0, z, 0.5), n) + landscape_value(env, (z, 0.5, 0.0, 1.0), n) for z in zs)
        defects.append(whole - best)
    assert all(d >= -1e-9 for d in defects)
    assert all(a >= b - 1e-12 for a, b in zip(defects, defects[1:]))
    assert defects[-1] == pytest.approx(0.0, abs=1e-9)


def test_stationary_version():
    assert stationary_version(1.25, (0.3, 0.0, 0.3, 2.0)) == 1.25
    assert stationary_version(0.5, (1.0, 0.0, 0.0, 1.0)) == pytest.approx(1.5)
    assert stationary_version(0.0, (2.0, 1.0, 0.0, 3.0)) == pytest.approx(2.0)
    with pytest.raises(DomainError):
        stationary_version(0.0, (0.0, 1.0, 0.0, 1.0))


def _toy_sheet():
    rng = np.random.default_rng(0)
    return ScaledSheet(10, np.linspace(-1, 1, 4), np.linspace(0, 2, 3), rng.standard_normal((4, 3)))


def test_sheet_rescale_identity_and_group_law():
    sheet = _toy_sheet()
    same = sheet_rescale(sheet, 1.0)
    assert np.array_equal(same.values, sheet.values) and np.array_equal(same.xs, sheet.xs)
    back = sheet_rescale(sheet_rescale(sheet, 0.37), 1 / 0.37)
    assert np.allclose(back.values, sheet.values, atol=1e-12)
    assert np.allclose(back.xs, sheet.xs, atol=1e-12) and np.allclose(back.ys, sheet.ys, atol=1e-12)
    with pytest.raises(DomainError):
        sheet_rescale(sheet, 0.0)


def test_rescaled_one_point_variance():
    s = 0.5 ** (1 / 3)
    base = np.array([sheet_sample(50, [0.0], [0.0], RngStream(6).child(i)).values[0, 0] for i in range(400)])
    scaled = np.array([
        sheet_rescale(sheet_sample(50, [0.0], [0.0], RngStream(6).child(i)), s).values[0, 0] for i in range(400)
    ])
    assert scaled.var() == pytest.approx(s * s * base.var(), rel=1e-9)


def test_scaled_sheet_validation():
    with pytest.raises(DomainError):
        ScaledSheet(1, [0.0], [0.0, 1.0], np.zeros((1, 3)))
    with pytest.raises(DomainError):
        ScaledSheet(1, [0.0], [0.0], np.array([[np.inf]]))


@pytest.mark.slow
def test_airy_top_line_mean_at_n_200():
    grid = GridSpec(0.0, 1.0, 1)
    values = np.array([
        airy_rescale(sample_dyson_melon(200, grid, RngStream(31).child(i)), 200, 1, [0.0]).lines[0, 0]
        for i in range(10_000)
    ])
    assert abs(values.mean() + 1.77) <= 0.10
