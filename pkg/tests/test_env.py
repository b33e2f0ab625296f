import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from blpp.env import (
    GridSpec,
    LineEnsemble,
    RngStream,
    read_ensemble_csv,
    sample_brownian_ensemble,
    sample_landscape_window,
    window_lines,
    write_ensemble_csv,
)
from blpp.errors import ConfigurationError, DomainError


def test_grid_times_and_spacing():
    g = GridSpec(0.0, 2.0, 8)
    assert g.dt == pytest.approx(0.25)
    assert np.allclose(g.times, np.linspace(0, 2, 9))
    assert g.nearest_index(0.74) == 3
    with pytest.raises(DomainError):
        g.nearest_index(2.5)


@pytest.mark.parametrize("args", [(1.0, 1.0, 4), (0.0, 1.0, 0), (0.0, float("inf"), 3)])
def test_grid_rejects_bad_input(args):
    with pytest.raises(ConfigurationError):
        GridSpec(*args)


def test_same_stream_same_sample():
    g = GridSpec(0.0, 1.0, 16)
    a = sample_brownian_ensemble(3, g, RngStream(9, 4))
    b = sample_brownian_ensemble(3, g, RngStream(9, 4))
    assert np.array_equal(a.values, b.values)


def test_children_are_reproducible_and_distinct():
    root = RngStream(5, 2)
    assert root.child(3) == RngStream(5, 2).child(3)
    ids = {root.child(i).stream_id for i in range(1000)}
    assert len(ids) == 1000


def test_distinct_streams_are_uncorrelated():
    g = GridSpec(0.0, 1.0, 1)
    a = np.array([sample_brownian_ensemble(1, g, RngStream(1, 1).child(i)).values[0, 1] for i in range(4000)])
    b = np.array([sample_brownian_ensemble(1, g, RngStream(1, 2).child(i)).values[0, 1] for i in range(4000)])
    assert abs(np.corrcoef(a, b)[0, 1]) < 4 / np.sqrt(4000)


def test_values_start_at_initial_and_are_read_only():
    g = GridSpec(0.0, 1.0, 4)
    env = sample_brownian_ensemble(2, g, RngStream(0), initial=[1.5, -2.0])
    assert np.array_equal(env.values[:, 0], [1.5, -2.0])
    with pytest.raises(ValueError):
        env.values[0, 0] = 3.0


def test_unit_increment_moments():
    # 10^5 independent streams, one step of length 1
    g = GridSpec(0.0, 1.0, 1)
    root = RngStream(2024, 0)
    xs = np.array([sample_brownian_ensemble(1, g, root.child(i)).values[0, 1] for i in range(100_000)])
    assert abs(xs.mean()) < 4 / np.sqrt(xs.size)
    assert abs(xs.var() - 1.0) < 4 * np.sqrt(2 / xs.size)


def test_increment_variance_scales_with_dt():
    g = GridSpec(0.0, 3.0, 300)
    env = sample_brownian_ensemble(50, g, RngStream(3))
    inc = np.diff(env.values, axis=1)
    assert inc.var() == pytest.approx(g.dt, rel=0.05)


def test_window_line_labels():
    assert window_lines(8, 0.0, 1.0) == (-8, 0)
    env = sample_landscape_window(8, 0.0, 1.0, 0.0, RngStream(1))
    assert env.n_lines == 9 and env.top_index == -8
    assert env.row_of(0) == 8 and env.row_of(-8) == 0
    with pytest.raises(DomainError):
        env.row_of(1)


def test_window_grid_is_anchored_at_zero():
    env = sample_landscape_window(10, 0.25, 0.75, 0.1, RngStream(1), resolution=40)
    assert env.grid.dt == pytest.approx(1 / 40)
    assert np.allclose(env.times * 40, np.round(env.times * 40))
    assert env.times[0] <= 0.15 + 1e-12 and env.times[-1] >= 0.85 - 1e-12


@pytest.mark.parametrize("bad", [dict(n=0), dict(t_min=1.0), dict(x_pad=-1.0), dict(resolution=0)])
def test_window_rejects_bad_input(bad):
    args = dict(n=4, t_min=0.0, t_max=1.0, x_pad=0.0, resolution=None) | bad
    with pytest.raises(ConfigurationError):
        sample_landscape_window(args["n"], args["t_min"], args["t_max"], args["x_pad"], RngStream(0), args["resolution"])


def test_ensemble_validation():
    g = GridSpec(0.0, 1.0, 2)
    with pytest.raises(ConfigurationError):
        LineEnsemble(np.zeros((2, 4)), g)
    with pytest.raises(ConfigurationError):
        LineEnsemble(np.array([[0.0, np.nan, 1.0]]), g)
    with pytest.raises(ConfigurationError):
        LineEnsemble(np.zeros(3), g)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(1, 5), steps=st.integers(1, 20), seed=st.integers(0, 2**31), top=st.integers(-5, 5))
def test_csv_roundtrip_is_exact(tmp_path_factory, n, steps, seed, top):
    env = sample_brownian_ensemble(n, GridSpec(-0.5, 1.25, steps), RngStream(seed, 3), top_index=top)
    path = tmp_path_factory.mktemp("csv") / "env.csv"
    write_ensemble_csv(path, env)
    back = read_ensemble_csv(path)
    assert np.array_equal(back.values, env.values)
    assert back.grid == env.grid
    assert (back.top_index, back.seed, back.stream_id) == (top, seed, env.stream_id)


def test_window_matches_one_sided_law():
    # a window with t in [0, 1] at n = 100 is just 101 independent lines
    from blpp.lpp import Point, last_passage

    direct, window = [], []
    for i in range(300):
        env = sample_landscape_window(100, 0.0, 1.0, 0.0, RngStream(11).child(i), resolution=400)
        window.append(last_passage(env, Point(0, env.n_lines), Point(env.steps, 1)))
        one = sample_brownian_ensemble(101, GridSpec(0.0, 1.0, 400), RngStream(12).child(i))
        direct.append(last_passage(one, Point(0, 101), Point(400, 1)))
    assert stats.ks_2samp(window, direct).pvalue > 0.01
