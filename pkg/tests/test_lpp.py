import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blpp.env import GridSpec, LineEnsemble
from blpp.errors import CapacityError, DomainError
from blpp.lpp import (
    EndpointPair,
    LatticePath,
    Point,
    backwards_first_passage,
    gap_length,
    last_passage,
    last_passage_path,
    multi_path_last_passage,
    passage_table,
    path_length,
)
from conftest import brownian_env, small_envs
from oracles import brute


def linear_env(slopes, steps=4):
    g = GridSpec(0.0, 1.0, steps)
    return LineEnsemble(np.outer(slopes, g.times), g)


def constant_env(n=2, steps=5):
    return LineEnsemble(np.zeros((n, steps + 1)), GridSpec(0.0, 1.0, steps))


def test_constant_lines_give_zero():
    env = constant_env(3, 6)
    assert last_passage(env, Point(1, 3), Point(5, 1)) == 0.0


@pytest.mark.parametrize("a,b", [(1.0, 2.0), (2.0, -1.0), (-3.0, -0.5), (0.7, 0.7)])
def test_two_linear_lines(a, b):
    assert last_passage(linear_env([a, b]), Point(0, 2), Point(4, 1)) == pytest.approx(max(a, b))


def test_four_lines_eight_steps_match_enumeration():
    for seed in range(20):
        env = brownian_env(seed, 4, 8)
        assert last_passage(env, Point(0, 4), Point(8, 1)) == pytest.approx(brute.lpp(env.values, 0, 4, 8, 1), abs=1e-9)


@settings(max_examples=80, deadline=None)
@given(env=small_envs(max_lines=4, max_steps=7), data=st.data())
def test_last_passage_matches_enumeration_anywhere(env, data):
    x = data.draw(st.integers(0, env.steps))
    y = data.draw(st.integers(x, env.steps))
    m = data.draw(st.integers(1, env.n_lines))
    l = data.draw(st.integers(m, env.n_lines))
    assert last_passage(env, Point(x, l), Point(y, m)) == pytest.approx(brute.lpp(env.values, x, l, y, m), abs=1e-9)


def test_passage_table_corner_is_the_value():
    env = brownian_env(3, 4, 9)
    table = passage_table(env, Point(2, 4), Point(9, 1))
    assert table.shape == (4, 8)
    assert table[0, -1] == pytest.approx(last_passage(env, Point(2, 4), Point(9, 1)))
    assert table[2, 3] == pytest.approx(last_passage(env, Point(2, 4), Point(5, 3)))


def test_tie_breaking_on_constant_lines():
    env = constant_env(2, 7)
    right = last_passage_path(env, Point(0, 2), Point(7, 1), "rightmost")
    left = last_passage_path(env, Point(0, 2), Point(7, 1), "leftmost")
    assert right.jump_indices == (7,)
    assert left.jump_indices == (0,)


def test_rightmost_dominates_leftmost():
    for seed in range(20):
        env = brownian_env(seed, 4, 8)
        r = last_passage_path(env, Point(0, 4), Point(8, 1), "rightmost")
        l = last_passage_path(env, Point(0, 4), Point(8, 1), "leftmost")
        assert np.all(r.cell_lines() >= l.cell_lines())


@settings(max_examples=60, deadline=None)
@given(env=small_envs(max_lines=4, max_steps=6, min_lines=2), quantum=st.sampled_from([None, 0.5]))
def test_paths_are_extreme_among_all_maximizers(env, quantum):
    F = np.asarray(env.values)
    if quantum is not None:
        # coarse values create many exact ties
        F = np.round(F / quantum) * quantum
        env = LineEnsemble(F, env.grid)
    n, M = env.n_lines, env.steps
    best, maxima = brute.maximizers(F, 0, n, M, 1)
    r = last_passage_path(env, Point(0, n), Point(M, 1), "rightmost")
    l = last_passage_path(env, Point(0, n), Point(M, 1), "leftmost")
    assert path_length(env, r) == pytest.approx(best, abs=1e-9)
    assert path_length(env, l) == pytest.approx(best, abs=1e-9)
    for p in maxima:
        assert np.all(r.cell_lines() >= p) and np.all(l.cell_lines() <= p)


def test_bad_side_and_bad_points():
    env = brownian_env(0, 3, 4)
    with pytest.raises(DomainError):
        last_passage_path(env, Point(0, 3), Point(4, 1), "middle")
    with pytest.raises(DomainError):
        last_passage(env, Point(3, 2), Point(1, 1))
    with pytest.raises(DomainError):
        last_passage(env, Point(0, 1), Point(4, 2))
    with pytest.raises(DomainError):
        last_passage(env, Point(0, 4), Point(4, 1))


def test_path_validation():
    with pytest.raises(DomainError):
        LatticePath(Point(0, 3), Point(5, 1), (2,))
    with pytest.raises(DomainError):
        LatticePath(Point(0, 3), Point(5, 1), (3, 2))
    with pytest.raises(DomainError):
        LatticePath(Point(1, 2), Point(5, 1), (6,))


def test_single_line_path_and_constant_env():
    env = brownian_env(1, 2, 6)
    p = LatticePath(Point(1, 2), Point(5, 2), ())
    assert path_length(env, p) == pytest.approx(env.values[1, 5] - env.values[1, 1])
    assert gap_length(env, p) == pytest.approx(env.values[1, 5] - env.values[1, 1])
    q = LatticePath(Point(0, 3), Point(5, 1), (1, 4))
    assert path_length(constant_env(3, 5), q) == 0.0


def test_gap_length_with_constant_gap():
    g = GridSpec(0.0, 1.0, 4)
    base = np.sin(3 * g.times)
    gap = 0.8
    env = LineEnsemble(np.vstack([base + gap, base]), g)
    p = LatticePath(Point(0, 2), Point(4, 1), (2,))
    expected = env.values[0, 4] - env.values[1, 0] - gap
    assert gap_length(env, p) == pytest.approx(expected)
    assert path_length(env, p) == pytest.approx(expected)


def test_gap_length_equals_path_length_on_random_pairs():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(1000):
        n, steps = rng.integers(1, 6), rng.integers(1, 12)
        env = brownian_env(int(rng.integers(2**31)), int(n), int(steps))
        x, y = sorted(rng.integers(0, steps + 1, size=2))
        m, l = sorted(rng.integers(1, n + 1, size=2))
        jumps = tuple(sorted(rng.integers(x, y + 1, size=l - m)))
        p = LatticePath(Point(int(x), int(l)), Point(int(y), int(m)), jumps)
        worst = max(worst, abs(gap_length(env, p) - path_length(env, p)))
    assert worst < 1e-9


def test_line_at_and_cell_lines():
    p = LatticePath(Point(1, 3), Point(6, 1), (2, 4))
    assert [p.line_at(c) for c in range(1, 7)] == [3, 2, 2, 1, 1, 1]
    assert list(p.cell_lines()) == [3, 2, 2, 1, 1]
    assert list(p.segments()) == [(3, 1, 2), (2, 2, 4), (1, 4, 6)]


@pytest.mark.parametrize("engine", ["enumerate", "transfer"])
def test_full_width_paths_are_pinned(engine):
    env = brownian_env(4, 3, 6)
    ep = EndpointPair([(0, 3)] * 3, [(6, 1)] * 3)
    F = env.values
    assert multi_path_last_passage(env, ep, engine) == pytest.approx(float((F[:, 6] - F[:, 0]).sum()))


@pytest.mark.parametrize("engine", ["enumerate", "transfer"])
def test_single_path_reduces_to_last_passage(engine):
    env = brownian_env(5, 4, 7)
    ep = EndpointPair([(1, 4)], [(6, 2)])
    assert multi_path_last_passage(env, ep, engine) == pytest.approx(last_passage(env, Point(1, 4), Point(6, 2)))


@pytest.mark.parametrize("engine", ["enumerate", "transfer"])
def test_two_paths_match_brute_force(engine):
    for seed in range(15):
        env = brownian_env(100 + seed, 3, 6)
        for U, V in [
            ([(0, 3), (0, 3)], [(6, 1), (6, 1)]),
            ([(0, 2), (1, 3)], [(4, 1), (6, 2)]),
            ([(0, 3), (2, 3)], [(3, 1), (6, 1)]),
        ]:
            value = multi_path_last_passage(env, EndpointPair(U, V), engine)
            assert value == pytest.approx(brute.multi_lpp(env.values, U, V), abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(env=small_envs(max_lines=4, max_steps=5, min_lines=2), data=st.data())
def test_engines_agree(env, data):
    n, M = env.n_lines, env.steps
    k = data.draw(st.integers(1, min(3, n)))
    U = [(0, n)] * k
    V = [(M, 1)] * k
    assert multi_path_last_passage(env, EndpointPair(U, V), "transfer") == pytest.approx(
        multi_path_last_passage(env, EndpointPair(U, V), "enumerate"), abs=1e-9
    )


def test_multi_path_errors():
    env = brownian_env(0, 4, 20)
    with pytest.raises(CapacityError):
        multi_path_last_passage(env, EndpointPair([(0, 4)] * 4, [(20, 1)] * 4), "enumerate")
    with pytest.raises(CapacityError):
        multi_path_last_passage(env, EndpointPair([(0, 4)], [(20, 1)]), "enumerate")
    with pytest.raises(DomainError):
        # three paths cannot stay strictly ordered on two lines
        multi_path_last_passage(brownian_env(0, 2, 4), EndpointPair([(0, 2)] * 3, [(4, 1)] * 3), "transfer")
    with pytest.raises(DomainError):
        multi_path_last_passage(env, EndpointPair([(0, 4)], [(5, 1)]), "bogus")
    with pytest.raises(DomainError):
        EndpointPair([(0, 2), (1, 2)], [(5, 1)])
    with pytest.raises(DomainError):
        EndpointPair([(3, 2)], [(3, 1)])


def test_first_passage_single_line_and_constant():
    env = brownian_env(2, 3, 6)
    assert backwards_first_passage(env, Point(1, 2), Point(5, 2)) == pytest.approx(env.values[1, 5] - env.values[1, 1])
    assert backwards_first_passage(constant_env(3, 6), Point(0, 1), Point(6, 3)) == 0.0


@settings(max_examples=60, deadline=None)
@given(env=small_envs(max_lines=4, max_steps=7), data=st.data())
def test_first_passage_brute_force_and_duality(env, data):
    n, M = env.n_lines, env.steps
    x = data.draw(st.integers(0, M))
    y = data.draw(st.integers(x, M))
    a = data.draw(st.integers(1, n))
    b = data.draw(st.integers(a, n))
    value = backwards_first_passage(env, Point(x, a), Point(y, b))
    assert value == pytest.approx(brute.first_passage(env.values, x, a, y, b), abs=1e-9)
    flipped = LineEnsemble(-np.asarray(env.values)[::-1], env.grid)
    assert value == pytest.approx(-last_passage(flipped, Point(x, n + 1 - a), Point(y, n + 1 - b)), abs=1e-9)


def test_first_passage_errors():
    env = brownian_env(0, 3, 4)
    with pytest.raises(DomainError):
        backwards_first_passage(env, Point(0, 3), Point(4, 1))
    with pytest.raises(DomainError):
        backwards_first_passage(env, Point(3, 1), Point(1, 2))


def test_brute_oracle_counts_paths():
    # sanity of the oracle itself: C(y - x + l - m, l - m) paths
    for x, l, y, m in [(0, 4, 8, 1), (2, 3, 5, 3), (0, 2, 0, 1)]:
        count = sum(1 for _ in brute.paths(x, l, y, m))
        expected = len(list(itertools.combinations_with_replacement(range(y - x + 1), l - m)))
        assert count == expected
