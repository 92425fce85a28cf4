import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bnbreg.assignment import FORBIDDEN, expand_kcard_to_square, solve_kcard_lap, solve_lap
from oracles import brute_kcard, brute_lap


def test_lap_small_known():
    C = np.array([[4.0, 1.0, 3.0], [2.0, 0.0, 5.0], [3.0, 2.0, 2.0]])
    perm, value = solve_lap(C)
    assert value == 5.0 and sorted(perm) == [0, 1, 2]


def test_lap_matches_enumeration(rng):
    for _ in range(10):
        C = rng.integers(-20, 20, size=(6, 6)).astype(float)
        perm, value = solve_lap(C)
        assert value == brute_lap(C)
        assert value == C[np.arange(6), perm].sum()


def test_lap_respects_forbidden_pairs():
    C = np.array([[0.0, FORBIDDEN], [5.0, 1.0]])
    perm, value = solve_lap(C)
    assert perm.tolist() == [0, 1] and value == 1.0


def test_lap_rejects_bad_input():
    with pytest.raises(ValueError):
        solve_lap(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        solve_lap(np.array([[np.nan, 0.0], [0.0, 0.0]]))


def test_expansion_shape_and_blocks():
    S = expand_kcard_to_square(np.ones((3, 4)), 2)
    assert S.shape == (5, 5)
    assert np.all(S[3:, 4:] == FORBIDDEN) and np.all(S[:3, 4:] == 0) and np.all(S[3:, :4] == 0)


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 5), st.integers(1, 5), st.data())
def test_kcard_matches_brute_force(n_x, n_y, data):
    k = data.draw(st.integers(1, min(n_x, n_y)))
    C = data.draw(arrays(np.float64, (n_x, n_y), elements=st.integers(-9, 9).map(float)))
    A, value = solve_kcard_lap(C, k)
    assert A.is_feasible(k)
    assert value == brute_kcard(C, k)
    assert value == (A.P * C).sum()


def test_kcard_positive_costs_still_pick_k_pairs(rng):
    # a zero-cost dummy block would let the solver take fewer real pairs
    C = rng.uniform(1, 2, size=(4, 5))
    A, _ = solve_kcard_lap(C, 3)
    assert A.n_p == 3


def test_kcard_rejects_bad_k():
    with pytest.raises(ValueError):
        solve_kcard_lap(np.zeros((2, 3)), 3)
    with pytest.raises(ValueError):
        solve_kcard_lap(np.zeros((2, 3)), 0)
