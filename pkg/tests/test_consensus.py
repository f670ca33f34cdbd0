import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from select_ensemble.consensus import (
    METHODS,
    CalibrationCache,
    inverse_rank,
    kemeny_cost,
    kemeny_exact,
    kemeny_heuristic,
    kemeny_young,
    preference_matrix,
    prob_aggregate,
    rra,
    rra_rho,
    run_consensus,
)
from select_ensemble.errors import CapacityError, ConfigurationError
from select_ensemble.lists import ProbList, RankList, ScoreList

A, B, C = 0, 1, 2


def brute_force_kemeny(R):
    """All optimal orders by enumerating permutations."""
    P = preference_matrix(R)
    costs = {perm: kemeny_cost(perm, P) for perm in itertools.permutations(range(R.shape[1]))}
    best = min(costs.values())
    return best, sorted(p for p, c in costs.items() if c == best)


def rank_matrix(orders):
    return np.vstack([RankList(o).ranks for o in orders])


def random_profile(rng, T, m):
    return [rng.permutation(T) for _ in range(m)]


# -- inverse rank -----------------------------------------------------------------


def test_inverse_rank_example():
    res = inverse_rank([RankList([A, B, C]), RankList([A, B, C]), RankList([B, A, C])])
    np.testing.assert_allclose(res.scores.scores, [2.5 / 3, 2.0 / 3, 1.0 / 3], atol=1e-15)
    assert res.ranklist.order.tolist() == [A, B, C]


def test_single_list_identity():
    r = RankList([3, 0, 2, 1])
    assert inverse_rank([r]).ranklist.order.tolist() == [3, 0, 2, 1]
    assert kemeny_young([r]).ranklist.order.tolist() == [3, 0, 2, 1]


# -- Kemeny-Young -----------------------------------------------------------------


def test_kemeny_unanimity():
    assert kemeny_young([RankList([A, B, C])] * 4).ranklist.order.tolist() == [A, B, C]


def test_kemeny_condorcet_cycle():
    orders = [[A, B, C], [B, C, A], [C, A, B]]
    best, optimal = brute_force_kemeny(rank_matrix(orders))
    assert best == 4
    assert {(A, B, C), (B, C, A), (C, A, B)} <= set(optimal)
    assert kemeny_young([RankList(o) for o in orders], mode="exact").ranklist.order.tolist() == [A, B, C]


def test_kemeny_exact_matches_enumeration():
    rng = np.random.default_rng(0)
    for _ in range(40):
        T, m = int(rng.integers(2, 7)), int(rng.integers(1, 6))
        R = rank_matrix(random_profile(rng, T, m))
        best, optimal = brute_force_kemeny(R)
        order = kemeny_exact(preference_matrix(R))
        assert kemeny_cost(order, preference_matrix(R)) == best
        assert tuple(order.tolist()) == optimal[0]  # lexicographic tie-break


def test_kemeny_heuristic_quality():
    rng = np.random.default_rng(1)
    optimal_hits = 0
    for _ in range(100):
        R = rank_matrix(random_profile(rng, 7, 5))
        best, _ = brute_force_kemeny(R)
        cost = kemeny_cost(kemeny_heuristic(R), preference_matrix(R))
        assert cost <= 1.1 * best
        optimal_hits += cost == best
    assert optimal_hits >= 90


@given(st.integers(2, 7), st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_kemeny_exact_beats_every_input(T, m, seed):
    orders = random_profile(np.random.default_rng(seed), T, m)
    P = preference_matrix(rank_matrix(orders))
    cost = kemeny_cost(kemeny_exact(P), P)
    assert all(cost <= kemeny_cost(o, P) for o in orders)


def test_kemeny_capacity_and_mode():
    lists = [RankList(np.arange(13))]
    with pytest.raises(CapacityError):
        kemeny_young(lists, mode="exact")
    assert kemeny_young(lists, mode="auto").ranklist.order.tolist() == list(range(13))
    with pytest.raises(ConfigurationError):
        kemeny_young(lists, mode="fast")


def test_kemeny_oriented_scores():
    res = kemeny_young([RankList([2, 0, 1])])
    assert res.scores.scores.tolist() == [1.0, 0.0, 2.0]


# -- RRA -------------------------------------------------------------------------


def test_rra_example():
    # tick 0 sits at normalized ranks 0.1, 0.2 and 0.9 over T=10
    rest = [t for t in range(1, 10)]
    lists = [
        RankList([0] + rest),
        RankList(rest[:1] + [0] + rest[1:]),
        RankList(rest[:8] + [0] + rest[8:]),
    ]
    rho = rra_rho(lists)
    assert rho[0] == pytest.approx(0.312, abs=1e-12)
    assert rra_rho(lists, correct=False)[0] == pytest.approx(0.104, abs=1e-12)


def test_rra_single_list():
    r = RankList([4, 1, 3, 0, 2])
    rho = rra_rho([r])
    np.testing.assert_allclose(rho, r.ranks / 5)
    assert rra([r]).ranklist.order.tolist() == [4, 1, 3, 0, 2]


def test_rra_top_tick_has_min_rho():
    rng = np.random.default_rng(2)
    orders = [np.concatenate([[5], rng.permutation([t for t in range(12) if t != 5])]) for _ in range(4)]
    rho = rra_rho([RankList(o) for o in orders])
    assert rho[5] == rho.min()
    assert np.all((rho > 0) & (rho <= 1))


@given(st.integers(3, 15), st.integers(1, 6), st.integers(0, 2**32 - 1), st.data())
def test_rra_monotone_in_single_rank(T, m, seed, data):
    orders = [list(o) for o in random_profile(np.random.default_rng(seed), T, m)]
    before = rra_rho([RankList(o) for o in orders])
    li = data.draw(st.integers(0, m - 1))
    pos = data.draw(st.integers(1, T - 1))
    tick = orders[li][pos]
    orders[li][pos - 1], orders[li][pos] = orders[li][pos], orders[li][pos - 1]
    after = rra_rho([RankList(o) for o in orders])
    assert after[tick] <= before[tick] + 1e-15


# -- probability aggregation ---------------------------------------------------------


def test_prob_aggregate_example():
    probs = [ProbList("a", [0.2, 0.1]), ProbList("b", [0.8, 0.1])]
    assert prob_aggregate(probs, "avg").scores.scores[0] == pytest.approx(0.5)
    assert prob_aggregate(probs, "max").scores.scores[0] == 0.8


def test_prob_aggregate_single_identity():
    p = ProbList("a", [0.3, 0.9, 0.0])
    for comb in ("avg", "max"):
        assert prob_aggregate([p], comb).scores.scores.tolist() == [0.3, 0.9, 0.0]


def test_max_dominates_avg():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        m, T = int(rng.integers(1, 6)), int(rng.integers(1, 12))
        probs = [ProbList(str(i), rng.random(T)) for i in range(m)]
        assert np.all(prob_aggregate(probs, "max").scores.scores >= prob_aggregate(probs, "avg").scores.scores - 1e-15)


def test_prob_ties_follow_tiebreak():
    p = ProbList("a", [0.0, 0.0, 0.0, 1.0])
    res = prob_aggregate([p], "avg", tiebreak=np.array([0.1, 0.3, 0.2, 0.0]))
    assert res.ranklist.order.tolist() == [3, 1, 2, 0]


# -- cross-method properties -------------------------------------------------------

score_lists = st.integers(12, 30).flatmap(
    lambda T: st.lists(
        st.lists(st.floats(0, 50, allow_nan=False), min_size=T, max_size=T).map(np.array), min_size=1, max_size=4
    )
)


@given(st.lists(st.floats(0, 50, allow_nan=False), min_size=12, max_size=30, unique=True), st.integers(1, 4))
def test_unanimity_all_methods(x, copies):
    s = ScoreList("s", np.array(x))
    lists = [ScoreList(f"s{i}", s.scores) for i in range(copies)]
    expected = s.ranklist().order.tolist()
    cache = CalibrationCache()
    for method in METHODS:
        assert run_consensus(method, lists, cache=cache).ranklist.order.tolist() == expected, method


@given(score_lists, st.randoms(use_true_random=False))
def test_symmetric_in_list_order(arrs, rnd):
    lists = [ScoreList(f"s{i}", a) for i, a in enumerate(arrs)]
    shuffled = list(lists)
    rnd.shuffle(shuffled)
    for method in ("inverse_rank", "uni_avg", "uni_max", "mm_avg", "mm_max"):
        a = run_consensus(method, lists).scores.scores
        b = run_consensus(method, shuffled).scores.scores
        np.testing.assert_allclose(a, b, atol=1e-15)


@given(score_lists)
def test_outputs_are_permutations(arrs):
    lists = [ScoreList(f"s{i}", a) for i, a in enumerate(arrs)]
    for method in METHODS:
        res = run_consensus(method, lists, kemeny_mode="heuristic")
        assert sorted(res.ranklist.order.tolist()) == list(range(len(arrs[0])))
        assert np.all(np.isfinite(res.scores.scores))


def test_unknown_method():
    with pytest.raises(ConfigurationError):
        run_consensus("borda", [ScoreList("s", np.arange(12.0))])


def test_cache_separates_equal_ids():
    cache = CalibrationCache()
    a = cache.unify(ScoreList("s", np.arange(12.0)))
    b = cache.unify(ScoreList("s", np.arange(12.0)[::-1]))
    assert not np.array_equal(a.probs, b.probs)
    assert cache.unify(ScoreList("s", np.arange(12.0))) is a
