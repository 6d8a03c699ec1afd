from fractions import Fraction

import numpy as np
import pytest

from core.context import TIME_OF_DAY_DIMENSION
from core.errors import KeyMismatchError, RemixValidationError
from core.feature_space import N_FEATURES
from engines.recommendation_list import ListEntry, RecommendationList
from tools.evaluation_tools import (
    INITIAL_MODE,
    INITIAL_VARIANT,
    EvaluationAccumulator,
    average_precision_at_k,
    best_lambda,
    build_relevance,
    evaluate_run,
    make_folds,
    map_at_k,
    precision_at_k,
)

from tests.conftest import catalog_from_vectors, dataset_from_triples

MORNING = TIME_OF_DAY_DIMENSION.condition("morning")
NIGHT = TIME_OF_DAY_DIMENSION.condition("night")


def brute_force(ranking, relevant, k):
    """تقييم مباشر بالكسور: الدقة عند كل موضع مضروبة في مؤشر الصلة."""
    top = list(ranking[:k])
    prec = Fraction(sum(1 for s in top if s in relevant), k)
    if not relevant:
        return prec, Fraction(0)
    total = Fraction(0)
    for i in range(1, len(top) + 1):
        if top[i - 1] in relevant:
            total += Fraction(sum(1 for s in top[:i] if s in relevant), i)
    return prec, total / min(len(relevant), k)


def test_metrics_match_brute_force_on_random_lists():
    rng = np.random.default_rng(2024)
    universe = [f"s{i}" for i in range(20)]
    for _ in range(1000):
        length = int(rng.integers(0, 13))
        ranking = [str(s) for s in rng.choice(universe, size=length, replace=False)]
        relevant = {str(s) for s in rng.choice(universe, size=int(rng.integers(0, 8)), replace=False)}
        k = int(rng.integers(1, 13))
        prec, ap = brute_force(ranking, relevant, k)
        assert abs(precision_at_k(ranking, relevant, k) - float(prec)) <= 1e-12
        assert abs(average_precision_at_k(ranking, relevant, k) - float(ap)) <= 1e-12


@pytest.mark.parametrize(
    "ranking, relevant, expected",
    [
        ([f"s{i}" for i in range(10)], {f"s{i}" for i in range(10)}, 1.0),
        ([f"s{i}" for i in range(10)], {"x"}, 0.0),
        ([f"s{i}" for i in range(10)], {"s0", "s4", "s9", "x"}, 0.3),
        (["s0", "s1"], {"s0", "s1"}, 0.2),
    ],
)
def test_precision_at_10(ranking, relevant, expected):
    assert precision_at_k(ranking, relevant, 10) == pytest.approx(expected)


@pytest.mark.parametrize(
    "ranking, relevant, expected",
    [
        (["a", "b", "c"], {"a"}, 1.0),
        (["b", "a", "c"], {"a"}, 0.5),
        (["a", "b", "c", "d"], {"a", "c"}, (1 + 2 / 3) / 2),
        (["a", "b"], set(), 0.0),
    ],
)
def test_average_precision_examples(ranking, relevant, expected):
    assert average_precision_at_k(ranking, relevant, 10) == pytest.approx(expected)


def test_average_precision_denominator_is_capped_at_k():
    relevant = {f"s{i}" for i in range(20)}
    assert average_precision_at_k([f"s{i}" for i in range(10)], relevant, 10) == pytest.approx(1.0)


def test_map_examples():
    assert map_at_k([(["a"], {"a"}), (["b", "a"], {"a"})], 10) == pytest.approx(0.75)
    assert map_at_k([(["a"], {"z"}), (["b"], {"z"})], 10) == 0.0
    assert map_at_k([(["b", "a"], {"a"})], 10) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        map_at_k([], 10)


# --- الطيات ---

def _events(n):
    catalog = catalog_from_vectors({f"s{i}": [0.5] * N_FEATURES for i in range(n)})
    return dataset_from_triples([(f"u{i % 3}", f"s{i}", "morning") for i in range(n)], catalog)


def test_ten_events_into_five_folds():
    d = _events(10)
    folds = make_folds(d, 5, seed=42)
    assert [len(f.test) for f in folds] == [2] * 5
    assert [len(f.train) for f in folds] == [8] * 5
    tests = [set(f.test.events) for f in folds]
    assert set().union(*tests) == set(d.events)
    assert sum(len(t) for t in tests) == len(d.events)
    for fold in folds:
        assert not set(fold.train.events) & set(fold.test.events)


def test_folds_are_deterministic_per_seed():
    d = _events(23)
    first = [f.test.events for f in make_folds(d, 5, seed=9)]
    second = [f.test.events for f in make_folds(d, 5, seed=9)]
    other = [f.test.events for f in make_folds(d, 5, seed=10)]
    assert first == second
    assert first != other
    assert sorted(len(t) for t in first) == [4, 4, 5, 5, 5]


def test_stratified_folds_spread_each_user():
    d = _events(30)
    for fold in make_folds(d, 5, seed=1, stratified=True):
        assert fold.test.user_event_counts() == {"u0": 2, "u1": 2, "u2": 2}


def test_too_few_events_for_folds():
    with pytest.raises(RemixValidationError):
        make_folds(_events(3), 5)


def test_relevance_comes_from_test_events():
    d = dataset_from_triples(
        [("u", "s0", "morning"), ("u", "s1", "morning"), ("u", "s0", "night")],
        catalog_from_vectors({f"s{i}": [0.5] * N_FEATURES for i in range(2)}),
    )
    assert build_relevance(d) == {("u", MORNING): frozenset({"s0", "s1"}), ("u", NIGHT): frozenset({"s0"})}


# --- التجميع ---

def _rec(user, condition, ids, source="bpr"):
    return RecommendationList(user, condition, tuple(ListEntry(s, float(len(ids) - i)) for i, s in enumerate(ids)), source)


@pytest.fixture
def run_inputs():
    relevance = {("u1", MORNING): frozenset({"a"}), ("u2", NIGHT): frozenset({"c", "d"})}
    initial = {("u1", MORNING): _rec("u1", MORNING, ["b", "a", "c"]), ("u2", NIGHT): _rec("u2", NIGHT, ["c", "a", "d"])}
    better = {("u1", MORNING): _rec("u1", MORNING, ["a", "b", "c"]), ("u2", NIGHT): _rec("u2", NIGHT, ["c", "d", "a"])}
    return relevance, initial, better


def test_identical_lists_give_identical_rows(run_inputs):
    relevance, initial, _ = run_inputs
    report = evaluate_run(initial, {("personalized", "regular", 0.0): initial}, relevance, k_values=[2])
    first, second = report.rows
    assert (first.variant, first.mode, first.lambda_) == (INITIAL_VARIANT, INITIAL_MODE, None)
    assert (first.prec_at_k, first.map_at_k) == (second.prec_at_k, second.map_at_k)


def test_report_rows_are_ordered_and_averaged(run_inputs):
    relevance, initial, better = run_inputs
    families = {
        ("personalized", "regular", 0.5): better,
        ("global", "regular", 0.5): initial,
        ("global", "regular", 0.0): initial,
    }
    report = evaluate_run(initial, families, relevance, k_values=[2], list_size=3, algorithm="bpr")
    assert [(r.variant, r.lambda_) for r in report.rows] == [
        ("initial", None), ("global", 0.0), ("global", 0.5), ("personalized", 0.5),
    ]
    initial_row = report.initial_row("bpr", 3, 2)
    # u1: AP@2 = 0.5 ; u2: (1/1) / 2 = 0.5
    assert initial_row.map_at_k == pytest.approx(0.5)
    assert initial_row.prec_at_k == pytest.approx(0.5)
    personalized = report.select(variant="personalized")[0]
    assert personalized.map_at_k == pytest.approx(1.0)
    assert personalized.prec_at_k == pytest.approx(0.75)


def test_key_mismatch_lists_missing_keys(run_inputs):
    relevance, initial, better = run_inputs
    partial = {("u1", MORNING): better[("u1", MORNING)]}
    with pytest.raises(KeyMismatchError) as err:
        evaluate_run(initial, {("global", "regular", 0.1): partial}, relevance)
    assert err.value.missing == ["u2/night"]


def test_missing_initial_lists_score_as_empty(run_inputs):
    relevance, initial, _ = run_inputs
    accumulator = EvaluationAccumulator()
    accumulator.add_initial("bpr", 3, {("u1", MORNING): initial[("u1", MORNING)]}, relevance, [2])
    report = accumulator.report()
    assert accumulator.missing_lists == 1
    assert report.rows[0].lists == 2
    assert report.rows[0].map_at_k == pytest.approx(0.25)


def test_initial_list_for_pair_outside_test_set_is_a_key_mismatch(run_inputs):
    relevance, initial, _ = run_inputs
    stray = dict(initial)
    stray[("u3", MORNING)] = _rec("u3", MORNING, ["a", "b", "c"])
    with pytest.raises(KeyMismatchError) as err:
        EvaluationAccumulator().add_initial("bpr", 3, stray, relevance, [2])
    assert err.value.missing == ["u3/morning"]
    with pytest.raises(KeyMismatchError):
        evaluate_run(stray, {}, relevance, k_values=[2])


def test_accumulators_merge_in_fold_order(run_inputs):
    relevance, initial, better = run_inputs
    per_fold = []
    for fold_index, lists in enumerate([initial, better]):
        accumulator = EvaluationAccumulator()
        accumulator.add_initial("bpr", 3, lists, relevance, [2], fold_index)
        per_fold.append(accumulator)
    total = EvaluationAccumulator()
    for accumulator in per_fold:
        total.merge(accumulator)
    row = total.report().rows[0]
    assert row.folds == 2 and row.lists == 4
    assert row.map_at_k == pytest.approx((0.5 * 2 + 1.0 * 2) / 4)


def test_best_lambda_prefers_smaller_lambda_on_ties(run_inputs):
    relevance, initial, better = run_inputs
    families = {("personalized", "regular", lam): better for lam in (0.3, 0.7)}
    families[("personalized", "regular", 0.0)] = initial
    best = best_lambda(evaluate_run(initial, families, relevance, k_values=[2], algorithm="bpr"))
    assert len(best) == 1
    assert best[0].best_lambda == 0.3
    assert best[0].relative_gain == pytest.approx(1.0)
