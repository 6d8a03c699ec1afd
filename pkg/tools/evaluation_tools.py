# tools/evaluation_tools.py (V2 - Ranking Metrics)
"""
أدوات التقييم: تقسيم التحقق المتقاطع، مقاييس الترتيب (Prec@k, AP@k, MAP@k)،
وتجميع النتائج عبر الطيات في تقرير بصيغة جداول الملحق.
"""
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Set, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from core.context import ContextCondition
from core.errors import KeyMismatchError, RemixValidationError
from engines.recommendation_list import RecommendationList
from ingestion.dataset import Dataset

logger = logging.getLogger("EvaluationTools")

ListKey = Tuple[str, ContextCondition]
RelevanceSet = Dict[ListKey, FrozenSet[str]]
Ranking = Union[RecommendationList, Sequence[str]]

INITIAL_VARIANT = "initial"
INITIAL_MODE = "none"


# --- التقسيم إلى طيات ---

@dataclass(frozen=True)
class FoldSplit:
    fold_index: int
    train: Dataset
    test: Dataset
    seed: int


def _stratified_assignment(d: Dataset, k_folds: int, rng: np.random.Generator) -> np.ndarray:
    """كل مستخدم تُوزع أحداثه دوريًا على الطيات، مع إزاحة متتابعة لتوازن الأحجام."""
    assignment = np.empty(len(d.events), dtype=np.int64)
    by_user: Dict[str, List[int]] = defaultdict(list)
    for index, event in enumerate(d.events):
        by_user[event.user_id].append(index)
    offset = 0
    for user_id in sorted(by_user):
        indices = np.asarray(by_user[user_id])
        shuffled = indices[rng.permutation(len(indices))]
        assignment[shuffled] = (np.arange(len(shuffled)) + offset) % k_folds
        offset = (offset + len(shuffled)) % k_folds
    return assignment


def make_folds(d: Dataset, k_folds: int = 5, seed: int = 42, stratified: bool = False) -> List[FoldSplit]:
    n_events = len(d.events)
    if k_folds < 2:
        raise RemixValidationError("cross-validation needs at least two folds")
    if n_events < k_folds:
        raise RemixValidationError(f"cannot split {n_events} events into {k_folds} folds")

    rng = np.random.default_rng(seed)
    if stratified:
        assignment = _stratified_assignment(d, k_folds, rng)
    else:
        assignment = np.empty(n_events, dtype=np.int64)
        for fold, block in enumerate(np.array_split(rng.permutation(n_events), k_folds)):
            assignment[block] = fold

    folds = []
    for fold in range(k_folds):
        in_test = assignment == fold
        test = tuple(e for e, t in zip(d.events, in_test) if t)
        train = tuple(e for e, t in zip(d.events, in_test) if not t)
        folds.append(
            FoldSplit(
                fold,
                d.with_events(train, fold={"index": fold, "role": "train", "seed": seed}),
                d.with_events(test, fold={"index": fold, "role": "test", "seed": seed}),
                seed,
            )
        )
    logger.info(
        f"Split {n_events} events into {k_folds} {'stratified ' if stratified else ''}folds "
        f"(test sizes {[len(f.test) for f in folds]})"
    )
    return folds


def build_relevance(test: Dataset) -> RelevanceSet:
    relevant: Dict[ListKey, Set[str]] = defaultdict(set)
    for event in test.events:
        relevant[(event.user_id, event.condition)].add(event.song_id)
    return {key: frozenset(songs) for key, songs in relevant.items()}


# --- المقاييس ---

def _ids(ranking: Ranking) -> Sequence[str]:
    return ranking.song_ids if isinstance(ranking, RecommendationList) else ranking


def precision_at_k(ranking: Ranking, relevant: Iterable[str], k: int) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    relevant = relevant if isinstance(relevant, (set, frozenset)) else set(relevant)
    hits = sum(1 for song_id in _ids(ranking)[:k] if song_id in relevant)
    return hits / k


def average_precision_at_k(ranking: Ranking, relevant: Iterable[str], k: int) -> float:
    """المقام: min(|relevant|, k)؛ مجموعة صلة فارغة تعطي 0."""
    if k < 1:
        raise ValueError("k must be >= 1")
    relevant = relevant if isinstance(relevant, (set, frozenset)) else set(relevant)
    if not relevant:
        return 0.0
    hits = 0
    total = 0.0
    for position, song_id in enumerate(_ids(ranking)[:k], start=1):
        if song_id in relevant:
            hits += 1
            total += hits / position
    return total / min(len(relevant), k)


def map_at_k(pairs: Iterable[Tuple[Ranking, Iterable[str]]], k: int) -> float:
    aps = [average_precision_at_k(ranking, relevant, k) for ranking, relevant in pairs]
    if not aps:
        raise ValueError("MAP@k needs at least one list")
    return math.fsum(aps) / len(aps)


# --- التجميع ---

class RunKey(NamedTuple):
    algorithm: str
    variant: str
    mode: str
    lam: Optional[float]
    list_size: int
    k: int


@dataclass
class MetricTotals:
    precision_sum: float = 0.0
    ap_sum: float = 0.0
    lists: int = 0
    folds: Set[int] = field(default_factory=set)

    def add(self, precision: float, ap: float, fold_index: int):
        self.precision_sum += precision
        self.ap_sum += ap
        self.lists += 1
        self.folds.add(fold_index)


class EvaluationRow(BaseModel):
    model_config = ConfigDict(populate_by_name=True, frozen=True)

    algorithm: str
    variant: str
    mode: str
    lambda_: Optional[float] = Field(default=None, alias="lambda")
    list_size: int
    k: int
    prec_at_k: float = Field(ge=0.0, le=1.0)
    map_at_k: float = Field(ge=0.0, le=1.0)
    folds: int
    lists: int


class EvaluationReport(BaseModel):
    rows: List[EvaluationRow] = Field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        columns = ["algorithm", "variant", "mode", "lambda", "list_size", "k", "prec_at_k", "map_at_k", "folds", "lists"]
        return pd.DataFrame([r.model_dump(by_alias=True) for r in self.rows], columns=columns)

    def select(self, **filters) -> List[EvaluationRow]:
        return [r for r in self.rows if all(getattr(r, name) == value for name, value in filters.items())]

    def initial_row(self, algorithm: str, list_size: int, k: int) -> Optional[EvaluationRow]:
        rows = self.select(algorithm=algorithm, variant=INITIAL_VARIANT, list_size=list_size, k=k)
        return rows[0] if rows else None

    def lambdas(self) -> List[float]:
        return sorted({r.lambda_ for r in self.rows if r.lambda_ is not None})


def _check_keys(family: str, expected: Set[ListKey], lists: Mapping[ListKey, RecommendationList]):
    missing = expected - set(lists)
    extra = set(lists) - expected
    if missing or extra:
        labels = [f"{u}/{c.name}" for u, c in sorted(missing | extra)]
        raise KeyMismatchError(family, labels)


class EvaluationAccumulator:
    """
    يجمع مجاميع المقاييس لكل مفتاح تشغيل عبر الطيات؛ المتوسط النهائي على
    مستوى القوائم المجمّعة من كل الطيات.
    """

    def __init__(self):
        self._totals: Dict[RunKey, MetricTotals] = defaultdict(MetricTotals)
        self.missing_lists = 0

    def _score_family(
        self,
        key_template: RunKey,
        lists: Mapping[ListKey, RecommendationList],
        relevance: RelevanceSet,
        k_values: Sequence[int],
        fold_index: int,
    ):
        for list_key in sorted(relevance):
            rec = lists.get(list_key)
            ranking: Ranking = rec if rec is not None else ()
            for k in k_values:
                totals = self._totals[key_template._replace(k=k)]
                totals.add(
                    precision_at_k(ranking, relevance[list_key], k),
                    average_precision_at_k(ranking, relevance[list_key], k),
                    fold_index,
                )

    def add_initial(
        self,
        algorithm: str,
        list_size: int,
        initial: Mapping[ListKey, RecommendationList],
        relevance: RelevanceSet,
        k_values: Sequence[int],
        fold_index: int = 0,
    ):
        unexpected = [key for key in initial if key not in relevance]
        if unexpected:
            raise KeyMismatchError(
                f"{algorithm}/{INITIAL_VARIANT}/top-{list_size}", [f"{u}/{c.name}" for u, c in sorted(unexpected)]
            )
        absent = [key for key in relevance if key not in initial]
        if absent:
            self.missing_lists += len(absent)
            logger.warning(
                f"{algorithm} top-{list_size} fold {fold_index}: {len(absent)} relevance keys have no list "
                "(scored as empty lists)"
            )
        self._score_family(
            RunKey(algorithm, INITIAL_VARIANT, INITIAL_MODE, None, list_size, 0), initial, relevance, k_values, fold_index
        )

    def add_families(
        self,
        algorithm: str,
        list_size: int,
        initial: Mapping[ListKey, RecommendationList],
        families: Mapping[Tuple[str, str, float], Mapping[ListKey, RecommendationList]],
        relevance: RelevanceSet,
        k_values: Sequence[int],
        fold_index: int = 0,
    ):
        expected = set(initial)
        for (variant, mode, lam), lists in families.items():
            _check_keys(f"{algorithm}/{variant}/{mode}/{lam:g}", expected, lists)
        for (variant, mode, lam), lists in sorted(families.items()):
            self._score_family(RunKey(algorithm, variant, mode, lam, list_size, 0), lists, relevance, k_values, fold_index)

    def add_run(
        self,
        algorithm: str,
        list_size: int,
        initial: Mapping[ListKey, RecommendationList],
        families: Mapping[Tuple[str, str, float], Mapping[ListKey, RecommendationList]],
        relevance: RelevanceSet,
        k_values: Sequence[int],
        fold_index: int = 0,
    ):
        self.add_families(algorithm, list_size, initial, families, relevance, k_values, fold_index)
        self.add_initial(algorithm, list_size, initial, relevance, k_values, fold_index)

    def merge(self, other: "EvaluationAccumulator") -> "EvaluationAccumulator":
        for key, totals in other._totals.items():
            mine = self._totals[key]
            mine.precision_sum += totals.precision_sum
            mine.ap_sum += totals.ap_sum
            mine.lists += totals.lists
            mine.folds |= totals.folds
        self.missing_lists += other.missing_lists
        return self

    def report(self) -> EvaluationReport:
        rows = []
        for key in sorted(self._totals, key=_run_sort_key):
            totals = self._totals[key]
            if not totals.lists:
                continue
            rows.append(
                EvaluationRow(
                    algorithm=key.algorithm,
                    variant=key.variant,
                    mode=key.mode,
                    lambda_=key.lam,
                    list_size=key.list_size,
                    k=key.k,
                    prec_at_k=min(1.0, totals.precision_sum / totals.lists),
                    map_at_k=min(1.0, totals.ap_sum / totals.lists),
                    folds=len(totals.folds),
                    lists=totals.lists,
                )
            )
        return EvaluationReport(rows=rows)


_VARIANT_ORDER = {INITIAL_VARIANT: 0, "global": 1, "personalized": 2}
_MODE_ORDER = {INITIAL_MODE: 0, "regular": 1, "opposite": 2}


def _run_sort_key(key: RunKey):
    return (
        key.algorithm,
        -key.list_size,
        key.k,
        _VARIANT_ORDER.get(key.variant, 9),
        _MODE_ORDER.get(key.mode, 9),
        -1.0 if key.lam is None else key.lam,
    )


def evaluate_run(
    initial: Mapping[ListKey, RecommendationList],
    families: Mapping[Tuple[str, str, float], Mapping[ListKey, RecommendationList]],
    relevance: RelevanceSet,
    k_values: Sequence[int] = (10,),
    list_size: Optional[int] = None,
    algorithm: str = "initial",
) -> EvaluationReport:
    """تقييم طية واحدة؛ للتجميع عبر الطيات استخدم EvaluationAccumulator مباشرة."""
    if list_size is None:
        list_size = max((len(rec) for rec in initial.values()), default=0)
    accumulator = EvaluationAccumulator()
    accumulator.add_run(algorithm, list_size, initial, families, relevance, k_values)
    return accumulator.report()


class BestLambda(NamedTuple):
    algorithm: str
    variant: str
    mode: str
    list_size: int
    k: int
    best_lambda: float
    map_at_k: float
    initial_map_at_k: float
    relative_gain: Optional[float]


def best_lambda(report: EvaluationReport) -> List[BestLambda]:
    """أفضل λ حسب MAP@k لكل (خوارزمية، نموذج، وضع، N، k)؛ التعادل لصالح λ الأصغر."""
    groups: Dict[Tuple[str, str, str, int, int], List[EvaluationRow]] = defaultdict(list)
    for row in report.rows:
        if row.variant != INITIAL_VARIANT:
            groups[(row.algorithm, row.variant, row.mode, row.list_size, row.k)].append(row)
    summary = []
    for (algorithm, variant, mode, list_size, k), rows in groups.items():
        best = min(rows, key=lambda r: (-r.map_at_k, r.lambda_))
        initial = report.initial_row(algorithm, list_size, k)
        initial_map = initial.map_at_k if initial is not None else float("nan")
        gain = (best.map_at_k - initial_map) / initial_map if initial is not None and initial_map > 0 else None
        summary.append(BestLambda(algorithm, variant, mode, list_size, k, best.lambda_, best.map_at_k, initial_map, gain))
    return sorted(
        summary,
        key=lambda b: (b.algorithm, -b.list_size, b.k, _VARIANT_ORDER.get(b.variant, 9), _MODE_ORDER.get(b.mode, 9)),
    )
