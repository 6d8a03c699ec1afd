# engines/rerank_engine.py (V1 - Contextual Post-Filtering)
"""
Contextual Re-ranking Engine
إعادة ترتيب قوائم التوصية بمزج التشابه مع نموذج التفضيل السياقي والدرجة
الأصلية المطبّعة:
    new_score = λ · sim + (1 - λ) · rec'            (الوضع العادي)
    new_score = λ · (1 - sim) + (1 - λ) · rec'      (الوضع المعاكس)
"""
import logging
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from core.context import ContextCondition
from core.feature_space import distances_to, resolve_feature_mask
from engines.preference_models import PreferenceModel, lookup
from engines.recommendation_list import RecommendationList, ScoredEntry
from ingestion.dataset import FeatureCatalog

logger = logging.getLogger("RerankEngine")

ListKey = Tuple[str, ContextCondition]


class RerankMode(str, Enum):
    REGULAR = "regular"
    OPPOSITE = "opposite"


class ModelKind(str, Enum):
    GLOBAL = "global"
    PERSONALIZED = "personalized"


class NormalizationScope(str, Enum):
    LIST = "list"
    USER = "user"
    FOLD = "fold"


class RerankConfig(BaseModel):
    model_config = ConfigDict(populate_by_name=True, frozen=True)

    lambda_: float = Field(alias="lambda", ge=0.0, le=1.0, description="معامل الموازنة λ")
    mode: RerankMode = RerankMode.REGULAR
    model_kind: ModelKind = ModelKind.PERSONALIZED


def default_lambda_grid(step: float = 0.1) -> Tuple[float, ...]:
    count = int(round(1.0 / step))
    return tuple(round(i * step, 10) for i in range(count + 1))


def minmax_normalize(scores: Sequence[float]) -> np.ndarray:
    """تطبيع أحادي الوحدة؛ القائمة الثابتة تصبح 0.5 لكل العناصر."""
    values = np.asarray(scores, dtype=float)
    if values.size == 0:
        raise ValueError("cannot normalize an empty score list")
    if not np.all(np.isfinite(values)):
        raise ValueError("scores must be finite")
    low, high = values.min(), values.max()
    if high == low:
        return np.full(values.shape, 0.5)
    return (values - low) / (high - low)


def _normalize_with_bounds(values: np.ndarray, low: float, high: float) -> np.ndarray:
    if high == low:
        return np.full(values.shape, 0.5)
    return (values - low) / (high - low)


def combine_scores(sims: np.ndarray, rec_norm: np.ndarray, lam: float, mode: RerankMode) -> np.ndarray:
    context_term = sims if mode == RerankMode.REGULAR else 1.0 - sims
    return lam * context_term + (1.0 - lam) * rec_norm


def order_entries(song_ids: Sequence[str], initial: np.ndarray, new_scores: np.ndarray) -> np.ndarray:
    """
    الترتيب: new_score تنازليًا، ثم الدرجة الأصلية تنازليًا، ثم المعرّف تصاعديًا.
    المفتاح الثاني يحفظ ترتيب المدخلات عند λ=0 رغم أخطاء التقريب.
    """
    ids = np.asarray(song_ids, dtype=object)
    id_rank = np.argsort(np.argsort(ids.astype(str), kind="stable"), kind="stable")
    return np.lexsort((id_rank, -initial, -new_scores))


class ContextualReranker:
    """
    محرك إعادة الترتيب (V1).
    التشابهات تُحسب مرة واحدة لكل قائمة وتُعاد لكل قيم λ.
    """

    def __init__(
        self,
        catalog: FeatureCatalog,
        model: PreferenceModel,
        metric: str = "euclidean",
        feature_mask: Optional[Sequence[str]] = None,
        scope: NormalizationScope = NormalizationScope.LIST,
    ):
        self.catalog = catalog
        self.model = model
        self.metric = metric
        self.mask = resolve_feature_mask(feature_mask)
        self.scope = NormalizationScope(scope)

    def similarities(self, rec: RecommendationList) -> np.ndarray:
        if not len(rec):
            return np.empty(0)
        preference = lookup(self.model, rec.condition, rec.user_id)
        rows = self.catalog.matrix(rec.song_ids)
        return 1.0 - distances_to(rows, preference, self.metric, self.mask)

    def normalized_scores(self, lists: Iterable[RecommendationList]) -> Dict[ListKey, np.ndarray]:
        lists = list(lists)
        scores = {rec.key: np.asarray(rec.scores, dtype=float) for rec in lists}
        if self.scope == NormalizationScope.LIST:
            return {key: minmax_normalize(s) if s.size else s for key, s in scores.items()}

        if self.scope == NormalizationScope.FOLD:
            pooled = [s for s in scores.values() if s.size]
            if not pooled:
                return scores
            stacked = np.concatenate(pooled)
            low, high = float(stacked.min()), float(stacked.max())
            return {key: _normalize_with_bounds(s, low, high) for key, s in scores.items()}

        bounds: Dict[str, Tuple[float, float]] = {}
        for (user_id, _), s in scores.items():
            if not s.size:
                continue
            low, high = bounds.get(user_id, (np.inf, -np.inf))
            bounds[user_id] = (min(low, float(s.min())), max(high, float(s.max())))
        return {
            key: _normalize_with_bounds(s, *bounds[key[0]]) if s.size else s
            for key, s in scores.items()
        }

    def _apply(
        self, rec: RecommendationList, sims: np.ndarray, rec_norm: np.ndarray, cfg: RerankConfig, source: str
    ) -> RecommendationList:
        if not len(rec):
            return RecommendationList(rec.user_id, rec.condition, (), source)
        initial = np.asarray(rec.scores, dtype=float)
        new_scores = combine_scores(sims, rec_norm, cfg.lambda_, cfg.mode)
        ids = rec.song_ids
        order = order_entries(ids, initial, new_scores)
        entries = tuple(
            ScoredEntry(ids[i], float(initial[i]), float(rec_norm[i]), float(sims[i]), float(new_scores[i]))
            for i in order
        )
        return RecommendationList(rec.user_id, rec.condition, entries, source)

    def rerank(
        self,
        rec: RecommendationList,
        cfg: RerankConfig,
        rec_norm: Optional[np.ndarray] = None,
        sims: Optional[np.ndarray] = None,
    ) -> RecommendationList:
        if rec_norm is None:
            rec_norm = self.normalized_scores([rec])[rec.key]
        if sims is None:
            sims = self.similarities(rec)
        source = f"{rec.source}+{cfg.model_kind.value}:{cfg.mode.value}:{cfg.lambda_:g}"
        return self._apply(rec, sims, rec_norm, cfg, source)

    def rerank_opposite(self, rec: RecommendationList, cfg: RerankConfig) -> RecommendationList:
        return self.rerank(rec, cfg.model_copy(update={"mode": RerankMode.OPPOSITE}))

    def sweep(
        self,
        lists: Sequence[RecommendationList],
        lambdas: Sequence[float] = default_lambda_grid(),
        mode: RerankMode = RerankMode.REGULAR,
        model_kind: ModelKind = ModelKind.PERSONALIZED,
    ) -> Dict[float, Tuple[RecommendationList, ...]]:
        configs = [RerankConfig(lambda_=lam, mode=mode, model_kind=model_kind) for lam in lambdas]
        normalized = self.normalized_scores(lists)
        results: Dict[float, List[RecommendationList]] = {cfg.lambda_: [] for cfg in configs}
        for rec in lists:
            sims = self.similarities(rec)
            for cfg in configs:
                results[cfg.lambda_].append(self.rerank(rec, cfg, normalized[rec.key], sims))
        logger.debug(f"Swept {len(lists)} lists over {len(configs)} λ values ({model_kind.value}, {mode.value})")
        return {lam: tuple(reranked) for lam, reranked in results.items()}


def rerank(
    rec: RecommendationList,
    model: PreferenceModel,
    catalog: FeatureCatalog,
    cfg: RerankConfig,
) -> RecommendationList:
    return ContextualReranker(catalog, model).rerank(rec, cfg)


def rerank_opposite(
    rec: RecommendationList,
    model: PreferenceModel,
    catalog: FeatureCatalog,
    cfg: RerankConfig,
) -> RecommendationList:
    return ContextualReranker(catalog, model).rerank_opposite(rec, cfg)


def sweep(
    lists: Sequence[RecommendationList],
    model: PreferenceModel,
    catalog: FeatureCatalog,
    lambdas: Sequence[float] = default_lambda_grid(),
    mode: RerankMode = RerankMode.REGULAR,
) -> Dict[float, Tuple[RecommendationList, ...]]:
    return ContextualReranker(catalog, model).sweep(lists, lambdas, mode)


def reranked_frame_rows(lists: Iterable[RecommendationList]) -> List[Mapping[str, object]]:
    """صفوف بصيغة القوائم الخارجية مع أعمدة التدقيق sim, rec_norm, new_score."""
    rows = []
    for rec in lists:
        for rank, entry in enumerate(rec.entries, start=1):
            rows.append(
                {
                    "user_id": rec.user_id,
                    "condition": rec.condition.name,
                    "rank": rank,
                    "song_id": entry.song_id,
                    "score": entry.score,
                    "sim": getattr(entry, "sim", None),
                    "rec_norm": getattr(entry, "normalized_rec", None),
                    "new_score": getattr(entry, "new_score", None),
                }
            )
    return rows
