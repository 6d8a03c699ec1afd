# engines/user_splitting.py
"""
UserSplitting-BPR: ما قبل الترشيح السياقي.
كل مستخدم يُقسم إلى ملفات فرعية افتراضية، واحد لكل حالة سياقية استمع فيها،
ثم يُدرب BPR على المستخدمين الافتراضيين.
"""
import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Tuple

from core.context import ContextCondition, ContextDimension
from core.errors import ModelMismatchError, SchemaError
from engines.bpr_engine import BprHyperparameters, BprModel, recommend_top_n, train_bpr
from engines.recommendation_list import RecommendationList
from ingestion.dataset import Dataset

logger = logging.getLogger("UserSplitting")

VIRTUAL_SEPARATOR = "@"


def virtual_id(user_id: str, condition: ContextCondition) -> str:
    return f"{user_id}{VIRTUAL_SEPARATOR}{condition.name}"


@dataclass
class VirtualUserMap:
    """تقابل بين أزواج (مستخدم، حالة) والمعرّفات الافتراضية."""
    forward: Dict[Tuple[str, ContextCondition], str] = field(default_factory=dict)
    inverse: Dict[str, Tuple[str, ContextCondition]] = field(default_factory=dict)

    def add(self, user_id: str, condition: ContextCondition) -> str:
        key = (user_id, condition)
        existing = self.forward.get(key)
        if existing is not None:
            return existing
        vid = virtual_id(user_id, condition)
        if vid in self.inverse:
            other = self.inverse[vid]
            raise SchemaError(
                f"virtual user id '{vid}' is ambiguous between ({other[0]}, {other[1].name}) "
                f"and ({user_id}, {condition.name})"
            )
        self.forward[key] = vid
        self.inverse[vid] = key
        return vid

    def get(self, user_id: str, condition: ContextCondition) -> Optional[str]:
        return self.forward.get((user_id, condition))

    def original(self, vid: str) -> Tuple[str, ContextCondition]:
        return self.inverse[vid]

    def ordered_ids(self) -> List[str]:
        return [self.forward[key] for key in sorted(self.forward, key=lambda k: (k[0], k[1].name))]

    def profiles_of(self, user_id: str) -> Dict[ContextCondition, str]:
        return {c: v for (u, c), v in self.forward.items() if u == user_id}

    def __len__(self) -> int:
        return len(self.forward)


def user_split(train: Dataset, dimension: Optional[ContextDimension] = None) -> Tuple[Dataset, VirtualUserMap]:
    dimension = dimension or train.dimension
    foreign = {e.condition.dimension for e in train.events} - {dimension.name}
    if foreign:
        raise ModelMismatchError(f"cannot split users on '{dimension.name}': events carry {sorted(foreign)}")
    mapping = VirtualUserMap()
    events = tuple(replace(e, user_id=mapping.add(e.user_id, e.condition)) for e in train.events)
    logger.info(f"Split {len(train.users)} users into {len(mapping)} virtual users")
    return train.with_events(events, user_split={"virtual_users": len(mapping)}), mapping


@dataclass
class UserSplittingModel:
    bpr: BprModel
    mapping: VirtualUserMap
    support: Dict[str, int]

    def scoring_profile(self, user_id: str, condition: ContextCondition) -> Optional[str]:
        """
        الملف الافتراضي المستخدم للتقييم: ملف (المستخدم، الحالة) إن دُرّب، وإلا
        ملف المستخدم ذو الدعم الأكبر، وإلا None (ترتيب حسب الانحياز فقط).
        """
        vid = self.mapping.get(user_id, condition)
        if vid is not None and self.bpr.knows_user(vid):
            return vid
        candidates = [v for v in self.mapping.profiles_of(user_id).values() if self.bpr.knows_user(v)]
        if not candidates:
            return None
        return min(candidates, key=lambda v: (-self.support.get(v, 0), v))

    def recommend(
        self,
        user_id: str,
        condition: ContextCondition,
        n: int,
        exclude: Iterable[str] = (),
        source: str = "US-BPR",
    ) -> RecommendationList:
        profile = self.scoring_profile(user_id, condition)
        if profile is None:
            logger.debug(f"No trained profile for user '{user_id}'; bias-only ranking")
            profile = f"{user_id}{VIRTUAL_SEPARATOR}"
        return recommend_top_n(
            self.bpr, user_id, n, exclude=exclude, condition=condition, source=source, scoring_user=profile
        )


def train_user_splitting(
    train: Dataset, hyper: Optional[BprHyperparameters] = None, seed: int = 42
) -> UserSplittingModel:
    split, mapping = user_split(train)
    support = Counter(e.user_id for e in split.events)
    # ترتيب حسب (المستخدم الحقيقي، الحالة): مستخدم بحالة واحدة يأخذ نفس الصف كما في BPR العادي
    order = mapping.ordered_ids()
    return UserSplittingModel(train_bpr(split, hyper, seed, user_order=order), mapping, dict(support))
