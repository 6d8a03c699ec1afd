# engines/recommendation_list.py
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Tuple, Union

from core.context import ContextCondition


class ListEntry(NamedTuple):
    song_id: str
    score: float


class ScoredEntry(NamedTuple):
    """عنصر بعد إعادة الترتيب مع حقول التدقيق."""
    song_id: str
    initial_score: float
    normalized_rec: float
    sim: float
    new_score: float

    @property
    def score(self) -> float:
        return self.new_score


Entry = Union[ListEntry, ScoredEntry]


@dataclass(frozen=True)
class RecommendationList:
    """
    قائمة توصيات مرتبة تنازليًا حسب الدرجة لزوج (مستخدم، حالة).
    الدرجات غير متزايدة والمعرّفات فريدة.
    """
    user_id: str
    condition: ContextCondition
    entries: Tuple[Entry, ...]
    source: str

    def __post_init__(self):
        seen = set()
        previous = None
        for entry in self.entries:
            if entry.song_id in seen:
                raise ValueError(f"duplicate song '{entry.song_id}' in list for ({self.user_id}, {self.condition.name})")
            seen.add(entry.song_id)
            if previous is not None and entry.score > previous:
                raise ValueError(f"scores are not descending in list for ({self.user_id}, {self.condition.name})")
            previous = entry.score

    @property
    def key(self) -> Tuple[str, ContextCondition]:
        return (self.user_id, self.condition)

    @property
    def song_ids(self) -> Tuple[str, ...]:
        return tuple(e.song_id for e in self.entries)

    @property
    def scores(self) -> Tuple[float, ...]:
        return tuple(e.score for e in self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def top(self, n: int, source: Optional[str] = None) -> "RecommendationList":
        return RecommendationList(self.user_id, self.condition, self.entries[:n], source or self.source)


def sort_entries(entries: Sequence[ListEntry]) -> Tuple[ListEntry, ...]:
    """ترتيب تنازلي حسب الدرجة، والتعادل يُكسر بالمعرّف تصاعديًا."""
    return tuple(sorted(entries, key=lambda e: (-e.score, e.song_id)))
