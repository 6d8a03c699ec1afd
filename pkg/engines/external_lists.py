# engines/external_lists.py
"""
محمّل قوائم التوصية المولّدة خارجيًا (مثل مخرجات CARSKit / CAMF_ICS)
بصيغة: user_id, condition, rank, song_id, score
"""
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from core.context import ContextCondition, ContextDimension
from core.errors import RemixValidationError, RowError
from engines.recommendation_list import ListEntry, RecommendationList, sort_entries
from ingestion.dataset import FeatureCatalog
from ingestion.ingestion_engine import ingestion_engine

logger = logging.getLogger("ExternalLists")

LIST_COLUMNS = ("user_id", "condition", "rank", "song_id", "score")


@dataclass(frozen=True)
class LoadedLists:
    lists: Tuple[RecommendationList, ...]
    resorted_count: int = 0
    dropped_count: int = 0
    duplicate_count: int = 0

    def by_key(self) -> Dict[Tuple[str, ContextCondition], RecommendationList]:
        return {rec.key: rec for rec in self.lists}

    def __len__(self) -> int:
        return len(self.lists)


def _is_descending(entries: List[ListEntry]) -> bool:
    return all(a.score >= b.score for a, b in zip(entries, entries[1:]))


def load_external_lists(
    path: Union[str, Path],
    catalog: FeatureCatalog,
    dimension: ContextDimension,
    source: Optional[str] = None,
) -> LoadedLists:
    """
    يحمّل القوائم ويرتب عناصر كل قائمة حسب عمود rank. القائمة التي لا تكون
    درجاتها تنازلية تُعاد فرزها مع تحذير؛ الأغاني غير الموجودة في الكتالوج
    تُسقط وتُحصى.
    """
    path = Path(path)
    source = source or path.stem
    frame = ingestion_engine.read_table(path, LIST_COLUMNS)

    grouped: Dict[Tuple[str, ContextCondition], List[Tuple[int, ListEntry]]] = {}
    seen: Dict[Tuple[str, ContextCondition], set] = {}
    dropped = 0
    duplicates = 0
    for line, record in ingestion_engine.iter_records(frame):
        try:
            user_id, song_id = record["user_id"], record["song_id"]
            if not user_id or not song_id:
                raise RemixValidationError("empty user_id or song_id")
            condition = dimension.condition(record["condition"])
            try:
                rank = int(record["rank"])
                score = float(record["score"])
            except ValueError:
                raise RemixValidationError(
                    f"rank {record['rank']!r} / score {record['score']!r} are not numeric"
                ) from None
            if not math.isfinite(score):
                raise RemixValidationError(f"score {score} is not finite")
        except RemixValidationError as e:
            raise RowError(path, line, str(e)) from e

        key = (user_id, condition)
        if song_id not in catalog:
            dropped += 1
            continue
        if song_id in seen.setdefault(key, set()):
            duplicates += 1
            continue
        seen[key].add(song_id)
        grouped.setdefault(key, []).append((rank, ListEntry(song_id, score)))

    lists = []
    resorted = 0
    for key in sorted(grouped):
        entries = [entry for _, entry in sorted(grouped[key], key=lambda item: item[0])]
        if not _is_descending(entries):
            resorted += 1
            entries = list(sort_entries(entries))
        lists.append(RecommendationList(key[0], key[1], tuple(entries), source))

    if resorted:
        logger.warning(f"External lists {path}: re-sorted {resorted} lists whose scores were not descending")
    if dropped:
        logger.warning(f"External lists {path}: dropped {dropped} entries referencing songs missing from the catalog")
    if duplicates:
        logger.warning(f"External lists {path}: skipped {duplicates} repeated songs within a list")
    logger.info(f"Loaded {len(lists)} external '{source}' lists from {path}")
    return LoadedLists(tuple(lists), resorted, dropped, duplicates)
