# ingestion/ingestion_engine.py (V3 - Listening Data)
"""
Listening Data Ingestion Engine
محرك استيعاب ملفات البيانات المحددة بفواصل: كتالوج الخصائص الصوتية،
أحداث الاستماع، ومدونات قوائم التشغيل لكل حالة سياقية.
"""
import logging
import re
from collections import Counter, OrderedDict
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import pandas as pd

from core.context import ContextCondition, ContextDimension
from core.errors import EmptyCorpusError, RemixValidationError, RowError, SchemaError
from core.feature_space import FEATURE_NAMES, FeatureNormalizer
from ingestion.dataset import Dataset, FeatureCatalog, ListeningEvent, PlaylistCorpus, Song

logger = logging.getLogger("IngestionEngine")

PathLike = Union[str, Path]

CATALOG_ID_COLUMN = "song_id"
EVENT_COLUMNS = ("user_id", "song_id", "timestamp_local_iso8601")
PLAYLIST_COLUMNS = ("condition", "playlist_id", "followers", "song_id")
_PARSER_LINE = re.compile(r"Expected \d+ fields in line (\d+), saw \d+")


def parse_local_timestamp(raw: str) -> datetime:
    """الوقت يُؤخذ كما هو (ساعة محلية)، بلا أي تحويل للمنطقة الزمنية."""
    return datetime.fromisoformat(raw.strip().replace("Z", "+00:00"))


class ListeningDataIngestionEngine:
    """
    محرك الاستيعاب (V3).
    كل دالة تحميل تتحقق من الترويسة أولًا ثم من كل سطر على حدة؛ في الوضع
    الافتراضي يتوقف التحميل عند أول سطر غير صالح مع رقم السطر.
    """

    def __init__(self, delimiter: str = ","):
        self.delimiter = delimiter
        logger.info("✅ Listening Data Ingestion Engine (V3) Initialized.")

    # --- أدوات مشتركة ---

    def read_table(self, path: PathLike, required: Sequence[str], fail_fast: bool = True) -> pd.DataFrame:
        """
        يقرأ الملف كنصوص. السطر ذو الحقول الزائدة يرفع RowError، أو يُتخطى ويُحصى
        في frame.attrs["skipped_rows"] عندما fail_fast=False.
        """
        path = Path(path)
        skipped: List[List[str]] = []
        options = dict(sep=self.delimiter, dtype=str, keep_default_na=False, skipinitialspace=True, encoding="utf-8")
        if not fail_fast:

            def skip(fields: List[str]) -> None:
                skipped.append(fields)

            options.update(engine="python", on_bad_lines=skip)
        try:
            frame = pd.read_csv(path, **options)
        except pd.errors.EmptyDataError:
            raise SchemaError(f"{path}: file is empty, a header row is required") from None
        except pd.errors.ParserError as e:
            match = _PARSER_LINE.search(str(e))
            if match is None:
                raise SchemaError(f"{path}: malformed delimited text ({str(e).strip()})") from None
            raise RowError(path, int(match.group(1)), match.group(0)) from None
        except UnicodeDecodeError as e:
            raise SchemaError(f"{path}: not valid UTF-8 text (byte offset {e.start})") from None
        frame.attrs["skipped_rows"] = len(skipped)
        if skipped:
            logger.warning(f"{path}: skipped {len(skipped)} rows with the wrong number of fields")
        frame.columns = [str(c).strip() for c in frame.columns]
        missing = [c for c in required if c not in frame.columns]
        if missing:
            raise SchemaError(f"{path}: missing columns {missing}")
        return frame

    @staticmethod
    def iter_records(frame: pd.DataFrame):
        # رقم السطر في الملف: +1 للترويسة و+1 للبدء من واحد
        for index, record in enumerate(frame.to_dict("records")):
            yield index + 2, {k: (v.strip() if isinstance(v, str) else v) for k, v in record.items()}

    # --- كتالوج الخصائص ---

    def load_feature_catalog(self, path: PathLike, normalized: bool = False, fail_fast: bool = True) -> FeatureCatalog:
        """
        يحمّل كتالوج الخصائص الصوتية. القيم الخام للإيقاع والجهارة تُطبَّع،
        والمعرّف المكرر يأخذ آخر ظهور له.
        """
        frame = self.read_table(path, (CATALOG_ID_COLUMN,) + FEATURE_NAMES, fail_fast)
        normalizer = FeatureNormalizer(pre_normalized=normalized)
        songs: Dict[str, Song] = {}
        duplicates = 0
        rejected = frame.attrs["skipped_rows"]
        for line, record in self.iter_records(frame):
            song_id = record[CATALOG_ID_COLUMN]
            try:
                if not song_id:
                    raise RemixValidationError("empty song_id")
                vector = normalizer.normalize_row(record)
            except RemixValidationError as e:
                if fail_fast:
                    raise RowError(path, line, str(e)) from e
                rejected += 1
                continue
            if song_id in songs:
                duplicates += 1
            songs[song_id] = Song(song_id, vector)

        if duplicates:
            logger.warning(f"Catalog {path}: {duplicates} duplicate song ids (last occurrence kept)")
        if normalizer.total_clamped:
            logger.warning(f"Catalog {path}: clamped out-of-range values {dict(normalizer.clamp_counts)}")
        if rejected:
            logger.warning(f"Catalog {path}: skipped {rejected} unparseable rows")
        logger.info(f"Loaded feature catalog with {len(songs)} songs from {path}")
        return FeatureCatalog(
            songs=songs,
            duplicate_count=duplicates,
            clamp_counts=dict(normalizer.clamp_counts),
            rejected_rows=rejected,
        )

    # --- أحداث الاستماع ---

    def load_events(
        self,
        path: PathLike,
        catalog: FeatureCatalog,
        dimension: ContextDimension,
        fail_fast: bool = True,
    ) -> Dataset:
        """
        يحمّل أحداث الاستماع ويربطها بالكتالوج. الأحداث التي تشير إلى أغنية
        غير معروفة تُسقط وتُحصى؛ الحالة السياقية تُشتق من الساعة المحلية، أو
        تُقرأ من عمود يحمل اسم البعد إذا لم يكن البعد زمنيًا.
        """
        condition_column = None
        required = list(EVENT_COLUMNS)
        if not dimension.derived_from_hour:
            condition_column = dimension.name
            required.append(condition_column)
        frame = self.read_table(path, required, fail_fast)

        events: List[ListeningEvent] = []
        dropped_unknown = 0
        rejected = frame.attrs["skipped_rows"]
        for line, record in self.iter_records(frame):
            try:
                user_id, song_id = record["user_id"], record["song_id"]
                if not user_id or not song_id:
                    raise RemixValidationError("empty user_id or song_id")
                try:
                    timestamp = parse_local_timestamp(record["timestamp_local_iso8601"])
                except ValueError:
                    raise RemixValidationError(
                        f"malformed timestamp {record['timestamp_local_iso8601']!r}"
                    ) from None
                if condition_column is None:
                    condition = dimension.condition_for_hour(timestamp.hour)
                else:
                    condition = dimension.condition(record[condition_column])
            except RemixValidationError as e:
                if fail_fast:
                    raise RowError(path, line, str(e)) from e
                rejected += 1
                continue
            if song_id not in catalog:
                dropped_unknown += 1
                continue
            events.append(ListeningEvent(user_id, song_id, timestamp, condition))

        if dropped_unknown:
            logger.warning(f"Events {path}: dropped {dropped_unknown} events referencing unknown songs")
        if rejected:
            logger.warning(f"Events {path}: skipped {rejected} unparseable rows")
        provenance = {
            "source": str(path),
            "input_rows": len(frame) + frame.attrs["skipped_rows"],
            "dropped_unknown_songs": dropped_unknown,
            "rejected_rows": rejected,
            "events": len(events),
        }
        logger.info(f"Loaded {len(events)} listening events from {path}")
        return Dataset(tuple(events), catalog, dimension, provenance)

    # --- مدونات قوائم التشغيل ---

    def _resolve_condition(self, name: str, dimensions: Sequence[ContextDimension], dimension_hint: str) -> ContextCondition:
        if dimension_hint:
            for dimension in dimensions:
                if dimension.name == dimension_hint:
                    return dimension.condition(name)
            raise SchemaError(f"unknown dimension '{dimension_hint}'")
        matches = [d for d in dimensions if name in d.conditions]
        if not matches:
            raise SchemaError(f"unknown condition '{name}'")
        if len(matches) > 1:
            raise SchemaError(
                f"condition '{name}' is declared by several dimensions {[d.name for d in matches]}; "
                "add a 'dimension' column"
            )
        return matches[0].condition(name)

    def load_playlist_corpus(
        self,
        path: PathLike,
        catalog: FeatureCatalog,
        dimensions: Sequence[ContextDimension],
    ) -> Dict[ContextCondition, PlaylistCorpus]:
        """
        يحمّل مدونة الأغاني الممثلة لكل حالة سياقية (من قوائم تشغيل عامة).
        الترتيب الناتج: ترتيب الأبعاد ثم ترتيب الحالات داخل كل بعد.
        """
        frame = self.read_table(path, PLAYLIST_COLUMNS)
        has_dimension = "dimension" in frame.columns

        song_ids: Dict[ContextCondition, "OrderedDict[str, None]"] = {}
        followers: Dict[ContextCondition, Dict[str, int]] = {}
        unresolved: Counter = Counter()
        duplicates: Counter = Counter()
        for line, record in self.iter_records(frame):
            try:
                condition = self._resolve_condition(
                    record["condition"], dimensions, record.get("dimension", "") if has_dimension else ""
                )
            except SchemaError as e:
                raise SchemaError(f"{path}:{line}: {e}") from e
            try:
                follower_count = int(record["followers"]) if record["followers"] else 0
            except ValueError:
                raise RowError(path, line, f"followers {record['followers']!r} is not an integer") from None

            followers.setdefault(condition, {})
            playlist_id = record["playlist_id"]
            followers[condition][playlist_id] = max(follower_count, followers[condition].get(playlist_id, 0))
            ids = song_ids.setdefault(condition, OrderedDict())
            song_id = record["song_id"]
            if song_id not in catalog:
                unresolved[condition] += 1
            elif song_id in ids:
                duplicates[condition] += 1
            else:
                ids[song_id] = None

        ordered = [c for d in dimensions for c in d.all_conditions() if c in song_ids]
        corpora: Dict[ContextCondition, PlaylistCorpus] = {}
        for condition in ordered:
            if not song_ids[condition]:
                raise EmptyCorpusError(condition.name)
            corpus = PlaylistCorpus(
                condition=condition,
                songs=tuple(catalog.songs[s] for s in song_ids[condition]),
                playlist_followers=dict(followers[condition]),
                unresolved_count=unresolved[condition],
                duplicate_songs=duplicates[condition],
            )
            if corpus.unresolved_count:
                logger.warning(f"Corpus '{condition.name}': dropped {corpus.unresolved_count} unresolved song ids")
            if not corpus.meets_protocol:
                logger.info(
                    f"Corpus '{condition.name}' has {len(corpus.songs)} songs from {corpus.playlist_count} playlists "
                    f"(collection protocol asks for >= {PlaylistCorpus.MIN_SONGS} songs from >= {PlaylistCorpus.MIN_PLAYLISTS})"
                )
            corpora[condition] = corpus
        logger.info(f"Loaded {len(corpora)} playlist corpora from {path}")
        return corpora


# إنشاء مثيل وحيد من المحرك
ingestion_engine = ListeningDataIngestionEngine()
