# ingestion/dataset.py
"""
البنى الأساسية للبيانات: الأغاني، أحداث الاستماع، كتالوج الخصائص،
مجموعة البيانات، ومدونات قوائم التشغيل.
"""
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any, Dict, FrozenSet, Iterable, Mapping, Sequence, Tuple

import numpy as np
import pandas as pd

from core.context import ContextCondition, ContextDimension
from core.errors import UnknownSongError
from core.feature_space import FEATURE_NAMES, N_FEATURES, AudioFeatureVector


@dataclass(frozen=True)
class Song:
    song_id: str
    features: AudioFeatureVector


@dataclass(frozen=True)
class ListeningEvent:
    user_id: str
    song_id: str
    timestamp: datetime
    condition: ContextCondition


@dataclass
class FeatureCatalog:
    """كتالوج song_id -> Song مع مصفوفة خصائص مرتبة تصاعديًا حسب المعرّف."""
    songs: Dict[str, Song]
    duplicate_count: int = 0
    clamp_counts: Dict[str, int] = field(default_factory=dict)
    rejected_rows: int = 0
    _ids: Tuple[str, ...] = field(init=False, repr=False)
    _rows: Dict[str, int] = field(init=False, repr=False)
    _matrix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self._ids = tuple(sorted(self.songs))
        self._rows = {song_id: i for i, song_id in enumerate(self._ids)}
        if self._ids:
            self._matrix = np.vstack([self.songs[s].features.as_array() for s in self._ids])
        else:
            self._matrix = np.empty((0, N_FEATURES))
        self._matrix.setflags(write=False)

    def __len__(self) -> int:
        return len(self.songs)

    def __contains__(self, song_id: object) -> bool:
        return song_id in self.songs

    @property
    def song_ids(self) -> Tuple[str, ...]:
        return self._ids

    def vector(self, song_id: str) -> AudioFeatureVector:
        try:
            return self.songs[song_id].features
        except KeyError:
            raise UnknownSongError(song_id, "feature catalog") from None

    def matrix(self, song_ids: Sequence[str]) -> np.ndarray:
        """صف خصائص لكل معرّف، بنفس ترتيب المدخلات."""
        try:
            rows = [self._rows[s] for s in song_ids]
        except KeyError as missing:
            raise UnknownSongError(str(missing.args[0]), "feature catalog") from None
        return self._matrix[rows] if rows else np.empty((0, N_FEATURES))

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self._matrix, columns=list(FEATURE_NAMES))
        frame.insert(0, "song_id", list(self._ids))
        return frame


@dataclass(frozen=True)
class Dataset:
    """أحداث استماع إيجابية (تغذية راجعة ضمنية) مربوطة بالكتالوج."""
    events: Tuple[ListeningEvent, ...]
    catalog: FeatureCatalog
    dimension: ContextDimension
    provenance: Mapping[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.events)

    @property
    def users(self) -> FrozenSet[str]:
        return frozenset(e.user_id for e in self.events)

    @property
    def songs(self) -> FrozenSet[str]:
        return frozenset(e.song_id for e in self.events)

    def song_play_counts(self) -> Counter:
        return Counter(e.song_id for e in self.events)

    def user_event_counts(self) -> Counter:
        return Counter(e.user_id for e in self.events)

    def user_items(self) -> Dict[str, FrozenSet[str]]:
        items: Dict[str, set] = {}
        for e in self.events:
            items.setdefault(e.user_id, set()).add(e.song_id)
        return {u: frozenset(s) for u, s in items.items()}

    def with_events(self, events: Iterable[ListeningEvent], **provenance_updates: Any) -> "Dataset":
        provenance = dict(self.provenance)
        provenance.update(provenance_updates)
        return Dataset(tuple(events), self.catalog, self.dimension, provenance)

    def feature_matrix(self) -> np.ndarray:
        return self.catalog.matrix([e.song_id for e in self.events])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "user_id": [e.user_id for e in self.events],
                "song_id": [e.song_id for e in self.events],
                "timestamp_local_iso8601": [e.timestamp.isoformat() for e in self.events],
                "condition": [e.condition.name for e in self.events],
            }
        )


@dataclass(frozen=True)
class PlaylistCorpus:
    condition: ContextCondition
    songs: Tuple[Song, ...]
    playlist_followers: Mapping[str, int] = field(default_factory=dict)
    unresolved_count: int = 0
    duplicate_songs: int = 0

    # بروتوكول الجمع: 500 أغنية على الأقل من 4 قوائم تشغيل على الأقل
    MIN_SONGS = 500
    MIN_PLAYLISTS = 4

    @property
    def playlist_count(self) -> int:
        return len(self.playlist_followers)

    @property
    def meets_protocol(self) -> bool:
        return len(self.songs) >= self.MIN_SONGS and self.playlist_count >= self.MIN_PLAYLISTS

    def feature_matrix(self) -> np.ndarray:
        if not self.songs:
            return np.empty((0, N_FEATURES))
        return np.vstack([s.features.as_array() for s in self.songs])

    def metadata(self) -> Dict[str, Any]:
        return {
            "condition": self.condition.name,
            "dimension": self.condition.dimension,
            "songs": len(self.songs),
            "playlists": self.playlist_count,
            "min_followers": min(self.playlist_followers.values()) if self.playlist_followers else None,
            "unresolved": self.unresolved_count,
            "meets_protocol": self.meets_protocol,
        }
