# tools/synthetic_data.py
"""
مولّد بيانات اصطناعية يكون فيها السياق محددًا للتفضيل: كل مستخدم يستمع في
كل فترة من اليوم إلى أغانٍ من عنقود خصائص صوتية خاص به في تلك الفترة.
يُستخدم للعروض ولاختبار الاتجاه العام (التخصيص يحسن الترتيب، والمعاكس يضره).
"""
import json
import logging
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from core.context import DEFAULT_HOUR_STARTS, TIME_OF_DAY, TIME_OF_DAY_CONDITIONS
from core.feature_space import FEATURE_NAMES, LOUDNESS_FLOOR_DB, TEMPO_MAX_BPM, AudioFeature

logger = logging.getLogger("SyntheticData")

LOW, HIGH = 0.25, 0.75
# قناع ثلاثي البتات لكل خاصية؛ أي عنقودين مختلفين يختلفان في 4 خصائص على الأقل
_PARITY_MASKS = (1, 2, 3, 4, 5, 6, 7, 1, 2)


class FixtureSpec(BaseModel):
    n_users: int = Field(default=40, ge=1)
    n_clusters: int = Field(default=8, ge=4, le=8)
    songs_per_cluster: int = Field(default=50, ge=2)
    events_per_pair: int = Field(default=30, ge=1)
    noise_sd: float = Field(default=0.05, ge=0.0)
    playlists_per_condition: int = Field(default=4, ge=1)
    playlist_length: int = Field(default=25, ge=1)
    seed: int = 7


@dataclass
class SyntheticFixture:
    catalog: pd.DataFrame
    events: pd.DataFrame
    playlists: pd.DataFrame
    user_clusters: Dict[str, Dict[str, int]]


def cluster_centers(n_clusters: int = 8) -> np.ndarray:
    centers = np.empty((n_clusters, len(FEATURE_NAMES)))
    for cluster in range(n_clusters):
        for index, mask in enumerate(_PARITY_MASKS):
            centers[cluster, index] = HIGH if bin(cluster & mask).count("1") % 2 else LOW
    return centers


def _raw_catalog(features: np.ndarray, song_ids: List[str]) -> pd.DataFrame:
    frame = pd.DataFrame(features, columns=list(FEATURE_NAMES))
    frame[AudioFeature.TEMPO.value] = frame[AudioFeature.TEMPO.value] * TEMPO_MAX_BPM
    frame[AudioFeature.LOUDNESS.value] = frame[AudioFeature.LOUDNESS.value] * -LOUDNESS_FLOOR_DB + LOUDNESS_FLOOR_DB
    frame.insert(0, "song_id", song_ids)
    return frame


def generate_directional_fixture(spec: Optional[FixtureSpec] = None) -> SyntheticFixture:
    spec = spec or FixtureSpec()
    rng = np.random.default_rng(spec.seed)
    centers = cluster_centers(spec.n_clusters)

    song_ids = [f"s{index:04d}" for index in range(spec.n_clusters * spec.songs_per_cluster)]
    song_cluster = np.repeat(np.arange(spec.n_clusters), spec.songs_per_cluster)
    noise = rng.normal(0.0, spec.noise_sd, size=(len(song_ids), len(FEATURE_NAMES)))
    features = np.clip(centers[song_cluster] + noise, 0.0, 1.0)
    catalog = _raw_catalog(features, song_ids)

    base_day = datetime(2024, 1, 1)
    events = []
    user_clusters: Dict[str, Dict[str, int]] = {}
    for user_index in range(spec.n_users):
        user_id = f"u{user_index:03d}"
        chosen = rng.choice(spec.n_clusters, size=len(TIME_OF_DAY_CONDITIONS), replace=False)
        user_clusters[user_id] = {c: int(k) for c, k in zip(TIME_OF_DAY_CONDITIONS, chosen)}
        for condition, cluster in zip(TIME_OF_DAY_CONDITIONS, chosen):
            members = np.flatnonzero(song_cluster == cluster)
            picks = rng.choice(members, size=min(spec.events_per_pair, len(members)), replace=False)
            for song_index in picks:
                hour = DEFAULT_HOUR_STARTS[condition] + int(rng.integers(0, 6))
                stamp = base_day + timedelta(days=int(rng.integers(0, 60)), hours=hour, minutes=int(rng.integers(0, 60)))
                events.append((user_id, song_ids[song_index], stamp.isoformat()))
    events_frame = pd.DataFrame(events, columns=["user_id", "song_id", "timestamp_local_iso8601"])

    playlists = []
    for offset, condition in enumerate(TIME_OF_DAY_CONDITIONS):
        clusters = [(2 * offset) % spec.n_clusters, (2 * offset + 1) % spec.n_clusters]
        members = np.flatnonzero(np.isin(song_cluster, clusters))
        for playlist in range(spec.playlists_per_condition):
            playlist_id = f"{condition}-pl{playlist}"
            followers = int(rng.integers(1_000, 100_000))
            for song_index in rng.choice(members, size=min(spec.playlist_length, len(members)), replace=False):
                playlists.append((condition, playlist_id, followers, song_ids[song_index]))
    playlists_frame = pd.DataFrame(playlists, columns=["condition", "playlist_id", "followers", "song_id"])

    logger.info(
        f"Generated synthetic fixture: {len(song_ids)} songs, {spec.n_users} users, {len(events_frame)} events"
    )
    return SyntheticFixture(catalog, events_frame, playlists_frame, user_clusters)


def write_directional_fixture(
    directory: Union[str, Path],
    spec: Optional[FixtureSpec] = None,
    config_overrides: Optional[Dict[str, object]] = None,
) -> Path:
    """يكتب الكتالوج والأحداث ومدونة قوائم التشغيل وملف إعدادات جاهز للتشغيل."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    fixture = generate_directional_fixture(spec)
    fixture.catalog.to_csv(directory / "catalog.csv", index=False, float_format="%.10f", lineterminator="\n")
    fixture.events.to_csv(directory / "events.csv", index=False, lineterminator="\n")
    fixture.playlists.to_csv(directory / "playlists.csv", index=False, lineterminator="\n")

    config: Dict[str, object] = {
        "dataset": {"catalog": "catalog.csv", "events": "events.csv", "normalized": False},
        "context": {"name": TIME_OF_DAY},
        "filter": {"min_song_plays": 0, "min_user_events": 0},
        "recommenders": {"algorithms": ["bpr"], "bpr": {"epochs": 50}},
        "evaluation": {"folds": 5, "list_sizes": [50], "k_values": [10]},
        "analysis": {"playlists": "playlists.csv"},
        "seed": 42,
        "output_dir": "output",
    }
    config.update(config_overrides or {})
    path = directory / "config.json"
    path.write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")
    logger.info(f"✅ Synthetic fixture written to {directory}")
    return path
