# ingestion/dataset_filter.py
import logging
from typing import Set

from ingestion.dataset import Dataset

logger = logging.getLogger("DatasetFilter")


def _single_pass(d: Dataset, min_song_plays: int, min_user_events: int):
    song_counts = d.song_play_counts()
    removed_songs = {s for s, n in song_counts.items() if n < min_song_plays}
    kept = [e for e in d.events if e.song_id not in removed_songs]

    user_counts = {}
    for e in kept:
        user_counts[e.user_id] = user_counts.get(e.user_id, 0) + 1
    removed_users = {u for u, n in user_counts.items() if n < min_user_events}
    # المستخدمون الذين فقدوا كل أحداثهم مع الأغاني المحذوفة
    removed_users |= d.users - set(user_counts)
    kept = [e for e in kept if e.user_id not in removed_users]
    return kept, removed_songs, removed_users


def filter_dataset(
    d: Dataset,
    min_song_plays: int,
    min_user_events: int,
    iterate_to_fixpoint: bool = False,
) -> Dataset:
    """
    يحذف الأغاني الأقل استماعًا أولًا، ثم المستخدمين الأقل نشاطًا، في تمريرة
    واحدة. مع iterate_to_fixpoint تتكرر التمريرات حتى الاستقرار.
    """
    if min_song_plays < 0 or min_user_events < 0:
        raise ValueError("filter thresholds must be >= 0")

    events = d
    removed_songs: Set[str] = set()
    removed_users: Set[str] = set()
    passes = 0
    while True:
        kept, songs_out, users_out = _single_pass(events, min_song_plays, min_user_events)
        passes += 1
        removed_songs |= songs_out
        removed_users |= users_out
        changed = len(kept) != len(events.events)
        events = events.with_events(kept)
        if not iterate_to_fixpoint or not changed:
            break

    result = events.with_events(
        events.events,
        filter={
            "min_song_plays": min_song_plays,
            "min_user_events": min_user_events,
            "iterate_to_fixpoint": iterate_to_fixpoint,
            "passes": passes,
            "removed_songs": sorted(removed_songs),
            "removed_users": sorted(removed_users),
            "events_before": len(d.events),
            "events_after": len(events.events),
            "songs_after": len(events.songs),
            "users_after": len(events.users),
        },
    )
    if not result.events:
        logger.warning(
            f"Filtering with min_song_plays={min_song_plays}, min_user_events={min_user_events} left no events"
        )
    logger.info(
        f"Filtered dataset: {len(result.events)} events, {len(result.songs)} songs, "
        f"{len(result.users)} users ({passes} pass(es))"
    )
    return result
