# tests/conftest.py
from datetime import datetime
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np
import pytest

from core.context import TIME_OF_DAY_DIMENSION, ContextDimension
from core.feature_space import FEATURE_NAMES, N_FEATURES, AudioFeatureVector
from ingestion.dataset import Dataset, FeatureCatalog, ListeningEvent, Song

# ساعة ممثلة لكل حالة من حالات وقت اليوم
CONDITION_HOURS = {"night": 2, "morning": 8, "afternoon": 14, "evening": 20}


def catalog_from_vectors(vectors: Dict[str, Sequence[float]]) -> FeatureCatalog:
    return FeatureCatalog({sid: Song(sid, AudioFeatureVector(tuple(float(v) for v in vec))) for sid, vec in vectors.items()})


def dataset_from_triples(
    triples: Iterable[Tuple[str, str, str]],
    catalog: FeatureCatalog,
    dimension: ContextDimension = TIME_OF_DAY_DIMENSION,
) -> Dataset:
    events = []
    for index, (user_id, song_id, condition) in enumerate(triples):
        hour = CONDITION_HOURS.get(condition, 0)
        stamp = datetime(2024, 1, 1 + index % 28, hour, index % 60)
        events.append(ListeningEvent(user_id, song_id, stamp, dimension.condition(condition)))
    return Dataset(tuple(events), catalog, dimension)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[object]]) -> Path:
    lines = [",".join(header)] + [",".join(str(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def make_catalog():
    return catalog_from_vectors


@pytest.fixture
def make_dataset():
    return dataset_from_triples


@pytest.fixture
def csv_writer():
    return write_csv


@pytest.fixture
def random_catalog():
    """كتالوج من 30 أغنية بخصائص عشوائية ثابتة البذرة."""
    rng = np.random.default_rng(3)
    return catalog_from_vectors({f"s{i:02d}": rng.uniform(0.0, 1.0, N_FEATURES) for i in range(30)})


@pytest.fixture
def raw_catalog_rows() -> List[List[object]]:
    header = ["song_id"] + list(FEATURE_NAMES)
    rows = [
        ["a", 0.1, 0.2, 0.3, 0.0, 0.1, -20.0, 0.05, 0.5, 110.0],
        ["b", 0.9, 0.8, 0.7, 0.5, 0.2, -40.0, 0.10, 0.4, 220.0],
        ["c", 0.5, 0.5, 0.5, 0.5, 0.5, 0.0, 0.50, 0.5, 0.0],
    ]
    return [header] + rows
