# stages/fold_artifacts.py
"""
مخرجات كل طية على القرص وفي الذاكرة:
    folds/fold_<i>/train.csv, test.csv, preference_model.csv, lists_<algorithm>.csv
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import pandas as pd

from core.context import ContextCondition, ContextDimension
from core.errors import ConfigurationError
from engines.external_lists import load_external_lists
from engines.preference_models import PersonalizedModel, load_model_dump
from engines.recommendation_list import RecommendationList
from ingestion.dataset import Dataset, FeatureCatalog
from ingestion.ingestion_engine import ingestion_engine

logger = logging.getLogger("FoldArtifacts")

ListKey = Tuple[str, ContextCondition]
ListFamily = Dict[ListKey, RecommendationList]


@dataclass
class FoldArtifacts:
    fold_index: int
    train: Dataset
    test: Dataset
    model: Optional[PersonalizedModel] = None
    lists: Dict[str, ListFamily] = field(default_factory=dict)


def fold_dir(output_dir: Path, fold_index: int) -> Path:
    return Path(output_dir) / "folds" / f"fold_{fold_index}"


def lists_path(output_dir: Path, fold_index: int, algorithm: str) -> Path:
    return fold_dir(output_dir, fold_index) / f"lists_{algorithm}.csv"


def model_path(output_dir: Path, fold_index: int) -> Path:
    return fold_dir(output_dir, fold_index) / "preference_model.csv"


def events_frame(d: Dataset) -> pd.DataFrame:
    """صيغة ملف الأحداث؛ البعد غير الزمني يُكتب في عمود يحمل اسمه."""
    frame = d.to_frame()
    if not d.dimension.derived_from_hour:
        frame[d.dimension.name] = frame["condition"]
    return frame


def write_events(d: Dataset, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    events_frame(d).to_csv(path, index=False, lineterminator="\n")
    return path


def load_fold_datasets(
    output_dir: Path, n_folds: int, catalog: FeatureCatalog, dimension: ContextDimension
) -> List[FoldArtifacts]:
    folds = []
    for index in range(n_folds):
        directory = fold_dir(output_dir, index)
        train_file, test_file = directory / "train.csv", directory / "test.csv"
        if not (train_file.exists() and test_file.exists()):
            raise ConfigurationError(f"fold {index} is not prepared under {directory}; run 'prepare' first")
        folds.append(
            FoldArtifacts(
                index,
                ingestion_engine.load_events(train_file, catalog, dimension),
                ingestion_engine.load_events(test_file, catalog, dimension),
            )
        )
    return folds


def load_fold_model(output_dir: Path, fold: FoldArtifacts, dimension: ContextDimension) -> PersonalizedModel:
    path = model_path(output_dir, fold.fold_index)
    if not path.exists():
        raise ConfigurationError(f"no preference model for fold {fold.fold_index} at {path}; run 'train' first")
    return load_model_dump(path, dimension)


def load_fold_lists(
    path: Path, catalog: FeatureCatalog, dimension: ContextDimension, algorithm: str
) -> ListFamily:
    if not Path(path).exists():
        raise ConfigurationError(f"no '{algorithm}' lists at {path}; run 'train' first")
    return load_external_lists(path, catalog, dimension, source=algorithm).by_key()
