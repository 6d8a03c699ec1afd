# engines/preference_models.py
"""
نماذج التفضيل السياقية: مركز (centroid) متجهات الخصائص الصوتية للأغاني
التي استُمع إليها في كل حالة سياقية، إما لكل المستخدمين (النموذج العام)
أو لكل مستخدم على حدة (النموذج الشخصي).
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Tuple, Union

import pandas as pd

from core.context import ContextCondition, ContextDimension
from core.errors import ModelMismatchError, NoTrainingSignalError, SchemaError, UnmodeledConditionError
from core.feature_space import FEATURE_NAMES, AudioFeatureVector
from ingestion.dataset import Dataset

logger = logging.getLogger("PreferenceModels")

GLOBAL_SCOPE = "GLOBAL"
DUMP_COLUMNS = ["scope", "condition"] + list(FEATURE_NAMES) + ["support"]


@dataclass(frozen=True)
class GlobalModel:
    dimension: ContextDimension
    vectors: Mapping[ContextCondition, AudioFeatureVector]
    support: Mapping[ContextCondition, int]

    def lookup(self, condition: ContextCondition) -> AudioFeatureVector:
        try:
            return self.vectors[condition]
        except KeyError:
            raise UnmodeledConditionError(condition.name) from None


@dataclass(frozen=True)
class PersonalizedModel:
    dimension: ContextDimension
    vectors: Mapping[Tuple[str, ContextCondition], AudioFeatureVector]
    support: Mapping[Tuple[str, ContextCondition], int]
    fallback: GlobalModel

    def lookup(self, user_id: Optional[str], condition: ContextCondition) -> AudioFeatureVector:
        # سلسلة الرجوع: المستخدم/الحالة ثم النموذج العام ثم خطأ
        if user_id is not None:
            vector = self.vectors.get((user_id, condition))
            if vector is not None:
                return vector
        try:
            return self.fallback.lookup(condition)
        except UnmodeledConditionError:
            raise UnmodeledConditionError(condition.name, user_id) from None


PreferenceModel = Union[GlobalModel, PersonalizedModel]


def _centroid_frame(train: Dataset, dimension: ContextDimension, by_user: bool) -> pd.DataFrame:
    foreign = {e.condition.dimension for e in train.events} - {dimension.name}
    if foreign:
        raise ModelMismatchError(f"training events carry conditions of dimensions {sorted(foreign)}, expected '{dimension.name}'")
    if not train.events:
        raise NoTrainingSignalError(f"no training signal for dimension '{dimension.name}'")
    frame = pd.DataFrame(train.feature_matrix(), columns=list(FEATURE_NAMES))
    frame["condition"] = [e.condition.name for e in train.events]
    keys = ["condition"]
    if by_user:
        frame["user_id"] = [e.user_id for e in train.events]
        keys = ["user_id", "condition"]
    grouped = frame.groupby(keys, sort=True)
    centroids = grouped[list(FEATURE_NAMES)].mean()
    centroids["support"] = grouped.size()
    return centroids


def build_global_model(train: Dataset, dimension: ContextDimension) -> GlobalModel:
    """المركز لكل حالة على المجموعة المتعددة لكل الاستماعات (التكرار يُحتسب)."""
    centroids = _centroid_frame(train, dimension, by_user=False)
    vectors, support = {}, {}
    for name, row in centroids.iterrows():
        condition = dimension.condition(name)
        vectors[condition] = AudioFeatureVector.from_array(row[list(FEATURE_NAMES)].to_numpy(dtype=float))
        support[condition] = int(row["support"])
    logger.info(f"Global model built for {len(vectors)} conditions of '{dimension.name}'")
    return GlobalModel(dimension, vectors, support)


def build_personalized_model(train: Dataset, dimension: ContextDimension, fallback: GlobalModel) -> PersonalizedModel:
    centroids = _centroid_frame(train, dimension, by_user=True)
    vectors, support = {}, {}
    for (user_id, name), row in centroids.iterrows():
        key = (user_id, dimension.condition(name))
        vectors[key] = AudioFeatureVector.from_array(row[list(FEATURE_NAMES)].to_numpy(dtype=float))
        support[key] = int(row["support"])
    logger.info(f"Personalized model built for {len({u for u, _ in vectors})} users, {len(vectors)} user-conditions")
    return PersonalizedModel(dimension, vectors, support, fallback)


def lookup(model: PreferenceModel, condition: ContextCondition, user_id: Optional[str] = None) -> AudioFeatureVector:
    if isinstance(model, PersonalizedModel):
        return model.lookup(user_id, condition)
    return model.lookup(condition)


# --- التفريغ والتحميل ---

def dump_models(path: Union[str, Path], model: PersonalizedModel) -> Path:
    """يكتب النموذج العام (scope=GLOBAL) والنموذج الشخصي في ملف واحد."""
    rows = []
    for condition in sorted(model.fallback.vectors):
        rows.append([GLOBAL_SCOPE, condition.name, *model.fallback.vectors[condition].values, model.fallback.support[condition]])
    for user_id, condition in sorted(model.vectors):
        key = (user_id, condition)
        rows.append([user_id, condition.name, *model.vectors[key].values, model.support[key]])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(rows, columns=DUMP_COLUMNS).to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    return path


def load_model_dump(path: Union[str, Path], dimension: ContextDimension) -> PersonalizedModel:
    path = Path(path)
    try:
        frame = pd.read_csv(
            path, dtype={"scope": str, "condition": str}, keep_default_na=False, float_precision="round_trip"
        )
    except pd.errors.EmptyDataError:
        raise SchemaError(f"{path}: model dump is empty") from None
    missing = [c for c in DUMP_COLUMNS if c not in frame.columns]
    if missing:
        raise SchemaError(f"{path}: missing columns {missing}")

    global_vectors, global_support, vectors, support = {}, {}, {}, {}
    for record in frame.to_dict("records"):
        try:
            condition = dimension.condition(record["condition"])
        except SchemaError:
            raise ModelMismatchError(
                f"model dump {path} references condition '{record['condition']}' outside dimension '{dimension.name}'"
            ) from None
        vector = AudioFeatureVector.from_array([float(record[f]) for f in FEATURE_NAMES])
        if record["scope"] == GLOBAL_SCOPE:
            global_vectors[condition] = vector
            global_support[condition] = int(record["support"])
        else:
            vectors[(record["scope"], condition)] = vector
            support[(record["scope"], condition)] = int(record["support"])
    logger.info(f"Loaded model dump {path}: {len(global_vectors)} global and {len(vectors)} personal vectors")
    return PersonalizedModel(dimension, vectors, support, GlobalModel(dimension, global_vectors, global_support))
