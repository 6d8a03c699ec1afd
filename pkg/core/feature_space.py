# core/feature_space.py
"""
فضاء الخصائص الصوتية (Audio Feature Space).

تسع خصائص بترتيب ثابت، كلها في المجال [0, 1]. الإيقاع (tempo) والجهارة
(loudness) تصل خامًا وتُطبَّع هنا، وكل قيمة خارج المجال تُقصّ ويُحصى القص.
"""
import logging
import math
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np

from core.errors import ConfigurationError, FeatureValidationError

logger = logging.getLogger("FeatureSpace")

TEMPO_MAX_BPM = 220.0
LOUDNESS_FLOOR_DB = -40.0
# هامش لأخطاء التقريب في المتوسطات
_UNIT_TOLERANCE = 1e-9


class AudioFeature(str, Enum):
    ACOUSTICNESS = "acousticness"
    DANCEABILITY = "danceability"
    ENERGY = "energy"
    INSTRUMENTALNESS = "instrumentalness"
    LIVENESS = "liveness"
    LOUDNESS = "loudness"
    SPEECHINESS = "speechiness"
    VALENCE = "valence"
    TEMPO = "tempo"


FEATURE_ORDER: Tuple[AudioFeature, ...] = tuple(AudioFeature)
FEATURE_NAMES: Tuple[str, ...] = tuple(f.value for f in FEATURE_ORDER)
N_FEATURES = len(FEATURE_ORDER)


@dataclass(frozen=True)
class AudioFeatureVector:
    """متجه خصائص أغنية واحدة أو نموذج تفضيل واحد."""
    values: Tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != N_FEATURES:
            raise FeatureValidationError("vector", f"expected {N_FEATURES} components, got {len(self.values)}")
        for feature, value in zip(FEATURE_ORDER, self.values):
            if not math.isfinite(value) or value < 0.0 or value > 1.0:
                raise FeatureValidationError(feature.value, f"component {value!r} is outside [0, 1]")

    @classmethod
    def from_array(cls, array: Iterable[float]) -> "AudioFeatureVector":
        arr = np.asarray(list(array), dtype=float)
        # المتوسطات قد تتجاوز الحد بمقدار ulp واحد
        if arr.size and np.all(np.isfinite(arr)) and arr.min() >= -_UNIT_TOLERANCE and arr.max() <= 1.0 + _UNIT_TOLERANCE:
            arr = np.clip(arr, 0.0, 1.0)
        return cls(tuple(float(v) for v in arr))

    @classmethod
    def from_mapping(cls, values: Mapping[str, float]) -> "AudioFeatureVector":
        missing = [name for name in FEATURE_NAMES if name not in values]
        if missing:
            raise FeatureValidationError(missing[0], "missing from mapping")
        return cls(tuple(float(values[name]) for name in FEATURE_NAMES))

    @classmethod
    def filled(cls, value: float) -> "AudioFeatureVector":
        return cls((float(value),) * N_FEATURES)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def __getitem__(self, feature: AudioFeature) -> float:
        return self.values[FEATURE_ORDER.index(AudioFeature(feature))]


# --- التطبيع ---

def _require_finite(feature: AudioFeature, raw: float) -> float:
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise FeatureValidationError(feature.value, f"value {raw!r} is not a number")
    if not math.isfinite(value):
        raise FeatureValidationError(feature.value, f"value {raw!r} is not finite")
    return value


def normalize_tempo(raw: float) -> float:
    value = _require_finite(AudioFeature.TEMPO, raw)
    if value < 0:
        raise FeatureValidationError(AudioFeature.TEMPO.value, f"negative tempo {value!r}")
    return min(max(value / TEMPO_MAX_BPM, 0.0), 1.0)


def normalize_loudness(raw: float) -> float:
    value = _require_finite(AudioFeature.LOUDNESS, raw)
    return min(max((value - LOUDNESS_FLOOR_DB) / -LOUDNESS_FLOOR_DB, 0.0), 1.0)


class FeatureNormalizer:
    """
    يحوّل صفًا خامًا (أو مطبّعًا مسبقًا) إلى AudioFeatureVector ويحصي القيم
    التي قُصّت لكل خاصية.
    """

    def __init__(self, pre_normalized: bool = False):
        self.pre_normalized = pre_normalized
        self.clamp_counts: Counter = Counter()

    def _clamp_unit(self, feature: AudioFeature, raw: float) -> float:
        value = _require_finite(feature, raw)
        if value < 0.0 or value > 1.0:
            self.clamp_counts[feature.value] += 1
            value = min(max(value, 0.0), 1.0)
        return value

    def normalize_row(self, raw: Mapping[str, float]) -> AudioFeatureVector:
        values = []
        for feature in FEATURE_ORDER:
            value = raw[feature.value]
            if self.pre_normalized:
                values.append(self._clamp_unit(feature, value))
            elif feature is AudioFeature.TEMPO:
                bpm = _require_finite(feature, value)
                if bpm > TEMPO_MAX_BPM:
                    self.clamp_counts[feature.value] += 1
                values.append(normalize_tempo(bpm))
            elif feature is AudioFeature.LOUDNESS:
                db = _require_finite(feature, value)
                if db < LOUDNESS_FLOOR_DB or db > 0.0:
                    self.clamp_counts[feature.value] += 1
                values.append(normalize_loudness(db))
            else:
                values.append(self._clamp_unit(feature, value))
        return AudioFeatureVector(tuple(values))

    @property
    def total_clamped(self) -> int:
        return sum(self.clamp_counts.values())


# --- المسافة والتشابه ---

# مقياس المسافة يأخذ مصفوفة صفوف ومتجهًا واحدًا ويعيد مسافة لكل صف في [0, 1]
DistanceMetric = Callable[[np.ndarray, np.ndarray], np.ndarray]


def normalized_euclidean(rows: np.ndarray, vector: np.ndarray) -> np.ndarray:
    rows = np.atleast_2d(rows)
    n_active = rows.shape[1]
    if n_active == 0:
        raise ConfigurationError("feature mask selects no features")
    diff = rows - vector[np.newaxis, :]
    dist = np.sqrt(np.einsum("ij,ij->i", diff, diff)) / math.sqrt(n_active)
    return np.clip(dist, 0.0, 1.0)


_DISTANCE_METRICS: Dict[str, DistanceMetric] = {
    "euclidean": normalized_euclidean,
}


def get_distance_metric(name: str) -> DistanceMetric:
    try:
        return _DISTANCE_METRICS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown distance metric '{name}', available: {sorted(_DISTANCE_METRICS)}"
        ) from None


def available_distance_metrics() -> Sequence[str]:
    return sorted(_DISTANCE_METRICS)


def resolve_feature_mask(names: Optional[Sequence[str]]) -> np.ndarray:
    """None تعني كل الخصائص التسع."""
    if names is None:
        return np.ones(N_FEATURES, dtype=bool)
    unknown = [n for n in names if n not in FEATURE_NAMES]
    if unknown:
        raise ConfigurationError(f"unknown audio features in mask: {unknown}")
    mask = np.array([name in set(names) for name in FEATURE_NAMES], dtype=bool)
    if not mask.any():
        raise ConfigurationError("feature mask selects no features")
    return mask


def distances_to(
    rows: np.ndarray,
    vector: AudioFeatureVector,
    metric: str = "euclidean",
    mask: Optional[np.ndarray] = None,
) -> np.ndarray:
    """مسافات مجموعة أغانٍ (صف لكل أغنية) إلى متجه واحد."""
    active = mask if mask is not None else np.ones(N_FEATURES, dtype=bool)
    target = vector.as_array()[active]
    return get_distance_metric(metric)(np.asarray(rows, dtype=float)[:, active], target)


def distance(
    a: AudioFeatureVector,
    b: AudioFeatureVector,
    metric: str = "euclidean",
    mask: Optional[np.ndarray] = None,
) -> float:
    return float(distances_to(a.as_array()[np.newaxis, :], b, metric, mask)[0])


def similarity(
    a: AudioFeatureVector,
    b: AudioFeatureVector,
    metric: str = "euclidean",
    mask: Optional[np.ndarray] = None,
) -> float:
    return 1.0 - distance(a, b, metric, mask)
