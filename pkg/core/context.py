# core/context.py
"""
الأبعاد السياقية (Contextual Dimensions) وحالاتها.

بُعد "وقت اليوم" مبني مسبقًا ويُشتق من الساعة المحلية للاستماع؛ الأبعاد الأخرى
(النشاط، المزاج...) تُعرّف في ملف الإعدادات بحالات نصية.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Sequence, Tuple

from core.errors import ConfigurationError, FeatureValidationError, SchemaError

logger = logging.getLogger("ContextModel")

TIME_OF_DAY = "time_of_day"
DEFAULT_HOUR_STARTS: Dict[str, int] = {"night": 0, "morning": 6, "afternoon": 12, "evening": 18}
TIME_OF_DAY_CONDITIONS: Tuple[str, ...] = ("morning", "afternoon", "evening", "night")


@dataclass(frozen=True, order=True)
class ContextCondition:
    dimension: str
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class HourBuckets:
    """
    تقسيم ساعات اليوم إلى حالات: كل حالة تبدأ عند ساعة وتمتد حتى بداية الحالة
    التالية، والساعات قبل أول بداية تنتمي إلى الحالة الأخيرة (التفاف منتصف الليل).
    """
    starts: Tuple[Tuple[int, str], ...]

    @classmethod
    def from_mapping(cls, hour_starts: Mapping[str, int]) -> "HourBuckets":
        if len(hour_starts) < 2:
            raise ConfigurationError("hour buckets need at least two conditions")
        seen: Dict[int, str] = {}
        for name, start in hour_starts.items():
            if not isinstance(start, int) or not 0 <= start <= 23:
                raise ConfigurationError(f"start hour for '{name}' must be an integer in 0-23, got {start!r}")
            if start in seen:
                raise ConfigurationError(f"conditions '{seen[start]}' and '{name}' share start hour {start}")
            seen[start] = name
        return cls(tuple(sorted((start, name) for name, start in hour_starts.items())))

    def condition_name(self, hour: int) -> str:
        current = self.starts[-1][1]
        for start, name in self.starts:
            if hour >= start:
                current = name
            else:
                break
        return current

    def hours_per_condition(self) -> Dict[str, int]:
        counts: Dict[str, int] = {name: 0 for _, name in self.starts}
        for hour in range(24):
            counts[self.condition_name(hour)] += 1
        return counts


@dataclass(frozen=True)
class ContextDimension:
    name: str
    conditions: Tuple[str, ...]
    hour_buckets: Optional[HourBuckets] = field(default=None, compare=False)

    def __post_init__(self):
        if len(self.conditions) < 2:
            raise ConfigurationError(f"dimension '{self.name}' needs at least two conditions")
        if len(set(self.conditions)) != len(self.conditions):
            raise ConfigurationError(f"dimension '{self.name}' has duplicate condition names")
        if self.hour_buckets is not None:
            bucket_names = {name for _, name in self.hour_buckets.starts}
            if bucket_names != set(self.conditions):
                raise ConfigurationError(
                    f"hour buckets {sorted(bucket_names)} do not match conditions {sorted(self.conditions)}"
                )

    @property
    def derived_from_hour(self) -> bool:
        return self.hour_buckets is not None

    def condition(self, name: str) -> ContextCondition:
        if name not in self.conditions:
            raise SchemaError(f"unknown condition '{name}' for dimension '{self.name}'")
        return ContextCondition(self.name, name)

    def all_conditions(self) -> Tuple[ContextCondition, ...]:
        return tuple(ContextCondition(self.name, c) for c in self.conditions)

    def condition_for_hour(self, local_hour: int) -> ContextCondition:
        if self.hour_buckets is None:
            raise ConfigurationError(f"dimension '{self.name}' is not derived from the hour of day")
        if isinstance(local_hour, bool) or not isinstance(local_hour, int) or not 0 <= local_hour <= 23:
            raise FeatureValidationError("local_hour", f"hour {local_hour!r} is outside 0-23")
        return ContextCondition(self.name, self.hour_buckets.condition_name(local_hour))


def time_of_day_dimension(hour_starts: Optional[Mapping[str, int]] = None) -> ContextDimension:
    buckets = HourBuckets.from_mapping(hour_starts or DEFAULT_HOUR_STARTS)
    names = tuple(name for name in TIME_OF_DAY_CONDITIONS if any(n == name for _, n in buckets.starts))
    # حالات مخصصة خارج الأسماء الأربعة تُرتَّب حسب ساعة البداية
    extra = tuple(name for _, name in buckets.starts if name not in names)
    return ContextDimension(TIME_OF_DAY, names + extra, buckets)


TIME_OF_DAY_DIMENSION = time_of_day_dimension()


def time_of_day(local_hour: int, dimension: ContextDimension = TIME_OF_DAY_DIMENSION) -> ContextCondition:
    return dimension.condition_for_hour(local_hour)


def build_dimension(name: str, conditions: Sequence[str], hour_starts: Optional[Mapping[str, int]] = None) -> ContextDimension:
    if hour_starts:
        buckets = HourBuckets.from_mapping(hour_starts)
        return ContextDimension(name, tuple(conditions) or tuple(n for _, n in buckets.starts), buckets)
    return ContextDimension(name, tuple(conditions))
