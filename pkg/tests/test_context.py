import pytest

from core.context import (
    TIME_OF_DAY,
    TIME_OF_DAY_DIMENSION,
    ContextCondition,
    ContextDimension,
    HourBuckets,
    build_dimension,
    time_of_day,
    time_of_day_dimension,
)
from core.errors import ConfigurationError, FeatureValidationError, SchemaError


@pytest.mark.parametrize(
    "hour, expected",
    [(0, "night"), (5, "night"), (6, "morning"), (11, "morning"), (12, "afternoon"), (17, "afternoon"), (18, "evening"), (23, "evening")],
)
def test_default_time_of_day_buckets(hour, expected):
    assert time_of_day(hour) == ContextCondition(TIME_OF_DAY, expected)


def test_every_hour_maps_to_exactly_one_condition():
    counts = TIME_OF_DAY_DIMENSION.hour_buckets.hours_per_condition()
    assert counts == {"night": 6, "morning": 6, "afternoon": 6, "evening": 6}
    assert set(TIME_OF_DAY_DIMENSION.conditions) == {"morning", "afternoon", "evening", "night"}


@pytest.mark.parametrize("hour", [-1, 24, 7.5, True])
def test_invalid_hour(hour):
    with pytest.raises(FeatureValidationError):
        time_of_day(hour)


def test_custom_buckets_wrap_around_midnight():
    dimension = time_of_day_dimension({"morning": 5, "afternoon": 12, "evening": 17, "night": 22})
    assert time_of_day(3, dimension).name == "night"
    assert time_of_day(22, dimension).name == "night"
    assert time_of_day(5, dimension).name == "morning"
    assert sum(dimension.hour_buckets.hours_per_condition().values()) == 24


def test_bucket_validation():
    with pytest.raises(ConfigurationError):
        HourBuckets.from_mapping({"a": 0, "b": 0})
    with pytest.raises(ConfigurationError):
        HourBuckets.from_mapping({"a": 0, "b": 25})
    with pytest.raises(ConfigurationError):
        HourBuckets.from_mapping({"a": 0})


def test_dimension_invariants():
    with pytest.raises(ConfigurationError):
        ContextDimension("mood", ("happy",))
    with pytest.raises(ConfigurationError):
        ContextDimension("mood", ("happy", "happy"))
    mood = build_dimension("mood", ["happy", "sad"])
    assert not mood.derived_from_hour
    assert mood.condition("sad") == ContextCondition("mood", "sad")
    with pytest.raises(SchemaError):
        mood.condition("angry")
    with pytest.raises(ConfigurationError):
        mood.condition_for_hour(3)


def test_conditions_of_different_dimensions_differ():
    assert ContextCondition("activity", "relaxing") != ContextCondition("mood", "relaxing")
    assert str(ContextCondition("mood", "happy")) == "happy"
