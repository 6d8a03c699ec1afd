# core/config.py
"""
إعدادات خط المعالجة: وثيقة JSON واحدة يتم التحقق منها مسبقًا بنماذج pydantic.
المسارات النسبية تُحل نسبةً إلى مجلد ملف الإعدادات.
"""
import json
import logging
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional, Union

from pydantic import AfterValidator, BaseModel, BeforeValidator, Field, ValidationInfo, model_validator

from core.context import DEFAULT_HOUR_STARTS, TIME_OF_DAY, TIME_OF_DAY_CONDITIONS, ContextDimension, build_dimension, time_of_day_dimension
from core.errors import ConfigurationError
from core.feature_space import FEATURE_NAMES, available_distance_metrics
from engines.bpr_engine import BprHyperparameters
from engines.rerank_engine import ModelKind, NormalizationScope, RerankMode, default_lambda_grid

logger = logging.getLogger("PipelineConfig")

DEFAULT_LIST_SIZES = [200, 100, 50, 25]
ALGORITHMS = ("bpr", "us-bpr")


def _resolve_path(value: Any, info: ValidationInfo) -> Any:
    if value is None or value == "":
        return value
    path = Path(value).expanduser()
    base_dir = (info.context or {}).get("base_dir")
    if not path.is_absolute() and base_dir is not None:
        path = Path(base_dir) / path
    return path


def _must_exist(path: Path) -> Path:
    if not path.exists():
        raise ValueError(f"path does not exist: {path}")
    return path


InputPath = Annotated[Path, BeforeValidator(_resolve_path), AfterValidator(_must_exist)]
OutputPath = Annotated[Path, BeforeValidator(_resolve_path)]
UnitFloat = Annotated[float, Field(ge=0.0, le=1.0)]


class DatasetConfig(BaseModel):
    catalog: InputPath
    events: Optional[InputPath] = None
    normalized: bool = Field(default=False, description="قيم الإيقاع والجهارة مطبّعة مسبقًا")
    delimiter: str = ","
    fail_fast: bool = True


class DimensionConfig(BaseModel):
    name: str = TIME_OF_DAY
    conditions: List[str] = Field(default_factory=list)
    hour_starts: Optional[Dict[str, int]] = None

    def build(self) -> ContextDimension:
        if self.name == TIME_OF_DAY and not self.conditions:
            return time_of_day_dimension(self.hour_starts)
        if self.name == TIME_OF_DAY and not self.hour_starts:
            # الحالات المصرّح بها بلا hour_starts تأخذ ساعات البداية الافتراضية
            if set(self.conditions) != set(DEFAULT_HOUR_STARTS):
                raise ConfigurationError(
                    f"time_of_day conditions {self.conditions} differ from the default buckets "
                    f"{sorted(DEFAULT_HOUR_STARTS)}; declare hour_starts for them"
                )
            return build_dimension(self.name, self.conditions, DEFAULT_HOUR_STARTS)
        if not self.conditions and not self.hour_starts:
            raise ConfigurationError(f"dimension '{self.name}' declares no conditions")
        return build_dimension(self.name, self.conditions, self.hour_starts)


class FilterConfig(BaseModel):
    min_song_plays: int = Field(default=0, ge=0)
    min_user_events: int = Field(default=0, ge=0)
    iterate_to_fixpoint: bool = False


class RecommenderConfig(BaseModel):
    algorithms: List[Literal["bpr", "us-bpr"]] = Field(default_factory=lambda: list(ALGORITHMS))
    bpr: BprHyperparameters = Field(default_factory=BprHyperparameters)


class ExternalListConfig(BaseModel):
    name: str = Field(description="وسم الخوارزمية في التقارير، مثل camf_ics")
    paths: List[InputPath] = Field(description="ملف قوائم لكل طية، بترتيب الطيات")


class RerankSettings(BaseModel):
    lambdas: List[UnitFloat] = Field(default_factory=lambda: list(default_lambda_grid()))
    modes: List[RerankMode] = Field(default_factory=lambda: [RerankMode.REGULAR, RerankMode.OPPOSITE])
    model_kinds: List[ModelKind] = Field(default_factory=lambda: [ModelKind.GLOBAL, ModelKind.PERSONALIZED])
    metric: str = "euclidean"
    feature_mask: Optional[List[str]] = None
    normalization_scope: NormalizationScope = NormalizationScope.LIST

    @model_validator(mode="after")
    def _check(self) -> "RerankSettings":
        if not self.lambdas:
            raise ValueError("lambdas must not be empty")
        if self.metric not in available_distance_metrics():
            raise ValueError(f"unknown metric '{self.metric}', available: {list(available_distance_metrics())}")
        if self.feature_mask is not None:
            unknown = [f for f in self.feature_mask if f not in FEATURE_NAMES]
            if unknown or not self.feature_mask:
                raise ValueError(f"feature_mask must be a non-empty subset of {list(FEATURE_NAMES)}")
        return self


class EvaluationConfig(BaseModel):
    folds: int = Field(default=5, ge=2)
    list_sizes: List[int] = Field(default_factory=lambda: list(DEFAULT_LIST_SIZES))
    k_values: List[int] = Field(default_factory=lambda: [10])
    stratified: bool = False

    @model_validator(mode="after")
    def _check(self) -> "EvaluationConfig":
        if not self.list_sizes or not self.k_values:
            raise ValueError("list_sizes and k_values must not be empty")
        if min(self.k_values) < 1:
            raise ValueError("k values must be >= 1")
        if min(self.list_sizes) < max(self.k_values):
            raise ValueError(f"every list size must be >= max(k_values)={max(self.k_values)}")
        return self


class AnalysisConfig(BaseModel):
    playlists: InputPath
    dimensions: List[DimensionConfig] = Field(
        default_factory=lambda: [DimensionConfig(name=TIME_OF_DAY, conditions=list(TIME_OF_DAY_CONDITIONS))]
    )
    alpha: float = Field(default=0.05, gt=0.0, lt=1.0)
    equal_var: bool = Field(default=False, description="اختبار Student بالتباين المجمّع بدل Welch")


class StandaloneRerankConfig(BaseModel):
    model: InputPath
    lists: InputPath
    lambda_: UnitFloat = Field(default=0.5, alias="lambda")
    mode: RerankMode = RerankMode.REGULAR
    model_kind: ModelKind = ModelKind.PERSONALIZED

    model_config = {"populate_by_name": True}


class PipelineConfig(BaseModel):
    dataset: Optional[DatasetConfig] = None
    context: DimensionConfig = Field(default_factory=DimensionConfig)
    filter: FilterConfig = Field(default_factory=FilterConfig)
    recommenders: RecommenderConfig = Field(default_factory=RecommenderConfig)
    external_lists: List[ExternalListConfig] = Field(default_factory=list)
    rerank: RerankSettings = Field(default_factory=RerankSettings)
    evaluation: EvaluationConfig = Field(default_factory=EvaluationConfig)
    analysis: Optional[AnalysisConfig] = None
    standalone_rerank: Optional[StandaloneRerankConfig] = None
    seed: int = 42
    jobs: int = Field(default=1, ge=1)
    output_dir: OutputPath = Field(default=Path("remix_output"), validate_default=True)

    @model_validator(mode="after")
    def _cross_checks(self) -> "PipelineConfig":
        for external in self.external_lists:
            if len(external.paths) != self.evaluation.folds:
                raise ValueError(
                    f"external list family '{external.name}' has {len(external.paths)} paths "
                    f"but evaluation uses {self.evaluation.folds} folds"
                )
            if external.name in ALGORITHMS:
                raise ValueError(f"external list name '{external.name}' clashes with a native algorithm")
        self.context.build()
        if self.analysis is not None:
            for dimension in self.analysis.dimensions:
                dimension.build()
        return self

    def dimension(self) -> ContextDimension:
        return self.context.build()

    def algorithms(self) -> List[str]:
        return list(self.recommenders.algorithms) + [e.name for e in self.external_lists]

    def require_dataset(self, section: str) -> DatasetConfig:
        if self.dataset is None:
            raise ConfigurationError(f"'{section}' needs a 'dataset' section in the configuration")
        return self.dataset


def load_config(
    path: Union[str, Path],
    seed: Optional[int] = None,
    output: Optional[Union[str, Path]] = None,
    jobs: Optional[int] = None,
) -> PipelineConfig:
    """يحمّل ويتحقق من ملف الإعدادات ثم يطبّق قيم سطر الأوامر فوقه."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"configuration file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"{path}: invalid JSON ({e})") from None
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: top level must be an object")

    config = PipelineConfig.model_validate(data, context={"base_dir": path.parent.resolve()})
    updates: Dict[str, Any] = {}
    if seed is not None:
        updates["seed"] = seed
    if output is not None:
        updates["output_dir"] = Path(output)
    if jobs is not None:
        if jobs < 1:
            raise ConfigurationError("--jobs must be >= 1")
        updates["jobs"] = jobs
    if updates:
        config = config.model_copy(update=updates)
    logger.info(f"✅ Configuration loaded from {path} (seed={config.seed}, output={config.output_dir})")
    return config
