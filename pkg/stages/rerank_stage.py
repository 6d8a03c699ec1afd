# stages/rerank_stage.py
import logging
from typing import Any, Dict

from core.base_stage import BaseStage
from core.config import PipelineConfig
from core.errors import ConfigurationError
from engines.external_lists import load_external_lists
from engines.preference_models import load_model_dump
from engines.rerank_engine import ContextualReranker, ModelKind, RerankConfig
from stages.preparation_stage import load_catalog
from tools.report_exporter import report_exporter

logger = logging.getLogger("RerankStage")


class RerankStage(BaseStage):
    def __init__(self):
        super().__init__(
            stage_id="rerank",
            name="Standalone Re-rank",
            description="Re-rank an external list file with a saved preference model at a single λ.",
        )

    async def process_task(self, context: Dict[str, Any], **kwargs) -> Dict[str, Any]:
        config: PipelineConfig = context["config"]
        settings = config.standalone_rerank
        if settings is None:
            raise ConfigurationError("'rerank' needs a 'standalone_rerank' section with 'model' and 'lists'")
        dimension = context.setdefault("dimension", config.dimension())
        catalog = load_catalog(config, context)

        personalized = load_model_dump(settings.model, dimension)
        model = personalized if settings.model_kind == ModelKind.PERSONALIZED else personalized.fallback
        loaded = load_external_lists(settings.lists, catalog, dimension)
        reranker = ContextualReranker(
            catalog,
            model,
            metric=config.rerank.metric,
            feature_mask=config.rerank.feature_mask,
            scope=config.rerank.normalization_scope,
        )
        cfg = RerankConfig(lambda_=settings.lambda_, mode=settings.mode, model_kind=settings.model_kind)
        normalized = reranker.normalized_scores(loaded.lists)
        reranked = [reranker.rerank(rec, cfg, normalized[rec.key]) for rec in loaded.lists]

        target = config.output_dir / "reranked" / f"{settings.lists.stem}_{cfg.model_kind.value}_{cfg.mode.value}.csv"
        report_exporter.export_lists(reranked, target, audit=True)
        return {
            "status": "success",
            "content": {
                "lists": len(reranked),
                "resorted": loaded.resorted_count,
                "dropped": loaded.dropped_count,
                "file": str(target),
            },
            "summary": f"Re-ranked {len(reranked)} lists at λ={cfg.lambda_:g} ({cfg.model_kind.value}, {cfg.mode.value}).",
        }
