# stages/evaluation_stage.py
import logging
from typing import Any, Dict, List

from core.base_stage import BaseStage
from core.config import PipelineConfig
from core.worker_pool import run_bounded
from engines.external_lists import load_external_lists
from engines.rerank_engine import ContextualReranker, ModelKind
from stages.fold_artifacts import FoldArtifacts, lists_path, load_fold_datasets, load_fold_lists, load_fold_model
from stages.preparation_stage import load_catalog
from tools.evaluation_tools import EvaluationAccumulator, best_lambda, build_relevance
from tools.report_exporter import report_exporter

logger = logging.getLogger("EvaluationStage")


class EvaluationStage(BaseStage):
    """
    لكل طية وخوارزمية وحجم قائمة: اقتطاع القوائم الأولية، مسح λ بكل نموذج ووضع،
    ثم حساب المقاييس. النتائج تُجمع عبر الطيات بترتيب الطيات.
    """

    def __init__(self):
        super().__init__(
            stage_id="evaluate",
            name="Re-rank Evaluation",
            description="Sweep λ over every list family and aggregate Prec@k / MAP@k across folds.",
        )

    def _complete_fold(self, fold: FoldArtifacts, config: PipelineConfig, catalog, dimension) -> FoldArtifacts:
        if fold.model is None:
            fold.model = load_fold_model(config.output_dir, fold, dimension)
        for algorithm in config.recommenders.algorithms:
            if algorithm not in fold.lists:
                fold.lists[algorithm] = load_fold_lists(
                    lists_path(config.output_dir, fold.fold_index, algorithm), catalog, dimension, algorithm
                )
        for external in config.external_lists:
            if external.name not in fold.lists:
                fold.lists[external.name] = load_external_lists(
                    external.paths[fold.fold_index], catalog, dimension, source=external.name
                ).by_key()
        return fold

    def _evaluate_fold(self, fold: FoldArtifacts, config: PipelineConfig, catalog, dimension) -> EvaluationAccumulator:
        fold = self._complete_fold(fold, config, catalog, dimension)
        settings = config.rerank
        relevance = build_relevance(fold.test)
        rerankers = {
            kind: ContextualReranker(
                catalog,
                fold.model if kind == ModelKind.PERSONALIZED else fold.model.fallback,
                metric=settings.metric,
                feature_mask=settings.feature_mask,
                scope=settings.normalization_scope,
            )
            for kind in settings.model_kinds
        }
        accumulator = EvaluationAccumulator()
        for algorithm in config.algorithms():
            family = fold.lists[algorithm]
            for list_size in sorted(config.evaluation.list_sizes, reverse=True):
                initial = {key: family[key].top(list_size) for key in sorted(family)}
                ordered = list(initial.values())
                accumulator.add_initial(
                    algorithm, list_size, initial, relevance, config.evaluation.k_values, fold.fold_index
                )
                for kind, reranker in rerankers.items():
                    for mode in settings.modes:
                        swept = reranker.sweep(ordered, settings.lambdas, mode, kind)
                        families = {
                            (kind.value, mode.value, lam): {rec.key: rec for rec in lists}
                            for lam, lists in swept.items()
                        }
                        accumulator.add_families(
                            algorithm, list_size, initial, families, relevance,
                            config.evaluation.k_values, fold.fold_index,
                        )
        logger.info(f"Evaluated fold {fold.fold_index} ({len(relevance)} user-condition pairs)")
        return accumulator

    async def process_task(self, context: Dict[str, Any], **kwargs) -> Dict[str, Any]:
        config: PipelineConfig = context["config"]
        dimension = context.setdefault("dimension", config.dimension())
        catalog = load_catalog(config, context)
        folds: List[FoldArtifacts] = context.get("folds") or load_fold_datasets(
            config.output_dir, config.evaluation.folds, catalog, dimension
        )

        per_fold = await run_bounded(
            lambda fold: self._evaluate_fold(fold, config, catalog, dimension), folds, config.jobs
        )
        total = EvaluationAccumulator()
        for accumulator in per_fold:
            total.merge(accumulator)
        report = total.report()
        files = report_exporter.export_evaluation(report, config.output_dir / "reports")

        context["report"] = report
        best = best_lambda(report)
        highlights = [
            f"{b.algorithm}/top{b.list_size}/{b.variant}-{b.mode}: λ={b.best_lambda:g} MAP@{b.k}={b.map_at_k:.4f}"
            for b in best
            if b.mode == "regular"
        ]
        for line in highlights:
            logger.info(line)
        return {
            "status": "success",
            "content": {
                "rows": len(report.rows),
                "files": [str(p) for p in files],
                "missing_lists": total.missing_lists,
            },
            "summary": f"Evaluated {len(folds)} folds into {len(report.rows)} report rows.",
        }
