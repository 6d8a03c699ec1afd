# stages/training_stage.py
import logging
from typing import Any, Dict, List

from core.base_stage import BaseStage
from core.config import PipelineConfig
from core.worker_pool import run_bounded
from engines.bpr_engine import recommend_top_n, train_bpr
from engines.external_lists import load_external_lists
from engines.preference_models import build_global_model, build_personalized_model, dump_models
from engines.user_splitting import train_user_splitting
from stages.fold_artifacts import FoldArtifacts, ListFamily, lists_path, load_fold_datasets, model_path
from stages.preparation_stage import load_catalog
from tools.evaluation_tools import build_relevance
from tools.report_exporter import report_exporter

logger = logging.getLogger("TrainingStage")


class TrainingStage(BaseStage):
    """
    لكل طية: بناء نموذجي التفضيل من بيانات التدريب فقط، وتوليد القوائم الأولية
    لكل زوج (مستخدم، حالة) في بيانات الاختبار بكل خوارزمية مفعّلة.
    """

    def __init__(self):
        super().__init__(
            stage_id="train",
            name="Model Training",
            description="Build preference models and initial top-N lists for every fold.",
        )

    def _native_lists(self, algorithm: str, fold: FoldArtifacts, config: PipelineConfig) -> ListFamily:
        size = max(config.evaluation.list_sizes)
        seed = config.seed + fold.fold_index
        keys = sorted(build_relevance(fold.test))
        exclude = fold.train.user_items()
        hyper = config.recommenders.bpr
        if algorithm == "bpr":
            model = train_bpr(fold.train, hyper, seed)
            return {
                (user, condition): recommend_top_n(
                    model, user, size, exclude=exclude.get(user, ()), condition=condition, source=algorithm
                )
                for user, condition in keys
            }
        model = train_user_splitting(fold.train, hyper, seed)
        return {
            (user, condition): model.recommend(user, condition, size, exclude=exclude.get(user, ()), source=algorithm)
            for user, condition in keys
        }

    def _train_fold(self, fold: FoldArtifacts, config: PipelineConfig, catalog, dimension) -> FoldArtifacts:
        logger.info(f"Training fold {fold.fold_index}: {len(fold.train)} train / {len(fold.test)} test events")
        global_model = build_global_model(fold.train, dimension)
        fold.model = build_personalized_model(fold.train, dimension, global_model)
        dump_models(model_path(config.output_dir, fold.fold_index), fold.model)

        for algorithm in config.recommenders.algorithms:
            fold.lists[algorithm] = self._native_lists(algorithm, fold, config)
            report_exporter.export_lists(
                [fold.lists[algorithm][key] for key in sorted(fold.lists[algorithm])],
                lists_path(config.output_dir, fold.fold_index, algorithm),
            )
        for external in config.external_lists:
            loaded = load_external_lists(external.paths[fold.fold_index], catalog, dimension, source=external.name)
            fold.lists[external.name] = loaded.by_key()
        return fold

    async def process_task(self, context: Dict[str, Any], **kwargs) -> Dict[str, Any]:
        config: PipelineConfig = context["config"]
        dimension = context.setdefault("dimension", config.dimension())
        catalog = load_catalog(config, context)
        folds: List[FoldArtifacts] = context.get("folds") or load_fold_datasets(
            config.output_dir, config.evaluation.folds, catalog, dimension
        )

        trained = await run_bounded(
            lambda fold: self._train_fold(fold, config, catalog, dimension), folds, config.jobs
        )
        context["folds"] = trained
        algorithms = config.algorithms()
        return {
            "status": "success",
            "content": {
                "folds": len(trained),
                "algorithms": algorithms,
                "lists": {a: sum(len(f.lists.get(a, {})) for f in trained) for a in algorithms},
            },
            "summary": f"Trained {len(trained)} folds for {', '.join(algorithms) or 'no algorithms'}.",
        }
