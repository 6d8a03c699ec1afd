# stages/preparation_stage.py
import logging
from typing import Any, Dict

from core.base_stage import BaseStage
from core.config import PipelineConfig
from core.errors import ConfigurationError
from ingestion.dataset_filter import filter_dataset
from ingestion.ingestion_engine import ListeningDataIngestionEngine
from stages.fold_artifacts import FoldArtifacts, fold_dir, write_events
from tools.evaluation_tools import make_folds
from tools.report_exporter import report_exporter

logger = logging.getLogger("PreparationStage")


def load_catalog(config: PipelineConfig, context: Dict[str, Any]):
    """الكتالوج يُحمّل مرة واحدة لكل تشغيل ويُشارك بين المراحل."""
    if "catalog" not in context:
        dataset_cfg = config.require_dataset("catalog")
        engine = ListeningDataIngestionEngine(delimiter=dataset_cfg.delimiter)
        context["catalog"] = engine.load_feature_catalog(
            dataset_cfg.catalog, normalized=dataset_cfg.normalized, fail_fast=dataset_cfg.fail_fast
        )
    return context["catalog"]


class PreparationStage(BaseStage):
    def __init__(self):
        super().__init__(
            stage_id="prepare",
            name="Data Preparation",
            description="Ingest, filter and split the listening events into cross-validation folds.",
        )

    async def process_task(self, context: Dict[str, Any], **kwargs) -> Dict[str, Any]:
        config: PipelineConfig = context["config"]
        dataset_cfg = config.require_dataset(self.stage_id)
        if dataset_cfg.events is None:
            raise ConfigurationError("'prepare' needs 'dataset.events' in the configuration")
        dimension = context.setdefault("dimension", config.dimension())
        catalog = load_catalog(config, context)

        engine = ListeningDataIngestionEngine(delimiter=dataset_cfg.delimiter)
        raw = engine.load_events(dataset_cfg.events, catalog, dimension, fail_fast=dataset_cfg.fail_fast)
        filtered = filter_dataset(
            raw,
            config.filter.min_song_plays,
            config.filter.min_user_events,
            iterate_to_fixpoint=config.filter.iterate_to_fixpoint,
        )
        folds = make_folds(filtered, config.evaluation.folds, config.seed, stratified=config.evaluation.stratified)

        output_dir = config.output_dir
        prepared_dir = output_dir / "prepared"
        write_events(filtered, prepared_dir / "events.csv")
        report_exporter.write_frame(catalog.to_frame(), prepared_dir / "catalog.csv")
        provenance = dict(filtered.provenance)
        provenance["catalog"] = {
            "songs": len(catalog),
            "duplicates": catalog.duplicate_count,
            "clamped": catalog.clamp_counts,
            "rejected_rows": catalog.rejected_rows,
        }
        report_exporter.write_json(provenance, prepared_dir / "provenance.json")
        for fold in folds:
            write_events(fold.train, fold_dir(output_dir, fold.fold_index) / "train.csv")
            write_events(fold.test, fold_dir(output_dir, fold.fold_index) / "test.csv")

        context["dataset"] = filtered
        context["folds"] = [FoldArtifacts(f.fold_index, f.train, f.test) for f in folds]
        return {
            "status": "success",
            "content": {
                "events": len(filtered.events),
                "users": len(filtered.users),
                "songs": len(filtered.songs),
                "folds": len(folds),
            },
            "summary": (
                f"Prepared {len(filtered.events)} events ({len(filtered.users)} users, "
                f"{len(filtered.songs)} songs) in {len(folds)} folds."
            ),
        }
