# stages/analysis_stage.py
import logging
from typing import Any, Dict, List

from core.base_stage import BaseStage
from core.config import PipelineConfig
from core.errors import ConfigurationError
from ingestion.dataset import PlaylistCorpus
from ingestion.ingestion_engine import ListeningDataIngestionEngine
from stages.preparation_stage import load_catalog
from tools.report_exporter import report_exporter
from tools.statistics_analyzer import ConditionAnalyzer, profiles_frame, results_frame

logger = logging.getLogger("AnalysisStage")


class AnalysisStage(BaseStage):
    """تحليل الخصائص الصوتية لمدونات قوائم التشغيل لكل حالة سياقية."""

    def __init__(self):
        super().__init__(
            stage_id="analyze",
            name="Context-Audio Feature Analysis",
            description="Condition profiles and Bonferroni-corrected pairwise t-tests per dimension.",
        )

    async def process_task(self, context: Dict[str, Any], **kwargs) -> Dict[str, Any]:
        config: PipelineConfig = context["config"]
        settings = config.analysis
        if settings is None:
            raise ConfigurationError("'analyze' needs an 'analysis' section with a 'playlists' path")
        catalog = load_catalog(config, context)
        dimensions = [d.build() for d in settings.dimensions]

        engine = ListeningDataIngestionEngine(delimiter=config.require_dataset(self.stage_id).delimiter)
        corpora = engine.load_playlist_corpus(settings.playlists, catalog, dimensions)
        grouped: Dict[str, List[PlaylistCorpus]] = {}
        for condition, corpus in corpora.items():
            grouped.setdefault(condition.dimension, []).append(corpus)

        analyzer = ConditionAnalyzer(alpha=settings.alpha, equal_var=settings.equal_var)
        results = analyzer.compare_all(grouped)
        profiles = analyzer.profiles(grouped)
        files = report_exporter.export_analysis(
            results_frame(results), profiles_frame(profiles), config.output_dir / "analysis"
        )
        report_exporter.write_json(
            {f"{c.dimension}/{c.name}": corpus.metadata() for c, corpus in corpora.items()},
            config.output_dir / "analysis" / "corpora.json",
        )
        context["ttests"] = results
        significant = sum(r.significant for r in results)
        return {
            "status": "success",
            "content": {"tests": len(results), "significant": significant, "files": [str(p) for p in files]},
            "summary": f"Ran {len(results)} t-tests over {len(grouped)} dimensions; {significant} significant.",
        }
