# core/core_orchestrator.py (V3 - Pipeline Orchestrator)
import logging
from typing import Any, Dict, List, Optional

from core.base_stage import BaseStage
from core.config import PipelineConfig
from stages.analysis_stage import AnalysisStage
from stages.evaluation_stage import EvaluationStage
from stages.preparation_stage import PreparationStage
from stages.rerank_stage import RerankStage
from stages.training_stage import TrainingStage
from tools.report_exporter import report_exporter

logger = logging.getLogger("CoreOrchestrator")

RUN_STATUS_FILE = "run_status.json"

WORKFLOWS: Dict[str, List[str]] = {
    "analyze": ["analyze"],
    "prepare": ["prepare"],
    "train": ["train"],
    "rerank": ["rerank"],
    "evaluate": ["evaluate"],
    "pipeline": ["prepare", "train", "evaluate"],
}


class CoreOrchestrator:
    """
    المنسق الأساسي (V3): يشغّل المراحل بالتتابع على سياق مشترك ويسجل حالة كل
    مرحلة في run_status.json حتى تكون المخرجات الجزئية معروفة عند الفشل.
    """

    def __init__(self):
        self.stages: Dict[str, BaseStage] = {
            stage.stage_id: stage
            for stage in (AnalysisStage(), PreparationStage(), TrainingStage(), RerankStage(), EvaluationStage())
        }
        logger.info(f"✅ CoreOrchestrator (V3) initialized with {len(self.stages)} registered stages.")

    def plan(self, workflow: str, config: PipelineConfig) -> List[str]:
        if workflow not in WORKFLOWS:
            raise ValueError(f"unknown workflow '{workflow}'")
        stage_ids = list(WORKFLOWS[workflow])
        if workflow == "pipeline" and config.analysis is not None:
            stage_ids.insert(0, "analyze")
        return stage_ids

    def _write_status(self, config: PipelineConfig, state: Dict[str, Any]):
        report_exporter.write_json(state, config.output_dir / RUN_STATUS_FILE)

    async def run_workflow(
        self, workflow: str, config: PipelineConfig, context: Optional[Dict[str, Any]] = None
    ) -> Dict[str, Any]:
        stage_ids = self.plan(workflow, config)
        context = context if context is not None else {}
        context["config"] = config
        state: Dict[str, Any] = {
            "workflow": workflow,
            "status": "running",
            "stages": [{"stage": stage_id, "status": "pending"} for stage_id in stage_ids],
        }
        logger.info(f"🚀 Starting workflow '{workflow}' with stages {stage_ids}")
        config.output_dir.mkdir(parents=True, exist_ok=True)
        self._write_status(config, state)

        for entry in state["stages"]:
            stage = self.stages[entry["stage"]]
            entry["status"] = "running"
            logger.info(f"--- ▶ Stage '{stage.stage_id}': {stage.name} ---")
            try:
                output = await stage.process_task(context)
            except Exception as e:
                logger.error(f"❌ Stage '{stage.stage_id}' of workflow '{workflow}' failed: {e}", exc_info=True)
                entry["status"] = "failed"
                entry["error"] = f"{type(e).__name__}: {e}"
                state["status"] = "failed"
                self._write_status(config, state)
                raise
            entry["status"] = "completed"
            entry["summary"] = output.get("summary", "No summary provided.")
            entry["content"] = output.get("content", {})
            logger.info(f"[{stage.stage_id}] ✅ {entry['summary']}")
            self._write_status(config, state)

        state["status"] = "completed"
        self._write_status(config, state)
        return state


# إنشاء مثيل وحيد
core_orchestrator = CoreOrchestrator()
