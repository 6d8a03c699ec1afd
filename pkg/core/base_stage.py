# core/base_stage.py
import logging
from abc import ABC, abstractmethod
from typing import Any, Dict, Optional

logger = logging.getLogger("BaseStage")


class BaseStage(ABC):
    """
    الفئة الأساسية الموحدة لكل مراحل خط المعالجة (تحليل، تحضير، تدريب،
    إعادة ترتيب، تقييم). كل مرحلة تقرأ ما تحتاجه من قاموس السياق المشترك
    وتضيف إليه مخرجاتها، فيمكن تشغيلها منفردة (من الملفات) أو ضمن خط كامل.
    """

    def __init__(self, stage_id: Optional[str] = None, name: str = "Unnamed Stage", description: str = ""):
        self.stage_id = stage_id or self.__class__.__name__
        self.name = name
        self.description = description

    @abstractmethod
    async def process_task(self, context: Dict[str, Any], **kwargs) -> Dict[str, Any]:
        """
        نقطة الدخول الموحدة التي يستدعيها المنسق.

        Returns:
            قاموس يحتوي على 'status' ('success')، و'content' (المخرجات)،
            و'summary' (جملة للسجل). الفشل يُرفع كاستثناء من core.errors.
        """

    def get_info(self) -> Dict[str, Any]:
        return {
            "id": self.stage_id,
            "name": self.name,
            "description": self.description,
            "type": self.__class__.__name__,
        }
