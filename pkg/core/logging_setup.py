# core/logging_setup.py
import logging
import os
from typing import Optional

from dotenv import load_dotenv

LOG_FORMAT = '%(asctime)s - [%(name)s] - %(levelname)s - %(message)s'


def configure_logging(level: Optional[str] = None) -> int:
    """
    إعداد التسجيل بنفس الصيغة في كل نقاط الدخول.
    الأولوية: المعامل الصريح، ثم REMIX_LOG_LEVEL من البيئة أو ملف .env، ثم INFO.
    """
    load_dotenv()
    name = (level or os.getenv("REMIX_LOG_LEVEL") or "INFO").upper()
    resolved = logging.getLevelName(name)
    if not isinstance(resolved, int):
        resolved = logging.INFO
    logging.basicConfig(level=resolved, format=LOG_FORMAT, force=True)
    return resolved
