# core/errors.py
"""
شجرة الأخطاء الموحدة لنظام REMIX.

عائلتان فقط: أخطاء التحقق (مدخلات أو إعدادات غير صالحة، رمز الخروج 1)
وأخطاء التشغيل (فشل أثناء التنفيذ، رمز الخروج 2).
"""
from pathlib import Path
from typing import Iterable, Optional, Union


class RemixError(Exception):
    """الفئة الأساسية لكل أخطاء النظام."""
    exit_code = 2


# --- أخطاء التحقق (exit 1) ---

class RemixValidationError(RemixError, ValueError):
    exit_code = 1


class ConfigurationError(RemixValidationError):
    pass


class SchemaError(RemixValidationError):
    """ملف مدخلات بترويسة ناقصة أو بقيم خارج المفردات المعرّفة."""


class FeatureValidationError(RemixValidationError):
    def __init__(self, feature: str, message: str):
        self.feature = feature
        super().__init__(f"{feature}: {message}")


class RowError(RemixValidationError):
    """سطر غير قابل للتحليل. رقم السطر يبدأ من 1 ويشمل الترويسة."""

    def __init__(self, path: Union[str, Path], line: int, message: str):
        self.path = str(path)
        self.line = line
        super().__init__(f"{self.path}:{line}: {message}")


class EmptyCorpusError(RemixValidationError):
    def __init__(self, condition: str):
        self.condition = condition
        super().__init__(f"playlist corpus for condition '{condition}' has no resolvable songs")


# --- أخطاء التشغيل (exit 2) ---

class RemixRuntimeError(RemixError, RuntimeError):
    exit_code = 2


class NoTrainingSignalError(RemixRuntimeError):
    pass


class UnmodeledConditionError(RemixRuntimeError):
    def __init__(self, condition: str, user_id: Optional[str] = None):
        self.condition = condition
        self.user_id = user_id
        scope = f" for user '{user_id}'" if user_id is not None else ""
        super().__init__(f"unmodeled condition '{condition}'{scope}")


class UnknownSongError(RemixError, LookupError):
    exit_code = 2

    def __init__(self, song_id: str, where: str = "model"):
        self.song_id = song_id
        super().__init__(f"song '{song_id}' is unknown to the {where}")


class KeyMismatchError(RemixRuntimeError):
    def __init__(self, family: str, missing: Iterable[str]):
        self.family = family
        self.missing = sorted(missing)
        preview = ", ".join(self.missing[:10])
        more = f" (+{len(self.missing) - 10} more)" if len(self.missing) > 10 else ""
        super().__init__(f"list family '{family}' has mismatched keys: {preview}{more}")


class ModelMismatchError(RemixRuntimeError):
    pass


class StageFailedError(RemixRuntimeError):
    def __init__(self, stage_id: str, message: str):
        self.stage_id = stage_id
        super().__init__(f"stage '{stage_id}' failed: {message}")
