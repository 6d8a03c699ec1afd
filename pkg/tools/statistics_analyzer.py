# tools/statistics_analyzer.py
"""
Context-Audio Feature Statistics Analyzer
ملفات الحالات (متوسط وتباين كل خاصية صوتية) واختبارات t المستقلة بين كل زوج
حالات داخل البعد، مع تصحيح Bonferroni على عدد الاختبارات المنفّذة فعلًا.
"""
import logging
import math
from dataclasses import dataclass
from itertools import combinations
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.special import betainc

from core.context import ContextCondition
from core.feature_space import FEATURE_NAMES, AudioFeatureVector
from ingestion.dataset import PlaylistCorpus

logger = logging.getLogger("StatisticsAnalyzer")

TTEST_COLUMNS = ["dimension", "condition_a", "condition_b", "feature", "t", "p", "significant", "n_a", "n_b"]
PROFILE_COLUMNS = ["dimension", "condition", "feature", "mean", "variance", "n", "testable"]


@dataclass(frozen=True)
class ConditionProfile:
    condition: ContextCondition
    mean: AudioFeatureVector
    variance: Optional[np.ndarray]
    n: int
    samples: np.ndarray

    @property
    def testable(self) -> bool:
        return self.n >= 2


@dataclass(frozen=True)
class TTestResult:
    dimension: str
    condition_pair: Tuple[str, str]
    feature: str
    t: float
    p: float
    significant: bool
    n_a: int
    n_b: int
    degenerate: bool = False

    def as_row(self) -> Dict[str, object]:
        return {
            "dimension": self.dimension,
            "condition_a": self.condition_pair[0],
            "condition_b": self.condition_pair[1],
            "feature": self.feature,
            "t": self.t,
            "p": self.p,
            "significant": self.significant,
            "n_a": self.n_a,
            "n_b": self.n_b,
        }


def condition_profile(corpus: PlaylistCorpus) -> ConditionProfile:
    samples = corpus.feature_matrix()
    n = samples.shape[0]
    if n == 0:
        raise ValueError(f"corpus '{corpus.condition.name}' is empty")
    mean = AudioFeatureVector.from_array(samples.mean(axis=0))
    variance = samples.var(axis=0, ddof=1) if n >= 2 else None
    if variance is None:
        logger.warning(f"Condition '{corpus.condition.name}' has a single song; profile flagged untestable")
    return ConditionProfile(corpus.condition, mean, variance, n, samples)


def t_distribution_two_sided_p(t: float, df: float) -> float:
    """P(|T| >= |t|) عبر دالة بيتا غير التامة المنتظمة."""
    if math.isinf(t):
        return 0.0
    return float(min(1.0, max(0.0, betainc(df / 2.0, 0.5, df / (df + t * t)))))


def t_test(a: Sequence[float], b: Sequence[float], equal_var: bool = False) -> Tuple[float, float]:
    t, p, _ = _t_test(a, b, equal_var)
    return t, p


def _t_test(a: Sequence[float], b: Sequence[float], equal_var: bool = False) -> Tuple[float, float, bool]:
    """
    اختبار t لعينتين مستقلتين (Welch افتراضيًا). الإشارة موجبة عندما
    mean(a) > mean(b). العلم الثالث يشير إلى الحالة المنحلة (تباين صفري).
    """
    x = np.asarray(a, dtype=float)
    y = np.asarray(b, dtype=float)
    n_a, n_b = x.size, y.size
    if n_a < 2 or n_b < 2:
        raise ValueError("t-test needs at least two samples on each side")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("t-test samples must be finite")

    mean_diff = float(x.mean() - y.mean())
    var_a, var_b = float(x.var(ddof=1)), float(y.var(ddof=1))
    if var_a == 0.0 and var_b == 0.0:
        if mean_diff == 0.0:
            return 0.0, 1.0, True
        return math.copysign(math.inf, mean_diff), 0.0, True

    if equal_var:
        df = float(n_a + n_b - 2)
        pooled = ((n_a - 1) * var_a + (n_b - 1) * var_b) / df
        se = math.sqrt(pooled * (1.0 / n_a + 1.0 / n_b))
    else:
        se_a, se_b = var_a / n_a, var_b / n_b
        se = math.sqrt(se_a + se_b)
        # Welch-Satterthwaite
        df = (se_a + se_b) ** 2 / (se_a ** 2 / (n_a - 1) + se_b ** 2 / (n_b - 1))
    t = mean_diff / se
    return t, t_distribution_two_sided_p(t, df), False


def bonferroni_threshold(alpha: float, m: int) -> float:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if m < 1:
        raise ValueError("Bonferroni correction needs at least one test")
    return alpha / m


class ConditionAnalyzer:
    """أداة تحليل الحالات السياقية مقابل الخصائص الصوتية."""

    def __init__(self, alpha: float = 0.05, equal_var: bool = False):
        self.alpha = alpha
        self.equal_var = equal_var
        logger.info(f"✅ Condition Analyzer Initialized ({'Student' if equal_var else 'Welch'} t-test, alpha={alpha}).")

    def profiles(self, corpora: Mapping[str, Sequence[PlaylistCorpus]]) -> Dict[str, List[ConditionProfile]]:
        return {dim: [condition_profile(c) for c in dim_corpora] for dim, dim_corpora in corpora.items()}

    def compare_all(self, corpora: Mapping[str, Sequence[PlaylistCorpus]]) -> List[TTestResult]:
        """
        اختبار لكل (زوج حالات غير مرتب داخل البعد) × خاصية. الترتيب: البعد، ثم
        الزوج، ثم الخاصية. الأزواج التي تضم حالة غير قابلة للاختبار تُتخطى.
        """
        pending = []
        for dimension, profiles in self.profiles(corpora).items():
            testable = [p for p in profiles if p.testable]
            if len(testable) < 2:
                logger.warning(f"Dimension '{dimension}' has fewer than two testable conditions; skipped")
            for left, right in combinations(profiles, 2):
                if not (left.testable and right.testable):
                    logger.warning(
                        f"Skipping pair {left.condition.name}-{right.condition.name}: a condition has fewer than 2 songs"
                    )
                    continue
                for index, feature in enumerate(FEATURE_NAMES):
                    stat, p, degenerate = _t_test(
                        left.samples[:, index], right.samples[:, index], self.equal_var
                    )
                    pending.append((dimension, left, right, feature, stat, p, degenerate))

        if not pending:
            logger.warning("No t-tests were executed")
            return []
        threshold = bonferroni_threshold(self.alpha, len(pending))
        results = [
            TTestResult(
                dimension=dimension,
                condition_pair=(left.condition.name, right.condition.name),
                feature=feature,
                t=stat,
                p=p,
                significant=p < threshold,
                n_a=left.n,
                n_b=right.n,
                degenerate=degenerate,
            )
            for dimension, left, right, feature, stat, p, degenerate in pending
        ]
        flagged = sum(r.degenerate for r in results)
        if flagged:
            logger.warning(f"{flagged} tests had zero variance in both samples")
        logger.info(
            f"Executed {len(results)} t-tests; Bonferroni threshold {threshold:.6g}; "
            f"{sum(r.significant for r in results)} significant"
        )
        return results


def compare_all(
    corpora: Mapping[str, Sequence[PlaylistCorpus]], alpha: float = 0.05, equal_var: bool = False
) -> List[TTestResult]:
    return ConditionAnalyzer(alpha, equal_var).compare_all(corpora)


def results_frame(results: Sequence[TTestResult]) -> pd.DataFrame:
    return pd.DataFrame([r.as_row() for r in results], columns=TTEST_COLUMNS)


def profiles_frame(profiles: Mapping[str, Sequence[ConditionProfile]]) -> pd.DataFrame:
    """جدول طويل (حالة × خاصية) جاهز لرسم المخططات الرادارية أو الخطية."""
    rows = []
    for dimension, dim_profiles in profiles.items():
        for profile in dim_profiles:
            for index, feature in enumerate(FEATURE_NAMES):
                rows.append(
                    {
                        "dimension": dimension,
                        "condition": profile.condition.name,
                        "feature": feature,
                        "mean": profile.mean.values[index],
                        "variance": float(profile.variance[index]) if profile.variance is not None else np.nan,
                        "n": profile.n,
                        "testable": profile.testable,
                    }
                )
    return pd.DataFrame(rows, columns=PROFILE_COLUMNS)
