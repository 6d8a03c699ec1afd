# tools/report_exporter.py
"""
أداة تصدير التقارير: تحويل النتائج الخام إلى ملفات محددة بفواصل ثابتة البايتات
(نفس المدخلات والبذور تعطي نفس الملفات حرفيًا).
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Union

import pandas as pd

from engines.recommendation_list import RecommendationList
from engines.rerank_engine import reranked_frame_rows
from tools.evaluation_tools import INITIAL_VARIANT, EvaluationReport, best_lambda

logger = logging.getLogger("ReportExporter")

PathLike = Union[str, Path]
FLOAT_FORMAT = "%.6f"


def lambda_label(lam: float) -> str:
    return f"lambda={lam:.1f}" if round(lam, 1) == lam else f"lambda={lam:g}"


class ReportExporter:
    """كل ملف يُكتب بترتيب صفوف حتمي وبصيغة أرقام ثابتة."""

    def __init__(self, float_format: str = FLOAT_FORMAT):
        self.float_format = float_format
        logger.info("✅ Report Exporter Initialized.")

    def write_frame(self, frame: pd.DataFrame, path: PathLike, float_format: Optional[str] = None) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format=float_format or self.float_format, lineterminator="\n")
        logger.debug(f"Wrote {len(frame)} rows to {path}")
        return path

    def write_json(self, payload: Mapping[str, Any], path: PathLike) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
        return path

    # --- تقارير التقييم ---

    def long_table(self, report: EvaluationReport, algorithm: str, list_size: int) -> pd.DataFrame:
        """صف لكل (نموذج، وضع، λ) وعمودا Prec@k و MAP@k لكل k."""
        k_values = sorted({r.k for r in report.rows})
        records: Dict[tuple, Dict[str, Any]] = {}
        for row in report.select(algorithm=algorithm, list_size=list_size):
            record = records.setdefault(
                (row.variant, row.mode, row.lambda_),
                {"variant": row.variant, "mode": row.mode, "lambda": row.lambda_, "folds": 0},
            )
            record[f"prec_at_{row.k}"] = row.prec_at_k
            record[f"map_at_{row.k}"] = row.map_at_k
            record["folds"] = max(record["folds"], row.folds)
        columns = ["variant", "mode", "lambda"]
        for k in k_values:
            columns += [f"prec_at_{k}", f"map_at_{k}"]
        return pd.DataFrame(list(records.values()), columns=columns + ["folds"])

    def appendix_table(self, report: EvaluationReport, algorithm: str, list_size: int) -> pd.DataFrame:
        """جدول عريض: صفوف (نموذج، وضع، مقياس) × أعمدة λ؛ الصف الأصلي يتكرر على كل λ."""
        lambdas = report.lambdas()
        rows = []
        for k in sorted({r.k for r in report.rows}):
            initial = report.initial_row(algorithm, list_size, k)
            if initial is None:
                continue
            groups = [(INITIAL_VARIANT, initial.mode)]
            for row in report.select(algorithm=algorithm, list_size=list_size, k=k):
                if row.variant != INITIAL_VARIANT and (row.variant, row.mode) not in groups:
                    groups.append((row.variant, row.mode))
            for variant, mode in groups:
                for metric in ("prec_at_k", "map_at_k"):
                    record: Dict[str, Any] = {"k": k, "variant": variant, "mode": mode, "metric": metric.replace("_k", f"_{k}")}
                    for lam in lambdas:
                        if variant == INITIAL_VARIANT:
                            source = initial
                        else:
                            matches = report.select(
                                algorithm=algorithm, list_size=list_size, k=k, variant=variant, mode=mode, lambda_=lam
                            )
                            source = matches[0] if matches else None
                        record[lambda_label(lam)] = getattr(source, metric) if source is not None else None
                    rows.append(record)
        return pd.DataFrame(rows, columns=["k", "variant", "mode", "metric"] + [lambda_label(l) for l in lambdas])

    def plot_data(self, report: EvaluationReport) -> pd.DataFrame:
        """بيانات طويلة للرسم: λ على المحور الأفقي و MAP@k على العمودي، سلسلة لكل نموذج."""
        lambdas = report.lambdas()
        rows = []
        for row in report.rows:
            points = lambdas if row.variant == INITIAL_VARIANT else [row.lambda_]
            for lam in points:
                rows.append(
                    {
                        "algorithm": row.algorithm,
                        "list_size": row.list_size,
                        "k": row.k,
                        "series": row.variant if row.variant == INITIAL_VARIANT else f"{row.variant}-{row.mode}",
                        "lambda": lam,
                        "map_at_k": row.map_at_k,
                        "prec_at_k": row.prec_at_k,
                    }
                )
        return pd.DataFrame(rows, columns=["algorithm", "list_size", "k", "series", "lambda", "map_at_k", "prec_at_k"])

    def export_evaluation(self, report: EvaluationReport, directory: PathLike) -> List[Path]:
        directory = Path(directory)
        written = []
        pairs = sorted({(r.algorithm, r.list_size) for r in report.rows}, key=lambda p: (p[0], -p[1]))
        for algorithm, list_size in pairs:
            written.append(self.write_frame(self.long_table(report, algorithm, list_size), directory / f"{algorithm}_top{list_size}.csv"))
            written.append(
                self.write_frame(self.appendix_table(report, algorithm, list_size), directory / f"{algorithm}_top{list_size}_table.csv")
            )
        written.append(self.write_frame(self.plot_data(report), directory / "plot_data.csv"))
        best = pd.DataFrame([b._asdict() for b in best_lambda(report)])
        written.append(self.write_frame(best, directory / "best_lambda.csv"))
        written.append(self.write_frame(report.to_frame(), directory / "evaluation.csv"))
        logger.info(f"Exported {len(written)} evaluation files to {directory}")
        return written

    # --- القوائم ---

    def export_lists(self, lists: Iterable[RecommendationList], path: PathLike, audit: bool = False) -> Path:
        rows = reranked_frame_rows(lists)
        columns = ["user_id", "condition", "rank", "song_id", "score"]
        if audit:
            columns += ["sim", "rec_norm", "new_score"]
        frame = pd.DataFrame(rows, columns=["user_id", "condition", "rank", "song_id", "score", "sim", "rec_norm", "new_score"])
        # دقة كاملة للدرجات
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame[columns].to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
        return path

    # --- التحليل ---

    def export_analysis(self, ttests: pd.DataFrame, profiles: pd.DataFrame, directory: PathLike) -> Sequence[Path]:
        directory = Path(directory)
        return (
            self.write_frame(ttests, directory / "ttests.csv", float_format="%.6g"),
            self.write_frame(profiles, directory / "condition_profiles.csv"),
        )


# إنشاء مثيل وحيد
report_exporter = ReportExporter()
