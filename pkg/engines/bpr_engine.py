# engines/bpr_engine.py
"""
Bayesian Personalized Ranking (BPR) - Matrix Factorization
محرك ترتيب يتعلم من التغذية الراجعة الضمنية: تحسين عشوائي (SGD) على ثلاثيات
(مستخدم، أغنية مسموعة، أغنية غير مسموعة) لتعظيم ln σ(x_ui - x_uj).
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from core.context import ContextCondition
from core.errors import NoTrainingSignalError, UnknownSongError
from engines.recommendation_list import ListEntry, RecommendationList
from ingestion.dataset import Dataset

logger = logging.getLogger("BprEngine")


class BprHyperparameters(BaseModel):
    factors: int = Field(default=10, ge=1, description="بعد المتجهات الكامنة d")
    learning_rate: float = Field(default=0.05, gt=0)
    regularization: float = Field(default=0.01, ge=0, description="معامل L2")
    epochs: int = Field(default=100, ge=1)
    negative_samples: int = Field(default=1, ge=1, description="عدد الأمثلة السلبية لكل مثال إيجابي")
    batch_size: int = Field(default=64, ge=1)
    init_std: float = Field(default=0.1, gt=0)


@dataclass
class EpochStats:
    epoch: int
    loss: float
    auc: float


@dataclass
class BprModel:
    user_ids: Tuple[str, ...]
    item_ids: Tuple[str, ...]
    user_factors: np.ndarray
    item_factors: np.ndarray
    item_bias: np.ndarray
    hyper: BprHyperparameters
    seed: int
    history: List[EpochStats] = field(default_factory=list)
    _user_index: Dict[str, int] = field(init=False, repr=False)
    _item_index: Dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self._user_index = {u: i for i, u in enumerate(self.user_ids)}
        self._item_index = {s: i for i, s in enumerate(self.item_ids)}

    def knows_user(self, user_id: str) -> bool:
        return user_id in self._user_index

    def user_vector(self, user_id: str) -> Optional[np.ndarray]:
        index = self._user_index.get(user_id)
        return None if index is None else self.user_factors[index]

    def score_all(self, user_id: str) -> np.ndarray:
        """درجة كل أغنية يعرفها النموذج؛ المستخدم المجهول يحصل على الانحياز فقط."""
        vector = self.user_vector(user_id)
        if vector is None:
            return self.item_bias.copy()
        return self.item_factors @ vector + self.item_bias


def score(model: BprModel, user_id: str, song_id: str) -> float:
    index = model._item_index.get(song_id)
    if index is None:
        raise UnknownSongError(song_id, "BPR model")
    vector = model.user_vector(user_id)
    if vector is None:
        return float(model.item_bias[index])
    return float(model.item_factors[index] @ vector + model.item_bias[index])


class BprTrainer:
    """مدرّب BPR حتمي: نفس البذرة تعطي نفس المصفوفات بتًا ببت."""

    def __init__(self, hyper: Optional[BprHyperparameters] = None):
        self.hyper = hyper or BprHyperparameters()

    def _sample_epoch(self, rng, event_users, event_items, positives, n_items):
        n_samples = len(event_users) * self.hyper.negative_samples
        picks = rng.integers(0, len(event_users), size=n_samples)
        users = event_users[picks]
        pos = event_items[picks]
        neg = rng.integers(0, n_items, size=n_samples)
        # رفض الأمثلة السلبية التي استمع إليها المستخدم فعلًا وإعادة السحب
        for _ in range(100):
            clash = np.fromiter(
                (j in positives[u] for u, j in zip(users, neg)), dtype=bool, count=n_samples
            )
            if not clash.any():
                break
            neg[clash] = rng.integers(0, n_items, size=int(clash.sum()))
        valid = ~np.fromiter((j in positives[u] for u, j in zip(users, neg)), dtype=bool, count=n_samples)
        return users[valid], pos[valid], neg[valid]

    def train(self, train: Dataset, seed: int = 42, user_order: Optional[Sequence[str]] = None) -> BprModel:
        """user_order يحدد صفوف متجهات المستخدمين (وبالتالي ما تسحبه البذرة لكل مستخدم)."""
        hyper = self.hyper
        if user_order is None:
            user_ids = tuple(sorted(train.users))
        else:
            user_ids = tuple(user_order)
            if set(user_ids) != set(train.users) or len(user_ids) != len(set(user_ids)):
                raise ValueError("user_order must list every training user exactly once")
        item_ids = tuple(sorted(train.songs))
        if not user_ids or not item_ids:
            raise NoTrainingSignalError("BPR needs a non-empty user and item universe")
        if len(item_ids) < 2:
            raise NoTrainingSignalError("BPR needs at least two items to sample negatives")

        rng = np.random.default_rng(seed)
        model = BprModel(
            user_ids=user_ids,
            item_ids=item_ids,
            user_factors=rng.normal(0.0, hyper.init_std, size=(len(user_ids), hyper.factors)),
            item_factors=rng.normal(0.0, hyper.init_std, size=(len(item_ids), hyper.factors)),
            item_bias=np.zeros(len(item_ids)),
            hyper=hyper,
            seed=seed,
        )
        event_users = np.array([model._user_index[e.user_id] for e in train.events], dtype=np.int64)
        event_items = np.array([model._item_index[e.song_id] for e in train.events], dtype=np.int64)
        positives: Dict[int, FrozenSet[int]] = {}
        for u, i in zip(event_users.tolist(), event_items.tolist()):
            positives.setdefault(u, set()).add(i)
        positives = {u: frozenset(items) for u, items in positives.items()}

        logger.info(
            f"🚀 Training BPR on {len(event_users)} events, {len(user_ids)} users, {len(item_ids)} items "
            f"(d={hyper.factors}, epochs={hyper.epochs}, seed={seed})"
        )
        for epoch in range(1, hyper.epochs + 1):
            users, pos, neg = self._sample_epoch(rng, event_users, event_items, positives, len(item_ids))
            if len(users) == 0:
                raise NoTrainingSignalError("every user has interacted with every item; no negatives to sample")
            loss_sum, hits = 0.0, 0
            for start in range(0, len(users), hyper.batch_size):
                batch = slice(start, start + hyper.batch_size)
                batch_loss, batch_hits = self._sgd_step(model, users[batch], pos[batch], neg[batch])
                loss_sum += batch_loss
                hits += batch_hits
            stats = EpochStats(epoch, loss_sum / len(users), hits / len(users))
            model.history.append(stats)
            if epoch == 1 or epoch == hyper.epochs or epoch % 25 == 0:
                logger.info(f"BPR epoch {epoch}/{hyper.epochs}: loss={stats.loss:.4f} sampled AUC={stats.auc:.4f}")
            else:
                logger.debug(f"BPR epoch {epoch}: loss={stats.loss:.4f} sampled AUC={stats.auc:.4f}")

        if not (np.all(np.isfinite(model.user_factors)) and np.all(np.isfinite(model.item_factors))):
            raise NoTrainingSignalError("BPR training diverged to non-finite factors; lower the learning rate")
        logger.info("✅ BPR training complete.")
        return model

    def _sgd_step(self, model: BprModel, users, pos, neg) -> Tuple[float, int]:
        """خطوة SGD لدفعة صغيرة؛ التدرجات تُجمع لكل صف بـ np.add.at."""
        lr, reg = self.hyper.learning_rate, self.hyper.regularization
        p_u = model.user_factors[users]
        q_i = model.item_factors[pos]
        q_j = model.item_factors[neg]
        x_uij = np.einsum("ij,ij->i", p_u, q_i - q_j) + model.item_bias[pos] - model.item_bias[neg]
        # σ(-x) = مشتقة ln σ(x)
        g = np.exp(-np.logaddexp(0.0, x_uij))

        batch_loss = float(np.sum(np.logaddexp(0.0, -x_uij)))
        reg_loss = 0.5 * reg * float(
            np.sum(p_u ** 2) + np.sum(q_i ** 2) + np.sum(q_j ** 2)
            + np.sum(model.item_bias[pos] ** 2) + np.sum(model.item_bias[neg] ** 2)
        )
        hits = int(np.sum(x_uij > 0))

        g_col = g[:, np.newaxis]
        np.add.at(model.user_factors, users, lr * (g_col * (q_i - q_j) - reg * p_u))
        np.add.at(model.item_factors, pos, lr * (g_col * p_u - reg * q_i))
        np.add.at(model.item_factors, neg, lr * (-g_col * p_u - reg * q_j))
        np.add.at(model.item_bias, pos, lr * (g - reg * model.item_bias[pos]))
        np.add.at(model.item_bias, neg, lr * (-g - reg * model.item_bias[neg]))
        return batch_loss + reg_loss, hits


def train_bpr(
    train: Dataset,
    hyper: Optional[BprHyperparameters] = None,
    seed: int = 42,
    user_order: Optional[Sequence[str]] = None,
) -> BprModel:
    return BprTrainer(hyper).train(train, seed, user_order)


def recommend_top_n(
    model: BprModel,
    user_id: str,
    n: int,
    exclude: Iterable[str] = (),
    condition: Optional[ContextCondition] = None,
    source: str = "BPR",
    scoring_user: Optional[str] = None,
) -> RecommendationList:
    """
    أفضل n أغنية حسب الدرجة، مع استبعاد أغاني التدريب للمستخدم.
    scoring_user يسمح بحساب الدرجات بملف فرعي (مستخدم افتراضي) مع إبقاء
    معرّف المستخدم الحقيقي على القائمة.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    scores = model.score_all(scoring_user if scoring_user is not None else user_id)
    excluded = set(exclude)
    candidates = np.array([s not in excluded for s in model.item_ids], dtype=bool)
    indices = np.flatnonzero(candidates)
    # item_ids مرتبة تصاعديًا، فالمفتاح الثانوي (الفهرس) يكسر التعادل بالمعرّف
    order = indices[np.lexsort((indices, -scores[indices]))]
    if len(order) < n:
        logger.warning(f"Only {len(order)} candidate songs for user '{user_id}', fewer than n={n}")
    top = order[:n]
    entries = tuple(ListEntry(model.item_ids[i], float(scores[i])) for i in top)
    return RecommendationList(user_id, condition, entries, source)
