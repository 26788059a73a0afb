"""Pattern classification from community visits and community-preference coefficients.

流れ:
  1. build_feature_space   … 訪問ユーザー数が min_users 以上のコミュニティを列に採用
  2. tfidf_weight          … count · ln(N / df) で重み付け（平滑化なし）
  3. split_train_test      … seed 固定のシャッフル分割（層化はオプション）
  4. train_classifier      … L2 付き多クラス（softmax）ロジスティック回帰を L-BFGS-B で学習
  5. evaluate / top_coefficients
"""

from __future__ import annotations

import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize, sparse
from scipy.special import logsumexp
from sklearn.metrics import confusion_matrix, precision_recall_fscore_support
from sklearn.model_selection import train_test_split

from app.mobility.event import iter_trajectories

logger = logging.getLogger(__name__)

TFIDF_FORMULA = "weight(u,c) = count(u,c) * ln(N / df(c)); N = users, df(c) = users with count(u,c) > 0"
DEFAULT_MIN_USERS = 50
DEFAULT_TRAIN_FRACTION = 0.8
DEFAULT_L2_STRENGTH = 1.0
DEFAULT_MAX_ITER = 1000
GRADIENT_TOLERANCE = 1e-6

UserCounts = Dict[str, Dict[str, int]]


@dataclass
class FeatureSpace:
    communities: List[str]
    index: Dict[str, int] = field(default_factory=dict)
    user_sizes: Dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if len(set(self.communities)) != len(self.communities):
            raise ValueError("feature space has duplicate communities")
        if not self.index:
            self.index = {c: i for i, c in enumerate(self.communities)}

    def __len__(self) -> int:
        return len(self.communities)


@dataclass
class WeightedFeatures:
    user_ids: List[str]
    matrix: sparse.csr_matrix
    dropped_users: List[str] = field(default_factory=list)
    formula: str = TFIDF_FORMULA
    n_documents: int = 0

    def rows_for(self, user_ids: Sequence[str]) -> sparse.csr_matrix:
        position = {u: i for i, u in enumerate(self.user_ids)}
        return self.matrix[[position[u] for u in user_ids]]


@dataclass
class ClassifierModel:
    classes: List[str]
    weights: np.ndarray
    bias: np.ndarray
    feature_space: FeatureSpace
    l2_strength: float
    iterations: int
    converged: bool
    seed: int = 0
    loss_history: List[float] = field(default_factory=list)

    def __post_init__(self):
        if self.weights.shape != (len(self.classes), len(self.feature_space)):
            raise ValueError("classifier weights do not match the feature space")

    def decision_function(self, features: Any) -> np.ndarray:
        return np.asarray(features @ self.weights.T) + self.bias

    def predict_proba(self, features: Any) -> np.ndarray:
        logits = self.decision_function(features)
        return np.exp(logits - logsumexp(logits, axis=1, keepdims=True))

    def predict(self, features: Any) -> List[str]:
        return [self.classes[i] for i in np.argmax(self.decision_function(features), axis=1)]


@dataclass
class EvalReport:
    labels: List[str]
    precision: Dict[str, float]
    recall: Dict[str, float]
    f1: Dict[str, float]
    support: Dict[str, int]
    macro: Dict[str, float]
    weighted: Dict[str, float]
    accuracy: float
    confusion: List[List[int]]
    warnings: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "labels": self.labels,
            "per_class": {
                label: {
                    "precision": self.precision[label],
                    "recall": self.recall[label],
                    "f1": self.f1[label],
                    "support": self.support[label],
                }
                for label in self.labels
            },
            "macro": self.macro,
            "weighted": self.weighted,
            "accuracy": self.accuracy,
            "confusion_matrix": self.confusion,
            "warnings": self.warnings,
        }


def user_community_counts(trajectories: Any) -> UserCounts:
    counts: UserCounts = {}
    for traj in iter_trajectories(trajectories):
        counts[traj.user_id] = dict(Counter(traj.communities))
    return counts


def build_feature_space(trajectories: Any, min_users: int = DEFAULT_MIN_USERS) -> FeatureSpace:
    """Communities with at least ``min_users`` distinct visitors, in lexicographic order."""
    if min_users < 1:
        raise ValueError("min_users must be >= 1")
    visitors: Dict[str, int] = defaultdict(int)
    for traj in iter_trajectories(trajectories):
        for community in set(traj.communities):
            visitors[community] += 1
    kept = sorted(c for c, n in visitors.items() if n >= min_users)
    if not kept:
        raise ValueError(f"no community has {min_users} or more distinct visitors")
    logger.info("Feature space: %d of %d communities have >= %d users", len(kept), len(visitors), min_users)
    return FeatureSpace(communities=kept, user_sizes={c: visitors[c] for c in kept})


def tfidf_weight(counts: Mapping[str, Mapping[str, int]], space: FeatureSpace) -> WeightedFeatures:
    n_documents = len(counts)
    df = np.zeros(len(space), dtype=np.int64)
    for user_counts in counts.values():
        for community, count in user_counts.items():
            col = space.index.get(community)
            if col is not None and count > 0:
                df[col] += 1
    if np.any(df == 0):
        missing = space.communities[int(np.argmax(df == 0))]
        raise ValueError(f"community {missing!r} is in the feature space but no user visited it")
    idf = np.log(n_documents / df)

    rows: List[int] = []
    cols: List[int] = []
    data: List[float] = []
    user_ids: List[str] = []
    dropped: List[str] = []
    for user_id in sorted(counts):
        entries = [
            (space.index[c], count * idf[space.index[c]])
            for c, count in counts[user_id].items()
            if c in space.index and count > 0
        ]
        entries = [(col, w) for col, w in entries if w > 0]
        if not entries:
            dropped.append(user_id)
            continue
        row = len(user_ids)
        user_ids.append(user_id)
        for col, weight in sorted(entries):
            rows.append(row)
            cols.append(col)
            data.append(float(weight))

    if dropped:
        logger.warning("%d users have no weighted community and were dropped", len(dropped))
    matrix = sparse.csr_matrix((data, (rows, cols)), shape=(len(user_ids), len(space)), dtype=np.float64)
    return WeightedFeatures(
        user_ids=user_ids,
        matrix=matrix,
        dropped_users=dropped,
        n_documents=n_documents,
    )


def split_train_test(
    users: Sequence[str],
    labels: Sequence[str],
    train_fraction: float = DEFAULT_TRAIN_FRACTION,
    seed: int = 0,
    *,
    stratify: bool = False,
) -> Tuple[List[str], List[str], List[str]]:
    """Seeded shuffle split; the train side gets ``floor(fraction * n)`` users.

    Returns ``(train_users, test_users, warnings)``.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    if len(users) != len(labels):
        raise ValueError("users and labels differ in length")
    n_train = math.floor(train_fraction * len(users))
    n_test = len(users) - n_train
    if n_train < 1 or n_test < 1:
        raise ValueError(f"cannot split {len(users)} users with train_fraction={train_fraction}")

    train_users, test_users, train_labels, _ = train_test_split(
        list(users),
        list(labels),
        train_size=n_train,
        test_size=n_test,
        random_state=seed,
        shuffle=True,
        stratify=list(labels) if stratify else None,
    )
    warnings = [
        f"class {label} is absent from the training split"
        for label in sorted(set(labels) - set(train_labels))
    ]
    for message in warnings:
        logger.warning(message)
    return list(train_users), list(test_users), warnings


def _softmax_loss(
    params: np.ndarray,
    X: sparse.csr_matrix,
    Y: np.ndarray,
    l2_strength: float,
) -> Tuple[float, np.ndarray]:
    n, d = X.shape
    n_classes = Y.shape[1]
    W = params[: n_classes * d].reshape(n_classes, d)
    b = params[n_classes * d:]

    logits = np.asarray(X @ W.T) + b
    log_norm = logsumexp(logits, axis=1, keepdims=True)
    log_proba = logits - log_norm
    loss = -float(np.sum(Y * log_proba)) / n + 0.5 * l2_strength * float(np.sum(W * W))

    residual = (np.exp(log_proba) - Y) / n
    grad_W = np.asarray((X.T @ residual).T) + l2_strength * W
    grad_b = residual.sum(axis=0)
    return loss, np.concatenate([grad_W.ravel(), grad_b])


def train_classifier(
    features: sparse.csr_matrix,
    labels: Sequence[str],
    space: FeatureSpace,
    l2_strength: float = DEFAULT_L2_STRENGTH,
    max_iter: int = DEFAULT_MAX_ITER,
    seed: int = 0,
) -> ClassifierModel:
    """Multinomial logistic regression with an L2 penalty on the weights (bias unpenalized).

    Loss = mean cross-entropy + (l2_strength / 2) * ||W||^2, minimized from a
    zero start with L-BFGS-B until the projected gradient norm drops below 1e-6.
    """
    if l2_strength < 0:
        raise ValueError("l2_strength must be >= 0")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    X = sparse.csr_matrix(features, dtype=np.float64)
    if X.shape[0] != len(labels):
        raise ValueError("features and labels differ in length")
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise ValueError("training needs at least two classes")

    class_index = {c: i for i, c in enumerate(classes)}
    Y = np.zeros((X.shape[0], len(classes)), dtype=np.float64)
    Y[np.arange(X.shape[0]), [class_index[label] for label in labels]] = 1.0

    history: List[float] = []

    def record(xk: np.ndarray) -> None:
        history.append(_softmax_loss(xk, X, Y, l2_strength)[0])

    x0 = np.zeros(len(classes) * (X.shape[1] + 1), dtype=np.float64)
    history.append(_softmax_loss(x0, X, Y, l2_strength)[0])
    result = optimize.minimize(
        _softmax_loss,
        x0,
        args=(X, Y, l2_strength),
        jac=True,
        method="L-BFGS-B",
        callback=record,
        options={"maxiter": max_iter, "gtol": GRADIENT_TOLERANCE, "ftol": 1e-15},
    )
    if not result.success:
        logger.warning("classifier did not converge after %d iterations: %s", result.nit, result.message)

    d = X.shape[1]
    weights = result.x[: len(classes) * d].reshape(len(classes), d)
    bias = result.x[len(classes) * d:]
    return ClassifierModel(
        classes=classes,
        weights=weights,
        bias=bias,
        feature_space=space,
        l2_strength=l2_strength,
        iterations=int(result.nit),
        converged=bool(result.success),
        seed=seed,
        loss_history=history,
    )


def evaluate(model: ClassifierModel, features: Any, labels: Sequence[str]) -> EvalReport:
    if len(labels) == 0:
        raise ValueError("evaluation needs a non-empty test set")
    predicted = model.predict(features)
    label_set = sorted(set(model.classes) | set(labels))

    precision, recall, f1, support = precision_recall_fscore_support(
        labels, predicted, labels=label_set, zero_division=0
    )
    warnings = [
        f"class {label} has no predicted positives; precision set to 0"
        for label in label_set
        if label not in predicted
    ]
    for message in warnings:
        logger.warning(message)

    averages = {}
    for average in ("macro", "weighted"):
        p, r, f, _ = precision_recall_fscore_support(
            labels, predicted, labels=label_set, average=average, zero_division=0
        )
        averages[average] = {"precision": float(p), "recall": float(r), "f1": float(f)}

    matrix = confusion_matrix(labels, predicted, labels=label_set)
    accuracy = sum(1 for a, b in zip(labels, predicted) if a == b) / len(labels)
    return EvalReport(
        labels=label_set,
        precision=dict(zip(label_set, map(float, precision))),
        recall=dict(zip(label_set, map(float, recall))),
        f1=dict(zip(label_set, map(float, f1))),
        support=dict(zip(label_set, map(int, support))),
        macro=averages["macro"],
        weighted=averages["weighted"],
        accuracy=accuracy,
        confusion=matrix.tolist(),
        warnings=warnings,
    )


def top_coefficients(
    model: ClassifierModel,
    class_label: str,
    n: int,
) -> Tuple[List[Tuple[str, float]], List[Tuple[str, float]]]:
    """Top ``n`` communities by descending and by ascending coefficient; ties by community id."""
    if class_label not in model.classes:
        raise ValueError(f"unknown class {class_label!r}")
    if n < 0:
        raise ValueError("n must be >= 0")
    row = model.weights[model.classes.index(class_label)]
    pairs = [(c, float(row[i])) for i, c in enumerate(model.feature_space.communities)]
    positive = sorted(pairs, key=lambda item: (-item[1], item[0]))[:n]
    negative = sorted(pairs, key=lambda item: (item[1], item[0]))[:n]
    return positive, negative


def coefficient_rows(model: ClassifierModel, n: Optional[int] = None) -> List[Dict[str, Any]]:
    """Rows for coefficients.csv: every class, communities in descending coefficient order."""
    rows: List[Dict[str, Any]] = []
    limit = len(model.feature_space) if n is None else n
    for label in model.classes:
        positive, _ = top_coefficients(model, label, limit)
        for community, coef in positive:
            rows.append(
                {
                    "class": label,
                    "community": community,
                    "coefficient": coef,
                    "user_size": model.feature_space.user_sizes.get(community, 0),
                }
            )
    return rows
