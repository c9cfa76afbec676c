"""NIL prediction over surviving candidate scores.

Statistical heuristics compare the top score against a threshold or against
the runner-up / median / mean via a percentage-deviation ratio; string
heuristics compare the mention surface with the top candidate's label; the
trained alternative is a from-scratch logistic regression over score and
string features. A mention with no surviving candidate is always NIL.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from statistics import median

import numpy as np

__all__ = [
    "SCORE_KINDS",
    "STRING_KINDS",
    "NilRule",
    "NilObservation",
    "normalize_scores",
    "nil_fixed",
    "nil_dev_top",
    "nil_dev_median",
    "nil_dev_mean",
    "nil_string",
    "levenshtein_similarity",
    "jaccard_similarity",
    "hamming_similarity",
    "nil_statistic",
    "predict_nil",
    "sweep_tau",
    "FEATURE_ORDER",
    "nil_features",
    "logistic_loss_grad",
    "logistic_train",
    "logistic_predict",
]

SCORE_KINDS = ("fixed", "dev_top", "dev_median", "dev_mean")
STRING_KINDS = ("levenshtein", "jaccard", "hamming")

FEATURE_ORDER = ("s0", "gap_top", "dev_top", "dev_median", "dev_mean",
                 "levenshtein_sim")


@dataclass(frozen=True)
class NilRule:
    kind: str  # fixed | dev_* | levenshtein | jaccard | hamming | logistic
    tau: float = 0.0
    weights: tuple[float, ...] | None = None  # logistic only; bias last
    feature_order: tuple[str, ...] = FEATURE_ORDER

    def __post_init__(self):
        if self.kind not in (*SCORE_KINDS, *STRING_KINDS, "logistic"):
            raise ValueError(f"unknown NIL rule kind {self.kind!r}")
        if self.kind != "logistic" and not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must lie in [0, 1], got {self.tau}")

    def to_json(self) -> str:
        return json.dumps({
            "kind": self.kind,
            "tau": self.tau,
            "weights": list(self.weights) if self.weights else None,
            "feature_order": list(self.feature_order),
        })

    @classmethod
    def from_json(cls, text: str) -> "NilRule":
        obj = json.loads(text)
        return cls(kind=obj["kind"], tau=obj.get("tau", 0.0),
                   weights=tuple(obj["weights"]) if obj.get("weights") else None,
                   feature_order=tuple(obj.get("feature_order", FEATURE_ORDER)))


@dataclass(frozen=True)
class NilObservation:
    """Everything a NIL rule may look at for one mention."""

    scores: tuple[float, ...]  # surviving candidate scores, descending
    surface: str = ""
    top_label: str = ""
    top_qid: str | None = None
    gold_link: str | None = None

    def __post_init__(self):
        if any(a < b for a, b in zip(self.scores, self.scores[1:])):
            raise ValueError("scores must be sorted descending")


def normalize_scores(scores: list[float], mode: str) -> list[float]:
    """Map raw scores to [0, 1]; ``minmax`` is for unbounded backends."""
    if mode == "none" or not scores:
        return list(scores)
    if mode != "minmax":
        raise ValueError(f"unknown normalization mode {mode!r}")
    lo, hi = min(scores), max(scores)
    if hi == lo:
        return [1.0 for _ in scores]
    return [(s - lo) / (hi - lo) for s in scores]


def _pct_deviation(s0: float, anchor: float) -> float:
    denom = (s0 + anchor) / 2.0
    return (s0 - anchor) / denom if denom != 0 else 0.0


def nil_fixed(scores, tau: float) -> bool:
    return scores[0] < tau


def nil_dev_top(scores, tau: float) -> bool:
    if len(scores) < 2:
        return nil_fixed(scores, tau)
    return _pct_deviation(scores[0], scores[1]) < tau


def nil_dev_median(scores, tau: float) -> bool:
    return _pct_deviation(scores[0], median(scores)) < tau


def nil_dev_mean(scores, tau: float) -> bool:
    return _pct_deviation(scores[0], sum(scores) / len(scores)) < tau


def levenshtein_similarity(a: str, b: str) -> float:
    """1 - edit distance / max length; 1.0 for two empty strings."""
    if not a and not b:
        return 1.0
    if not a or not b:
        return 0.0
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1,
                           prev[j - 1] + (ca != cb)))
        prev = cur
    return 1.0 - prev[-1] / max(len(a), len(b))


def _bigrams(s: str) -> set[str]:
    return {s[i:i + 2] for i in range(len(s) - 1)}


def jaccard_similarity(a: str, b: str) -> float:
    """Character-bigram Jaccard; degenerate short strings compare by equality."""
    ba, bb = _bigrams(a), _bigrams(b)
    if not ba and not bb:
        return 1.0 if a == b else 0.0
    return len(ba & bb) / len(ba | bb)


def hamming_similarity(a: str, b: str) -> float:
    """Matching positions over the longer length (shorter side padded)."""
    if not a and not b:
        return 1.0
    longest = max(len(a), len(b))
    return sum(ca == cb for ca, cb in zip(a, b)) / longest


_STRING_SIMS = {
    "levenshtein": levenshtein_similarity,
    "jaccard": jaccard_similarity,
    "hamming": hamming_similarity,
}


def nil_string(mention_surface: str, entity_label: str, kind: str,
               tau: float) -> bool:
    return _STRING_SIMS[kind](mention_surface, entity_label) < tau


def nil_statistic(kind: str, obs: NilObservation) -> float:
    """The monotone statistic the rule compares against tau (NIL iff < tau).

    An empty score vector maps to -inf: no candidate, always NIL.
    """
    if not obs.scores:
        return float("-inf")
    s = obs.scores
    if kind == "fixed":
        return s[0]
    if kind == "dev_top":
        return s[0] if len(s) < 2 else _pct_deviation(s[0], s[1])
    if kind == "dev_median":
        return _pct_deviation(s[0], median(s))
    if kind == "dev_mean":
        return _pct_deviation(s[0], sum(s) / len(s))
    if kind in _STRING_SIMS:
        return _STRING_SIMS[kind](obs.surface, obs.top_label)
    raise ValueError(f"no threshold statistic for kind {kind!r}")


def predict_nil(rule: NilRule, obs: NilObservation) -> bool:
    if not obs.scores:
        return True
    if rule.kind == "logistic":
        return logistic_predict(rule, nil_features(obs))
    return nil_statistic(rule.kind, obs) < rule.tau


def sweep_tau(kind: str, observations: list[NilObservation],
              ) -> tuple[float, float]:
    """Best tau on the 1001-point grid over [0, 1] by micro-F1; ties take the
    smallest tau. Observations must carry ``gold_link`` and ``top_qid``."""
    if not observations:
        raise ValueError("cannot sweep tau on empty development data")
    stats = np.array([nil_statistic(kind, o) for o in observations])
    gold_nil = np.array([o.gold_link == "NIL" for o in observations])
    link_ok = np.array([o.top_qid is not None and o.top_qid == o.gold_link
                        for o in observations])
    grid = np.arange(1001) / 1000.0
    nil_mask = stats[None, :] < grid[:, None]  # (1001, n)
    correct = np.where(nil_mask, gold_nil[None, :], link_ok[None, :])
    f1 = correct.sum(axis=1) / len(observations)
    best = int(np.argmax(f1))  # argmax returns the first (smallest) tau
    return float(grid[best]), float(f1[best])


def nil_features(obs: NilObservation) -> np.ndarray:
    s = obs.scores
    if not s:
        return np.zeros(len(FEATURE_ORDER))
    s0 = s[0]
    s1 = s[1] if len(s) > 1 else s0
    return np.array([
        s0,
        s0 - s1,
        _pct_deviation(s0, s1),
        _pct_deviation(s0, median(s)),
        _pct_deviation(s0, sum(s) / len(s)),
        levenshtein_similarity(obs.surface, obs.top_label),
    ])


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_loss_grad(weights: np.ndarray, features: np.ndarray,
                       labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy and its gradient; features are bias-augmented."""
    z = features @ weights
    p = _sigmoid(z)
    eps = 1e-12
    loss = -float(np.mean(labels * np.log(p + eps)
                          + (1 - labels) * np.log(1 - p + eps)))
    grad = features.T @ (p - labels) / len(labels)
    return loss, grad


def _augment(features: np.ndarray) -> np.ndarray:
    features = np.atleast_2d(np.asarray(features, dtype=float))
    return np.hstack([features, np.ones((len(features), 1))])


def logistic_train(features: np.ndarray, labels: np.ndarray,
                   epochs: int = 2000, lr: float = 0.5) -> NilRule:
    """Gradient-descent logistic regression; labels are gold-NIL booleans."""
    X = _augment(features)
    y = np.asarray(labels, dtype=float)
    if len(set(y.tolist())) < 2:
        warnings.warn("single-class training data: fitting a constant "
                      "predictor", stacklevel=2)
        bias = 1000.0 if (len(y) and y[0] == 1.0) else -1000.0
        w = np.zeros(X.shape[1])
        w[-1] = bias
        return NilRule(kind="logistic", weights=tuple(w))
    w = np.zeros(X.shape[1])
    for _ in range(epochs):
        _, grad = logistic_loss_grad(w, X, y)
        w -= lr * grad
    return NilRule(kind="logistic", weights=tuple(w))


def logistic_predict(rule: NilRule, features: np.ndarray) -> bool:
    """NIL iff the predicted probability strictly exceeds 0.5."""
    if rule.weights is None:
        raise ValueError("logistic rule has no trained weights")
    z = float(_augment(features)[0] @ np.asarray(rule.weights))
    return bool(_sigmoid(np.array([z]))[0] > 0.5)
