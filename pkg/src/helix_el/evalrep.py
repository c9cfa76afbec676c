"""Scoring and analysis of linking runs.

Mention-level micro scores follow the historical-NE evaluation convention:
one prediction per gold mention, strict label equality (a prediction is
correct iff it equals the gold QID, or both sides are NIL), and a missing
prediction counts against recall but not precision.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, asdict

import numpy as np
from scipy.stats import t as student_t

from .corpus import Document, MentionAnnotation
from .kbstore import KB, resolve_entity_date
from .retrieval import CandidateSet, phi_d, phi_t

__all__ = [
    "EvalResult",
    "ErrorBreakdown",
    "AgreementInput",
    "score",
    "plausibility_score",
    "error_breakdown",
    "krippendorff_alpha",
    "spearman",
    "spearman_test",
    "popularity_preference",
    "popularity_histogram",
]

NIL = "NIL"


@dataclass(frozen=True)
class EvalResult:
    precision: float
    recall: float
    f1: float
    n_correct: int
    n_wrong: int
    n_total: int
    n_missing: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def _f1(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if (p + r) > 0 else 0.0


def score(predictions: dict[str, str],
          gold: list[MentionAnnotation]) -> EvalResult:
    """Micro mention-level scores for a {mention_id: QID-or-NIL} mapping."""
    gold_ids = {m.mention_id for m in gold}
    unknown = set(predictions) - gold_ids
    if unknown:
        raise ValueError(f"predictions for unknown mention ids: "
                         f"{sorted(unknown)[:5]}")
    n_total = len(gold)
    n_emitted = 0
    n_correct = 0
    for mention in gold:
        predicted = predictions.get(mention.mention_id)
        if predicted is None:
            continue
        n_emitted += 1
        if predicted == mention.gold_link:
            n_correct += 1
    precision = n_correct / n_emitted if n_emitted else 0.0
    recall = n_correct / n_total if n_total else 0.0
    return EvalResult(
        precision=precision,
        recall=recall,
        f1=_f1(precision, recall),
        n_correct=n_correct,
        n_wrong=n_total - n_correct,
        n_total=n_total,
        n_missing=n_total - n_emitted,
    )


def plausibility_score(predictions: dict[str, str],
                       gold: list[MentionAnnotation],
                       kb: KB) -> tuple[float, float, float, float]:
    """(year_acc, year_f1, type_acc, type_f1) over gold non-NIL mentions.

    A missing or NIL prediction, or a QID absent from the KB, counts as
    implausible on both axes. F1 treats every mention's target as
    "plausible", so it reduces to 2A/(1+A).
    """
    year_ok = 0
    type_ok = 0
    n = 0
    for mention in gold:
        if mention.is_nil:
            continue
        n += 1
        predicted = predictions.get(mention.mention_id)
        if predicted is None or predicted == NIL:
            continue
        record = kb.entities.get(predicted)
        if record is None:
            continue
        if phi_d(mention.document_date, resolve_entity_date(record)):
            year_ok += 1
        if phi_t(mention.ner_type, record.ner_types, kb.taxonomy):
            type_ok += 1
    if n == 0:
        return 0.0, 0.0, 0.0, 0.0
    year_acc = year_ok / n
    type_acc = type_ok / n
    return (year_acc, 2 * year_acc / (1 + year_acc),
            type_acc, 2 * type_acc / (1 + type_acc))


@dataclass(frozen=True)
class ErrorBreakdown:
    """Wrong predictions keyed by (target kind, target in top-k, predicted
    kind); target_in_topk is None when the run cannot retrieve the target
    (a NIL target with no reserved NIL candidate)."""

    counts: dict[tuple[str, bool | None, str], int]
    n_wrong: int

    def shares(self) -> dict[tuple[str, bool | None, str], float]:
        if self.n_wrong == 0:
            return {k: 0.0 for k in self.counts}
        return {k: v / self.n_wrong for k, v in self.counts.items()}

    def rows(self) -> list[dict]:
        shares = self.shares()
        out = []
        for key in sorted(self.counts, key=str):
            target, in_topk, predicted = key
            out.append({
                "target": target,
                "target_in_topk": in_topk,
                "predicted": predicted,
                "count": self.counts[key],
                "share": shares[key],
            })
        return out


def error_breakdown(predictions: dict[str, str],
                    gold: list[MentionAnnotation],
                    candidate_sets: dict[str, CandidateSet],
                    nil_in_candidates: bool = False) -> ErrorBreakdown:
    """Bucket every wrong emitted prediction into its error-analysis row."""
    counts: Counter = Counter()
    n_wrong = 0
    for mention in gold:
        predicted = predictions.get(mention.mention_id)
        if predicted is None or predicted == mention.gold_link:
            continue
        n_wrong += 1
        cs = candidate_sets.get(mention.mention_id)
        retrieved = {c.qid for c in cs.candidates} if cs else set()
        if mention.is_nil:
            in_topk = True if nil_in_candidates else None
            counts[(NIL, in_topk, "QID")] += 1
        else:
            in_topk = mention.gold_link in retrieved
            kind = NIL if predicted == NIL else "QID"
            counts[("QID", in_topk, kind)] += 1
    return ErrorBreakdown(counts=dict(counts), n_wrong=n_wrong)


@dataclass(frozen=True)
class AgreementInput:
    """Units by coders label matrix; None marks a missing coding."""

    items: tuple[tuple[str | None, ...], ...]

    @classmethod
    def from_pairs(cls, a: list[str | None],
                   b: list[str | None]) -> "AgreementInput":
        if len(a) != len(b):
            raise ValueError(f"annotator label lists differ in length: "
                             f"{len(a)} vs {len(b)}")
        return cls(items=tuple(zip(a, b)))


def krippendorff_alpha(data: AgreementInput) -> float:
    """Krippendorff's alpha for nominal data via the coincidence matrix.

    Units with fewer than two codings are excluded; alpha is 1.0 when no
    disagreement is even possible (a single observed category).
    """
    labels = sorted({v for unit in data.items for v in unit if v is not None})
    index = {v: i for i, v in enumerate(labels)}
    k = len(labels)
    coincidence = np.zeros((k, k))
    usable = 0
    for unit in data.items:
        values = [v for v in unit if v is not None]
        m = len(values)
        if m < 2:
            continue
        usable += 1
        for i, a in enumerate(values):
            for j, b in enumerate(values):
                if i != j:
                    coincidence[index[a], index[b]] += 1.0 / (m - 1)
    if usable == 0:
        raise ValueError("no unit carries at least two codings")
    n_c = coincidence.sum(axis=1)
    n = n_c.sum()
    observed = n - np.trace(coincidence)
    expected = (n * n - np.sum(n_c * n_c)) / (n - 1) if n > 1 else 0.0
    if expected == 0.0:
        return 1.0
    return 1.0 - observed / expected


def _average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=float)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(x: list[float], y: list[float]) -> float | None:
    """Rank correlation with average ranks for ties; None when undefined."""
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < 3:
        raise ValueError("spearman needs at least 3 pairs")
    rx = _average_ranks(np.asarray(x, dtype=float))
    ry = _average_ranks(np.asarray(y, dtype=float))
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    denom = math.sqrt(float(dx @ dx) * float(dy @ dy))
    if denom == 0:
        return None
    return float(dx @ dy) / denom


def spearman_test(x: list[float], y: list[float],
                  ) -> tuple[float | None, float | None]:
    """(rho, two-sided p) with the t-approximation used to flag significance."""
    rho = spearman(x, y)
    if rho is None:
        return None, None
    n = len(x)
    if abs(rho) >= 1.0:
        return rho, 0.0
    t_stat = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    p = 2.0 * float(student_t.sf(abs(t_stat), df=n - 2))
    return rho, p


def popularity_preference(predictions: dict[str, str],
                          gold: list[MentionAnnotation], kb: KB) -> float:
    """Share of scored mentions where a wrong QID more popular than the gold
    entity was chosen."""
    if not gold:
        return 0.0
    preferred = 0
    for mention in gold:
        predicted = predictions.get(mention.mention_id)
        if (predicted is None or predicted == NIL or mention.is_nil
                or predicted == mention.gold_link):
            continue
        pred_pop = kb.entities[predicted].popularity \
            if predicted in kb.entities else 0
        gold_pop = kb.entities[mention.gold_link].popularity \
            if mention.gold_link in kb.entities else 0
        if pred_pop > gold_pop:
            preferred += 1
    return preferred / len(gold)


def popularity_histogram(kb: KB, gold_links: list[str],
                         ) -> list[tuple[float, float, int]]:
    """Log10-binned popularity counts over non-NIL gold links.

    Bins are [0, 1), [1, 10), [10, 100), ...; returns (low, high, count)
    rows up to the highest non-empty bin.
    """
    pops = [kb.entities[q].popularity if q in kb.entities else 0
            for q in gold_links if q != NIL]
    if not pops:
        return []
    top = max(pops)
    n_decades = max(1, math.floor(math.log10(top)) + 1) if top >= 1 else 1
    edges = [0.0, 1.0] + [10.0 ** d for d in range(1, n_decades + 1)]
    counts = [0] * (len(edges) - 1)
    for p in pops:
        for i in range(len(edges) - 1):
            if edges[i] <= p < edges[i + 1]:
                counts[i] += 1
                break
    return [(edges[i], edges[i + 1], counts[i]) for i in range(len(counts))]
