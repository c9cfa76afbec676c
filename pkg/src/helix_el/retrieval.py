"""Candidate generation and plausibility filtering.

Dense retrieval scores every embedded KB entity against a mention's context
vector; alias matches on the mention surface are merged in by QID (keeping
the max score). Filtering never removes candidates: implausible ones are
marked with the constraint that rejected them and excluded from downstream
ranking, so error analysis can still see them.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .corpus import MentionAnnotation
from .kbstore import KB, TypeTaxonomy, resolve_entity_date, types_compatible

__all__ = [
    "Candidate",
    "CandidateSet",
    "PHI_D",
    "PHI_T",
    "retrieve",
    "phi_d",
    "phi_t",
    "apply_constraints",
]

PHI_D = "phi_d"
PHI_T = "phi_t"


@dataclass(frozen=True)
class Candidate:
    qid: str
    score: float
    filtered_by: str | None = None

    @property
    def qid_number(self) -> int:
        return int(self.qid[1:])


@dataclass(frozen=True)
class CandidateSet:
    mention: MentionAnnotation
    candidates: tuple[Candidate, ...]
    k: int

    def survivors(self) -> list[Candidate]:
        return [c for c in self.candidates if c.filtered_by is None]

    def survivor_scores(self) -> list[float]:
        return [c.score for c in self.survivors()]

    def filtered_count(self) -> int:
        return sum(1 for c in self.candidates if c.filtered_by is not None)


def _sort_key(c: Candidate):
    # survivors first, best score first, ties to the lowest QID number
    return (c.filtered_by is not None, -c.score, c.qid_number)


def retrieve(mention: MentionAnnotation, context_embedding: np.ndarray,
             kb: KB, k: int) -> CandidateSet:
    """Top-k candidates by dense similarity, merged with alias matches.

    Under a unit-normalized index the score is cosine similarity mapped to
    [0, 1] via (1 + cos)/2; under a raw index it is the inner product.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    scores: dict[str, float] = {}
    if len(kb.dense_qids):
        context = np.asarray(context_embedding, dtype=np.float64)
        if context.shape != (kb.embeddings.dimension,):
            raise ValueError(
                f"context embedding has shape {context.shape}, index "
                f"dimension is {kb.embeddings.dimension}")
        sims = kb.dense_matrix @ context
        if kb.embeddings.norm_mode == "unit":
            norm = float(np.linalg.norm(context))
            if norm > 0:
                sims = sims / norm
            sims = (1.0 + sims) / 2.0
        order = np.argsort(-sims, kind="stable")[:k]
        for idx in order:
            scores[kb.dense_qids[idx]] = float(sims[idx])
        alias_hits = kb.lookup_alias(mention.surface)
        dense_pos = {q: i for i, q in enumerate(kb.dense_qids)}
        for record in alias_hits:
            pos = dense_pos.get(record.qid)
            hit_score = float(sims[pos]) if pos is not None else 0.0
            scores[record.qid] = max(scores.get(record.qid, hit_score),
                                     hit_score)
    else:
        for record in kb.lookup_alias(mention.surface):
            scores[record.qid] = 0.0

    candidates = sorted((Candidate(qid=q, score=s) for q, s in scores.items()),
                        key=_sort_key)[:k]
    return CandidateSet(mention=mention, candidates=tuple(candidates), k=k)


def phi_d(document_year: int, entity_year: int | None) -> bool:
    """Time plausibility: an undated entity passes; a dated one must not
    postdate the document."""
    return entity_year is None or entity_year <= document_year


def phi_t(mention_ner_type: str, entity_ner_types: frozenset[str] | set[str],
          tax: TypeTaxonomy) -> bool:
    """Type plausibility: an untyped entity passes; otherwise the expanded
    type sets must intersect."""
    return (not entity_ner_types
            or types_compatible({mention_ner_type}, set(entity_ner_types), tax))


def apply_constraints(cs: CandidateSet, constraints: set[str], kb: KB,
                      document_year: int | None = None) -> CandidateSet:
    """Mark each candidate with the first enabled constraint it fails.

    Evaluation order is phi_d then phi_t; the order only affects the
    ``filtered_by`` label, never the survivor set. Scores are untouched.
    """
    unknown = constraints - {PHI_D, PHI_T}
    if unknown:
        raise ValueError(f"unknown constraints {sorted(unknown)}")
    year = document_year if document_year is not None \
        else cs.mention.document_date
    out = []
    for cand in cs.candidates:
        if cand.filtered_by is not None:
            out.append(cand)
            continue
        record = kb.entities.get(cand.qid)
        failed = None
        if PHI_D in constraints and record is not None:
            if not phi_d(year, resolve_entity_date(record)):
                failed = PHI_D
        if failed is None and PHI_T in constraints and record is not None:
            if not phi_t(cs.mention.ner_type, record.ner_types, kb.taxonomy):
                failed = PHI_T
        out.append(replace(cand, filtered_by=failed) if failed else cand)
    return CandidateSet(mention=cs.mention,
                        candidates=tuple(sorted(out, key=_sort_key)),
                        k=cs.k)
