"""End-to-end linking: retrieval, constraint filtering, link selection
(static or game-dynamics), and NIL prediction, per sentence."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace, field
from pathlib import Path

import numpy as np

from .corpus import Document, MentionAnnotation
from .dynamics import (DynamicsConfig, LinkDecision, MentionEntry, TokenEntry,
                       build_game, run_dynamics, select_link,
                       select_link_static)
from .kbstore import KB, EmbeddingIndex, fold_alias
from .nilpred import NilObservation, NilRule, normalize_scores, predict_nil
from .retrieval import CandidateSet, apply_constraints, retrieve

__all__ = [
    "MentionResult",
    "SenseInventory",
    "iter_mentions",
    "load_sense_inventory",
    "link_corpus",
]

NIL = "NIL"


@dataclass(frozen=True)
class MentionResult:
    decision: LinkDecision
    candidate_set: CandidateSet
    observation: NilObservation


@dataclass
class SenseInventory:
    """Optional token-to-senses map giving context tokens their strategies."""

    senses: dict[str, list[tuple[str, np.ndarray]]] = field(
        default_factory=dict)

    def lookup(self, surface: str) -> list[tuple[str, np.ndarray]]:
        return self.senses.get(fold_alias(surface), [])


def load_sense_inventory(path: str | Path,
                         embeddings: EmbeddingIndex) -> SenseInventory:
    """Read JSONL rows {"token", "sense_id", "embedding_id"}."""
    senses: dict[str, list[tuple[str, np.ndarray]]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            try:
                key = fold_alias(obj["token"])
                vector = embeddings.vector(int(obj["embedding_id"]))
                senses.setdefault(key, []).append((obj["sense_id"], vector))
            except KeyError as exc:
                raise ValueError(
                    f"sense inventory line {lineno}: missing field {exc}"
                ) from None
    return SenseInventory(senses=senses)


def iter_mentions(docs: list[Document]) -> list[MentionAnnotation]:
    """All mentions in corpus traversal order (the mention-embedding row
    order)."""
    return [m for doc in docs for m in doc.mentions()]


def _score_observation(cs: CandidateSet, kb: KB,
                       normalization: str) -> NilObservation:
    survivors = cs.survivors()
    scores = normalize_scores([c.score for c in survivors], normalization)
    top_label = ""
    top_qid = None
    if survivors:
        top_qid = survivors[0].qid
        record = kb.entities.get(top_qid)
        top_label = record.label if record else ""
    return NilObservation(scores=tuple(scores), surface=cs.mention.surface,
                          top_label=top_label, top_qid=top_qid,
                          gold_link=cs.mention.gold_link)


def _candidate_vectors(cs: CandidateSet, kb: KB):
    out = []
    for cand in cs.survivors():
        record = kb.entities.get(cand.qid)
        vector = None
        if record is not None and record.embedding_id is not None:
            vector = kb.embeddings.vector(record.embedding_id)
        out.append((cand.qid, cand.score, vector))
    return tuple(out)


def _sentence_tokens_outside_mentions(sentence, mentions):
    covered = set()
    for m in mentions:
        covered.update(range(*m.token_span))
    return [tok.surface for i, tok in enumerate(sentence.tokens)
            if i not in covered]


def _link_sentence(doc: Document, sentence_index: int,
                   mentions: list[MentionAnnotation],
                   embeddings: list[np.ndarray], kb: KB, k: int,
                   constraints: set[str], linker: str,
                   dynamics_config: DynamicsConfig,
                   nil_rule: NilRule | None, normalization: str,
                   senses: SenseInventory | None,
                   trace: list | None) -> list[MentionResult]:
    candidate_sets = []
    for mention, embedding in zip(mentions, embeddings):
        cs = retrieve(mention, embedding, kb, k)
        if constraints:
            cs = apply_constraints(cs, constraints, kb, doc.document_date)
        candidate_sets.append(cs)

    decisions: dict[str, LinkDecision] = {}
    if linker == "eld":
        playable = []
        for mention, embedding, cs in zip(mentions, embeddings,
                                          candidate_sets):
            if cs.survivors() or dynamics_config.nil_in_candidates:
                playable.append((mention, embedding, cs))
        if playable:
            entries = [MentionEntry(mention_id=m.mention_id,
                                    embedding=e,
                                    candidates=_candidate_vectors(cs, kb))
                       for m, e, cs in playable]
            token_entries = []
            if senses is not None:
                sentence = doc.sentences[sentence_index]
                for surface in _sentence_tokens_outside_mentions(
                        sentence, mentions):
                    found = senses.lookup(surface)
                    if found:
                        vectors = np.stack([v for _, v in found])
                        token_entries.append(TokenEntry(
                            surface=surface,
                            embedding=vectors.mean(axis=0),
                            senses=tuple(found)))
            game = build_game(entries, token_entries, dynamics_config)
            game_trace = [] if trace is not None else None
            game, _, _ = run_dynamics(game, dynamics_config, trace=game_trace)
            if trace is not None:
                key = f"{doc.document_id}:{sentence_index}"
                trace.extend((key, i, d) for i, d in game_trace)
            for player_index, (mention, _, cs) in enumerate(playable):
                decision = select_link(game, player_index)
                decisions[mention.mention_id] = replace(
                    decision, filtered_count=cs.filtered_count())

    results = []
    for mention, cs in zip(mentions, candidate_sets):
        obs = _score_observation(cs, kb, normalization)
        decision = decisions.get(mention.mention_id)
        if decision is None:
            if linker == "eld_static" and cs.survivors():
                decision = select_link_static(
                    cs, nil_enabled=dynamics_config.nil_in_candidates,
                    nil_score=dynamics_config.nil_kappa)
            else:
                # nothing survived (or the mention could not enter a game):
                # nothing to link
                decision = LinkDecision(mention_id=mention.mention_id,
                                        predicted=NIL, score=0.0,
                                        filtered_count=cs.filtered_count())
        if nil_rule is not None and decision.predicted != NIL:
            if predict_nil(nil_rule, obs):
                decision = replace(decision, predicted=NIL,
                                   heuristic=nil_rule.kind)
        elif nil_rule is not None and not obs.scores:
            decision = replace(decision, heuristic=nil_rule.kind)
        results.append(MentionResult(decision=decision, candidate_set=cs,
                                     observation=obs))
    return results


def link_corpus(docs: list[Document], kb: KB,
                mention_embeddings: EmbeddingIndex,
                k: int = 10,
                constraints: set[str] | None = None,
                linker: str = "eld",
                dynamics_config: DynamicsConfig | None = None,
                nil_rule: NilRule | None = None,
                senses: SenseInventory | None = None,
                jobs: int = 1,
                trace: list | None = None) -> list[MentionResult]:
    """Run the full pipeline; results follow corpus traversal order.

    ``mention_embeddings`` rows align with :func:`iter_mentions` order.
    Score normalization for NIL heuristics is the identity for unit-mode
    retrieval (already in [0, 1]) and min-max for raw dot products.
    """
    if linker not in ("eld", "eld_static"):
        raise ValueError(f"unknown linker {linker!r}")
    dynamics_config = dynamics_config or DynamicsConfig()
    constraints = constraints or set()
    mentions = iter_mentions(docs)
    if len(mention_embeddings) != len(mentions):
        raise ValueError(
            f"mention embeddings file has {len(mention_embeddings)} rows, "
            f"corpus has {len(mentions)} mentions")
    normalization = ("none" if kb.embeddings.norm_mode == "unit"
                     else "minmax")

    # group mention indices per (document, sentence)
    jobs_args = []
    cursor = 0
    for doc in docs:
        per_sentence: dict[int, list[int]] = {}
        for mention in doc.mentions():
            per_sentence.setdefault(mention.sentence_index, []).append(cursor)
            cursor += 1
        for sentence_index in sorted(per_sentence):
            rows = per_sentence[sentence_index]
            jobs_args.append((doc, sentence_index,
                              [mentions[r] for r in rows],
                              [mention_embeddings.vector(r) for r in rows]))

    def work(args):
        doc, sentence_index, ms, es = args
        return _link_sentence(doc, sentence_index, ms, es, kb, k, constraints,
                              linker, dynamics_config, nil_rule,
                              normalization, senses, trace)

    if jobs > 1 and trace is None:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(work, jobs_args))
    else:
        chunks = [work(a) for a in jobs_args]
    return [r for chunk in chunks for r in chunk]
