import json
from pathlib import Path

import numpy as np
import pytest

from helix_el.kbstore import load_kb, write_embeddings

from generators import (build_e2e_fixture, build_hipe_reconstruction,
                        build_mhercl_reconstruction, write_corpus,
                        write_small_kb)


@pytest.fixture(scope="session")
def e2e_files(tmp_path_factory):
    return build_e2e_fixture(tmp_path_factory.mktemp("e2e"))


@pytest.fixture(scope="session")
def mhercl_files(tmp_path_factory):
    out = tmp_path_factory.mktemp("mhercl")
    docs = build_mhercl_reconstruction()
    corpus = write_corpus(docs, out / "mhercl_v1.0.tsv")
    n_mentions = sum(len(d.mentions()) for d in docs)
    entities, embeddings, mentions = write_small_kb(out, n_mentions)
    return {"corpus": corpus, "entities": entities,
            "embeddings": embeddings, "mention_embeddings": mentions,
            "docs": docs}


@pytest.fixture(scope="session")
def hipe_files(tmp_path_factory):
    out = tmp_path_factory.mktemp("hipe")
    docs = build_hipe_reconstruction()
    corpus = write_corpus(docs, out / "hipe2020_test_en.tsv")
    n_mentions = sum(len(d.mentions()) for d in docs)
    entities, embeddings, mentions = write_small_kb(out, n_mentions, seed=101)
    return {"corpus": corpus, "entities": entities,
            "embeddings": embeddings, "mention_embeddings": mentions,
            "docs": docs}


def write_kb_files(tmp_path: Path, entities: list[dict],
                   vectors: np.ndarray | None = None,
                   norm_mode: str = "unit"):
    """Write an entities JSONL plus embeddings binary; returns both paths."""
    entities_path = tmp_path / "entities.jsonl"
    embeddings_path = tmp_path / "embeddings.bin"
    with open(entities_path, "w", encoding="utf-8") as fh:
        for e in entities:
            fh.write(json.dumps(e) + "\n")
    if vectors is None:
        n = sum(1 for e in entities if e.get("embedding_id") is not None)
        rng = np.random.default_rng(7)
        vectors = rng.normal(size=(n, 16))
    write_embeddings(embeddings_path, np.asarray(vectors, dtype=np.float32),
                     norm_mode)
    return entities_path, embeddings_path


def _unit(v):
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v)


@pytest.fixture
def figure_kb(tmp_path):
    """Tiny disambiguation-scenario KB: several same-surname composers, one
    modern namesake, plus unrelated places. 12 entities, 8-dim unit vectors."""
    rng = np.random.default_rng(41)
    base = rng.normal(size=(12, 8))
    # entities 0..2 are the "Naumann" family; 0 is the 18C composer whose
    # vector is the retrieval target for the fixture queries
    entities = [
        {"qid": "Q66043", "label": "Johann Gottlieb Naumann",
         "aliases": ["Naumann", "J. G. Naumann"],
         "ner_types": ["person"], "dates": {"P569": 1741},
         "popularity": 120, "embedding_id": 0},
        {"qid": "Q1689420", "label": "Emil Naumann",
         "aliases": ["Naumann"], "ner_types": ["person"],
         "dates": {"P569": 1827}, "popularity": 40, "embedding_id": 1},
        {"qid": "Q73270", "label": "Friedrich Naumann",
         "aliases": ["Naumann", "Friedrich Näumann"],
         "ner_types": ["person"], "dates": {"P569": 1860},
         "popularity": 900, "embedding_id": 2},
        {"qid": "Q5129347", "label": "Claudio Constantini",
         "aliases": ["Constantini"], "ner_types": ["person"],
         "dates": {"P569": 1983}, "popularity": 15, "embedding_id": 3},
        {"qid": "Q2683", "label": "Parma", "aliases": ["Parma"],
         "ner_types": ["city"], "dates": {"P571": -183},
         "popularity": 5000, "embedding_id": 4},
        {"qid": "Q1439627", "label": "Conservatory of Music",
         "aliases": [], "ner_types": ["school"],
         "dates": {"P571": 1818}, "popularity": 60, "embedding_id": 5},
        {"qid": "Q565532", "label": "Marlborough House",
         "aliases": ["Marlborough House"], "ner_types": ["building"],
         "dates": {"P571": 1711}, "popularity": 310, "embedding_id": 6},
        {"qid": "Q726908", "label": "Jean-Baptiste Barrière",
         "aliases": ["Barriere", "M. Barriere"], "ner_types": ["person"],
         "dates": {"P569": 1707}, "popularity": 75, "embedding_id": 7},
        {"qid": "Q209937", "label": "Vienna State Opera",
         "aliases": ["Vienna Court Opera"], "ner_types": ["theatre"],
         "dates": {"P1619": 1869}, "popularity": 2500, "embedding_id": 8},
        {"qid": "Q3206551", "label": "La Belle Assemblée",
         "aliases": ["Court Magazine"], "ner_types": ["magazine"],
         "dates": {"P571": 1806}, "popularity": 90, "embedding_id": 9},
        {"qid": "Q886420", "label": "John Sullivan",
         "aliases": ["John Sullivan"], "ner_types": ["person"],
         "dates": {"P569": 1740}, "popularity": 430, "embedding_id": 10},
        {"qid": "Q190", "label": "Undated Thing", "aliases": ["thing"],
         "ner_types": [], "dates": {}, "popularity": 1, "embedding_id": 11},
    ]
    vectors = np.stack([_unit(v) for v in base])
    paths = write_kb_files(tmp_path, entities, vectors, norm_mode="unit")
    kb = load_kb(*paths)
    return kb, paths, vectors
