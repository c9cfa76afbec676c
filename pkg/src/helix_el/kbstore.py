"""Local knowledge-base snapshot.

Holds entity metadata loaded from a JSONL file, a dense embedding index read
from the ``HELIXEMB`` binary format, the type taxonomy used for compatibility
checks, and the dated-property priority list used to resolve an entity's year.
"""

from __future__ import annotations

import json
import re
import struct
import unicodedata
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

__all__ = [
    "KBError",
    "EntityRecord",
    "PropertyPriority",
    "DEFAULT_PROPERTY_PRIORITY",
    "TypeTaxonomy",
    "EmbeddingIndex",
    "KB",
    "resolve_entity_date",
    "expand_types",
    "types_compatible",
    "similarity",
    "load_kb",
    "read_embeddings",
    "write_embeddings",
    "fold_alias",
]

EMBEDDINGS_MAGIC = b"HELIXEMB"
_NORM_MODES = {0: "raw", 1: "unit"}
_NORM_CODES = {v: k for k, v in _NORM_MODES.items()}

_QID_RE = re.compile(r"^Q[0-9]+$")
_DATE_RE = re.compile(
    r"^([+-]?)(\d{1,6})(?:-\d{1,2}(?:-\d{1,2})?)?(?:T.*)?$")


class KBError(ValueError):
    pass


@dataclass(frozen=True)
class PropertyPriority:
    """Ordered (rank, property-id) pairs; lower rank wins at resolution."""

    entries: tuple[tuple[int, str], ...]

    def __post_init__(self):
        ranks = [r for r, _ in self.entries]
        if ranks != list(range(1, len(ranks) + 1)):
            raise KBError(f"ranks must be 1..{len(ranks)} without gaps, "
                          f"got {ranks}")

    @property
    def property_ids(self) -> list[str]:
        return [pid for _, pid in self.entries]


# Time-related Wikidata properties in retrieval order: the most precise
# (date of birth) first, the most generic (point in time) last.
DEFAULT_PROPERTY_PRIORITY = PropertyPriority(entries=(
    (1, "P569"),    # date of birth
    (2, "P571"),    # inception
    (3, "P1619"),   # date of official opening
    (4, "P1191"),   # date of first performance
    (5, "P10135"),  # recording date
    (6, "P577"),    # publication date
    (7, "P575"),    # time of discovery or invention
    (8, "P1317"),   # floruit
    (9, "P7124"),   # date of the first one
    (10, "P10673"), # debut date
    (11, "P9448"),  # introduced on
    (12, "P6949"),  # announcement date
    (13, "P729"),   # service entry
    (14, "P2031"),  # work period (start)
    (15, "P585"),   # point in time
))


@dataclass(frozen=True)
class EntityRecord:
    qid: str
    label: str
    aliases: tuple[str, ...] = ()
    wikidata_types: frozenset[str] = frozenset()
    ner_types: frozenset[str] = frozenset()
    date_properties: dict[str, int | str] = field(default_factory=dict)
    popularity: int = 0
    embedding_id: int | None = None

    def __post_init__(self):
        if self.qid != "NIL" and not _QID_RE.match(self.qid):
            raise KBError(f"qid {self.qid!r} must match Q[0-9]+ or be NIL")
        if self.qid == "NIL" and (self.wikidata_types or self.ner_types
                                  or self.date_properties or self.popularity):
            raise KBError("the NIL record must carry no types, dates or "
                          "popularity")
        if self.popularity < 0:
            raise KBError(f"popularity must be non-negative, "
                          f"got {self.popularity}")

    @property
    def qid_number(self) -> int:
        return int(self.qid[1:]) if self.qid != "NIL" else -1


def _parse_year(value: int | str, property_id: str) -> int:
    if isinstance(value, bool):
        raise KBError(f"property {property_id}: boolean is not a date")
    if isinstance(value, int):
        return value
    m = _DATE_RE.match(str(value).strip())
    if not m:
        raise KBError(
            f"property {property_id}: cannot parse date value {value!r}")
    sign, year = m.groups()
    return -int(year) if sign == "-" else int(year)


def resolve_entity_date(record: EntityRecord,
                        priority: PropertyPriority = DEFAULT_PROPERTY_PRIORITY,
                        ) -> int | None:
    """Year of the highest-priority dated property, or None when undated."""
    for _, pid in priority.entries:
        if pid in record.date_properties:
            return _parse_year(record.date_properties[pid], pid)
    return None


def _canonical_type(t: str) -> str:
    t = t.strip().lower()
    return t[2:] if t.startswith("b-") else t


class TypeTaxonomy:
    """Parent -> sub-type map; expansion walks ancestors transitively."""

    def __init__(self, parent_to_children: dict[str, list[str]]):
        self._parents: dict[str, set[str]] = {}
        for parent, children in parent_to_children.items():
            p = _canonical_type(parent)
            self._parents.setdefault(p, set())
            for child in children:
                self._parents.setdefault(_canonical_type(child), set()).add(p)

    @classmethod
    def from_file(cls, path: str | Path) -> "TypeTaxonomy":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise KBError(f"{path}: taxonomy must be a JSON object")
        return cls(data)

    @classmethod
    def default(cls) -> "TypeTaxonomy":
        ref = resources.files("helix_el").joinpath("data/taxonomy.json")
        return cls(json.loads(ref.read_text(encoding="utf-8")))

    def ancestors(self, t: str) -> set[str]:
        start = _canonical_type(t)
        seen: set[str] = set()
        stack = list(self._parents.get(start, ()))
        while stack:
            p = stack.pop()
            if p in seen:
                continue
            seen.add(p)
            stack.extend(self._parents.get(p, ()))
        return seen


def expand_types(t: str, tax: TypeTaxonomy) -> set[str]:
    """{t} plus all taxonomy ancestors, in the same surface form as ``t``."""
    prefix = "B-" if t.startswith(("B-", "b-")) else ""
    return {t} | {f"{prefix}{a}" for a in tax.ancestors(t)}


def types_compatible(a_types: set[str], b_types: set[str],
                     tax: TypeTaxonomy) -> bool:
    """True iff the expanded type sets intersect (both sides expanded)."""
    a_exp = {_canonical_type(x) for t in a_types for x in expand_types(t, tax)}
    b_exp = {_canonical_type(x) for t in b_types for x in expand_types(t, tax)}
    return bool(a_exp & b_exp)


@dataclass(frozen=True)
class EmbeddingIndex:
    """Dense vectors; stored as float32 on disk, float64 in memory so that
    similarity accumulates in double precision."""

    dimension: int
    rows: np.ndarray
    norm_mode: str  # "raw" | "unit"

    def __post_init__(self):
        object.__setattr__(self, "rows",
                           np.asarray(self.rows, dtype=np.float64))
        if self.dimension <= 0:
            raise KBError(f"dimension must be positive, got {self.dimension}")
        if self.rows.ndim != 2 or self.rows.shape[1] != self.dimension:
            raise KBError(f"rows shape {self.rows.shape} does not match "
                          f"dimension {self.dimension}")
        if self.norm_mode not in _NORM_CODES:
            raise KBError(f"unknown norm_mode {self.norm_mode!r}")
        if self.norm_mode == "unit" and len(self.rows):
            norms = np.linalg.norm(self.rows, axis=1)
            bad = np.flatnonzero(np.abs(norms - 1.0) > 1e-6)
            if len(bad):
                raise KBError(f"unit-mode row {bad[0]} has norm "
                              f"{norms[bad[0]]:.8f}")

    def __len__(self) -> int:
        return len(self.rows)

    def vector(self, embedding_id: int) -> np.ndarray:
        if not 0 <= embedding_id < len(self.rows):
            raise KBError(f"embedding_id {embedding_id} out of range "
                          f"[0, {len(self.rows)})")
        return self.rows[embedding_id]


def similarity(index: EmbeddingIndex, a: int, b: int) -> float:
    """Inner product of two stored vectors; cosine under unit mode."""
    return float(np.dot(index.vector(a), index.vector(b)))


def read_embeddings(path: str | Path) -> EmbeddingIndex:
    data = Path(path).read_bytes()
    header = struct.calcsize("<8sIIB")
    if len(data) < header:
        raise KBError(f"{path}: truncated embeddings header")
    magic, count, dim, norm_code = struct.unpack_from("<8sIIB", data)
    if magic != EMBEDDINGS_MAGIC:
        raise KBError(f"{path}: bad magic {magic!r}")
    if norm_code not in _NORM_MODES:
        raise KBError(f"{path}: unknown norm_mode byte {norm_code}")
    if dim == 0:
        raise KBError(f"{path}: dimension must be positive")
    expected = header + count * dim * 4
    if len(data) != expected:
        raise KBError(f"{path}: payload is {len(data) - header} bytes, header "
                      f"promises {count}x{dim} float32 ({expected - header})")
    rows = np.frombuffer(data, dtype="<f4", offset=header).reshape(count, dim)
    return EmbeddingIndex(dimension=dim, rows=rows,
                          norm_mode=_NORM_MODES[norm_code])


def write_embeddings(path: str | Path, rows: np.ndarray, norm_mode: str) -> None:
    rows = np.asarray(rows, dtype=np.float32)
    if rows.ndim != 2:
        raise KBError(f"rows must be 2-D, got shape {rows.shape}")
    if norm_mode == "unit" and len(rows):
        norms = np.linalg.norm(rows, axis=1, keepdims=True)
        if np.any(norms == 0):
            raise KBError("cannot unit-normalize a zero vector")
        rows = rows / norms
    with open(path, "wb") as fh:
        fh.write(struct.pack("<8sIIB", EMBEDDINGS_MAGIC,
                             rows.shape[0], rows.shape[1],
                             _NORM_CODES[norm_mode]))
        fh.write(rows.astype("<f4").tobytes(order="C"))


def fold_alias(s: str) -> str:
    """Lookup key: NFKD-decomposed, combining marks dropped, case-folded."""
    decomposed = unicodedata.normalize("NFKD", s)
    return "".join(c for c in decomposed
                   if not unicodedata.combining(c)).casefold().strip()


@dataclass
class KB:
    entities: dict[str, EntityRecord]
    embeddings: EmbeddingIndex
    taxonomy: TypeTaxonomy
    alias_index: dict[str, list[str]] = field(default_factory=dict)
    # entities that carry an embedding, in ascending QID order
    dense_qids: list[str] = field(default_factory=list)
    dense_matrix: np.ndarray = field(
        default_factory=lambda: np.zeros((0, 1), dtype=np.float32))

    def lookup_alias(self, surface: str) -> list[EntityRecord]:
        return [self.entities[q]
                for q in self.alias_index.get(fold_alias(surface), [])]

    def entity_year(self, qid: str,
                    priority: PropertyPriority = DEFAULT_PROPERTY_PRIORITY,
                    ) -> int | None:
        record = self.entities.get(qid)
        return resolve_entity_date(record, priority) if record else None


def _record_from_json(obj: dict, lineno: int,
                      known_pids: frozenset[str]) -> EntityRecord:
    try:
        dates = dict(obj.get("dates", {}))
        unknown = sorted(set(dates) - known_pids)
        if unknown:
            warnings.warn(f"entity {obj.get('qid')}: ignoring unlisted date "
                          f"properties {unknown}", stacklevel=3)
            for pid in unknown:
                dates.pop(pid)
        return EntityRecord(
            qid=obj["qid"],
            label=obj.get("label", ""),
            aliases=tuple(obj.get("aliases", [])),
            wikidata_types=frozenset(obj.get("wikidata_types", [])),
            ner_types=frozenset(obj.get("ner_types", [])),
            date_properties=dates,
            popularity=int(obj.get("popularity", 0)),
            embedding_id=obj.get("embedding_id"),
        )
    except KeyError as exc:
        raise KBError(f"entities line {lineno}: missing field {exc}") from None


def load_kb(entities_path: str | Path,
            embeddings_path: str | Path,
            taxonomy_path: str | Path | None = None) -> KB:
    """Load the KB snapshot; validates embedding references and QID uniqueness."""
    embeddings = read_embeddings(embeddings_path)
    taxonomy = (TypeTaxonomy.from_file(taxonomy_path)
                if taxonomy_path else TypeTaxonomy.default())
    known_pids = frozenset(DEFAULT_PROPERTY_PRIORITY.property_ids)

    entities: dict[str, EntityRecord] = {}
    with open(entities_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise KBError(
                    f"entities line {lineno}: invalid JSON ({exc})") from None
            record = _record_from_json(obj, lineno, known_pids)
            if record.qid in entities:
                raise KBError(f"entities line {lineno}: duplicate QID "
                              f"{record.qid}")
            if record.embedding_id is not None and \
                    not 0 <= record.embedding_id < len(embeddings):
                raise KBError(f"entities line {lineno}: embedding_id "
                              f"{record.embedding_id} not present in the "
                              f"embeddings file ({len(embeddings)} rows)")
            entities[record.qid] = record

    alias_index: dict[str, list[str]] = {}
    for record in entities.values():
        if record.qid == "NIL":
            continue
        for name in {record.label, *record.aliases}:
            key = fold_alias(name)
            if key:
                alias_index.setdefault(key, []).append(record.qid)
    for qids in alias_index.values():
        qids.sort(key=lambda q: int(q[1:]))

    dense = sorted((r for r in entities.values()
                    if r.qid != "NIL" and r.embedding_id is not None),
                   key=lambda r: r.qid_number)
    dense_qids = [r.qid for r in dense]
    if dense:
        dense_matrix = np.stack([embeddings.vector(r.embedding_id)
                                 for r in dense])
    else:
        dense_matrix = np.zeros((0, embeddings.dimension), dtype=np.float32)
    return KB(entities=entities, embeddings=embeddings, taxonomy=taxonomy,
              alias_index=alias_index, dense_qids=dense_qids,
              dense_matrix=dense_matrix)
