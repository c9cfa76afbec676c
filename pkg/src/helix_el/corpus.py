"""CoNLL-U-style corpus model: parsing, validation, serialization, statistics.

The file layout is three metadata lines per sentence (``#document_id:``,
``#document_date:``, ``#sent_text:``, no space around the colon), followed by
tab-separated token lines ``surface<TAB>iob<TAB>link`` with an optional fourth
``noisy`` column, and a blank line between sentences.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field, asdict

__all__ = [
    "CorpusError",
    "Token",
    "Sentence",
    "Document",
    "MentionAnnotation",
    "CorpusStats",
    "KNOWN_NER_TYPES",
    "parse_conllu",
    "serialize_conllu",
    "compute_stats",
]

ABSENT = "_"
NOISY_MARK = "noisy"

_IOB_RE = re.compile(r"^(O|[BI]-\S+)$")
_QID_RE = re.compile(r"^Q[0-9]+$")

# AMR-derived NER class inventory observed in the benchmarks. Unknown types
# are preserved verbatim; `MentionAnnotation.type_known` flags them.
KNOWN_NER_TYPES = frozenset({
    "person", "city", "music", "organization", "work-of-art", "country",
    "building", "opera", "theatre", "worship-place", "publication", "book",
    "road", "company", "school", "city-district", "magazine", "event",
    "festival", "street", "mountain", "university", "government-organization",
    "college", "facility", "local-region", "county", "continent", "journal",
    "square", "song", "concert", "location", "river", "museum", "newspaper",
    "country-region", "symphony", "religious-group", "thing", "family",
    "language", "band", "province", "island", "park", "empire", "hotel",
    "scholarship", "institution", "village", "town", "books",
    "person (fictional character)", "lake", "hall", "society", "military",
})


class CorpusError(ValueError):
    """Malformed corpus content; carries the offending line when known."""

    def __init__(self, message: str, line: int | None = None,
                 document_id: str | None = None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if document_id is not None:
            loc.append(f"document {document_id!r}")
        super().__init__(f"{': '.join(loc) + ': ' if loc else ''}{message}")
        self.line = line
        self.document_id = document_id


@dataclass(frozen=True)
class Token:
    surface: str
    iob_tag: str
    link: str | None = None  # QID or "NIL"; None for O tokens
    noisy: bool = False


@dataclass(frozen=True)
class Sentence:
    text: str
    tokens: tuple[Token, ...]


@dataclass(frozen=True)
class MentionAnnotation:
    document_id: str
    document_date: int
    sentence_index: int
    token_span: tuple[int, int]  # [start, end) token indices
    surface: str
    ner_type: str
    gold_link: str  # QID or "NIL"
    noisy: bool = False

    @property
    def mention_id(self) -> str:
        start, end = self.token_span
        return f"{self.document_id}:{self.sentence_index}:{start}-{end}"

    @property
    def type_known(self) -> bool:
        return self.ner_type in KNOWN_NER_TYPES

    @property
    def is_nil(self) -> bool:
        return self.gold_link == "NIL"


@dataclass(frozen=True)
class Document:
    document_id: str
    document_date: int
    sentences: tuple[Sentence, ...]

    def mentions(self) -> list[MentionAnnotation]:
        out = []
        for idx, sentence in enumerate(self.sentences):
            out.extend(_sentence_mentions(self, idx, sentence))
        return out


@dataclass
class CorpusStats:
    n_docs: int = 0
    n_sentences: int = 0
    n_tokens: int = 0
    avg_tokens_per_sentence: float = 0.0
    n_mentions_all: int = 0
    n_mentions_unique: int = 0
    nil_share_all: float = 0.0
    nil_share_unique: float = 0.0
    noisy_share: float = 0.0
    type_histogram: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _sentence_mentions(doc: Document, sentence_index: int,
                       sentence: Sentence) -> list[MentionAnnotation]:
    mentions = []
    tokens = sentence.tokens
    i = 0
    while i < len(tokens):
        tag = tokens[i].iob_tag
        if tag.startswith("B-"):
            ner_type = tag[2:]
            j = i + 1
            while j < len(tokens) and tokens[j].iob_tag == f"I-{ner_type}":
                j += 1
            mentions.append(MentionAnnotation(
                document_id=doc.document_id,
                document_date=doc.document_date,
                sentence_index=sentence_index,
                token_span=(i, j),
                surface=" ".join(t.surface for t in tokens[i:j]),
                ner_type=ner_type,
                gold_link=tokens[i].link or "NIL",
                noisy=tokens[i].noisy,
            ))
            i = j
        else:
            i += 1
    return mentions


def _check_sentence_tokens(tokens: list[Token], line_of: list[int]) -> None:
    """Validate IOB structure and link presence for one sentence."""
    prev_tag = "O"
    span_link: str | None = None
    for pos, token in enumerate(tokens):
        line = line_of[pos]
        tag = token.iob_tag
        if not _IOB_RE.match(tag):
            raise CorpusError(f"invalid IOB tag {tag!r}", line=line)
        if tag == "O":
            if token.link is not None:
                raise CorpusError(
                    f"O token {token.surface!r} carries a link value", line=line)
            span_link = None
        else:
            if token.link is None:
                raise CorpusError(
                    f"tagged token {token.surface!r} is missing a link value",
                    line=line)
            if token.link != "NIL" and not _QID_RE.match(token.link):
                raise CorpusError(
                    f"link {token.link!r} is neither a QID nor NIL", line=line)
            if tag.startswith("I-"):
                expected = f"B-{tag[2:]}", f"I-{tag[2:]}"
                if prev_tag not in expected:
                    raise CorpusError(
                        f"{tag!r} follows {prev_tag!r}; I- tags must continue "
                        "a B-/I- run of the same type", line=line)
                if token.link != span_link:
                    raise CorpusError(
                        f"link {token.link!r} differs from the span's "
                        f"{span_link!r}", line=line)
            else:
                span_link = token.link
        prev_tag = tag


def parse_conllu(text: str) -> list[Document]:
    """Parse corpus text into documents grouped by ``#document_id``."""
    # doc_id -> [(metadata, sentence)], insertion-ordered
    by_doc: dict[str, list[tuple[dict, Sentence]]] = {}

    meta: dict[str, str] = {}
    tokens: list[Token] = []
    token_lines: list[int] = []
    first_line = 0

    def flush(end_line: int) -> None:
        nonlocal meta, tokens, token_lines
        if not tokens and not meta:
            return
        if not tokens:
            raise CorpusError("metadata block without token lines",
                              line=first_line)
        doc_id = meta.get("document_id")
        if not doc_id:
            raise CorpusError("sentence block is missing #document_id:",
                              line=first_line)
        _check_sentence_tokens(tokens, token_lines)
        text_ = meta.get("sent_text",
                         " ".join(t.surface for t in tokens))
        by_doc.setdefault(doc_id, []).append(
            (dict(meta), Sentence(text=text_, tokens=tuple(tokens))))
        meta, tokens, token_lines = {}, [], []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\r")
        if not line.strip():
            flush(lineno)
            continue
        if not tokens and not meta:
            first_line = lineno
        if line.startswith("#"):
            if tokens:
                raise CorpusError("metadata after token lines in the same "
                                  "sentence block", line=lineno)
            key, sep, value = line[1:].partition(":")
            if not sep:
                raise CorpusError("metadata line without ':'", line=lineno)
            meta[key.strip()] = value
            continue
        if "\t" not in line:
            raise CorpusError(
                "token line is not tab-separated", line=lineno)
        cols = line.split("\t")
        if len(cols) < 3:
            raise CorpusError(
                f"expected at least 3 tab-separated columns, got {len(cols)}",
                line=lineno)
        surface, iob, link = cols[0], cols[1], cols[2]
        noisy = False
        if len(cols) >= 4 and cols[3] != ABSENT:
            if cols[3] != NOISY_MARK:
                raise CorpusError(
                    f"unrecognised noisy-column value {cols[3]!r}", line=lineno)
            noisy = True
        tokens.append(Token(surface=surface, iob_tag=iob,
                            link=None if link == ABSENT else link,
                            noisy=noisy))
        token_lines.append(lineno)
    flush(len(text.splitlines()) + 1)

    documents = []
    for doc_id, entries in by_doc.items():
        dates = {m.get("document_date") for m, _ in entries}
        if None in dates or "" in dates:
            raise CorpusError("missing #document_date:", document_id=doc_id)
        if len(dates) > 1:
            raise CorpusError(
                f"conflicting #document_date values {sorted(dates)}",
                document_id=doc_id)
        (date_str,) = dates
        try:
            date = int(date_str)
        except ValueError:
            raise CorpusError(f"#document_date {date_str!r} is not an integer",
                              document_id=doc_id) from None
        if date <= 0:
            raise CorpusError(f"#document_date must be positive, got {date}",
                              document_id=doc_id)
        documents.append(Document(
            document_id=doc_id,
            document_date=date,
            sentences=tuple(s for _, s in entries),
        ))
    return documents


def _validate_document(doc: Document) -> None:
    if not doc.document_id:
        raise CorpusError("document_id is empty")
    if doc.document_date <= 0:
        raise CorpusError(f"document_date must be positive, "
                          f"got {doc.document_date}",
                          document_id=doc.document_id)
    for sentence in doc.sentences:
        _check_sentence_tokens(list(sentence.tokens),
                               [0] * len(sentence.tokens))


def serialize_conllu(docs: list[Document]) -> str:
    """Render documents in the release layout; inverse of :func:`parse_conllu`."""
    for doc in docs:
        _validate_document(doc)
    with_noisy = any(
        tok.noisy for doc in docs for s in doc.sentences for tok in s.tokens)
    blocks = []
    for doc in docs:
        for sentence in doc.sentences:
            lines = [
                f"#document_id:{doc.document_id}",
                f"#document_date:{doc.document_date}",
                f"#sent_text:{sentence.text}",
            ]
            for tok in sentence.tokens:
                cols = [tok.surface, tok.iob_tag, tok.link or ABSENT]
                if with_noisy:
                    cols.append(NOISY_MARK if tok.noisy else ABSENT)
                lines.append("\t".join(cols))
            blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + ("\n" if blocks else "")


def compute_stats(docs: list[Document]) -> CorpusStats:
    """Corpus-level counts; mention uniqueness is (lower-cased surface, link)."""
    n_sentences = sum(len(d.sentences) for d in docs)
    n_tokens = sum(len(s.tokens) for d in docs for s in d.sentences)
    mentions = [m for d in docs for m in d.mentions()]
    unique = {(m.surface.lower(), m.gold_link) for m in mentions}
    unique_nil = sum(1 for _, link in unique if link == "NIL")
    n_all = len(mentions)
    n_nil = sum(1 for m in mentions if m.is_nil)
    n_noisy = sum(1 for m in mentions if m.noisy)
    histogram = Counter(m.ner_type for m in mentions)
    return CorpusStats(
        n_docs=len(docs),
        n_sentences=n_sentences,
        n_tokens=n_tokens,
        avg_tokens_per_sentence=(
            round(n_tokens / n_sentences, 1) if n_sentences else 0.0),
        n_mentions_all=n_all,
        n_mentions_unique=len(unique),
        nil_share_all=(n_nil / n_all) if n_all else 0.0,
        nil_share_unique=(unique_nil / len(unique)) if unique else 0.0,
        noisy_share=(n_noisy / n_all) if n_all else 0.0,
        type_histogram=dict(sorted(histogram.items())),
    )
