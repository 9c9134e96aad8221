"""Corpus ingestion, canonical serialization and the citation graph."""

from __future__ import annotations

import csv
import json
import logging
from collections import Counter
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Any

from .text import normalize_text

logger = logging.getLogger(__name__)

MIN_YEAR = 1800
FORMATS = ("jsonl", "edges")


class CorpusError(ValueError):
    """Base class for ingestion problems."""


class ParseError(CorpusError):
    def __init__(self, path: str | Path, line: int, message: str):
        self.path = str(path)
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


class DuplicateIdError(CorpusError):
    def __init__(self, duplicates: Iterable[str]):
        self.duplicates = sorted(set(duplicates))
        super().__init__("duplicate paper ids: " + ", ".join(self.duplicates))


class UnknownPaperError(KeyError):
    pass


@dataclass(frozen=True)
class Affiliation:
    country: str | None = None
    city: str | None = None
    org: str | None = None
    dept: str | None = None

    def to_dict(self) -> dict[str, str | None]:
        return {"city": self.city, "country": self.country, "dept": self.dept, "org": self.org}


@dataclass(frozen=True)
class AuthorMention:
    surname: str
    given: str = ""
    affiliation: Affiliation | None = None

    def __post_init__(self):
        if not self.surname or not self.surname.strip():
            raise ValueError("author mention needs a non-empty surname")

    def to_dict(self) -> dict[str, Any]:
        return {
            "affiliation": None if self.affiliation is None else self.affiliation.to_dict(),
            "given": self.given,
            "surname": self.surname,
        }


@dataclass(frozen=True)
class Paper:
    id: str
    year: int
    journal: str = ""
    title: str = ""
    terms: tuple[str, ...] = ()
    authors: tuple[AuthorMention, ...] = ()
    references: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.id:
            raise ValueError("paper id must be non-empty")
        if isinstance(self.year, bool) or not isinstance(self.year, int) or self.year < MIN_YEAR:
            raise ValueError(f"paper {self.id}: year must be an integer >= {MIN_YEAR}, got {self.year!r}")
        if len(set(self.references)) != len(self.references):
            raise ValueError(f"paper {self.id}: duplicate references")
        if self.id in self.references:
            raise ValueError(f"paper {self.id}: references itself")

    @property
    def has_terms(self) -> bool:
        return bool(self.terms)

    def to_dict(self) -> dict[str, Any]:
        return {
            "authors": [a.to_dict() for a in self.authors],
            "id": self.id,
            "journal": self.journal,
            "references": list(self.references),
            "terms": list(self.terms),
            "title": self.title,
            "year": self.year,
        }


def canonical_key(paper: Paper) -> tuple[int, str]:
    """Ordering used for every "first seen" decision: (year, id)."""
    return (paper.year, paper.id)


@dataclass(frozen=True)
class Corpus:
    """Validated, immutable paper collection in canonical (year, id) order."""

    papers: tuple[Paper, ...]
    dropped_self_references: int = 0
    dropped_duplicate_references: int = 0
    _index: Mapping[str, int] = field(default=None, repr=False, compare=False)  # type: ignore[assignment]

    def __post_init__(self):
        ordered = tuple(sorted(self.papers, key=canonical_key))
        ids = [p.id for p in ordered]
        if len(set(ids)) != len(ids):
            raise DuplicateIdError(i for i, c in Counter(ids).items() if c > 1)
        object.__setattr__(self, "papers", ordered)
        object.__setattr__(self, "_index", MappingProxyType({pid: i for i, pid in enumerate(ids)}))

    def __len__(self) -> int:
        return len(self.papers)

    def __iter__(self):
        return iter(self.papers)

    def __contains__(self, pid: object) -> bool:
        return pid in self._index

    def __getitem__(self, pid: str) -> Paper:
        try:
            return self.papers[self._index[pid]]
        except KeyError:
            raise UnknownPaperError(pid) from None

    def position(self, pid: str) -> int:
        """Rank of a paper in canonical order."""
        return self._index[pid]

    @property
    def ids(self) -> list[str]:
        return [p.id for p in self.papers]


def _affiliation_from(obj: Any) -> Affiliation | None:
    if obj is None:
        return None
    if not isinstance(obj, dict):
        raise ValueError("affiliation must be an object or null")
    vals = {k: (obj.get(k) or None) for k in ("country", "city", "org", "dept")}
    if not any(vals.values()):
        return None
    return Affiliation(**vals)


def paper_from_record(rec: dict[str, Any]) -> tuple[Paper, int, int]:
    """Build a Paper from one decoded record.

    Returns the paper plus the number of self-references and duplicate
    references that were dropped while building it.
    """
    if not isinstance(rec, dict):
        raise ValueError("record must be a JSON object")
    pid = rec.get("id")
    if not isinstance(pid, str) or not pid:
        raise ValueError("missing or empty 'id'")
    year = rec.get("year")
    if isinstance(year, float) and year.is_integer():
        year = int(year)
    if "terms" in rec and rec["terms"] is not None:
        terms = rec["terms"]
        if not isinstance(terms, list) or not all(isinstance(t, str) and t for t in terms):
            raise ValueError("'terms' must be a list of non-empty strings")
    elif rec.get("abstract"):
        terms = normalize_text(str(rec["abstract"]))
    else:
        terms = []
    authors = []
    for a in rec.get("authors") or []:
        if not isinstance(a, dict):
            raise ValueError("author entries must be objects")
        authors.append(
            AuthorMention(
                surname=str(a.get("surname") or ""),
                given=str(a.get("given") or ""),
                affiliation=_affiliation_from(a.get("affiliation")),
            )
        )
    refs: list[str] = []
    n_self = n_dup = 0
    seen: set[str] = set()
    for r in rec.get("references") or []:
        if not isinstance(r, str) or not r:
            raise ValueError("references must be non-empty strings")
        if r == pid:
            n_self += 1
        elif r in seen:
            n_dup += 1
        else:
            seen.add(r)
            refs.append(r)
    paper = Paper(
        id=pid,
        year=year,
        journal=str(rec.get("journal") or ""),
        title=str(rec.get("title") or ""),
        terms=tuple(terms),
        authors=tuple(authors),
        references=tuple(refs),
    )
    return paper, n_self, n_dup


def read_edges(path: str | Path) -> list[tuple[str, str]]:
    """Read a ``citing_id,cited_id`` CSV. A header row is optional."""
    path = Path(path)
    edges = []
    with path.open(newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if lineno == 1 and [c.strip() for c in row] == ["citing_id", "cited_id"]:
                continue
            if len(row) != 2 or not row[0].strip() or not row[1].strip():
                raise ParseError(path, lineno, "expected two non-empty columns citing_id,cited_id")
            edges.append((row[0].strip(), row[1].strip()))
    return edges


def write_edges(graph: "CitationGraph", path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["citing_id", "cited_id"])
        for src in sorted(graph.out_edges):
            for dst in graph.out_edges[src]:
                w.writerow([src, dst])


def ingest(path: str | Path, format: str = "jsonl", edges: str | Path | None = None) -> Corpus | "CitationGraph":
    """Load a corpus file.

    ``format="jsonl"`` reads one JSON object per line and returns a Corpus;
    an optional companion ``edges`` CSV adds extra references to the papers.
    ``format="edges"`` is the graph-only workflow and returns a
    CitationGraph built straight from the edge list.
    """
    path = Path(path)
    if format not in FORMATS:
        raise ValueError(f"unknown ingest format {format!r}; expected one of {FORMATS}")
    if not path.exists():
        raise FileNotFoundError(f"corpus file not found: {path}")
    if format == "edges":
        return graph_from_edges(read_edges(path))

    papers: list[Paper] = []
    ids: dict[str, int] = {}
    dups: list[str] = []
    n_self = n_dup = 0
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(path, lineno, f"invalid JSON ({exc.msg})") from None
            try:
                paper, s, d = paper_from_record(rec)
            except ValueError as exc:
                raise ParseError(path, lineno, str(exc)) from None
            if paper.id in ids:
                dups.append(paper.id)
                continue
            ids[paper.id] = len(papers)
            papers.append(paper)
            n_self += s
            n_dup += d
    if dups:
        raise DuplicateIdError(dups)

    if edges is not None:
        extra: dict[str, list[str]] = {}
        for src, dst in read_edges(edges):
            if src == dst:
                n_self += 1
                continue
            extra.setdefault(src, []).append(dst)
        for src, dsts in extra.items():
            if src not in ids:
                continue
            p = papers[ids[src]]
            merged = list(p.references)
            for d in dsts:
                if d not in merged:
                    merged.append(d)
            papers[ids[src]] = Paper(p.id, p.year, p.journal, p.title, p.terms, p.authors, tuple(merged))

    if n_self:
        logger.warning("dropped %d self-reference(s) while ingesting %s", n_self, path)
    return Corpus(tuple(papers), dropped_self_references=n_self, dropped_duplicate_references=n_dup)


def serialize(corpus: Corpus) -> bytes:
    """Byte-stable JSONL: canonical paper order, sorted keys, compact separators."""
    lines = [
        json.dumps(p.to_dict(), sort_keys=True, ensure_ascii=False, separators=(",", ":"))
        for p in corpus.papers
    ]
    return ("\n".join(lines) + "\n").encode("utf-8") if lines else b""


def write_corpus(corpus: Corpus, path: str | Path) -> None:
    Path(path).write_bytes(serialize(corpus))


@dataclass(frozen=True)
class CitationGraph:
    """In-corpus citation edges plus their transpose.

    ``out_edges`` keeps each paper's reference order; ``in_edges`` lists
    citing papers in canonical order when built from a corpus.
    """

    out_edges: Mapping[str, tuple[str, ...]]
    in_edges: Mapping[str, tuple[str, ...]]
    total_references: int
    resolved_references: int

    @property
    def resolved_fraction(self) -> float:
        if self.total_references == 0:
            return 0.0
        return self.resolved_references / self.total_references

    @property
    def n_edges(self) -> int:
        return self.resolved_references

    def __contains__(self, pid: object) -> bool:
        return pid in self.out_edges


def build_citation_graph(corpus: Corpus) -> CitationGraph:
    out: dict[str, tuple[str, ...]] = {}
    inc: dict[str, list[str]] = {p.id: [] for p in corpus.papers}
    total = resolved = 0
    for p in corpus.papers:
        kept = tuple(r for r in p.references if r in corpus)
        out[p.id] = kept
        total += len(p.references)
        resolved += len(kept)
        for r in kept:
            inc[r].append(p.id)
    return CitationGraph(
        out_edges=MappingProxyType(out),
        in_edges=MappingProxyType({k: tuple(v) for k, v in inc.items()}),
        total_references=total,
        resolved_references=resolved,
    )


def graph_from_edges(edges: Iterable[tuple[str, str]]) -> CitationGraph:
    """Graph-only construction: every id named in the edge list is a node."""
    out: dict[str, list[str]] = {}
    inc: dict[str, list[str]] = {}
    n = 0
    for src, dst in edges:
        if src == dst:
            continue
        out.setdefault(src, [])
        inc.setdefault(src, [])
        out.setdefault(dst, [])
        inc.setdefault(dst, [])
        if dst in out[src]:
            continue
        out[src].append(dst)
        inc[dst].append(src)
        n += 1
    return CitationGraph(
        out_edges=MappingProxyType({k: tuple(v) for k, v in out.items()}),
        in_edges=MappingProxyType({k: tuple(v) for k, v in inc.items()}),
        total_references=n,
        resolved_references=n,
    )


def citations_of(graph: CitationGraph, pid: str) -> int:
    try:
        return len(graph.in_edges[pid])
    except KeyError:
        raise UnknownPaperError(pid) from None


@dataclass(frozen=True)
class CorpusStats:
    n_papers: int
    n_papers_with_terms: int
    avg_references: float
    avg_citations: float
    avg_h_index: float

    def rows(self) -> list[tuple[str, float | int]]:
        return [
            ("n_papers", self.n_papers),
            ("n_papers_with_terms", self.n_papers_with_terms),
            ("avg_references", self.avg_references),
            ("avg_citations", self.avg_citations),
            ("avg_h_index", self.avg_h_index),
        ]


def summary_stats(corpus: Corpus, graph: CitationGraph, h_indices: Mapping[str, int]) -> CorpusStats:
    """Corpus-level averages.

    ``avg_references`` uses full reference lists (in- and out-of-corpus),
    ``avg_citations`` uses in-corpus citations, ``avg_h_index`` averages the
    supplied per-author h-index values.
    """
    n = len(corpus)
    if n == 0:
        return CorpusStats(0, 0, 0.0, 0.0, 0.0)
    refs = sum(len(p.references) for p in corpus.papers)
    cites = sum(citations_of(graph, p.id) for p in corpus.papers)
    h = list(h_indices.values())
    return CorpusStats(
        n_papers=n,
        n_papers_with_terms=sum(1 for p in corpus.papers if p.terms),
        avg_references=refs / n,
        avg_citations=cites / n,
        avg_h_index=(sum(h) / len(h)) if h else 0.0,
    )
