"""Rule-based author disambiguation.

Mentions are blocked on normalized surname, scored pairwise with a fixed
point table, and merged greedily (single linkage) while the best remaining
pair score clears a threshold.
"""

from __future__ import annotations

import csv
import re
from collections import Counter, defaultdict
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

from .corpus import Affiliation, CitationGraph, Corpus

DEFAULT_THRESHOLD = 10
GENERAL_NAME_COUNT = 1000

MentionKey = tuple[str, int]  # (paper id, index of the mention in the author list)


class BlockingError(ValueError):
    """Raised when two mentions with different surnames are scored."""


def normalize_surname(surname: str) -> str:
    return " ".join(surname.casefold().split())


def initials_of(given: str) -> tuple[str, ...]:
    """``"J. Q."`` / ``"John Quincy"`` / ``"J.-Q."`` all give ``('j', 'q')``."""
    return tuple(tok[0] for tok in re.split(r"[\s.\-]+", given.casefold()) if tok)


def first_name_of(given: str) -> str | None:
    """The spelled-out first name, or None if the first token is an initial."""
    toks = [t for t in re.split(r"[\s\-]+", given.strip()) if t]
    if not toks:
        return None
    first = toks[0].rstrip(".")
    if len(first) < 2 or toks[0].endswith("."):
        return None
    return first.casefold()


@dataclass(frozen=True)
class ScoreBreakdown:
    initials: int = 0
    first_name: int = 0
    address: int = 0
    shared_coauthors: int = 0
    source_journal: int = 0
    self_citation: int = 0
    biblio_coupling: int = 0
    co_citation: int = 0

    @property
    def total(self) -> int:
        return (
            self.initials + self.first_name + self.address + self.shared_coauthors
            + self.source_journal + self.self_citation + self.biblio_coupling + self.co_citation
        )


# Point tables. Index = number of shared items, capped at the last entry.
_COAUTHOR_POINTS = (0, 4, 7, 10)
_COUPLING_POINTS = (0, 2, 4, 6, 8, 10)
_COCITATION_POINTS = (0, 2, 3, 4, 5, 6)


def _capped(table: tuple[int, ...], n: int) -> int:
    return table[min(n, len(table) - 1)]


def initials_points(a: tuple[str, ...], b: tuple[str, ...]) -> int:
    common = min(len(a), len(b))
    if common == 0:
        return 0
    if a[:common] != b[:common]:
        return -10
    if common > 2:
        return 10
    if common == 2:
        return 5
    return 0


def address_points(a: Affiliation | None, b: Affiliation | None) -> int:
    if a is None or b is None:
        return 0

    def same(x: str | None, y: str | None) -> bool:
        return bool(x) and bool(y) and x.casefold().strip() == y.casefold().strip()

    if not (same(a.country, b.country) and same(a.city, b.city)):
        return 0
    if not same(a.org, b.org):
        return 4
    if not same(a.dept, b.dept):
        return 7
    return 10


@dataclass(frozen=True)
class MentionContext:
    """A mention together with the evidence drawn from its paper."""

    paper_id: str
    index: int
    surname: str
    initials: tuple[str, ...]
    first_name: str | None
    affiliation: Affiliation | None
    coauthors: frozenset[str]
    journal: str
    references: frozenset[str]
    citers: frozenset[str]

    @property
    def key(self) -> MentionKey:
        return (self.paper_id, self.index)


def coauthor_key(surname: str, given: str) -> str:
    ini = initials_of(given)
    return normalize_surname(surname) + ("," + ini[0] if ini else "")


def mention_contexts(corpus: Corpus, graph: CitationGraph) -> list[MentionContext]:
    out = []
    for p in corpus.papers:
        keys = [coauthor_key(a.surname, a.given) for a in p.authors]
        refs = frozenset(p.references)
        citers = frozenset(graph.in_edges.get(p.id, ()))
        for i, a in enumerate(p.authors):
            out.append(
                MentionContext(
                    paper_id=p.id,
                    index=i,
                    surname=normalize_surname(a.surname),
                    initials=initials_of(a.given),
                    first_name=first_name_of(a.given),
                    affiliation=a.affiliation,
                    coauthors=frozenset(k for j, k in enumerate(keys) if j != i),
                    journal=p.journal.casefold().strip(),
                    references=refs,
                    citers=citers,
                )
            )
    return out


def general_names(contexts: Iterable[MentionContext], min_count: int = GENERAL_NAME_COUNT) -> frozenset[str]:
    """First names seen more than ``min_count`` times."""
    counts = Counter(c.first_name for c in contexts if c.first_name)
    return frozenset(n for n, c in counts.items() if c > min_count)


def pair_score(
    a: MentionContext,
    b: MentionContext,
    general: frozenset[str] = frozenset(),
) -> ScoreBreakdown:
    if a.surname != b.surname:
        raise BlockingError(f"surname mismatch: {a.surname!r} vs {b.surname!r}")

    first = 0
    if a.first_name and b.first_name and a.first_name == b.first_name:
        first = 3 if a.first_name in general else 6

    self_cite = 0
    if a.paper_id != b.paper_id and (b.paper_id in a.references or a.paper_id in b.references):
        self_cite = 10

    return ScoreBreakdown(
        initials=initials_points(a.initials, b.initials),
        first_name=first,
        address=address_points(a.affiliation, b.affiliation),
        shared_coauthors=_capped(_COAUTHOR_POINTS, len(a.coauthors & b.coauthors)),
        source_journal=6 if a.journal and a.journal == b.journal else 0,
        self_citation=self_cite,
        biblio_coupling=_capped(_COUPLING_POINTS, len(a.references & b.references)),
        co_citation=_capped(_COCITATION_POINTS, len(a.citers & b.citers)),
    )


@dataclass(frozen=True)
class AuthorRecord:
    author_id: str
    mentions: tuple[MentionKey, ...]
    papers: tuple[str, ...]
    first_pub_year: int


@dataclass(frozen=True)
class AuthorTable:
    records: Mapping[str, AuthorRecord]
    assignment: Mapping[MentionKey, str]

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records.values())

    def __getitem__(self, author_id: str) -> AuthorRecord:
        return self.records[author_id]

    def authors_of(self, paper_id: str, n_mentions: int) -> list[str]:
        return [self.assignment[(paper_id, i)] for i in range(n_mentions) if (paper_id, i) in self.assignment]


def table_from_assignment(corpus: Corpus, assignment: Mapping[MentionKey, str]) -> AuthorTable:
    by_author: dict[str, list[MentionKey]] = defaultdict(list)
    for key, aid in assignment.items():
        by_author[aid].append(key)
    records = {}
    for aid in sorted(by_author):
        keys = sorted(by_author[aid], key=lambda k: (corpus.position(k[0]), k[1]))
        papers = tuple(dict.fromkeys(k[0] for k in keys))
        records[aid] = AuthorRecord(
            author_id=aid,
            mentions=tuple(keys),
            papers=papers,
            first_pub_year=min(corpus[p].year for p in papers),
        )
    return AuthorTable(records=records, assignment=dict(assignment))


def _find(parent: dict, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


def cluster_block(
    contexts: list[MentionContext],
    threshold: int,
    general: frozenset[str] = frozenset(),
) -> list[list[MentionKey]]:
    """Greedy single-linkage merging of one surname block.

    Pairs are visited by descending score, ties by lexicographic mention
    keys, which is the same as repeatedly merging the best cluster pair.
    Two clusters are never merged if they would hold two mentions from the
    same paper or two mentions with conflicting initials.
    """
    keys = sorted(c.key for c in contexts)
    by_key = {c.key: c for c in contexts}
    scored = []
    for ka, kb in combinations(keys, 2):
        s = pair_score(by_key[ka], by_key[kb], general).total
        if s >= threshold:
            scored.append((-s, ka, kb))
    scored.sort()

    parent = {k: k for k in keys}
    papers = {k: {k[0]} for k in keys}
    initials = {k: {by_key[k].initials} for k in keys}
    for _, ka, kb in scored:
        ra, rb = _find(parent, ka), _find(parent, kb)
        if ra == rb or papers[ra] & papers[rb]:
            continue
        if any(initials_points(x, y) < 0 for x in initials[ra] for y in initials[rb]):
            continue
        if rb < ra:
            ra, rb = rb, ra
        parent[rb] = ra
        papers[ra] |= papers.pop(rb)
        initials[ra] |= initials.pop(rb)

    clusters: dict[MentionKey, list[MentionKey]] = defaultdict(list)
    for k in keys:
        clusters[_find(parent, k)].append(k)
    return sorted(clusters.values())


def disambiguate(
    corpus: Corpus,
    graph: CitationGraph,
    threshold: int = DEFAULT_THRESHOLD,
    general_name_count: int = GENERAL_NAME_COUNT,
) -> AuthorTable:
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    contexts = mention_contexts(corpus, graph)
    general = general_names(contexts, general_name_count)
    blocks: dict[str, list[MentionContext]] = defaultdict(list)
    for c in contexts:
        blocks[c.surname].append(c)

    assignment: dict[MentionKey, str] = {}
    for surname in sorted(blocks):
        for n, cluster in enumerate(cluster_block(blocks[surname], threshold, general)):
            aid = f"{surname.replace(' ', '_')}#{n}"
            for key in cluster:
                assignment[key] = aid
    return table_from_assignment(corpus, assignment)


def filter_career_start(table: AuthorTable, min_year: int) -> AuthorTable:
    keep = {aid: r for aid, r in table.records.items() if r.first_pub_year >= min_year}
    return AuthorTable(
        records=keep,
        assignment={k: aid for k, aid in table.assignment.items() if aid in keep},
    )


def write_assignment(table: AuthorTable, path: str | Path, corpus: Corpus | None = None) -> None:
    def order(item):
        (pid, idx), _ = item
        return ((corpus.position(pid) if corpus is not None else 0), pid, idx)

    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["paper_id", "mention_index", "author_id"])
        for (pid, idx), aid in sorted(table.assignment.items(), key=order):
            w.writerow([pid, idx, aid])


def read_assignment(path: str | Path, corpus: Corpus) -> AuthorTable:
    """Load a ground-truth or previously written assignment CSV."""
    assignment: dict[MentionKey, str] = {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.DictReader(fh), start=2):
            try:
                key = (row["paper_id"], int(row["mention_index"]))
                aid = row["author_id"]
            except (KeyError, TypeError, ValueError):
                raise ValueError(f"{path}:{lineno}: expected paper_id,mention_index,author_id") from None
            if key[0] not in corpus or not 0 <= key[1] < len(corpus[key[0]].authors):
                raise ValueError(f"{path}:{lineno}: no mention {key} in corpus")
            if not aid:
                raise ValueError(f"{path}:{lineno}: empty author_id")
            assignment[key] = aid
    return table_from_assignment(corpus, assignment)
