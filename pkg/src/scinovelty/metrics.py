"""Per-paper content metrics: entropy, information diversity, innovation, redundancy.

Sums that feed the diversity and similarity scores use ``math.fsum`` so the
result does not depend on the order of the inputs.
"""

from __future__ import annotations

import csv
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np

from .corpus import CitationGraph, Corpus, Paper
from .topics import Vocabulary

DEFAULT_MIN_PAIR_DOCS = 2
DEFAULT_PMI_THRESHOLD = 0.0

Pair = tuple[str, str]


def _as_vector(v) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError("topic vector must be one-dimensional")
    if np.any(arr < 0):
        raise ValueError("topic vector has negative entries")
    return arr


def shannon_entropy(v) -> float | None:
    """Entropy in nats with 0 ln 0 = 0; None for the all-zero vector."""
    arr = _as_vector(v)
    nz = arr[arr > 0]
    if nz.size == 0:
        return None
    h = -math.fsum(float(x) * math.log(float(x)) for x in nz)
    return h if h > 0.0 else 0.0


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity clipped to [-1, 1].

    Written as ``dot / sqrt(|a|^2 |b|^2)`` so identical vectors give
    exactly 1.0.
    """
    dot = math.fsum(float(x) * float(y) for x, y in zip(a, b))
    na = math.fsum(float(x) * float(x) for x in a)
    nb = math.fsum(float(y) * float(y) for y in b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine of a zero vector is undefined")
    c = dot / math.sqrt(na * nb) if na != nb else dot / na
    return max(-1.0, min(1.0, c))


def _mean_vector(vectors: Sequence[np.ndarray]) -> np.ndarray:
    n = len(vectors)
    return np.asarray([math.fsum(col) / n for col in zip(*vectors)], dtype=np.float64)


def information_diversity(embeddings: Sequence) -> float:
    """Mean of ``1 - cos(v, mean)`` over a set of topic vectors."""
    vectors = [_as_vector(v) for v in embeddings]
    if not vectors:
        raise ValueError("information diversity of an empty set")
    if any(not np.any(v) for v in vectors):
        raise ValueError("information diversity needs non-zero vectors")
    mean = _mean_vector(vectors)
    return math.fsum(1.0 - cosine(v, mean) for v in vectors) / len(vectors)


def _nonzero(ids: Iterable[str], embeddings: Mapping[str, np.ndarray]) -> list[np.ndarray]:
    out = []
    for pid in ids:
        v = embeddings.get(pid)
        if v is not None and np.any(v):
            out.append(v)
    return out


def reference_diversity(paper: Paper, graph: CitationGraph, embeddings: Mapping[str, np.ndarray]) -> float | None:
    vecs = _nonzero(graph.out_edges.get(paper.id, ()), embeddings)
    return information_diversity(vecs) if vecs else None


def citation_diversity(paper: Paper, graph: CitationGraph, embeddings: Mapping[str, np.ndarray]) -> float | None:
    vecs = _nonzero(graph.in_edges.get(paper.id, ()), embeddings)
    return information_diversity(vecs) if vecs else None


def group_similarity(vectors: Sequence) -> float:
    """Mean pairwise cosine similarity of at least two non-zero vectors."""
    vs = [_as_vector(v) for v in vectors]
    if len(vs) < 2:
        raise ValueError("group similarity needs at least two vectors")
    if any(not np.any(v) for v in vs):
        raise ValueError("group similarity needs non-zero vectors")
    sims = [cosine(a, b) for a, b in combinations(vs, 2)]
    return math.fsum(sims) / len(sims)


@dataclass(frozen=True)
class InnovationIndex:
    """First occurrences of terms and of within-abstract term pairs.

    ``pair_first_paper`` holds only the pairs that survive the rarity and
    PMI filters; ``all_pair_first_paper`` keeps every pair seen.
    """

    pair_first_paper: Mapping[Pair, str]
    term_first_paper: Mapping[str, str]
    pair_doc_count: Mapping[Pair, int]
    term_doc_count: Mapping[str, int]
    pmi: Mapping[Pair, float]
    n_docs: int
    all_pair_first_paper: Mapping[Pair, str]
    introduced: Mapping[str, int]

    def __len__(self) -> int:
        return len(self.pair_first_paper)


def pair_pmi(pair_docs: int, docs1: int, docs2: int, n_docs: int) -> float:
    """``ln[(D12/D) / ((D1/D)(D2/D))]`` with document probabilities."""
    return math.log(pair_docs * n_docs / (docs1 * docs2))


def build_innovation_index(
    corpus: Corpus,
    vocab: Vocabulary,
    min_pair_docs: int = DEFAULT_MIN_PAIR_DOCS,
    pmi_threshold: float = DEFAULT_PMI_THRESHOLD,
) -> InnovationIndex:
    term_first: dict[str, str] = {}
    term_docs: dict[str, int] = {}
    pair_first: dict[Pair, str] = {}
    pair_docs: dict[Pair, int] = {}
    n_docs = 0
    for p in corpus.papers:  # canonical (year, id) order
        terms = sorted(set(vocab.tokenize(p.terms))) if p.terms else []
        if not terms:
            continue
        n_docs += 1
        for t in terms:
            if t not in term_first:
                term_first[t] = p.id
                term_docs[t] = 0
            term_docs[t] += 1
        for pair in combinations(terms, 2):
            if pair not in pair_first:
                pair_first[pair] = p.id
                pair_docs[pair] = 0
            pair_docs[pair] += 1

    kept: dict[Pair, str] = {}
    pmi: dict[Pair, float] = {}
    for pair, first in pair_first.items():
        d12 = pair_docs[pair]
        if d12 < min_pair_docs:
            continue
        score = pair_pmi(d12, term_docs[pair[0]], term_docs[pair[1]], n_docs)
        if score > pmi_threshold:
            kept[pair] = first
            pmi[pair] = score
    introduced: dict[str, int] = {}
    for first in kept.values():
        introduced[first] = introduced.get(first, 0) + 1
    return InnovationIndex(
        pair_first_paper=kept,
        term_first_paper=term_first,
        pair_doc_count=pair_docs,
        term_doc_count=term_docs,
        pmi=pmi,
        n_docs=n_docs,
        all_pair_first_paper=pair_first,
        introduced=introduced,
    )


def innovation(paper: Paper, index: InnovationIndex) -> int | None:
    """Retained term pairs whose first co-occurrence is this paper.

    None for papers without terms, which are outside the content metrics.
    """
    if not paper.terms:
        return None
    return index.introduced.get(paper.id, 0)


def new_terms(paper: Paper, index: InnovationIndex) -> list[str]:
    """Terms first seen in this paper (the single-term reading of innovation)."""
    return sorted(t for t, pid in index.term_first_paper.items() if pid == paper.id)


@dataclass(frozen=True)
class MetricRecord:
    paper_id: str
    shannon: float | None
    ref_diversity: float | None
    cite_diversity: float | None
    innovation: int | None

    def get(self, name: str):
        return getattr(self, name)


METRIC_NAMES = ("shannon", "ref_diversity", "cite_diversity", "innovation")


def compute_metrics(
    corpus: Corpus,
    graph: CitationGraph,
    embeddings: Mapping[str, np.ndarray],
    index: InnovationIndex,
) -> dict[str, MetricRecord]:
    out = {}
    for p in corpus.papers:
        v = embeddings.get(p.id)
        has_content = p.terms and v is not None and np.any(v)
        out[p.id] = MetricRecord(
            paper_id=p.id,
            shannon=shannon_entropy(v) if has_content else None,
            ref_diversity=reference_diversity(p, graph, embeddings),
            cite_diversity=citation_diversity(p, graph, embeddings),
            innovation=innovation(p, index),
        )
    return out


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_metrics(records: Mapping[str, MetricRecord], path: str | Path, order: Sequence[str] | None = None) -> None:
    ids = list(order) if order is not None else sorted(records)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["paper_id", *METRIC_NAMES])
        for pid in ids:
            r = records[pid]
            w.writerow([pid] + [_cell(r.get(m)) for m in METRIC_NAMES])


def read_metrics(path: str | Path) -> dict[str, MetricRecord]:
    out = {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            def f(key):
                return float(row[key]) if row[key] != "" else None

            out[row["paper_id"]] = MetricRecord(
                paper_id=row["paper_id"],
                shannon=f("shannon"),
                ref_diversity=f("ref_diversity"),
                cite_diversity=f("cite_diversity"),
                innovation=int(row["innovation"]) if row["innovation"] != "" else None,
            )
    return out
