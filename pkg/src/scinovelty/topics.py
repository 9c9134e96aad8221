"""Phrase mining and phrase-level LDA fitted by collapsed Gibbs sampling."""

from __future__ import annotations

import csv
import json
import math
from collections import Counter
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from .corpus import Corpus, Paper

MODEL_FORMAT = "scinovelty-topic-model"
MODEL_VERSION = 1

DEFAULT_BETA = 0.01
DEFAULT_ITERS = 1000
DEFAULT_TOP_M = 10


class EmptyCorpusError(ValueError):
    pass


class UnknownTermError(KeyError):
    pass


def _phrase(w1: str, w2: str) -> str:
    return f"{w1} {w2}"


@dataclass(frozen=True)
class Vocabulary:
    """Unigrams and mined two-term phrases with document frequencies.

    ``terms`` is the sorted union of both sets; a term's position in it is
    its dense index.
    """

    unigrams: tuple[str, ...]
    phrases: tuple[str, ...]
    doc_frequency: Mapping[str, int]
    terms: tuple[str, ...] = field(init=False)
    index: Mapping[str, int] = field(init=False, repr=False, compare=False)
    _pairs: frozenset[tuple[str, str]] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        terms = tuple(sorted(set(self.unigrams) | set(self.phrases)))
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "index", {t: i for i, t in enumerate(terms)})
        object.__setattr__(self, "_pairs", frozenset(tuple(p.split(" ", 1)) for p in self.phrases))

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, term: object) -> bool:
        return term in self.index

    def merge_phrases(self, terms: Sequence[str]) -> list[str]:
        """Replace phrase occurrences greedily left to right."""
        out = []
        i, n = 0, len(terms)
        while i < n:
            if i + 1 < n and (terms[i], terms[i + 1]) in self._pairs:
                out.append(_phrase(terms[i], terms[i + 1]))
                i += 2
            else:
                out.append(terms[i])
                i += 1
        return out

    def tokenize(self, terms: Sequence[str]) -> list[str]:
        """Phrase-merged tokens restricted to vocabulary entries."""
        return [t for t in self.merge_phrases(terms) if t in self.index]

    def to_dict(self) -> dict:
        return {
            "doc_frequency": {t: self.doc_frequency[t] for t in self.terms},
            "phrases": list(self.phrases),
            "unigrams": list(self.unigrams),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Vocabulary":
        return cls(tuple(d["unigrams"]), tuple(d["phrases"]), dict(d["doc_frequency"]))


def phrase_significance(pair_count: int, count1: int, count2: int, n_positions: int) -> float:
    """Deviation of an observed adjacent-pair count from independence.

    ``(f12 - f1*f2/N) / sqrt(f12)``, with N the number of adjacent-pair
    positions in the corpus.
    """
    if pair_count <= 0 or n_positions <= 0:
        return float("-inf")
    return (pair_count - count1 * count2 / n_positions) / math.sqrt(pair_count)


def mine_phrases(corpus: Corpus | Iterable[Paper], min_count: int = 5, sig_threshold: float = 3.0) -> Vocabulary:
    docs = [p.terms for p in corpus if p.terms]
    if not docs:
        raise EmptyCorpusError("no paper has terms; cannot build a vocabulary")
    unigram = Counter()
    pairs = Counter()
    n_positions = 0
    for terms in docs:
        unigram.update(terms)
        pairs.update(zip(terms, terms[1:]))
        n_positions += max(len(terms) - 1, 0)

    phrases = sorted(
        _phrase(w1, w2)
        for (w1, w2), f12 in pairs.items()
        if f12 >= min_count and phrase_significance(f12, unigram[w1], unigram[w2], n_positions) >= sig_threshold
    )
    provisional = Vocabulary((), tuple(phrases), {})
    df = Counter()
    for terms in docs:
        df.update(set(provisional.merge_phrases(terms)))
    phrase_set = set(phrases)
    kept_phrases = tuple(p for p in phrases if df[p] > 0)
    unigrams = tuple(sorted(t for t in df if t not in phrase_set))
    return Vocabulary(unigrams, kept_phrases, dict(df))


@njit(cache=True)
def _gibbs_sweep(words, docs, z, nkw, ndk, nk, alpha, beta, vbeta, u, p):
    n_topics = nk.shape[0]
    for i in range(words.shape[0]):
        w = words[i]
        d = docs[i]
        t = z[i]
        nkw[t, w] -= 1
        ndk[d, t] -= 1
        nk[t] -= 1
        total = 0.0
        for k in range(n_topics):
            total += (ndk[d, k] + alpha) * (nkw[k, w] + beta) / (nk[k] + vbeta)
            p[k] = total
        r = u[i] * total
        t = 0
        while t < n_topics - 1 and p[t] <= r:
            t += 1
        z[i] = t
        nkw[t, w] += 1
        ndk[d, t] += 1
        nk[t] += 1


@dataclass(eq=False)
class TopicModel:
    vocab: Vocabulary
    k: int
    alpha: float
    beta: float
    seed: int
    n_iterations: int
    doc_ids: tuple[str, ...]
    doc_offsets: np.ndarray  # len(doc_ids) + 1
    words: np.ndarray
    assignments: np.ndarray
    topic_term_counts: np.ndarray  # k x |vocab|

    def __post_init__(self):
        self._doc_pos = {pid: i for i, pid in enumerate(self.doc_ids)}

    @property
    def n_tokens(self) -> int:
        return int(self.words.shape[0])

    def doc_assignments(self, paper_id: str) -> np.ndarray | None:
        i = self._doc_pos.get(paper_id)
        if i is None:
            return None
        return self.assignments[self.doc_offsets[i]:self.doc_offsets[i + 1]]

    def doc_topic_counts(self) -> np.ndarray:
        docs = np.repeat(np.arange(len(self.doc_ids)), np.diff(self.doc_offsets))
        out = np.zeros((len(self.doc_ids), self.k), dtype=np.int64)
        np.add.at(out, (docs, self.assignments), 1)
        return out

    def top_terms(self, topic: int, m: int = DEFAULT_TOP_M) -> list[str]:
        """Most frequent terms of a topic; ties broken by term order."""
        row = self.topic_term_counts[topic]
        order = np.lexsort((np.arange(row.shape[0]), -row))
        return [self.vocab.terms[j] for j in order[:m]]

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "assignments": self.assignments.tolist(),
            "beta": self.beta,
            "doc_ids": list(self.doc_ids),
            "doc_offsets": self.doc_offsets.tolist(),
            "format": MODEL_FORMAT,
            "k": self.k,
            "n_iterations": self.n_iterations,
            "seed": self.seed,
            "topic_term_counts": self.topic_term_counts.tolist(),
            "version": MODEL_VERSION,
            "vocab": self.vocab.to_dict(),
            "words": self.words.tolist(),
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "TopicModel":
        d = json.loads(Path(path).read_text(encoding="utf-8"))
        if d.get("format") != MODEL_FORMAT or d.get("version") != MODEL_VERSION:
            raise ValueError(f"{path}: not a version-{MODEL_VERSION} topic model")
        return cls(
            vocab=Vocabulary.from_dict(d["vocab"]),
            k=d["k"],
            alpha=d["alpha"],
            beta=d["beta"],
            seed=d["seed"],
            n_iterations=d["n_iterations"],
            doc_ids=tuple(d["doc_ids"]),
            doc_offsets=np.asarray(d["doc_offsets"], dtype=np.int64),
            words=np.asarray(d["words"], dtype=np.int64),
            assignments=np.asarray(d["assignments"], dtype=np.int64),
            topic_term_counts=np.asarray(d["topic_term_counts"], dtype=np.int64).reshape(d["k"], -1),
        )


def default_alpha(k: int) -> float:
    return 50.0 / k


def fit(
    corpus: Corpus | Iterable[Paper],
    vocab: Vocabulary,
    k: int,
    alpha: float | None = None,
    beta: float = DEFAULT_BETA,
    iters: int = DEFAULT_ITERS,
    seed: int = 42,
    checkpoint: Callable[[int, TopicModel], None] | None = None,
    checkpoint_every: int = 100,
) -> TopicModel:
    """Collapsed Gibbs sampling over all token-topic assignments.

    Every random draw comes from one ``numpy`` PCG64 stream seeded with
    ``seed`` (initial assignments, then one uniform per token per sweep),
    so identical inputs give bit-identical counts. ``checkpoint`` is called
    with ``(sweeps_done, model)`` every ``checkpoint_every`` sweeps.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    if iters < 1:
        raise ValueError("iters must be at least 1")
    if k > len(vocab):
        raise ValueError(f"k={k} exceeds vocabulary size {len(vocab)}")
    alpha = default_alpha(k) if alpha is None else float(alpha)
    if alpha <= 0 or beta <= 0:
        raise ValueError("alpha and beta must be positive")

    doc_ids, offsets, word_list = [], [0], []
    for p in corpus:
        if not p.terms:
            continue
        toks = [vocab.index[t] for t in vocab.tokenize(p.terms)]
        if not toks:
            continue
        doc_ids.append(p.id)
        word_list.extend(toks)
        offsets.append(len(word_list))
    words = np.asarray(word_list, dtype=np.int64)
    doc_offsets = np.asarray(offsets, dtype=np.int64)
    docs = np.repeat(np.arange(len(doc_ids), dtype=np.int64), np.diff(doc_offsets))
    n_vocab = len(vocab)

    rng = np.random.default_rng(seed)
    z = rng.integers(0, k, size=words.shape[0]).astype(np.int64)
    nkw = np.zeros((k, n_vocab), dtype=np.int64)
    ndk = np.zeros((len(doc_ids), k), dtype=np.int64)
    np.add.at(nkw, (z, words), 1)
    np.add.at(ndk, (docs, z), 1)
    nk = nkw.sum(axis=1)
    p = np.empty(k, dtype=np.float64)

    model = TopicModel(
        vocab=vocab, k=k, alpha=alpha, beta=float(beta), seed=seed, n_iterations=0,
        doc_ids=tuple(doc_ids), doc_offsets=doc_offsets, words=words,
        assignments=z, topic_term_counts=nkw,
    )
    for sweep in range(1, iters + 1):
        u = rng.random(words.shape[0])
        _gibbs_sweep(words, docs, z, nkw, ndk, nk, alpha, float(beta), n_vocab * float(beta), u, p)
        model.n_iterations = sweep
        if checkpoint is not None and sweep % checkpoint_every == 0:
            checkpoint(sweep, model)
    return model


def _normalize(counts: np.ndarray) -> np.ndarray:
    total = counts.sum()
    if total == 0:
        return np.zeros(counts.shape[0], dtype=np.float64)
    return counts.astype(np.float64) / float(total)


def embed_document(model: TopicModel, paper: Paper) -> np.ndarray:
    """Relative frequency of the paper's final-sweep topic assignments."""
    z = model.doc_assignments(paper.id)
    if z is None:
        if paper.terms and model.vocab.tokenize(paper.terms):
            raise ValueError(f"paper {paper.id} has terms but was not part of the fitted corpus")
        return np.zeros(model.k, dtype=np.float64)
    return _normalize(np.bincount(z, minlength=model.k))


def term_counts(model: TopicModel, term: str) -> np.ndarray:
    j = model.vocab.index.get(term)
    if j is None or model.topic_term_counts[:, j].sum() == 0:
        raise UnknownTermError(term)
    return model.topic_term_counts[:, j].copy()


def embed_term(model: TopicModel, term: str) -> np.ndarray:
    return _normalize(term_counts(model, term))


def embed_corpus(model: TopicModel, corpus: Corpus) -> dict[str, np.ndarray]:
    return {p.id: embed_document(model, p) for p in corpus.papers}


def write_embeddings(embeddings: Mapping[str, np.ndarray], path: str | Path, order: Sequence[str] | None = None) -> None:
    ids = list(order) if order is not None else sorted(embeddings)
    k = len(next(iter(embeddings.values()))) if embeddings else 0
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["paper_id"] + [f"w{i}" for i in range(k)])
        for pid in ids:
            w.writerow([pid] + [repr(float(x)) for x in embeddings[pid]])


def read_embeddings(path: str | Path) -> dict[str, np.ndarray]:
    """Load pre-computed embeddings (``paper_id,w0,...``)."""
    out = {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        k = len(header) - 1
        for lineno, row in enumerate(reader, start=2):
            if len(row) != k + 1:
                raise ValueError(f"{path}:{lineno}: expected {k + 1} columns")
            v = np.asarray([float(x) for x in row[1:]], dtype=np.float64)
            if np.any(v < 0):
                raise ValueError(f"{path}:{lineno}: negative topic weight")
            out[row[0]] = v
    return out


def document_sets(model: TopicModel, corpus: Corpus | Iterable[Paper]) -> list[frozenset[str]]:
    return [frozenset(model.vocab.tokenize(p.terms)) for p in corpus if p.terms]


def umass_coherence(
    model: TopicModel,
    corpus: Corpus | Iterable[Paper],
    top_m: int = DEFAULT_TOP_M,
) -> tuple[list[float], float]:
    """UMass coherence of each topic and the mean over topics.

    For top terms ranked by topic frequency, sums
    ``log((D(w_i, w_j) + 1) / D(w_j))`` over pairs where ``w_j`` ranks
    above ``w_i``; D counts documents.
    """
    if top_m < 2:
        raise ValueError("top_m must be at least 2")
    docs = document_sets(model, corpus)
    per_topic = []
    for t in range(model.k):
        top = model.top_terms(t, top_m)
        df = {w: sum(1 for d in docs if w in d) for w in top}
        score = 0.0
        for i in range(1, len(top)):
            for j in range(i):
                co = sum(1 for d in docs if top[i] in d and top[j] in d)
                denom = df[top[j]]
                if denom == 0:
                    continue
                score += math.log((co + 1) / denom)
        per_topic.append(score)
    return per_topic, float(np.mean(per_topic))


def plateau_index(values: Sequence[float], window: int, rel_tol: float = 0.05) -> int:
    """First index whose next ``window`` values all stay within ``rel_tol``.

    Relative change is measured against the candidate's own value. Falls
    back to the argmax when no index qualifies.
    """
    if window < 1:
        raise ValueError("window must be at least 1")
    n = len(values)
    if n == 0:
        raise ValueError("no values")
    for i in range(n - window):
        base = values[i]
        scale = abs(base) if base != 0 else 1.0
        if all(abs(values[j] - base) <= rel_tol * scale for j in range(i + 1, i + window + 1)):
            return i
    return int(np.argmax(values))


def coherence_curve(
    corpus: Corpus,
    vocab: Vocabulary,
    k_grid: Sequence[int],
    top_m: int = DEFAULT_TOP_M,
    **fit_kwargs,
) -> list[tuple[int, float]]:
    out = []
    for k in k_grid:
        model = fit(corpus, vocab, k, **fit_kwargs)
        out.append((k, umass_coherence(model, corpus, top_m)[1]))
    return out


def select_k(
    corpus: Corpus,
    vocab: Vocabulary,
    k_grid: Sequence[int],
    stability_window: int = 2,
    rel_tol: float = 0.05,
    top_m: int = DEFAULT_TOP_M,
    **fit_kwargs,
) -> int:
    if list(k_grid) != sorted(k_grid):
        raise ValueError("k_grid must be sorted ascending")
    if len(k_grid) < stability_window:
        raise ValueError("k_grid shorter than stability_window")
    curve = coherence_curve(corpus, vocab, k_grid, top_m, **fit_kwargs)
    return k_grid[plateau_index([c for _, c in curve], stability_window, rel_tol)]
