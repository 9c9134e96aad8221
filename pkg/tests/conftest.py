from __future__ import annotations

import json
from pathlib import Path

import pytest

from scinovelty.corpus import Affiliation, AuthorMention, Corpus, Paper
from scinovelty.topics import Vocabulary

DATA = Path(__file__).resolve().parents[1] / "src" / "scinovelty" / "data"
GOLDEN = Path(__file__).resolve().parent / "golden"


def mention(surname: str, given: str = "", aff: Affiliation | None = None) -> AuthorMention:
    return AuthorMention(surname, given, aff)


def paper(pid: str, year: int = 2000, terms=(), authors=(), refs=(), journal: str = "J") -> Paper:
    return Paper(
        id=pid,
        year=year,
        journal=journal,
        title=pid,
        terms=tuple(terms),
        authors=tuple(authors),
        references=tuple(refs),
    )


def corpus_of(*papers: Paper) -> Corpus:
    return Corpus(tuple(papers))


def plain_vocab(corpus) -> Vocabulary:
    """Every term of the corpus, no phrases."""
    df = {}
    for p in corpus.papers:
        for t in set(p.terms):
            df[t] = df.get(t, 0) + 1
    return Vocabulary(tuple(sorted(df)), (), df)


def write_jsonl(path: Path, records) -> Path:
    path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def bundled_corpus_path() -> Path:
    return DATA / "synthetic.jsonl"


@pytest.fixture(scope="session")
def bundled_truth() -> dict:
    return json.loads((DATA / "synthetic.truth.json").read_text(encoding="utf-8"))
