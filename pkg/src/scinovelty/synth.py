"""Synthetic citation corpora with planted structure and a ground-truth sidecar."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .corpus import Affiliation, AuthorMention, Corpus, Paper, write_corpus

_ONSETS = "b c d f g h j k l m n p r s t v z".split()
_VOWELS = "a e i o u".split()

SURNAMES = (
    "Abel Baker Chen Dorn Ebert Fischer Garcia Haas Ito Jensen Kato Lund Meyer Novak Olsen "
    "Park Quinn Rossi Sato Tanaka Ueda Vogel Wang Xu Young Zhang Berg Costa Diaz Ernst"
).split()
FIRST_NAMES = (
    "Alice Bruno Clara David Elena Felix Greta Hugo Irene Jonas Karin Louis Maria Nils Olga "
    "Paul Rosa Stefan Tara Ugo Vera Walter Yuki Zoe Anton Beatriz Carl Dora Emil Fiona"
).split()
COUNTRIES = (("USA", ("Boston", "Chicago")), ("Germany", ("Berlin", "Munich")), ("Japan", ("Tokyo", "Kyoto")))
ORGS = ("State University", "Institute of Technology", "National Laboratory")
DEPTS = ("Physics", "Applied Physics", "Materials Science")
JOURNALS = ("Phys. Rev. A", "Phys. Rev. B", "Phys. Rev. Lett.")


@dataclass(frozen=True)
class SyntheticSpec:
    n_papers: int = 200
    n_authors: int = 80
    n_topics: int = 4
    year_start: int = 1960
    year_end: int = 2004
    n_superstars: int = 1
    superstar_start: int | None = 1970
    attachment_exponent: float = 1.0
    seed: int = 42
    words_per_topic: int = 30
    terms_per_paper: int = 30
    refs_per_paper: float = 3.0
    abstract_fraction: float = 0.85
    external_ref_rate: float = 0.05
    superstar_rate: float = 0.15
    superstar_boost: float = 2.0
    topic_affinity: float = 2.0
    n_planted_pairs: int = 3
    planted_pair_repeats: int = 3

    def __post_init__(self):
        if self.n_papers < 1 or self.n_authors < 1 or self.n_topics < 1:
            raise ValueError("n_papers, n_authors and n_topics must be positive")
        if self.year_end < self.year_start:
            raise ValueError("year_end before year_start")
        if not 0 <= self.n_superstars <= self.n_authors:
            raise ValueError("n_superstars out of range")
        if self.attachment_exponent < 0:
            raise ValueError("attachment_exponent must be non-negative")


def _pseudo_words(rng: np.random.Generator, n: int, taken: set[str]) -> list[str]:
    out = []
    while len(out) < n:
        n_syl = int(rng.integers(2, 4))
        w = "".join(_ONSETS[rng.integers(len(_ONSETS))] + _VOWELS[rng.integers(len(_VOWELS))] for _ in range(n_syl))
        if w not in taken:
            taken.add(w)
            out.append(w)
    return out


def generate_synthetic(spec: SyntheticSpec) -> tuple[Corpus, dict]:
    """Build a corpus and its ground truth from ``spec``.

    Papers draw terms from a dominant and a secondary topic, cite earlier
    papers with probability proportional to
    ``(citations + 1) ** attachment_exponent`` (scaled up for superstar
    papers and same-topic papers), and planted term pairs first co-occur
    in a known paper.
    """
    rng = np.random.default_rng(spec.seed)
    taken: set[str] = set()
    topic_words = [_pseudo_words(rng, spec.words_per_topic, taken) for _ in range(spec.n_topics)]
    collocations = [tuple(_pseudo_words(rng, 2, taken)) for _ in range(spec.n_topics)]
    planted_words = [tuple(_pseudo_words(rng, 2, taken)) for _ in range(spec.n_planted_pairs)]

    # authors
    # same-surname authors always differ in first initial
    combos = [(s, f) for s in SURNAMES for f in FIRST_NAMES]
    names, used = [], set()
    for j in rng.permutation(len(combos)):
        surname, first = combos[int(j)]
        if (surname, first[0]) not in used:
            used.add((surname, first[0]))
            names.append((surname, first))
        if len(names) == spec.n_authors:
            break
    if len(names) < spec.n_authors:
        raise ValueError(f"name pool supports at most {len(names)} authors")
    star_start = spec.year_start if spec.superstar_start is None else spec.superstar_start
    authors = []
    for i, (surname, first) in enumerate(names):
        country, cities = COUNTRIES[int(rng.integers(len(COUNTRIES)))]
        is_star = i < spec.n_superstars
        middle = chr(ord("A") + int(rng.integers(26))) if rng.random() < 0.5 else ""
        authors.append({
            "id": f"A{i:04d}",
            "surname": surname,
            "first": first,
            "middle": middle,
            "affiliation": Affiliation(country, cities[int(rng.integers(2))], ORGS[int(rng.integers(3))], DEPTS[int(rng.integers(3))]),
            "topic": int(rng.integers(spec.n_topics)),
            "start": star_start if is_star else int(rng.integers(spec.year_start, max(spec.year_start, spec.year_end - 3) + 1)),
            "star": is_star,
        })
    stars = [a for a in authors if a["star"]]

    years = np.sort(rng.integers(spec.year_start, spec.year_end + 1, size=spec.n_papers))
    papers = []
    paper_star = np.zeros(spec.n_papers, dtype=bool)
    paper_topic = np.zeros(spec.n_papers, dtype=np.int64)
    citations = np.zeros(spec.n_papers, dtype=np.float64)
    mention_truth: dict[str, str] = {}
    terms_by_paper: list[list[str]] = []
    meta = []
    for i, year in enumerate(int(y) for y in years):
        active = [a for a in authors if a["start"] <= year and not a["star"]] or [a for a in authors if not a["star"]] or authors
        lead = active[int(rng.integers(len(active)))]
        team = [lead]
        for _ in range(int(rng.integers(0, 3))):
            c = active[int(rng.integers(len(active)))]
            if c not in team:
                team.append(c)
        for s in stars:
            if s["start"] <= year and rng.random() < spec.superstar_rate and s not in team:
                team.insert(int(rng.integers(len(team) + 1)), s)
        paper_star[i] = any(a["star"] for a in team)
        dom = lead["topic"]
        paper_topic[i] = dom
        sec = int(rng.integers(spec.n_topics))

        terms: list[str] = []
        if rng.random() < spec.abstract_fraction:
            n_terms = max(4, int(rng.poisson(spec.terms_per_paper)))
            while len(terms) < n_terms:
                t = dom if rng.random() < 0.75 else sec
                if rng.random() < 0.08:
                    terms.extend(collocations[t])
                else:
                    terms.append(topic_words[t][int(rng.integers(spec.words_per_topic))])
        terms_by_paper.append(terms)
        meta.append((year, team, dom))

    # planted pairs: first co-occurrence in a known paper, repeated later
    with_terms = [i for i, t in enumerate(terms_by_paper) if t]
    planted = []
    if with_terms and spec.n_planted_pairs:
        third = max(1, len(with_terms) // 3)
        for n, (wa, wb) in enumerate(planted_words):
            first_pos = third + int(rng.integers(third)) if len(with_terms) > 2 * third else int(rng.integers(len(with_terms)))
            first_pos = min(first_pos, len(with_terms) - 1)
            later = with_terms[first_pos + 1:]
            chosen = [with_terms[first_pos]]
            if later:
                k = min(spec.planted_pair_repeats, len(later))
                chosen += sorted(int(x) for x in rng.choice(later, size=k, replace=False))
            for i in chosen:
                terms_by_paper[i].insert(int(rng.integers(len(terms_by_paper[i]) + 1)), wa)
                terms_by_paper[i].insert(int(rng.integers(len(terms_by_paper[i]) + 1)), wb)
            planted.append({"terms": sorted([wa, wb]), "first_paper": None, "_first_index": chosen[0]})

    ids = [f"10.9999/SYN.{i:05d}" for i in range(spec.n_papers)]
    for i, (year, team, dom) in enumerate(meta):
        refs: list[str] = []
        if i > 0:
            n_refs = min(i, int(rng.poisson(spec.refs_per_paper)))
            if n_refs:
                w = (citations[:i] + 1.0) ** spec.attachment_exponent
                w = w * np.where(paper_star[:i], spec.superstar_boost, 1.0)
                w = w * np.where(paper_topic[:i] == dom, spec.topic_affinity, 1.0)
                chosen = rng.choice(i, size=n_refs, replace=False, p=w / w.sum())
                for j in sorted(int(x) for x in chosen):
                    refs.append(ids[j])
                    citations[j] += 1
        if rng.random() < spec.external_ref_rate:
            refs.append(f"10.9999/EXT.{i:05d}")
        mentions = []
        for m, a in enumerate(team):
            if rng.random() < 0.3:
                given = a["first"][0] + "." + (f" {a['middle']}." if a["middle"] else "")
            else:
                given = a["first"] + (f" {a['middle']}." if a["middle"] else "")
            mentions.append(AuthorMention(a["surname"], given, a["affiliation"]))
            mention_truth[f"{ids[i]}#{m}"] = a["id"]
        papers.append(Paper(
            id=ids[i],
            year=year,
            journal=JOURNALS[dom % len(JOURNALS)],
            title=f"Synthetic study {i} on topic {dom}",
            terms=tuple(terms_by_paper[i]),
            authors=tuple(mentions),
            references=tuple(refs),
        ))
    for p in planted:
        p["first_paper"] = ids[p.pop("_first_index")]

    truth = {
        "spec": asdict(spec),
        "superstars": [a["id"] for a in stars],
        "true_author": mention_truth,
        "paper_topic": {ids[i]: int(paper_topic[i]) for i in range(spec.n_papers)},
        "topic_words": topic_words,
        "planted_pairs": planted,
    }
    return Corpus(tuple(papers)), truth


def write_synthetic(spec: SyntheticSpec, path: str | Path) -> tuple[Path, Path]:
    """Write the corpus JSONL and a ``.truth.json`` sidecar next to it."""
    path = Path(path)
    corpus, truth = generate_synthetic(spec)
    write_corpus(corpus, path)
    sidecar = path.with_name(path.stem + ".truth.json")
    sidecar.write_text(json.dumps(truth, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    return path, sidecar
