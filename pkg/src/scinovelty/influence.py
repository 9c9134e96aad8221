"""Superstar identification and inspiree / early-career cohort analysis."""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path

import numpy as np

from .corpus import CitationGraph, Corpus, citations_of
from .disambig import AuthorRecord, AuthorTable
from .metrics import METRIC_NAMES, MetricRecord, group_similarity

DEFAULT_QUANTILE = 0.001
DEFAULT_BOUNDS = (0.1, 0.2, 0.3, 0.5, 1.0)
Z_95 = 1.96

PAPER_METRICS = (*METRIC_NAMES, "citations")


def h_index_from_counts(counts: Iterable[int]) -> int:
    ranked = sorted(counts, reverse=True)
    return sum(1 for i, c in enumerate(ranked, start=1) if c >= i)


def h_index(author: AuthorRecord, graph: CitationGraph) -> int:
    """Largest h with at least h papers cited at least h times each."""
    return h_index_from_counts(citations_of(graph, p) for p in author.papers)


def h_indices(table: AuthorTable, graph: CitationGraph) -> dict[str, int]:
    return {a.author_id: h_index(a, graph) for a in table}


def rank_cutoff(values: Iterable[float], quantile: float) -> float | None:
    """Value held by the ``ceil(quantile * N)``-th largest entry.

    Everything at or above the returned value is "in the top quantile",
    so ties at the boundary are all included.
    """
    if not 0 < quantile < 1:
        raise ValueError("quantile must be in (0, 1)")
    ranked = sorted(values, reverse=True)
    if not ranked:
        return None
    rank = max(1, math.ceil(Fraction(str(quantile)) * len(ranked)))
    return ranked[rank - 1]


@dataclass(frozen=True)
class HIndexTable:
    h: Mapping[str, int]
    threshold_h: int | None
    quantile: float

    @cached_property
    def superstars(self) -> frozenset[str]:
        if self.threshold_h is None:
            return frozenset()
        return frozenset(a for a, h in self.h.items() if h >= self.threshold_h)

    def is_superstar(self, author_id: str) -> bool:
        return author_id in self.superstars


def identify_superstars(h: Mapping[str, int], quantile: float = DEFAULT_QUANTILE) -> HIndexTable:
    return HIndexTable(h=dict(h), threshold_h=rank_cutoff(h.values(), quantile), quantile=quantile)


@dataclass
class AnalysisContext:
    """Read-only bundle of everything the influence computations consult."""

    corpus: Corpus
    graph: CitationGraph
    authors: AuthorTable
    metrics: Mapping[str, MetricRecord]
    embeddings: Mapping[str, np.ndarray] = field(default_factory=dict)

    @cached_property
    def paper_authors(self) -> dict[str, tuple[str, ...]]:
        out: dict[str, list[str]] = defaultdict(list)
        for (pid, _), aid in sorted(self.authors.assignment.items()):
            if aid not in out[pid]:
                out[pid].append(aid)
        return {pid: tuple(v) for pid, v in out.items()}

    @cached_property
    def citations(self) -> dict[str, int]:
        return {p.id: citations_of(self.graph, p.id) for p in self.corpus.papers}

    def year(self, pid: str) -> int:
        return self.corpus[pid].year

    def papers_of(self, author_id: str) -> tuple[str, ...]:
        return self.authors[author_id].papers

    def value(self, pid: str, metric: str) -> float | None:
        if metric == "citations":
            return float(self.citations[pid])
        rec = self.metrics.get(pid)
        if rec is None:
            return None
        v = rec.get(metric)
        return None if v is None else float(v)

    def cites_any(self, pid: str, targets: frozenset[str] | set[str]) -> bool:
        return any(r in targets for r in self.graph.out_edges.get(pid, ()))

    def coauthored_with(self, pid: str, author_id: str, superstars: frozenset[str]) -> bool:
        """Paper has a superstar author other than ``author_id``."""
        return any(a in superstars and a != author_id for a in self.paper_authors.get(pid, ()))

    def superstar_papers(self, superstars: Iterable[str]) -> frozenset[str]:
        return frozenset(p for s in superstars for p in self.papers_of(s))


def inspiration_degree(author: AuthorRecord, superstar: AuthorRecord, graph: CitationGraph) -> int:
    """Reference edges from the author's papers to the superstar's papers."""
    targets = set(superstar.papers)
    return sum(1 for p in author.papers for r in graph.out_edges.get(p, ()) if r in targets)


def inspiration_degrees(ctx: AnalysisContext, superstar_id: str) -> dict[str, int]:
    """Degree of every author (other than the superstar) citing them at least once."""
    targets = set(ctx.papers_of(superstar_id))
    counts: dict[str, int] = defaultdict(int)
    for p in ctx.corpus.papers:
        n = sum(1 for r in ctx.graph.out_edges.get(p.id, ()) if r in targets)
        if n:
            for a in ctx.paper_authors.get(p.id, ()):
                if a != superstar_id:
                    counts[a] += n
    return dict(sorted(counts.items()))


def group_label(lower: float, upper: float) -> str:
    lo, hi = round(lower * 100), round(upper * 100)
    return f"top{hi}" if lo == 0 else f"{lo}-{hi}"


@dataclass(frozen=True)
class InspireeGroup:
    superstar_id: str
    index: int
    lower: float
    upper: float
    members: tuple[str, ...]
    degrees: tuple[int, ...]

    @property
    def label(self) -> str:
        return group_label(self.lower, self.upper)


def group_sizes(n: int, bounds: Sequence[float]) -> list[int]:
    """Sizes of the rank intervals ``(n*b[g-1], n*b[g]]``, computed exactly."""
    cuts = [0] + [math.floor(n * Fraction(str(b))) for b in bounds]
    return [cuts[i + 1] - cuts[i] for i in range(len(bounds))]


def partition_inspirees(
    superstar_id: str,
    degrees: Mapping[str, int],
    bounds: Sequence[float] = DEFAULT_BOUNDS,
) -> list[InspireeGroup]:
    if list(bounds) != sorted(bounds) or not bounds or bounds[-1] != 1.0 or bounds[0] <= 0:
        raise ValueError("bounds must increase and end at 1.0")
    ranked = sorted(((a, d) for a, d in degrees.items() if d >= 1), key=lambda x: (-x[1], x[0]))
    sizes = group_sizes(len(ranked), bounds)
    groups, start, lower = [], 0, 0.0
    for g, (size, upper) in enumerate(zip(sizes, bounds)):
        chunk = ranked[start:start + size]
        groups.append(
            InspireeGroup(
                superstar_id=superstar_id,
                index=g,
                lower=lower,
                upper=float(upper),
                members=tuple(a for a, _ in chunk),
                degrees=tuple(d for _, d in chunk),
            )
        )
        start += size
        lower = float(upper)
    return groups


def mean_ci(values: Sequence[float]) -> tuple[float, float, int]:
    """Mean, 95% normal-approximation half-width and sample size.

    Uses the sample standard deviation; a single value has half-width 0.
    """
    n = len(values)
    if n == 0:
        raise ValueError("no values")
    mean = math.fsum(values) / n
    if n == 1:
        return mean, 0.0, 1
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, Z_95 * math.sqrt(var) / math.sqrt(n), n


@dataclass(frozen=True)
class SeriesRow:
    group: str
    metric: str
    offset: int
    mean: float
    ci: float
    n: int


@dataclass
class CohortReport:
    rows: list[SeriesRow]

    @property
    def aggregate(self) -> dict[tuple[str, str], float]:
        """Temporal mean of each (group, metric) series."""
        acc: dict[tuple[str, str], list[float]] = defaultdict(list)
        for r in self.rows:
            acc[(r.group, r.metric)].append(r.mean)
        return {k: math.fsum(v) / len(v) for k, v in sorted(acc.items())}

    def series(self, group: str, metric: str) -> list[SeriesRow]:
        return sorted((r for r in self.rows if r.group == group and r.metric == metric), key=lambda r: r.offset)

    def groups(self) -> list[str]:
        return list(dict.fromkeys(r.group for r in self.rows))

    def metrics(self) -> list[str]:
        return list(dict.fromkeys(r.metric for r in self.rows))


def group_papers(
    ctx: AnalysisContext,
    group: InspireeGroup,
    t0: int,
    cite_only: bool = True,
) -> dict[int, list[str]]:
    """P(G, s, t): papers at offset t > 0 by group members citing the superstar."""
    targets = frozenset(ctx.papers_of(group.superstar_id))
    by_offset: dict[int, set[str]] = defaultdict(set)
    for a in group.members:
        for pid in ctx.papers_of(a):
            t = ctx.year(pid) - t0
            if t <= 0:
                continue
            if cite_only and not ctx.cites_any(pid, targets):
                continue
            by_offset[t].add(pid)
    return {t: sorted(ps, key=ctx.corpus.position) for t, ps in sorted(by_offset.items())}


def _metric_rows(ctx: AnalysisContext, label: str, by_offset: Mapping[int, Sequence[str]]) -> list[SeriesRow]:
    rows = []
    for metric in PAPER_METRICS:
        for t, papers in by_offset.items():
            vals = [v for v in (ctx.value(p, metric) for p in papers) if v is not None]
            if vals:
                rows.append(SeriesRow(label, metric, t, *mean_ci(vals)))
    return rows


def _similarity_by_offset(ctx: AnalysisContext, by_offset: Mapping[int, Sequence[str]]) -> dict[int, tuple[float, int]]:
    out = {}
    for t, papers in by_offset.items():
        vecs = [ctx.embeddings[p] for p in papers if p in ctx.embeddings and np.any(ctx.embeddings[p])]
        if len(vecs) >= 2:
            out[t] = (group_similarity(vecs), len(vecs))
    return out


def group_series(
    ctx: AnalysisContext,
    group: InspireeGroup,
    t0: int,
    cite_only: bool = True,
) -> list[SeriesRow]:
    """Per-offset mean, CI and n of each metric over P(G, s, t)."""
    by_offset = group_papers(ctx, group, t0, cite_only)
    rows = _metric_rows(ctx, group.label, by_offset)
    for t, (sim, n) in _similarity_by_offset(ctx, by_offset).items():
        rows.append(SeriesRow(group.label, "similarity", t, sim, 0.0, n))
    return rows


def pooled_group_series(
    ctx: AnalysisContext,
    groups: Mapping[str, Sequence[InspireeGroup]],
    cite_only: bool = True,
) -> CohortReport:
    """Group series pooled over superstars, each on its own t0 clock.

    Paper-level metrics pool the (superstar, paper) samples; similarity is
    computed per superstar and offset, then averaged over superstars.
    """
    samples: dict[tuple[str, str, int], list[float]] = defaultdict(list)
    order: list[str] = []
    for sid, glist in sorted(groups.items()):
        t0 = ctx.authors[sid].first_pub_year
        for g in glist:
            if g.label not in order:
                order.append(g.label)
            by_offset = group_papers(ctx, g, t0, cite_only)
            for t, (sim, _) in _similarity_by_offset(ctx, by_offset).items():
                samples[(g.label, "similarity", t)].append(sim)
            for metric in PAPER_METRICS:
                for t, papers in by_offset.items():
                    samples[(g.label, metric, t)].extend(
                        v for v in (ctx.value(p, metric) for p in papers) if v is not None
                    )
    rows = []
    metric_order = (*PAPER_METRICS, "similarity")
    for (label, metric, t), vals in sorted(
        samples.items(), key=lambda kv: (order.index(kv[0][0]), metric_order.index(kv[0][1]), kv[0][2])
    ):
        if vals:
            rows.append(SeriesRow(label, metric, t, *mean_ci(vals)))
    return CohortReport(rows)


@dataclass(frozen=True)
class IndividualProfile:
    author_id: str
    excluded: bool
    fraction_citing: float
    n_papers: int
    mean_citations: float | None
    means: Mapping[str, float | None]

    @property
    def empty(self) -> bool:
        return self.n_papers == 0


def _mean_or_none(vals: list[float]) -> float | None:
    return math.fsum(vals) / len(vals) if vals else None


def individual_profile(
    ctx: AnalysisContext,
    author_id: str,
    superstars: frozenset[str],
    exclude_superstar_coauthored: bool = False,
) -> IndividualProfile:
    """Author-level averages against the share of papers citing superstars.

    The citing fraction is always taken over all the author's papers; the
    exclusion flag only narrows the paper set the averages run over.
    """
    papers = ctx.papers_of(author_id)
    targets = ctx.superstar_papers(superstars)
    n_citing = sum(1 for p in papers if ctx.cites_any(p, targets))
    used = [p for p in papers if not (exclude_superstar_coauthored and ctx.coauthored_with(p, author_id, superstars))]
    means = {}
    for metric in METRIC_NAMES:
        means[metric] = _mean_or_none([v for v in (ctx.value(p, metric) for p in used) if v is not None])
    return IndividualProfile(
        author_id=author_id,
        excluded=exclude_superstar_coauthored,
        fraction_citing=n_citing / len(papers) if papers else 0.0,
        n_papers=len(used),
        mean_citations=_mean_or_none([float(ctx.citations[p]) for p in used]),
        means=means,
    )


@dataclass(frozen=True)
class EarlyCohorts:
    early_collaborators: frozenset[str]
    early_innovators: frozenset[str]
    innovation_cutoff: float | None = None

    def __post_init__(self):
        overlap = self.early_collaborators & self.early_innovators
        if overlap:
            raise AssertionError(f"cohorts overlap: {sorted(overlap)}")


def window_papers(ctx: AnalysisContext, author_id: str, window_years: int) -> list[str]:
    """Papers in ``[first_pub_year, first_pub_year + window_years)``."""
    start = ctx.authors[author_id].first_pub_year
    return [p for p in ctx.papers_of(author_id) if start <= ctx.year(p) < start + window_years]


def early_innovation_score(ctx: AnalysisContext, papers: Sequence[str], statistic: str = "sum") -> float:
    vals = [ctx.metrics[p].innovation for p in papers if p in ctx.metrics and ctx.metrics[p].innovation is not None]
    if statistic == "sum":
        return float(sum(vals))
    if statistic == "mean":
        return sum(vals) / len(vals) if vals else 0.0
    raise ValueError(f"unknown innovation statistic {statistic!r}")


def early_cohorts(
    ctx: AnalysisContext,
    superstars: frozenset[str],
    window_years: int = 5,
    collab_fraction: float = 0.5,
    innovator_quantile: float = 0.1,
    innovation_statistic: str = "sum",
) -> EarlyCohorts:
    """Early collaborators and early innovators among non-superstar authors.

    The innovation cutoff is taken over every author with an in-window
    paper; innovators must also score above zero and have neither
    superstar co-authors nor superstar citations inside the window.
    """
    if window_years < 1:
        raise ValueError("window_years must be at least 1")
    if not 0 < collab_fraction <= 1:
        raise ValueError("collab_fraction must be in (0, 1]")
    targets = ctx.superstar_papers(superstars)
    collaborators, clean, scores = set(), set(), {}
    for a in ctx.authors:
        aid = a.author_id
        papers = window_papers(ctx, aid, window_years)
        if not papers:
            continue
        scores[aid] = early_innovation_score(ctx, papers, innovation_statistic)
        if aid in superstars:
            continue
        n_co = sum(1 for p in papers if ctx.coauthored_with(p, aid, superstars))
        if n_co / len(papers) >= collab_fraction:
            collaborators.add(aid)
        if n_co == 0 and not any(ctx.cites_any(p, targets) for p in papers):
            clean.add(aid)
    cutoff = rank_cutoff(scores.values(), innovator_quantile) if scores else None
    innovators = {
        a for a in clean if cutoff is not None and scores[a] >= cutoff and scores[a] > 0
    }
    return EarlyCohorts(frozenset(collaborators), frozenset(innovators), cutoff)


COHORT_METRICS = ("citations", "publications", "innovation")


def cohort_series(
    ctx: AnalysisContext,
    cohorts: EarlyCohorts,
    superstars: frozenset[str],
    exclude_superstar_coauthored: bool = False,
) -> CohortReport:
    """Career-relative trajectories (offset from each author's first paper).

    Citations and innovation average over the papers at an offset;
    publications average the per-member paper count (zeros included) over
    offsets up to the last one where any member published.
    """
    rows = []
    for label, members in (("early_collaborators", cohorts.early_collaborators),
                           ("early_innovators", cohorts.early_innovators)):
        by_offset: dict[int, list[str]] = defaultdict(list)
        per_member: dict[str, dict[int, int]] = {}
        for aid in sorted(members):
            t0 = ctx.authors[aid].first_pub_year
            counts: dict[int, int] = defaultdict(int)
            for pid in ctx.papers_of(aid):
                if exclude_superstar_coauthored and ctx.coauthored_with(pid, aid, superstars):
                    continue
                t = ctx.year(pid) - t0
                by_offset[t].append(pid)
                counts[t] += 1
            per_member[aid] = counts
        if not by_offset:
            continue
        offsets = range(0, max(by_offset) + 1)
        for t in offsets:
            vals = [float(ctx.citations[p]) for p in by_offset.get(t, ())]
            if vals:
                rows.append(SeriesRow(label, "citations", t, *mean_ci(vals)))
        for t in offsets:
            rows.append(SeriesRow(label, "publications", t, *mean_ci([float(c.get(t, 0)) for c in per_member.values()])))
        for t in offsets:
            vals = [v for v in (ctx.value(p, "innovation") for p in by_offset.get(t, ())) if v is not None]
            if vals:
                rows.append(SeriesRow(label, "innovation", t, *mean_ci(vals)))
    return CohortReport(rows)


def superstar_comparison(ctx: AnalysisContext, superstars: frozenset[str]) -> CohortReport:
    """Author-level means of each metric, superstars versus everyone else.

    Each author contributes the mean over their own papers; offset is 0.
    """
    rows = []
    for label, members in (("superstars", sorted(superstars)),
                           ("others", sorted(a.author_id for a in ctx.authors if a.author_id not in superstars))):
        for metric in PAPER_METRICS:
            vals = []
            for aid in members:
                m = _mean_or_none([v for v in (ctx.value(p, metric) for p in ctx.papers_of(aid)) if v is not None])
                if m is not None:
                    vals.append(m)
            if vals:
                rows.append(SeriesRow(label, metric, 0, *mean_ci(vals)))
    return CohortReport(rows)


# --- CSV emission -----------------------------------------------------------

def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(x) for x in r])


def write_superstars(table: HIndexTable, path: str | Path) -> None:
    rows = sorted(((a, table.h[a]) for a in table.superstars), key=lambda r: (-r[1], r[0]))
    _write(path, ["author_id", "h_index"], rows)


def write_groups(groups: Mapping[str, Sequence[InspireeGroup]], path: str | Path) -> None:
    rows = [
        (sid, g.label, a, d)
        for sid in sorted(groups)
        for g in groups[sid]
        for a, d in zip(g.members, g.degrees)
    ]
    _write(path, ["superstar_id", "group", "author_id", "degree"], rows)


def write_series(report: CohortReport, path: str | Path, key: str = "group") -> None:
    _write(path, [key, "metric", "offset", "mean", "ci", "n"],
           ((r.group, r.metric, r.offset, r.mean, r.ci, r.n) for r in report.rows))


def read_series(path: str | Path) -> CohortReport:
    rows = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for g, m, t, mean, ci, n in reader:
            rows.append(SeriesRow(g, m, int(t), float(mean), float(ci), int(n)))
    return CohortReport(rows)


def write_profiles(profiles: Iterable[IndividualProfile], path: str | Path) -> None:
    header = ["author_id", "excluded", "fraction_citing", "n_papers", "mean_citations", *METRIC_NAMES]
    _write(path, header, (
        (p.author_id, int(p.excluded), p.fraction_citing, p.n_papers, p.mean_citations, *(p.means[m] for m in METRIC_NAMES))
        for p in profiles
    ))


def read_profiles(path: str | Path) -> list[IndividualProfile]:
    out = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            def f(k):
                return float(row[k]) if row[k] != "" else None
            out.append(IndividualProfile(
                author_id=row["author_id"],
                excluded=row["excluded"] == "1",
                fraction_citing=float(row["fraction_citing"]),
                n_papers=int(row["n_papers"]),
                mean_citations=f("mean_citations"),
                means={m: f(m) for m in METRIC_NAMES},
            ))
    return out


def write_cohorts(cohorts: EarlyCohorts, path: str | Path) -> None:
    rows = [(a, "early_collaborators") for a in sorted(cohorts.early_collaborators)]
    rows += [(a, "early_innovators") for a in sorted(cohorts.early_innovators)]
    _write(path, ["author_id", "cohort"], rows)
