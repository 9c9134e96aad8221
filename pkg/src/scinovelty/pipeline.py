"""Staged, resumable pipeline: ingest -> disambiguate -> topics -> metrics -> influence -> report.

Each stage writes into ``<workdir>/<stage>/`` and finishes by writing a
``manifest.json`` that records a hash of the stage's parameters chained to
the hash of its upstream stage. A stage is skipped when its manifest hash
matches and every listed output is still on disk.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import json
import logging
import os
import shutil
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Callable

from . import __version__
from .corpus import build_citation_graph, ingest, summary_stats, write_corpus, write_edges
from .disambig import disambiguate, filter_career_start, read_assignment, write_assignment
from .influence import (
    AnalysisContext,
    cohort_series,
    early_cohorts,
    h_indices,
    identify_superstars,
    individual_profile,
    inspiration_degrees,
    partition_inspirees,
    pooled_group_series,
    superstar_comparison,
    write_cohorts,
    write_groups,
    write_profiles,
    write_series,
    write_superstars,
)
from .metrics import build_innovation_index, compute_metrics, read_metrics, write_metrics
from .topics import (
    Vocabulary,
    coherence_curve,
    embed_corpus,
    fit,
    mine_phrases,
    plateau_index,
    read_embeddings,
    umass_coherence,
    write_embeddings,
)

log = logging.getLogger(__name__)

WORKDIR_ENV = "SCINOVELTY_WORKDIR"
STAGES = ("ingest", "disambiguate", "topics", "metrics", "influence", "report")
MANIFEST = "manifest.json"


class ConfigError(ValueError):
    pass


class PipelineError(RuntimeError):
    """A stage failed; ``stage`` names it and ``cause`` is the original error."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {type(cause).__name__}: {cause}")


# --- configuration ----------------------------------------------------------

def _opt_str(s: str) -> str | None:
    return s or None


def _opt_float(s: str) -> float | None:
    return float(s) if s else None


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _int_tuple(s: str) -> tuple[int, ...]:
    return tuple(int(x) for x in s.split(",") if x.strip())


def _float_tuple(s: str) -> tuple[float, ...]:
    return tuple(float(x) for x in s.split(",") if x.strip())


def _str_tuple(s: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in s.split(",") if x.strip())


def _opt(section: str, parse: Callable[[str], Any]):
    return {"section": section, "parse": parse}


@dataclass(frozen=True)
class PipelineConfig:
    corpus: str | None = field(default=None, metadata=_opt("paths", _opt_str))
    workdir: str = field(default="scinovelty-work", metadata=_opt("paths", str))
    edges: str | None = field(default=None, metadata=_opt("paths", _opt_str))
    assignment: str | None = field(default=None, metadata=_opt("paths", _opt_str))
    embeddings: str | None = field(default=None, metadata=_opt("paths", _opt_str))

    threshold: int = field(default=10, metadata=_opt("disambig", int))
    general_name_count: int = field(default=1000, metadata=_opt("disambig", int))

    k: int = field(default=25, metadata=_opt("topics", int))
    k_grid: tuple[int, ...] = field(default=(), metadata=_opt("topics", _int_tuple))
    alpha: float | None = field(default=None, metadata=_opt("topics", _opt_float))
    beta: float = field(default=0.01, metadata=_opt("topics", float))
    iters: int = field(default=1000, metadata=_opt("topics", int))
    seed: int = field(default=42, metadata=_opt("topics", int))
    top_m: int = field(default=10, metadata=_opt("topics", int))
    stability_window: int = field(default=2, metadata=_opt("topics", int))
    rel_tol: float = field(default=0.05, metadata=_opt("topics", float))
    phrase_min_count: int = field(default=5, metadata=_opt("topics", int))
    phrase_threshold: float = field(default=3.0, metadata=_opt("topics", float))

    min_pair_docs: int = field(default=2, metadata=_opt("metrics", int))
    pmi_threshold: float = field(default=0.0, metadata=_opt("metrics", float))

    superstar_quantile: float = field(default=0.001, metadata=_opt("influence", float))
    bounds: tuple[float, ...] = field(default=(0.1, 0.2, 0.3, 0.5, 1.0), metadata=_opt("influence", _float_tuple))
    window_years: int = field(default=5, metadata=_opt("influence", int))
    collab_fraction: float = field(default=0.5, metadata=_opt("influence", float))
    innovator_quantile: float = field(default=0.1, metadata=_opt("influence", float))
    innovation_statistic: str = field(default="sum", metadata=_opt("influence", str))
    min_first_year: int | None = field(default=None, metadata=_opt("influence", lambda s: int(s) if s else None))
    cite_only: bool = field(default=True, metadata=_opt("influence", _bool))

    figures: tuple[str, ...] = field(default=("all",), metadata=_opt("report", _str_tuple))
    fraction_bins: int = field(default=5, metadata=_opt("report", int))

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        def need(ok: bool, msg: str):
            if not ok:
                raise ConfigError(msg)

        need(self.threshold > 0, "threshold must be positive")
        need(self.general_name_count >= 0, "general_name_count must be non-negative")
        need(self.k >= 2, "k must be at least 2")
        need(all(k >= 2 for k in self.k_grid), "k_grid entries must be at least 2")
        need(list(self.k_grid) == sorted(set(self.k_grid)), "k_grid must be strictly increasing")
        need(not self.k_grid or len(self.k_grid) >= self.stability_window, "k_grid shorter than stability_window")
        need(self.alpha is None or self.alpha > 0, "alpha must be positive")
        need(self.beta > 0, "beta must be positive")
        need(self.iters >= 1, "iters must be at least 1")
        need(self.seed >= 0, "seed must be non-negative")
        need(self.top_m >= 2, "top_m must be at least 2")
        need(self.stability_window >= 1, "stability_window must be at least 1")
        need(self.rel_tol >= 0, "rel_tol must be non-negative")
        need(self.phrase_min_count >= 1, "phrase_min_count must be at least 1")
        need(self.min_pair_docs >= 1, "min_pair_docs must be at least 1")
        need(0 < self.superstar_quantile < 1, "superstar_quantile must be in (0, 1)")
        b = self.bounds
        need(bool(b) and b[-1] == 1.0 and b[0] > 0 and all(x < y for x, y in zip(b, b[1:])),
             "bounds must increase strictly and end at 1.0")
        need(self.window_years >= 1, "window_years must be at least 1")
        need(0 < self.collab_fraction <= 1, "collab_fraction must be in (0, 1]")
        need(0 < self.innovator_quantile < 1, "innovator_quantile must be in (0, 1)")
        need(self.innovation_statistic in ("sum", "mean"), "innovation_statistic must be sum or mean")
        need(self.fraction_bins >= 1, "fraction_bins must be at least 1")
        from .report import FIGURES

        unknown = set(self.figures) - set(FIGURES) - {"all"}
        need(not unknown, f"unknown figures: {sorted(unknown)}")

    # file format: INI, one section per stage group

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        for f in fields(self):
            sec = f.metadata["section"]
            if not cp.has_section(sec):
                cp.add_section(sec)
            cp.set(sec, f.name, _format_value(getattr(self, f.name)))
        lines = []
        for sec in cp.sections():
            lines.append(f"[{sec}]")
            lines.extend(f"{k} = {v}".rstrip() for k, v in cp.items(sec))
            lines.append("")
        return "\n".join(lines)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_ini(), encoding="utf-8")

    @classmethod
    def from_ini(cls, text: str, source: str = "<config>", base_dir: str | Path | None = None) -> "PipelineConfig":
        cp = configparser.ConfigParser(interpolation=None)
        try:
            cp.read_string(text, source=source)
        except configparser.Error as e:
            raise ConfigError(f"{source}: {e}") from None
        known = {f.name: f for f in fields(cls)}
        values: dict[str, Any] = {}
        for sec in cp.sections():
            for key, raw in cp.items(sec):
                f = known.get(key)
                if f is None or f.metadata["section"] != sec:
                    raise ConfigError(f"{source}: unknown option [{sec}] {key}")
                try:
                    values[key] = f.metadata["parse"](raw.strip())
                except ValueError as e:
                    raise ConfigError(f"{source}: [{sec}] {key}: {e}") from None
        if base_dir is not None:
            # input files resolve against the config's directory; workdir stays cwd-relative
            for key in _INPUT_FILES:
                v = values.get(key)
                if v and not Path(v).is_absolute():
                    values[key] = str(Path(base_dir) / v)
        return cls(**values)

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"config file not found: {path}")
        return cls.from_ini(path.read_text(encoding="utf-8"), source=str(path), base_dir=path.parent)

    def with_overrides(self, **changes) -> "PipelineConfig":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    def resolved_workdir(self) -> Path:
        return Path(os.environ.get(WORKDIR_ENV) or self.workdir)


def _format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ",".join(_format_value(x) for x in v)
    return str(v)


# --- hashing and manifests --------------------------------------------------

STAGE_PARAMS = {
    "ingest": ("corpus", "edges"),
    "disambiguate": ("threshold", "general_name_count", "assignment"),
    "topics": ("k", "k_grid", "alpha", "beta", "iters", "seed", "top_m", "stability_window",
               "rel_tol", "phrase_min_count", "phrase_threshold", "embeddings"),
    "metrics": ("min_pair_docs", "pmi_threshold"),
    "influence": ("superstar_quantile", "bounds", "window_years", "collab_fraction",
                  "innovator_quantile", "innovation_statistic", "min_first_year", "cite_only"),
    "report": ("figures", "fraction_bins"),
}
_INPUT_FILES = ("corpus", "edges", "assignment", "embeddings")


def _file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def stage_hash(config: PipelineConfig, stage: str, upstream: str = "") -> str:
    """Hash of the stage's parameters and input-file contents, chained to upstream.

    Input files are hashed by content, not path, so moving a workdir or
    corpus file does not invalidate anything.
    """
    params = {}
    for name in STAGE_PARAMS[stage]:
        v = getattr(config, name)
        if name in _INPUT_FILES:
            v = _file_digest(v) if v else None
        params[name] = list(v) if isinstance(v, tuple) else v
    payload = json.dumps({"stage": stage, "params": params, "upstream": upstream, "version": __version__},
                         sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def read_manifest(stage_dir: Path) -> dict | None:
    try:
        return json.loads((stage_dir / MANIFEST).read_text(encoding="utf-8"))
    except (FileNotFoundError, json.JSONDecodeError):
        return None


def _is_current(stage_dir: Path, digest: str) -> bool:
    m = read_manifest(stage_dir)
    if m is None or m.get("hash") != digest:
        return False
    return all((stage_dir / name).is_file() for name in m.get("outputs", ()))


def _write_manifest(stage_dir: Path, stage: str, digest: str, outputs: list[str]) -> None:
    m = {"hash": digest, "outputs": sorted(outputs), "stage": stage}
    (stage_dir / MANIFEST).write_text(json.dumps(m, sort_keys=True, indent=1) + "\n", encoding="utf-8")


# --- stages -------------------------------------------------------------------

@dataclass
class _Inputs:
    """Lazily loaded artifacts of already-finished stages."""

    workdir: Path
    _cache: dict = field(default_factory=dict)

    def _get(self, key, loader):
        if key not in self._cache:
            self._cache[key] = loader()
        return self._cache[key]

    @property
    def corpus(self):
        return self._get("corpus", lambda: ingest(self.workdir / "ingest" / "corpus.jsonl"))

    @property
    def graph(self):
        return self._get("graph", lambda: build_citation_graph(self.corpus))

    @property
    def authors(self):
        return self._get("authors", lambda: read_assignment(self.workdir / "disambiguate" / "authors.csv", self.corpus))

    @property
    def vocab(self):
        return self._get("vocab", lambda: Vocabulary.from_dict(
            json.loads((self.workdir / "topics" / "vocab.json").read_text(encoding="utf-8"))))

    @property
    def embeddings(self):
        return self._get("embeddings", lambda: read_embeddings(self.workdir / "topics" / "embeddings.csv"))

    @property
    def metrics(self):
        return self._get("metrics", lambda: read_metrics(self.workdir / "metrics" / "metrics.csv"))


def _write_rows(path: Path, header, rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _stage_ingest(cfg: PipelineConfig, inp: _Inputs, out: Path) -> list[str]:
    if not cfg.corpus:
        raise ConfigError("no corpus path configured")
    corpus = ingest(cfg.corpus, edges=cfg.edges)
    graph = build_citation_graph(corpus)
    write_corpus(corpus, out / "corpus.jsonl")
    write_edges(graph, out / "edges.csv")
    _write_rows(out / "ingest_summary.csv", ["key", "value"], [
        ("n_papers", len(corpus)),
        ("n_papers_with_terms", sum(1 for p in corpus.papers if p.terms)),
        ("n_edges", graph.n_edges),
        ("total_references", graph.total_references),
        ("resolved_fraction", repr(graph.resolved_fraction)),
        ("dropped_self_references", corpus.dropped_self_references),
        ("dropped_duplicate_references", corpus.dropped_duplicate_references),
    ])
    inp._cache.update(corpus=corpus, graph=graph)
    return ["corpus.jsonl", "edges.csv", "ingest_summary.csv"]


def _stage_disambiguate(cfg: PipelineConfig, inp: _Inputs, out: Path) -> list[str]:
    if cfg.assignment:
        table = read_assignment(cfg.assignment, inp.corpus)
    else:
        table = disambiguate(inp.corpus, inp.graph, cfg.threshold, cfg.general_name_count)
    write_assignment(table, out / "authors.csv", inp.corpus)
    inp._cache["authors"] = table
    return ["authors.csv"]


def _stage_topics(cfg: PipelineConfig, inp: _Inputs, out: Path) -> list[str]:
    corpus = inp.corpus
    vocab = mine_phrases(corpus, cfg.phrase_min_count, cfg.phrase_threshold)
    (out / "vocab.json").write_text(json.dumps(vocab.to_dict(), sort_keys=True, indent=1) + "\n", encoding="utf-8")
    outputs = ["vocab.json", "embeddings.csv"]
    order = [p.id for p in corpus.papers]
    if cfg.embeddings:
        emb = read_embeddings(cfg.embeddings)
        missing = [pid for pid in order if pid not in emb]
        if missing:
            raise ValueError(f"{cfg.embeddings}: no embedding for {len(missing)} papers, e.g. {missing[0]}")
        write_embeddings(emb, out / "embeddings.csv", order)
        inp._cache["embeddings"] = {pid: emb[pid] for pid in order}
        inp._cache["vocab"] = vocab
        return outputs

    fit_kwargs = {"alpha": cfg.alpha, "beta": cfg.beta, "iters": cfg.iters, "seed": cfg.seed}
    k = cfg.k
    if cfg.k_grid:
        curve = coherence_curve(corpus, vocab, cfg.k_grid, cfg.top_m, **fit_kwargs)
        k = cfg.k_grid[plateau_index([c for _, c in curve], cfg.stability_window, cfg.rel_tol)]
        _write_rows(out / "coherence.csv", ["k", "umass", "selected"],
                    [(kk, repr(c), int(kk == k)) for kk, c in curve])
        outputs.append("coherence.csv")
    model = fit(corpus, vocab, k, **fit_kwargs)
    model.save(out / "model.json")
    per_topic, _ = umass_coherence(model, corpus, cfg.top_m)
    _write_rows(out / "topic_terms.csv", ["topic", "umass", "top_terms"],
                [(t, repr(per_topic[t]), " | ".join(model.top_terms(t, cfg.top_m))) for t in range(model.k)])
    emb = embed_corpus(model, corpus)
    write_embeddings(emb, out / "embeddings.csv", order)
    inp._cache.update(vocab=vocab, embeddings=emb)
    return outputs + ["model.json", "topic_terms.csv"]


def _stage_metrics(cfg: PipelineConfig, inp: _Inputs, out: Path) -> list[str]:
    index = build_innovation_index(inp.corpus, inp.vocab, cfg.min_pair_docs, cfg.pmi_threshold)
    records = compute_metrics(inp.corpus, inp.graph, inp.embeddings, index)
    write_metrics(records, out / "metrics.csv", [p.id for p in inp.corpus.papers])
    pos = inp.corpus.position
    _write_rows(out / "innovation_pairs.csv", ["term_a", "term_b", "first_paper", "pair_docs", "pmi"], [
        (a, b, pid, index.pair_doc_count[(a, b)], repr(index.pmi[(a, b)]))
        for (a, b), pid in sorted(index.pair_first_paper.items(), key=lambda kv: (pos(kv[1]), kv[0]))
    ])
    inp._cache["metrics"] = records
    return ["metrics.csv", "innovation_pairs.csv"]


def _stage_influence(cfg: PipelineConfig, inp: _Inputs, out: Path) -> list[str]:
    corpus, graph = inp.corpus, inp.graph
    authors = inp.authors
    if cfg.min_first_year is not None:
        authors = filter_career_start(authors, cfg.min_first_year)
    ctx = AnalysisContext(corpus, graph, authors, inp.metrics, inp.embeddings)
    h = h_indices(authors, graph)
    table = identify_superstars(h, cfg.superstar_quantile)
    stars = table.superstars

    _write_rows(out / "h_index.csv", ["author_id", "h_index", "superstar"],
                [(a, h[a], int(a in stars)) for a in sorted(h, key=lambda a: (-h[a], a))])
    write_superstars(table, out / "superstars.csv")
    stats = summary_stats(corpus, graph, h)
    _write_rows(out / "corpus_stats.csv", ["key", "value"],
                [(k, repr(v) if isinstance(v, float) else v) for k, v in stats.rows()])

    groups = {s: partition_inspirees(s, inspiration_degrees(ctx, s), cfg.bounds) for s in sorted(stars)}
    write_groups(groups, out / "groups.csv")
    write_series(pooled_group_series(ctx, groups, cfg.cite_only), out / "group_series.csv")
    write_series(superstar_comparison(ctx, stars), out / "superstar_comparison.csv")

    profiles = []
    for exclude in (False, True):
        for a in authors:
            if a.author_id in stars:
                continue
            p = individual_profile(ctx, a.author_id, stars, exclude)
            if not p.empty:
                profiles.append(p)
    write_profiles(profiles, out / "individual.csv")

    cohorts = early_cohorts(ctx, stars, cfg.window_years, cfg.collab_fraction,
                            cfg.innovator_quantile, cfg.innovation_statistic)
    write_cohorts(cohorts, out / "cohorts.csv")
    write_series(cohort_series(ctx, cohorts, stars, False), out / "cohort_series.csv")
    write_series(cohort_series(ctx, cohorts, stars, True), out / "cohort_series_excluded.csv")
    return ["h_index.csv", "superstars.csv", "corpus_stats.csv", "groups.csv", "group_series.csv",
            "superstar_comparison.csv", "individual.csv", "cohorts.csv", "cohort_series.csv",
            "cohort_series_excluded.csv"]


def _stage_report(cfg: PipelineConfig, inp: _Inputs, out: Path) -> list[str]:
    from .report import FIGURES, MissingSeriesError, render_report

    # "all" renders what the data supports; naming a figure makes it required
    every = "all" in cfg.figures
    kinds = FIGURES if every else tuple(f for f in FIGURES if f in cfg.figures)
    files = []
    for kind in kinds:
        try:
            files += render_report(inp.workdir / "influence", kind, out, fraction_bins=cfg.fraction_bins)
        except MissingSeriesError as e:
            if not every:
                raise
            log.warning("skipping figure %s: %s", kind, e)
    return [f.name for f in files]


_RUNNERS = {
    "ingest": _stage_ingest,
    "disambiguate": _stage_disambiguate,
    "topics": _stage_topics,
    "metrics": _stage_metrics,
    "influence": _stage_influence,
    "report": _stage_report,
}


@dataclass(frozen=True)
class RunResult:
    workdir: Path
    executed: tuple[str, ...]
    skipped: tuple[str, ...]

    def stage_dir(self, stage: str) -> Path:
        return self.workdir / stage


def run_pipeline(
    config: PipelineConfig,
    until: str = "report",
    force: bool = False,
) -> RunResult:
    """Run every stage up to and including ``until``, skipping current ones.

    A stage reruns when its own parameters, an input file, or any upstream
    stage changed, or when one of its outputs has gone missing.
    """
    if until not in STAGES:
        raise ValueError(f"unknown stage {until!r}")
    if config.corpus and not Path(config.corpus).is_file():
        raise PipelineError("ingest", FileNotFoundError(f"corpus file not found: {config.corpus}"))
    workdir = config.resolved_workdir()
    workdir.mkdir(parents=True, exist_ok=True)
    inp = _Inputs(workdir)
    executed, skipped = [], []
    upstream = ""
    stale = force
    for stage in STAGES[: STAGES.index(until) + 1]:
        stage_dir = workdir / stage
        try:
            digest = stage_hash(config, stage, upstream)
        except OSError as e:
            raise PipelineError(stage, e) from e
        if not stale and _is_current(stage_dir, digest):
            log.info("stage %s is current, skipping", stage)
            skipped.append(stage)
            upstream = digest
            continue
        stale = True
        if stage_dir.exists():
            shutil.rmtree(stage_dir)
        stage_dir.mkdir(parents=True)
        log.info("running stage %s", stage)
        try:
            outputs = _RUNNERS[stage](config, inp, stage_dir)
        except PipelineError:
            raise
        except Exception as e:
            raise PipelineError(stage, e) from e
        _write_manifest(stage_dir, stage, digest, outputs)
        executed.append(stage)
        upstream = digest
    return RunResult(workdir, tuple(executed), tuple(skipped))
