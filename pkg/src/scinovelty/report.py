"""SVG figures with CSV twins.

Every figure is first reduced to a :class:`FigureData` (panels of series of
``x, y, ci, n`` points). The CSV twin is that structure verbatim, and
:func:`draw` builds the figure from it alone, so a twin read back with
:func:`read_twin` redraws the same geometry.
"""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

from matplotlib import rc_context
from matplotlib.figure import Figure
from matplotlib.lines import Line2D

from .influence import PAPER_METRICS, mean_ci, read_profiles, read_series

FIGURES = ("superstars", "groups", "individual", "cohorts")

_RC = {
    "svg.hashsalt": "scinovelty",
    "svg.fonttype": "none",
    "path.simplify": False,
    "font.size": 8,
}
_SVG_METADATA = {"Date": None, "Creator": None}

_LABELS = {
    "shannon": "Shannon entropy",
    "ref_diversity": "reference diversity",
    "cite_diversity": "citation diversity",
    "innovation": "innovation",
    "citations": "citations",
    "similarity": "group similarity",
    "publications": "publications",
}


class MissingSeriesError(LookupError):
    """Raised when the data a figure needs is absent or empty."""


@dataclass
class Series:
    name: str
    x: list[float] = field(default_factory=list)
    y: list[float] = field(default_factory=list)
    ci: list[float] = field(default_factory=list)
    n: list[int] = field(default_factory=list)

    def add(self, x: float, y: float, ci: float, n: int) -> None:
        self.x.append(float(x))
        self.y.append(float(y))
        self.ci.append(float(ci))
        self.n.append(int(n))


@dataclass
class Panel:
    title: str
    series: list[Series] = field(default_factory=list)


@dataclass
class FigureData:
    kind: str
    style: str  # "line" or "bar"
    xlabel: str
    panels: list[Panel] = field(default_factory=list)

    def is_empty(self) -> bool:
        return not any(s.x for p in self.panels for s in p.series)


# --- data reduction ----------------------------------------------------------

def _need(bundle: Path, name: str) -> Path:
    path = bundle / name
    if not path.is_file():
        raise MissingSeriesError(f"missing series file: {path}")
    return path


def _line_panels(report, metrics=None) -> list[Panel]:
    panels = []
    for metric in metrics or report.metrics():
        panel = Panel(_LABELS.get(metric, metric))
        for g in report.groups():
            rows = report.series(g, metric)
            if rows:
                s = Series(g)
                for r in rows:
                    s.add(r.offset, r.mean, r.ci, r.n)
                panel.series.append(s)
        if panel.series:
            panels.append(panel)
    return panels


def superstars_data(bundle: Path) -> FigureData:
    report = read_series(_need(bundle, "superstar_comparison.csv"))
    data = FigureData("superstars", "bar", "")
    for metric in report.metrics():
        panel = Panel(_LABELS.get(metric, metric))
        for i, g in enumerate(report.groups()):
            for r in report.series(g, metric):
                s = Series(g)
                s.add(i, r.mean, r.ci, r.n)
                panel.series.append(s)
        data.panels.append(panel)
    return data


def groups_data(bundle: Path) -> FigureData:
    report = read_series(_need(bundle, "group_series.csv"))
    return FigureData("groups", "line", "years after superstar's first paper", _line_panels(report))


def individual_data(bundle: Path, fraction_bins: int = 5) -> FigureData:
    """Author means binned by the fraction of their papers citing superstars."""
    profiles = read_profiles(_need(bundle, "individual.csv"))
    width = 1.0 / fraction_bins
    data = FigureData("individual", "line", "fraction of papers citing superstars")
    for metric in PAPER_METRICS:
        panel = Panel(_LABELS[metric])
        for excluded, name in ((False, "all papers"), (True, "superstar co-authored excluded")):
            bins: dict[int, list[float]] = defaultdict(list)
            for p in profiles:
                if p.excluded != excluded:
                    continue
                v = p.mean_citations if metric == "citations" else p.means[metric]
                if v is None:
                    continue
                b = min(int(math.floor(p.fraction_citing * fraction_bins)), fraction_bins - 1)
                bins[b].append(v)
            s = Series(name)
            for b in sorted(bins):
                s.add((b + 0.5) * width, *mean_ci(bins[b]))
            if s.x:
                panel.series.append(s)
        if panel.series:
            data.panels.append(panel)
    return data


def cohorts_data(bundle: Path) -> FigureData:
    incl = read_series(_need(bundle, "cohort_series.csv"))
    excl = read_series(_need(bundle, "cohort_series_excluded.csv"))
    panels = []
    for metric in ("citations", "innovation", "publications"):
        panel = Panel(_LABELS[metric])
        for report, suffix in ((incl, ""), (excl, ", superstar co-authored excluded")):
            for p in _line_panels(report, metrics=(metric,)):
                for s in p.series:
                    s.name += suffix
                    panel.series.append(s)
        if panel.series:
            panels.append(panel)
    return FigureData("cohorts", "line", "years after first paper", panels)


def figure_data(bundle: str | Path, kind: str, fraction_bins: int = 5) -> FigureData:
    bundle = Path(bundle)
    if kind == "superstars":
        data = superstars_data(bundle)
    elif kind == "groups":
        data = groups_data(bundle)
    elif kind == "individual":
        data = individual_data(bundle, fraction_bins)
    elif kind == "cohorts":
        data = cohorts_data(bundle)
    else:
        raise ValueError(f"unknown figure {kind!r}; expected one of {', '.join(FIGURES)}")
    if data.is_empty():
        raise MissingSeriesError(f"no series for figure {kind!r} in {bundle}")
    return data


# --- drawing ----------------------------------------------------------------

def draw(data: FigureData) -> Figure:
    """Figure with one axes per panel: lines with CI bands, or bars with error bars."""
    if data.is_empty():
        raise MissingSeriesError(f"no series for figure {data.kind!r}")
    n = len(data.panels)
    cols = min(3, n)
    rows = math.ceil(n / cols)
    fig = Figure(figsize=(3.2 * cols, 2.6 * rows + 0.6), layout="constrained")
    axes = fig.subplots(rows, cols, squeeze=False).ravel()
    labels = list(dict.fromkeys(s.name for p in data.panels for s in p.series))
    for ax, panel in zip(axes, data.panels):
        ax.set_title(panel.title)
        if data.style == "bar":
            for i, s in enumerate(panel.series):
                ax.bar(s.x, s.y, yerr=s.ci, capsize=3, color=f"C{i}", label=s.name)
            ax.set_xticks([s.x[0] for s in panel.series], [s.name for s in panel.series])
        else:
            for s in panel.series:
                i = labels.index(s.name)
                lo = [y - c for y, c in zip(s.y, s.ci)]
                hi = [y + c for y, c in zip(s.y, s.ci)]
                ax.fill_between(s.x, lo, hi, color=f"C{i}", alpha=0.2, linewidth=0)
                ax.plot(s.x, s.y, color=f"C{i}", marker="o", markersize=2.5, linewidth=1, label=s.name)
            ax.set_xlabel(data.xlabel)
    for ax in axes[n:]:
        ax.set_visible(False)
    if data.style == "line":
        handles = [Line2D([], [], color=f"C{i}", marker="o", markersize=2.5, linewidth=1) for i in range(len(labels))]
        ncol = len(labels) if sum(len(x) for x in labels) < 60 else 2
        fig.legend(handles, labels, loc="outside lower center", ncol=ncol, frameon=False)
    return fig


def save_svg(fig: Figure, path: str | Path) -> None:
    with rc_context(_RC):
        fig.savefig(path, format="svg", metadata=_SVG_METADATA)


# --- twins ---------------------------------------------------------------------

TWIN_HEADER = ("figure", "style", "xlabel", "panel", "series", "x", "y", "ci", "n")


def write_twin(data: FigureData, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TWIN_HEADER)
        for p in data.panels:
            for s in p.series:
                for x, y, ci, n in zip(s.x, s.y, s.ci, s.n):
                    w.writerow([data.kind, data.style, data.xlabel, p.title, s.name, repr(x), repr(y), repr(ci), n])


def read_twin(path: str | Path) -> FigureData:
    data = None
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            if data is None:
                data = FigureData(row["figure"], row["style"], row["xlabel"])
            if not data.panels or data.panels[-1].title != row["panel"]:
                data.panels.append(Panel(row["panel"]))
            panel = data.panels[-1]
            if not panel.series or panel.series[-1].name != row["series"]:
                panel.series.append(Series(row["series"]))
            panel.series[-1].add(float(row["x"]), float(row["y"]), float(row["ci"]), int(row["n"]))
    if data is None:
        raise MissingSeriesError(f"empty figure twin: {path}")
    return data


def render_report(
    bundle: str | Path,
    kind: str,
    out_dir: str | Path,
    fraction_bins: int = 5,
) -> list[Path]:
    """Write ``fig_<kind>.svg`` and its ``fig_<kind>.csv`` twin into ``out_dir``."""
    data = figure_data(bundle, kind, fraction_bins)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    svg, twin = out_dir / f"fig_{kind}.svg", out_dir / f"fig_{kind}.csv"
    write_twin(data, twin)
    save_svg(draw(data), svg)
    return [svg, twin]
