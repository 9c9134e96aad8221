"""Command line entry point.

Every analysis subcommand runs the pipeline up to its own stage (reusing
current upstream stages from the workdir) and then prints the artifact it
is named after. Flags override values from ``--config``.
"""

from __future__ import annotations

import argparse
import logging
import sys
from importlib import resources
from pathlib import Path

from . import __version__
from .pipeline import (
    ConfigError,
    PipelineConfig,
    PipelineError,
    RunResult,
    run_pipeline,
)
from .report import FIGURES
from .synth import SyntheticSpec, write_synthetic

log = logging.getLogger("scinovelty")

BUNDLED_CONFIG = "synthetic.ini"


def bundled_config_path() -> Path:
    return Path(str(resources.files("scinovelty") / "data" / BUNDLED_CONFIG))


def _csv_list(cast):
    def parse(s: str):
        try:
            return tuple(cast(x) for x in s.split(",") if x.strip())
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad list: {s!r}") from None
    return parse


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("pipeline")
    g.add_argument("--config", type=Path, help="INI config file")
    g.add_argument("--bundled", action="store_true", help="use the bundled synthetic corpus and config")
    g.add_argument("--corpus", help="corpus JSONL file")
    g.add_argument("--edges", help="extra citing_id,cited_id edges merged into references")
    g.add_argument("--workdir", help="working directory (env SCINOVELTY_WORKDIR wins over this)")
    g.add_argument("--force", action="store_true", help="rerun every stage even if current")
    g.add_argument("-v", "--verbose", action="count", default=0)


def _disambig_flags(p):
    p.add_argument("--threshold", type=int)
    p.add_argument("--assignment", help="use this paper_id,mention_index,author_id CSV instead of disambiguating")


def _topic_flags(p):
    p.add_argument("--k", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--iters", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--top-m", dest="top_m", type=int)
    p.add_argument("--embeddings", help="pre-computed paper_id,w0,... embeddings; skips fitting")


def _metric_flags(p):
    p.add_argument("--min-pair-docs", dest="min_pair_docs", type=int)
    p.add_argument("--pmi-threshold", dest="pmi_threshold", type=float)


def _influence_flags(p):
    p.add_argument("--quantile", dest="superstar_quantile", type=float)
    p.add_argument("--bounds", type=_csv_list(float), help="comma-separated cumulative bounds ending at 1.0")
    p.add_argument("--window-years", dest="window_years", type=int)
    p.add_argument("--collab-fraction", dest="collab_fraction", type=float)
    p.add_argument("--innovator-quantile", dest="innovator_quantile", type=float)
    p.add_argument("--min-first-year", dest="min_first_year", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scinovelty", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate and normalize a corpus")
    _common(p)

    p = sub.add_parser("disambiguate", help="assign author ids to mentions")
    _common(p)
    _disambig_flags(p)

    p = sub.add_parser("topics", help="fit the topic model or scan coherence")
    tsub = p.add_subparsers(dest="action", required=True)
    fp = tsub.add_parser("fit")
    _common(fp)
    _topic_flags(fp)
    cp = tsub.add_parser("coherence")
    _common(cp)
    _topic_flags(cp)
    cp.add_argument("--k-grid", dest="k_grid", type=_csv_list(int), help="comma-separated topic counts")

    p = sub.add_parser("metrics", help="per-paper entropy, diversity and innovation")
    _common(p)
    _metric_flags(p)

    p = sub.add_parser("influence", help="superstar and cohort analysis")
    isub = p.add_subparsers(dest="action", required=True)
    for name in ("superstars", "groups", "individual", "cohorts"):
        ip = isub.add_parser(name)
        _common(ip)
        _influence_flags(ip)

    p = sub.add_parser("report", help="render SVG figures with CSV twins")
    _common(p)
    p.add_argument("--figure", dest="figures", action="append", choices=(*FIGURES, "all"))
    p.add_argument("--bins", dest="fraction_bins", type=int)

    p = sub.add_parser("run", help="run every stage")
    _common(p)
    _disambig_flags(p)
    _topic_flags(p)
    _metric_flags(p)
    _influence_flags(p)

    p = sub.add_parser("synth", help="write a synthetic corpus and its truth sidecar")
    p.add_argument("output", type=Path)
    p.add_argument("--papers", dest="n_papers", type=int)
    p.add_argument("--authors", dest="n_authors", type=int)
    p.add_argument("--topics", dest="n_topics", type=int)
    p.add_argument("--superstars", dest="n_superstars", type=int)
    p.add_argument("--exponent", dest="attachment_exponent", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("-v", "--verbose", action="count", default=0)
    return parser


_OVERRIDES = (
    "corpus", "edges", "workdir", "threshold", "assignment", "k", "k_grid", "alpha", "beta", "iters",
    "seed", "top_m", "embeddings", "min_pair_docs", "pmi_threshold", "superstar_quantile", "bounds",
    "window_years", "collab_fraction", "innovator_quantile", "min_first_year", "fraction_bins",
)


def load_config(args: argparse.Namespace) -> PipelineConfig:
    if args.bundled and args.config:
        raise ConfigError("--bundled and --config are mutually exclusive")
    if args.bundled:
        cfg = PipelineConfig.load(bundled_config_path())
    elif args.config:
        cfg = PipelineConfig.load(args.config)
    else:
        cfg = PipelineConfig()
    changes = {k: getattr(args, k) for k in _OVERRIDES if getattr(args, k, None) is not None}
    if getattr(args, "figures", None):
        changes["figures"] = tuple(args.figures)
    return cfg.with_overrides(**changes)


def _print_file(path: Path) -> None:
    sys.stdout.write(path.read_text(encoding="utf-8"))


def _show(args: argparse.Namespace, result: RunResult) -> None:
    wd = result.workdir
    cmd, action = args.command, getattr(args, "action", None)
    if cmd == "ingest":
        _print_file(wd / "ingest" / "ingest_summary.csv")
    elif cmd == "disambiguate":
        _print_file(wd / "disambiguate" / "authors.csv")
    elif cmd == "topics" and action == "coherence":
        _print_file(wd / "topics" / "coherence.csv")
    elif cmd == "topics":
        _print_file(wd / "topics" / "topic_terms.csv")
    elif cmd == "metrics":
        _print_file(wd / "metrics" / "metrics.csv")
    elif cmd == "influence":
        name = {"superstars": "superstars.csv", "groups": "groups.csv",
                "individual": "individual.csv", "cohorts": "cohorts.csv"}[action]
        _print_file(wd / "influence" / name)
    else:
        for f in sorted((wd / "report").glob("fig_*")):
            print(f)


_UNTIL = {"ingest": "ingest", "disambiguate": "disambiguate", "topics": "topics", "metrics": "metrics",
          "influence": "influence", "report": "report", "run": "report"}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "synth":
            kw = {k: getattr(args, k) for k in ("n_papers", "n_authors", "n_topics", "n_superstars",
                                                "attachment_exponent", "seed") if getattr(args, k) is not None}
            args.output.parent.mkdir(parents=True, exist_ok=True)
            corpus_path, sidecar = write_synthetic(SyntheticSpec(**kw), args.output)
            print(corpus_path)
            print(sidecar)
            return 0
        cfg = load_config(args)
        if args.command == "topics" and args.action == "coherence" and not cfg.k_grid:
            raise ConfigError("topics coherence needs --k-grid or k_grid in the config")
        result = run_pipeline(cfg, until=_UNTIL[args.command], force=args.force)
        _show(args, result)
        return 0
    except PipelineError as e:
        print(f"scinovelty: error: {e}", file=sys.stderr)
        return 1
    except (ConfigError, FileNotFoundError, ValueError) as e:
        print(f"scinovelty: error: config: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
