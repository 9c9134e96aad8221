"""Acceptance criteria, each checked at its stated tolerance and time budget.

Every test prints one ``PASS``/``FAIL`` line. Set ``SCINOVELTY_UPDATE_GOLDEN=1``
to rewrite the committed end-to-end golden bundle after verifying it by hand.
"""

import json
import math
import os
import re
import shutil
import time
from contextlib import contextmanager
from itertools import combinations
from pathlib import Path

import numpy as np
import pytest

from scinovelty.corpus import Affiliation, build_citation_graph
from scinovelty.disambig import disambiguate, mention_contexts, pair_score
from scinovelty.influence import (
    DEFAULT_BOUNDS,
    AnalysisContext,
    early_cohorts,
    group_series,
    group_sizes,
    h_index_from_counts,
    identify_superstars,
    inspiration_degrees,
    partition_inspirees,
)
from scinovelty.metrics import (
    build_innovation_index,
    cosine,
    group_similarity,
    information_diversity,
    innovation,
    shannon_entropy,
)
from scinovelty.pipeline import PipelineConfig, run_pipeline
from scinovelty.synth import SyntheticSpec, generate_synthetic
from scinovelty.topics import fit, umass_coherence

from conftest import DATA, GOLDEN, corpus_of, paper, plain_vocab
from oracles import (
    best_topic_match,
    cohort_fixture,
    cohorts_oracle,
    degrees_oracle,
    diversity_oracle,
    entropy_oracle,
    h_index_oracle,
    innovation_oracle,
    partition_oracle,
    phi_matrix,
    planted_topic_corpus,
    series_oracle,
    similarity_oracle,
    umass_oracle,
)
from test_disambig import _connected, _partitions, _planted_block, smith_pair

GOLDEN_BUNDLE = GOLDEN / "bundle"


@pytest.fixture
def criterion(capsys):
    @contextmanager
    def run(name: str, budget: float):
        start = time.perf_counter()
        ok = False
        try:
            yield
            ok = True
        finally:
            elapsed = time.perf_counter() - start
            within = elapsed < budget
            with capsys.disabled():
                status = "PASS" if ok and within else "FAIL"
                print(f"\n[{status}] {name}: {elapsed:.2f} s (budget {budget:g} s)", end="")
        assert elapsed < budget, f"{name} took {elapsed:.2f} s, budget {budget} s"
    return run


def test_entropy_suite(criterion):
    with criterion("entropy suite", 1.0):
        rng = np.random.default_rng(1)
        for k in (1, 2, 5, 25, 100):
            for i in range(k):
                assert shannon_entropy(np.eye(k)[i]) == 0.0
            assert abs(shannon_entropy(np.full(k, 1.0 / k)) - math.log(k)) <= 1e-12
        for _ in range(1000):
            k = int(rng.integers(2, 60))
            alpha = np.full(k, float(rng.choice([0.05, 0.5, 1.0, 5.0])))
            v = rng.dirichlet(alpha)
            assert abs(shannon_entropy(v) - entropy_oracle(v.tolist())) <= 1e-12


def test_diversity_oracle(criterion):
    with criterion("diversity oracle", 5.0):
        rng = np.random.default_rng(2)
        for _ in range(200):
            n = int(rng.integers(1, 51))
            vs = rng.dirichlet(np.full(25, 0.3), size=n)
            vs[vs < 1e-300] = 0.0
            d = information_diversity(vs)
            assert abs(d - diversity_oracle(vs.tolist())) <= 1e-9
            # permutation: fsum makes the result order-free
            assert information_diversity(vs[rng.permutation(n)]) == d
            # scaling at argument level: every cosine argument pair (c v, c mean)
            mean = vs.mean(axis=0)
            for c in (2.0 ** int(rng.integers(-30, 30)), float(rng.uniform(0.01, 100))):
                for v in vs[:5]:
                    assert abs(cosine(c * v, c * mean) - cosine(v, mean)) <= 1e-15
            assert information_diversity(vs * 2.0 ** int(rng.integers(-30, 30))) == d


def _term_corpus(rng, n_papers, max_terms, vocab_size):
    words = [f"w{i:03d}" for i in range(vocab_size)]
    papers = []
    for i in range(n_papers):
        n = int(rng.integers(0, max_terms + 1))
        terms = [words[int(j) % vocab_size] for j in rng.zipf(1.3, size=n)]
        papers.append(paper(f"P{i:03d}", 1990 + int(rng.integers(0, 15)), terms=terms))
    return corpus_of(*papers)


def test_innovation_oracle(criterion):
    with criterion("innovation oracle", 10.0):
        rng = np.random.default_rng(3)
        corpora = [_term_corpus(rng, 100, 30, 40) for _ in range(3)]
        corpora += [generate_synthetic(SyntheticSpec(n_papers=100, n_authors=40, terms_per_paper=25, seed=s))[0]
                    for s in (1, 2)]
        for corpus in corpora:
            for min_docs, threshold in ((2, 0.0), (1, -1.0), (3, 0.5)):
                vocab = plain_vocab(corpus)
                index = build_innovation_index(corpus, vocab, min_docs, threshold)
                got = {p.id: innovation(p, index) or 0 for p in corpus.papers}
                want = innovation_oracle([(p.id, list(p.terms)) for p in corpus.papers], min_docs, threshold)
                assert got == want
                assert sum(got.values()) == len(index.pair_first_paper)


def test_redundancy_oracle(criterion):
    with criterion("redundancy oracle", 2.0):
        rng = np.random.default_rng(4)
        for _ in range(100):
            n = int(rng.integers(2, 30))
            vs = rng.dirichlet(np.full(25, 0.5), size=n)
            assert abs(group_similarity(vs) - similarity_oracle(vs.tolist())) <= 1e-9
            dup = np.repeat(vs[:1], n, axis=0)
            assert group_similarity(dup) == 1.0


def test_h_index_superstars(criterion):
    with criterion("h-index / superstars", 5.0):
        rng = np.random.default_rng(5)
        for _ in range(10_000):
            counts = rng.negative_binomial(1, 0.1, size=int(rng.integers(0, 40))).tolist()
            assert h_index_from_counts(counts) == h_index_oracle(counts)
        distinct = {f"a{i:04d}": i for i in range(1000)}
        assert identify_superstars(distinct, 0.001).superstars == {"a0999"}
        equal = {f"a{i:04d}": 7 for i in range(1000)}
        assert identify_superstars(equal, 0.001).superstars == set(equal)


def test_disambiguation_suite(criterion):
    with criterion("disambiguation suite", 2.0):
        dept = Affiliation("USA", "Boston", "MIT", "Physics")
        assert smith_pair("J. Q.", "J. Q.").initials == 5
        assert smith_pair("J. Q. R.", "J. Q. R.").initials == 10
        assert smith_pair("J.", "K.").initials == -10
        assert smith_pair("John", "John").first_name == 6
        assert smith_pair("John", "John", general=frozenset({"john"})).first_name == 3
        assert smith_pair(aff_a=Affiliation("USA", "Boston"), aff_b=Affiliation("USA", "Boston")).address == 4
        assert smith_pair(aff_a=Affiliation("USA", "Boston", "MIT"), aff_b=Affiliation("USA", "Boston", "MIT")).address == 7
        assert smith_pair(aff_a=dept, aff_b=dept).address == 10
        for n, pts in ((1, 4), (2, 7), (3, 10)):
            co = [f"Co{i}" for i in range(n)]
            assert smith_pair(co_a=co, co_b=co).shared_coauthors == pts
        assert smith_pair(journal_a="PRL", journal_b="PRL").source_journal == 6
        assert smith_pair(refs_b=["A"]).self_citation == 10
        for n in range(1, 7):
            refs = [f"R{i}" for i in range(n)]
            assert smith_pair(refs_a=refs, refs_b=refs).biblio_coupling == min(2 * n, 10)
        for n in range(1, 7):
            citers = [paper(f"C{i}", 2005, refs=["A", "B"]) for i in range(n)]
            assert smith_pair(extra=citers).co_citation == min(n + 1, 6)

        corpus, planted = _planted_block()
        graph = build_citation_graph(corpus)
        ctx = {c.paper_id: c for c in mention_contexts(corpus, graph) if c.surname == "smith"}
        keys = sorted(ctx)
        edges = {frozenset((a, b)) for a, b in combinations(keys, 2) if pair_score(ctx[a], ctx[b]).total >= 10}
        consistent = [
            {frozenset(b) for b in part}
            for part in _partitions(keys)
            if all(_connected(b, edges) for b in part)
            and all({i for i, b in enumerate(part) if x in b} == {i for i, b in enumerate(part) if y in b}
                    for x, y in map(tuple, edges))
        ]
        assert consistent == [{frozenset(s) for s in planted}]
        table = disambiguate(corpus, graph, threshold=10)
        found = {}
        for (pid, idx), aid in table.assignment.items():
            if corpus[pid].authors[idx].surname == "Smith":
                found.setdefault(aid, set()).add(pid)
        assert {frozenset(v) for v in found.values()} == {frozenset(s) for s in planted}


def test_topic_recovery(criterion):
    with criterion("topic recovery", 60.0):
        corpus, phi = planted_topic_corpus(n_docs=300, k=3, seed=0)
        vocab = plain_vocab(corpus)
        occurrences = np.zeros(len(vocab), dtype=np.int64)
        for p in corpus.papers:
            for t in p.terms:
                occurrences[vocab.index[t]] += 1
        checkpoints = []

        def conserve(sweep, model):
            checkpoints.append(sweep)
            np.testing.assert_array_equal(model.topic_term_counts.sum(axis=0), occurrences)
            recount = np.zeros_like(model.topic_term_counts)
            np.add.at(recount, (model.assignments, model.words), 1)
            np.testing.assert_array_equal(recount, model.topic_term_counts)

        model = fit(corpus, vocab, 3, iters=500, seed=42, checkpoint=conserve, checkpoint_every=100)
        assert checkpoints == [100, 200, 300, 400, 500]
        phi_hat = model.topic_term_counts / model.topic_term_counts.sum(axis=1, keepdims=True)
        assert min(best_topic_match(phi_matrix(phi, model.vocab.terms), phi_hat)) >= 0.9

        small, _ = planted_topic_corpus(n_docs=20, doc_len=15, seed=8)
        small_model = fit(small, plain_vocab(small), 3, iters=50)
        per_topic, _ = umass_coherence(small_model, small, top_m=10)
        docs = [set(p.terms) for p in small.papers]
        for t in range(3):
            assert abs(per_topic[t] - umass_oracle(small_model.top_terms(t, 10), docs)) <= 1e-9


def test_cohort_logic(criterion):
    with criterion("cohort logic", 5.0):
        corpus, table, metrics, stars = cohort_fixture()
        assert len(table.records) == 30
        ctx = AnalysisContext(corpus, build_citation_graph(corpus), table, metrics)
        cohorts = early_cohorts(ctx, stars)
        collaborators, innovators = cohorts_oracle(corpus, table, metrics, stars)
        assert cohorts.early_collaborators == collaborators and collaborators
        assert cohorts.early_innovators == innovators and innovators
        assert not cohorts.early_collaborators & cohorts.early_innovators
        n_checked = 0
        for s in sorted(stars):
            degrees = inspiration_degrees(ctx, s)
            assert degrees == degrees_oracle(corpus, table, s)
            groups = partition_inspirees(s, degrees)
            assert [list(g.members) for g in groups] == partition_oracle(degrees, DEFAULT_BOUNDS)
            assert [len(g.members) for g in groups] == group_sizes(len(degrees), DEFAULT_BOUNDS)
            t0 = table.records[s].first_pub_year
            for g in groups:
                rows = group_series(ctx, g, t0)
                for metric in ("shannon", "ref_diversity", "cite_diversity", "innovation", "citations"):
                    got = {r.offset: (r.mean, r.ci, r.n) for r in rows if r.metric == metric}
                    want = series_oracle(corpus, table, metrics, s, g.members, metric)
                    assert got.keys() == want.keys()
                    for t, (mean, ci, n) in want.items():
                        assert got[t][0] == mean and got[t][2] == n
                        assert abs(got[t][1] - ci) <= 1e-12
                        n_checked += 1
        assert n_checked > 20


def _bundle_files(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def _golden_view(files: dict[str, bytes]) -> dict[str, bytes]:
    """CSV/JSONL artifacts verbatim and SVG path data; manifests carry the package version."""
    out = {}
    for name, data in files.items():
        if name.endswith(".svg"):
            paths = re.findall(r'\sd="([^"]*)"', data.decode("utf-8"))
            out[name + ".paths.json"] = (json.dumps(paths, indent=0) + "\n").encode("utf-8")
        elif not name.endswith("manifest.json") and not name.endswith("model.json"):
            out[name] = data
    return out


def test_end_to_end_determinism(criterion, tmp_path):
    with criterion("end-to-end determinism", 120.0):
        cfg = PipelineConfig.load(DATA / "synthetic.ini")
        bundles = []
        for run in ("a", "b"):
            result = run_pipeline(cfg.with_overrides(workdir=str(tmp_path / run)))
            assert len(result.executed) == 6
            bundles.append(_bundle_files(result.workdir))
        assert bundles[0].keys() == bundles[1].keys()
        assert [n for n in bundles[0] if bundles[0][n] != bundles[1][n]] == []
        assert any(n.endswith(".svg") for n in bundles[0])

        view = _golden_view(bundles[0])
        if os.environ.get("SCINOVELTY_UPDATE_GOLDEN"):
            shutil.rmtree(GOLDEN_BUNDLE, ignore_errors=True)
            for name, data in view.items():
                (GOLDEN_BUNDLE / name).parent.mkdir(parents=True, exist_ok=True)
                (GOLDEN_BUNDLE / name).write_bytes(data)
        golden = _bundle_files(GOLDEN_BUNDLE)
        assert sorted(golden) == sorted(view)
        assert [n for n in view if view[n] != golden[n]] == []
