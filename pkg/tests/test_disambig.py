from itertools import combinations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scinovelty.corpus import Affiliation, build_citation_graph, ingest
from scinovelty.disambig import (
    BlockingError,
    MentionContext,
    disambiguate,
    filter_career_start,
    first_name_of,
    initials_of,
    mention_contexts,
    pair_score,
    read_assignment,
    table_from_assignment,
    write_assignment,
)
from scinovelty.synth import SyntheticSpec, generate_synthetic

from conftest import corpus_of, mention, paper


def smith_pair(given_a="J.", given_b="J.", aff_a=None, aff_b=None, co_a=(), co_b=(),
               journal_a="J1", journal_b="J2", refs_a=(), refs_b=(), extra=(), general=frozenset()):
    """Two Smith mentions on papers A and B; everything else is opt-in evidence."""
    a = paper("A", 2000, authors=[mention("Smith", given_a, aff_a), *(mention(s, "X.") for s in co_a)],
              refs=refs_a, journal=journal_a)
    b = paper("B", 2001, authors=[mention("Smith", given_b, aff_b), *(mention(s, "X.") for s in co_b)],
              refs=refs_b, journal=journal_b)
    corpus = corpus_of(a, b, *extra)
    ctx = {(c.paper_id, c.index): c for c in mention_contexts(corpus, build_citation_graph(corpus))}
    return pair_score(ctx[("A", 0)], ctx[("B", 0)], general)


class TestPointTable:
    def test_two_initials(self):
        s = smith_pair("J. Q.", "J. Q.")
        assert s.initials == 5 and s.total == 5

    def test_more_than_two_initials(self):
        assert smith_pair("J. Q. R.", "J. Q. R.").initials == 10

    def test_conflicting_initials(self):
        s = smith_pair("J.", "K.")
        assert s.initials == -10 and s.total == -10

    def test_single_initial_scores_nothing(self):
        assert smith_pair("J.", "J.").total == 0

    def test_first_name(self):
        assert smith_pair("John", "John").first_name == 6
        assert smith_pair("John", "John", general=frozenset({"john"})).first_name == 3
        assert smith_pair("John", "J.").first_name == 0

    def test_address(self):
        city = Affiliation("USA", "Boston")
        org = Affiliation("USA", "Boston", "MIT")
        dept = Affiliation("USA", "Boston", "MIT", "Physics")
        assert smith_pair(aff_a=city, aff_b=city).address == 4
        assert smith_pair(aff_a=org, aff_b=Affiliation("USA", "Boston", "MIT", "Chemistry")).address == 7
        assert smith_pair(aff_a=dept, aff_b=dept).address == 10
        assert smith_pair(aff_a=dept, aff_b=Affiliation("USA", "Chicago", "MIT", "Physics")).address == 0

    @pytest.mark.parametrize("n, points", [(0, 0), (1, 4), (2, 7), (3, 10), (5, 10)])
    def test_shared_coauthors(self, n, points):
        co = [f"Co{i}" for i in range(n)]
        assert smith_pair(co_a=co, co_b=co).shared_coauthors == points

    def test_same_journal(self):
        assert smith_pair(journal_a="PRL", journal_b="PRL").source_journal == 6

    def test_self_citation(self):
        s = smith_pair(refs_b=["A"])
        assert s.self_citation == 10 and s.total == 10

    @pytest.mark.parametrize("n, points", [(1, 2), (2, 4), (3, 6), (4, 8), (5, 10), (7, 10)])
    def test_biblio_coupling(self, n, points):
        refs = [f"R{i}" for i in range(n)]
        s = smith_pair(refs_a=refs, refs_b=refs)
        assert s.biblio_coupling == points and s.total == points

    @pytest.mark.parametrize("n, points", [(1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (8, 6)])
    def test_co_citation(self, n, points):
        citers = [paper(f"C{i}", 2005, refs=["A", "B"]) for i in range(n)]
        assert smith_pair(extra=citers).co_citation == points

    def test_blocking_violation(self):
        corpus = corpus_of(paper("A", authors=[mention("Smith", "J.")]), paper("B", authors=[mention("Smyth", "J.")]))
        c = mention_contexts(corpus, build_citation_graph(corpus))
        with pytest.raises(BlockingError):
            pair_score(c[0], c[1])


def test_name_helpers():
    assert initials_of("John Quincy") == ("j", "q")
    assert initials_of("J.-Q.") == ("j", "q")
    assert first_name_of("John Q.") == "john"
    assert first_name_of("J. Quincy") is None


_SETS = {
    "initials": {-10, 0, 5, 10}, "first_name": {0, 3, 6}, "address": {0, 4, 7, 10},
    "shared_coauthors": {0, 4, 7, 10}, "source_journal": {0, 6}, "self_citation": {0, 10},
    "biblio_coupling": {0, 2, 4, 6, 8, 10}, "co_citation": {0, 2, 3, 4, 5, 6},
}

_aff = st.one_of(st.none(), st.builds(Affiliation, *(st.sampled_from(["a", "b", None]) for _ in range(4))))
_ids = st.frozensets(st.sampled_from("pqrstuvw"), max_size=7)


@st.composite
def contexts(draw, paper_id):
    given = draw(st.lists(st.sampled_from("jkq"), min_size=0, max_size=4))
    return MentionContext(
        paper_id=paper_id, index=0, surname="smith", initials=tuple(given),
        first_name=draw(st.sampled_from([None, "john", "jane"])), affiliation=draw(_aff),
        coauthors=draw(_ids), journal=draw(st.sampled_from(["", "x", "y"])),
        references=draw(_ids | st.frozensets(st.sampled_from(["A", "B", "C"]))), citers=draw(_ids),
    )


@settings(max_examples=300, deadline=None)
@given(contexts("A"), contexts("B"), st.booleans())
def test_score_symmetric_and_enumerated(a, b, john_general):
    general = frozenset({"john"}) if john_general else frozenset()
    ab, ba = pair_score(a, b, general), pair_score(b, a, general)
    assert ab == ba
    for name, allowed in _SETS.items():
        assert getattr(ab, name) in allowed
    assert ab.total == sum(getattr(ab, n) for n in _SETS)


class TestDisambiguate:
    def test_full_names_with_shared_coauthor_merge(self):
        corpus = corpus_of(
            paper("A", 2000, authors=[mention("Smith", "John"), mention("Lee", "K.")], journal="J1"),
            paper("B", 2001, authors=[mention("Smith", "John"), mention("Lee", "K.")], journal="J2"),
        )
        table = disambiguate(corpus, build_citation_graph(corpus), threshold=10)
        assert table.assignment[("A", 0)] == table.assignment[("B", 0)]

    def test_conflicting_initials_never_merge(self):
        # 10 (address) + 6 (journal) + 10 (self-citation) - 10 clears any
        # threshold up to 16, but conflicting initials block the merge
        aff = Affiliation("USA", "Boston", "MIT", "Physics")
        corpus = corpus_of(
            paper("A", 2000, authors=[mention("Smith", "J.", aff)]),
            paper("B", 2001, authors=[mention("Smith", "K.", aff)], refs=["A"]),
        )
        for threshold in (1, 5, 10, 16):
            table = disambiguate(corpus, build_citation_graph(corpus), threshold=threshold)
            assert table.assignment[("A", 0)] != table.assignment[("B", 0)]

    def test_same_paper_mentions_never_merge(self):
        aff = Affiliation("USA", "Boston", "MIT", "Physics")
        corpus = corpus_of(paper("A", authors=[mention("Smith", "J. Q. R.", aff), mention("Smith", "J. Q. R.", aff)]))
        table = disambiguate(corpus, build_citation_graph(corpus))
        assert len(table) == 2

    def test_threshold_must_be_positive(self):
        corpus = corpus_of(paper("A", authors=[mention("Smith", "J.")]))
        with pytest.raises(ValueError):
            disambiguate(corpus, build_citation_graph(corpus), threshold=0)


def _planted_block():
    boston = Affiliation("USA", "Boston", "MIT", "Physics")
    tokyo = Affiliation("Japan", "Tokyo", "UT", "Physics")
    papers = [
        paper("P1", 1990, authors=[mention("Smith", "J.", boston)], journal="J1"),
        paper("P2", 1991, authors=[mention("Smith", "J.", boston)], journal="J2"),
        paper("P3", 1992, authors=[mention("Smith", "J.", boston)], journal="J3", refs=["X1"]),
        paper("P4", 1993, authors=[mention("Smith", "J.", tokyo), mention("Ono", "A."), mention("Ito", "B.")], journal="J1"),
        paper("P5", 1994, authors=[mention("Smith", "J.", tokyo), mention("Ono", "A."), mention("Ito", "B.")],
              journal="J2", refs=["X1"]),
    ]
    return corpus_of(*papers), [{"P1", "P2", "P3"}, {"P4", "P5"}]


def _partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        yield [[first]] + part


def _connected(block, edges):
    seen, todo = {block[0]}, [block[0]]
    while todo:
        x = todo.pop()
        for y in block:
            if y not in seen and frozenset((x, y)) in edges:
                seen.add(y)
                todo.append(y)
    return len(seen) == len(block)


def test_planted_block_matches_brute_force_partition():
    corpus, planted = _planted_block()
    graph = build_citation_graph(corpus)
    ctx = {c.paper_id: c for c in mention_contexts(corpus, graph) if c.surname == "smith"}
    keys = sorted(ctx)
    edges = {frozenset((a, b)) for a, b in combinations(keys, 2) if pair_score(ctx[a], ctx[b]).total >= 10}
    # score-consistent: clusters connected by >= threshold pairs, no such pair across clusters
    consistent = []
    for part in _partitions(keys):
        label = {k: i for i, blk in enumerate(part) for k in blk}
        if all(_connected(blk, edges) for blk in part) and all(label[a] == label[b] for a, b in map(tuple, edges)):
            consistent.append({frozenset(b) for b in part})
    assert consistent == [{frozenset(s) for s in planted}]

    table = disambiguate(corpus, graph, threshold=10)
    found = {}
    for (pid, idx), aid in table.assignment.items():
        if corpus[pid].authors[idx].surname == "Smith":
            found.setdefault(aid, set()).add(pid)
    assert {frozenset(v) for v in found.values()} == consistent[0]


def _partition(table):
    return {frozenset(r.mentions) for r in table}


def test_partition_and_monotone_threshold():
    corpus, _ = generate_synthetic(SyntheticSpec(n_papers=80, n_authors=30, seed=5))
    graph = build_citation_graph(corpus)
    n_mentions = sum(len(p.authors) for p in corpus.papers)
    previous = None
    for threshold in (4, 6, 10, 14, 20, 30):
        table = disambiguate(corpus, graph, threshold)
        mentions = [m for r in table for m in r.mentions]
        assert len(mentions) == len(set(mentions)) == n_mentions
        part = _partition(table)
        if previous is not None:
            # every cluster at the higher threshold sits inside one lower-threshold cluster
            assert all(any(c <= p for p in previous) for c in part)
        previous = part


def test_synthetic_ground_truth_recovered(bundled_corpus_path, bundled_truth):
    corpus = ingest(bundled_corpus_path)
    table = disambiguate(corpus, build_citation_graph(corpus))
    truth = {(k.rsplit("#", 1)[0], int(k.rsplit("#", 1)[1])): v for k, v in bundled_truth["true_author"].items()}
    tp = fp = fn = 0
    for a, b in combinations(sorted(truth), 2):
        same_pred = table.assignment[a] == table.assignment[b]
        same_true = truth[a] == truth[b]
        tp += same_pred and same_true
        fp += same_pred and not same_true
        fn += same_true and not same_pred
    assert tp / (tp + fp) >= 0.95
    assert tp / (tp + fn) >= 0.95


class TestCareerFilter:
    def _table(self, years):
        corpus = corpus_of(*(paper(f"P{i}", y, authors=[mention(f"Name{i}", "A.")]) for i, y in enumerate(years)))
        return disambiguate(corpus, build_citation_graph(corpus))

    def test_1969_excluded(self):
        assert len(filter_career_start(self._table([1969]), 1970)) == 0
        assert len(filter_career_start(self._table([1970]), 1970)) == 1

    def test_min_year_zero_is_identity(self):
        t = self._table([1950, 1980])
        assert filter_career_start(t, 0).records == t.records

    def test_three_of_seven_pre_1970(self):
        t = filter_career_start(self._table([1960, 1965, 1969, 1970, 1975, 1990, 2001]), 1970)
        assert len(t) == 4
        assert all(r.first_pub_year >= 1970 for r in t)
        assert set(t.assignment.values()) == set(t.records)


def test_assignment_round_trip(tmp_path):
    corpus, _ = generate_synthetic(SyntheticSpec(n_papers=40, n_authors=20, seed=2))
    table = disambiguate(corpus, build_citation_graph(corpus))
    write_assignment(table, tmp_path / "a.csv", corpus)
    again = read_assignment(tmp_path / "a.csv", corpus)
    assert again.assignment == table.assignment
    assert again.records == table.records


def test_assignment_rejects_unknown_mention(tmp_path):
    corpus = corpus_of(paper("A", authors=[mention("Smith", "J.")]))
    (tmp_path / "a.csv").write_text("paper_id,mention_index,author_id\nA,3,x\n", encoding="utf-8")
    with pytest.raises(ValueError, match="no mention"):
        read_assignment(tmp_path / "a.csv", corpus)


def test_first_pub_year_is_min():
    corpus = corpus_of(paper("A", 1999, authors=[mention("Smith", "J.")]), paper("B", 1985, authors=[mention("Smith", "J.")]))
    table = table_from_assignment(corpus, {("A", 0): "s", ("B", 0): "s"})
    assert table["s"].first_pub_year == 1985
    assert table["s"].papers == ("B", "A")
