"""Soft matching modules against brute-force oracles."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from explanno.core import AnnotationKind, Document, tokenize
from explanno.embeddings import EmbeddingTable, toy_table
from explanno.grammar import Anchor, Clause, IntArg, LogicalForm, Phrase
from explanno.matcher import (
    Candidate,
    MatchContext,
    MissingAnchorError,
    Thresholds,
    aggregate,
    deterministic_score,
    distance_count_score,
    keyword_position,
    match_sentence,
    string_match_scores,
    weak_label_corpus,
)

EMB = toy_table()
OOV = EmbeddingTable({"__never__": np.ones(4)})  # everything else is OOV


def ctx(text, **anchors):
    return MatchContext(sentence=tokenize(text), anchors=anchors)


class TestStringMatchScores:
    def test_exact_match_with_oov_embeddings(self):
        scores = string_match_scores(tokenize("I am happy today"), "happy", OOV)
        assert scores == [0.0, 0.0, 1.0, 0.0]

    def test_fuzzy_score_equals_dot_product_oracle(self):
        scores = string_match_scores(tokenize("I am happy today"), "glad", EMB)
        vg, vh = EMB.vector("glad"), EMB.vector("happy")
        oracle = float(np.dot(vg, vh) / (np.linalg.norm(vg) * np.linalg.norm(vh)))
        assert scores[2] == pytest.approx(oracle)
        assert 0.0 < scores[2] < 1.0

    def test_multiword_exact_position(self):
        sent = tokenize("The burst has been caused by water hammer pressure")
        scores = string_match_scores(sent, "caused by", EMB)
        assert scores[4] == 1.0
        assert max(scores) == 1.0

    def test_window_overrun_scores_zero(self):
        scores = string_match_scores(tokenize("tiny sentence"), "one two three", EMB)
        assert scores == [0.0, 0.0]

    @given(st.text(alphabet="abcdef ", min_size=1, max_size=30).filter(str.strip),
           st.text(alphabet="abcdef ", min_size=1, max_size=10).filter(str.strip))
    @settings(max_examples=60, deadline=None)
    def test_scores_bounded_and_sized(self, sent_text, kw_text):
        sent = tokenize(sent_text)
        scores = string_match_scores(sent, kw_text, EMB)
        assert len(scores) == len(sent.tokens)
        assert all(0.0 <= s <= 1.0 for s in scores)

    def test_keyword_position_first_occurrence_tie(self):
        assert keyword_position([0.5, 0.9, 0.9, 0.1]) == (1, 0.9)
        assert keyword_position([]) == (None, 0.0)


class TestDistanceCountScore:
    @pytest.mark.parametrize("observed,op,bound,expected", [
        (3, "<=", 5, 1.0),
        (7, "<=", 5, 1.0 - 2 / 6),
        (0, ">=", 0, 1.0),
        (5, "<=", 5, 1.0),
        (11, "<=", 5, 0.0),       # violation 6 == bound+1 decays to zero
        (2, ">=", 4, 1.0 - 2 / 5),
        (4, "==", 4, 1.0),
        (6, "==", 4, 1.0 - 2 / 5),
    ])
    def test_decay_table(self, observed, op, bound, expected):
        assert distance_count_score(observed, op, bound) == pytest.approx(expected)

    @given(st.integers(0, 40), st.integers(0, 12))
    def test_satisfied_le_is_one(self, observed, bound):
        if observed <= bound:
            assert distance_count_score(observed, "<=", bound) == 1.0

    @given(st.integers(0, 40), st.integers(0, 40), st.integers(0, 12))
    def test_worse_violation_never_scores_higher(self, a, b, bound):
        lo, hi = sorted((a, b))
        assert (distance_count_score(hi, "<=", bound)
                <= distance_count_score(lo, "<=", bound) + 1e-12)

    def test_negative_inputs_rejected(self):
        with pytest.raises(ValueError):
            distance_count_score(-1, "<=", 3)


def _brute_positions(n, k):
    """All keyword windows of width k in an n-token sentence."""
    return [(i, i + k) for i in range(n - k + 1)]


def _oracle_relation(pred, window, spans):
    """Independent positional semantics by explicit set arithmetic."""
    w = set(range(*window))
    if pred == "LEFT":
        return max(w) < spans[0][0] if w else False
    if pred == "RIGHT":
        return min(w) >= spans[0][1]
    if pred == "DIRECTLY_PRECEDES":
        return window[1] == spans[0][0]
    if pred == "BETWEEN":
        (s1, e1), (s2, e2) = spans
        left, right = ((s1, e1), (s2, e2)) if s1 <= s2 else ((s2, e2), (s1, e1))
        if left[1] > right[0]:
            return False
        gap = set(range(left[1], right[0]))
        return w <= gap and bool(w)
    raise AssertionError(pred)


class TestDeterministicScore:
    def test_fig_style_between(self):
        c = ctx("The burst has been caused by water hammer pressure",
                SUBJ=(1, 2), OBJ=(6, 9))
        clause = Clause("BETWEEN", (Phrase("caused by"), Anchor("SUBJ"), Anchor("OBJ")))
        assert deterministic_score(clause, c, 4) == 1

    def test_keyword_at_anchor_start_is_not_left(self):
        c = ctx("alpha beta gamma", TERM=(0, 1))
        clause = Clause("LEFT", (Phrase("alpha"), Anchor("TERM")))
        assert deterministic_score(clause, c, 0) == 0

    def test_missing_anchor_raises(self):
        c = ctx("alpha beta gamma")
        clause = Clause("LEFT", (Phrase("alpha"), Anchor("SUBJ")))
        with pytest.raises(MissingAnchorError):
            deterministic_score(clause, c, 0)

    def test_all_predicates_match_brute_force_enumeration(self):
        text = "t0 t1 t2 t3 t4 t5"
        n = 6
        single = [(s, e) for s in range(n) for e in range(s + 1, n + 1)]
        for k in (1, 2):
            phrase = Phrase(" ".join(f"t{i}" for i in range(k)))
            for window in _brute_positions(n, k):
                for span in single:
                    c = ctx(text, TERM=span)
                    for pred in ("LEFT", "RIGHT", "DIRECTLY_PRECEDES"):
                        clause = Clause(pred, (phrase, Anchor("TERM")))
                        got = deterministic_score(clause, c, window[0])
                        assert got == int(_oracle_relation(pred, window, [span])), (
                            pred, window, span)
                for s1 in single:
                    for s2 in single:
                        c = ctx(text, SUBJ=s1, OBJ=s2)
                        clause = Clause("BETWEEN",
                                        (phrase, Anchor("SUBJ"), Anchor("OBJ")))
                        got = deterministic_score(clause, c, window[0])
                        assert got == int(_oracle_relation("BETWEEN", window, [s1, s2]))


def leaf(name="CONTAINS", text="x"):
    return Clause(name, (Phrase(text),))


class TestAggregate:
    def test_min_max_not(self):
        f_and = LogicalForm(Clause("AND", (leaf(text="a"), leaf(text="b"))), "L")
        assert aggregate(f_and, [1.0, 0.667]) == pytest.approx(0.667)
        f_not = LogicalForm(Clause("NOT", (leaf(),)), "L")
        assert aggregate(f_not, [0.0]) == 1.0
        f_mix = LogicalForm(
            Clause("OR", (Clause("AND", (leaf(text="a"), leaf(text="b"))),
                          leaf(text="c"))), "L")
        assert aggregate(f_mix, [0.9, 0.4, 0.7]) == pytest.approx(0.7)

    @given(st.lists(st.floats(0, 1), min_size=3, max_size=3),
           st.floats(0, 1))
    @settings(max_examples=60)
    def test_bounded_and_monotone_in_positive_leaf(self, scores, bump):
        form = LogicalForm(
            Clause("OR", (Clause("AND", (leaf(text="a"), leaf(text="b"))),
                          leaf(text="c"))), "L")
        base = aggregate(form, scores)
        assert 0.0 <= base <= 1.0
        raised = list(scores)
        raised[0] = min(1.0, raised[0] + bump)
        assert aggregate(form, raised) >= base - 1e-12

    def test_leaf_count_mismatch_rejected(self):
        form = LogicalForm(Clause("AND", (leaf(text="a"), leaf(text="b"))), "L")
        with pytest.raises(ValueError):
            aggregate(form, [0.5])
        with pytest.raises(ValueError):
            aggregate(form, [0.5, 0.5, 0.5])


FIG_FORM = LogicalForm(
    Clause("BETWEEN", (Phrase("caused by"), Anchor("SUBJ"), Anchor("OBJ"))),
    "cause-effect")


class TestMatchSentence:
    def test_exact_phrase_in_position_scores_one(self):
        c = ctx("The burst has been caused by water hammer pressure",
                SUBJ=(1, 2), OBJ=(6, 9))
        r = match_sentence(FIG_FORM, c, Thresholds(), EMB)
        assert r.score == 1.0
        assert r.label == "cause-effect"

    def test_no_evidence_scores_zero(self):
        c = ctx("We went home early yesterday", SUBJ=(0, 1), OBJ=(2, 3))
        assert match_sentence(FIG_FORM, c, Thresholds(), EMB).score == 0.0

    def test_paraphrase_scores_oracle_cosine_mean(self):
        c = ctx("The burst has been triggered by water hammer pressure",
                SUBJ=(1, 2), OBJ=(6, 9))
        r = match_sentence(FIG_FORM, c, Thresholds(), EMB)
        vc, vt = EMB.vector("caused"), EMB.vector("triggered")
        cos = float(np.dot(vc, vt) / (np.linalg.norm(vc) * np.linalg.norm(vt)))
        assert 0.0 < r.score < 1.0
        assert r.score == pytest.approx((cos + 1.0) / 2)

    def test_floor_gates_weak_similarity_to_zero(self):
        c = ctx("The burst has been triggered by water hammer pressure",
                SUBJ=(1, 2), OBJ=(6, 9))
        strict = Thresholds(accept=0.7, phrase_sim_floor=1.0)
        assert match_sentence(FIG_FORM, c, strict, EMB).score == 0.0

    def test_clause_scores_reaggregate_to_score(self):
        text = ("the word 'happy' is within 5 words of TERM "
                "and the sentence contains 'food'")
        from explanno.parser import parse
        from explanno.core import Task
        form = parse(text, Task.SENTIMENT_ANALYSIS, "positive")
        c = ctx("The food made us happy", TERM=(1, 2))
        r = match_sentence(form, c, Thresholds(), EMB)
        assert aggregate(form, [s for _, s in r.clause_scores]) == pytest.approx(r.score)
        assert r.score == 1.0

    def test_distance_decay_observed_beyond_bound(self):
        words = ["happy"] + ["w%d" % i for i in range(7)] + ["pivot"]
        c = ctx(" ".join(words), TERM=(8, 9))
        form = LogicalForm(
            Clause("WITHIN", (Phrase("happy"), IntArg(5), Anchor("TERM"))), "pos")
        r = match_sentence(form, c, Thresholds(), EMB)
        assert r.score == pytest.approx(1.0 - 2 / 6)

    def test_determinism(self):
        c = ctx("The burst has been triggered by water hammer pressure",
                SUBJ=(1, 2), OBJ=(6, 9))
        results = {match_sentence(FIG_FORM, c, Thresholds(), EMB) for _ in range(5)}
        assert len(results) == 1


def _doc_candidates(texts, kind=AnnotationKind.CLASS, **anchor_fn):
    """Build one candidate per text with anchors computed per sentence."""
    out = []
    for text in texts:
        tt = tokenize(text)
        anchors = {name: fn(tt) for name, fn in anchor_fn.items()}
        out.append(Candidate(
            doc_id=Document.create(text).id, kind=kind,
            ctx=MatchContext(sentence=tt, anchors=anchors)))
    return out


def form_containing(word, label):
    return LogicalForm(Clause("CONTAINS", (Phrase(word),)), label)


class TestWeakLabelCorpus:
    def test_highest_score_wins_across_labels(self):
        pool = _doc_candidates(["The meal was tasty and cheap"])
        forms = [("f-exact", form_containing("tasty", "A")),
                 ("f-fuzzy", LogicalForm(Clause("CONTAINS", (Phrase("delicious"),)), "B"))]
        out = weak_label_corpus(forms, pool, Thresholds(accept=0.5), EMB)
        assert len(out) == 1
        assert out[0].label == "A"
        prov = dict(out[0].provenance)
        assert prov["form_id"] == "f-exact"
        assert float(prov["score"]) == 1.0

    def test_exact_tie_between_labels_discards_instance(self):
        pool = _doc_candidates(["The meal was tasty and cheap"])
        forms = [("f1", form_containing("tasty", "A")),
                 ("f2", form_containing("cheap", "B"))]
        out = weak_label_corpus(forms, pool, Thresholds(), EMB)
        assert out == []

    def test_same_label_tie_is_kept(self):
        pool = _doc_candidates(["The meal was tasty and cheap"])
        forms = [("f1", form_containing("tasty", "A")),
                 ("f2", form_containing("cheap", "A"))]
        out = weak_label_corpus(forms, pool, Thresholds(), EMB)
        assert len(out) == 1 and out[0].label == "A"

    def test_output_sorted_by_document_id(self):
        texts = [f"sentence number {i} was tasty overall" for i in range(8)]
        pool = _doc_candidates(texts)
        out = weak_label_corpus([("f", form_containing("tasty", "A"))],
                                pool, Thresholds(), EMB)
        assert [a.doc_id for a in out] == sorted(a.doc_id for a in out)
        assert len(out) == 8

    def test_lowering_accept_never_shrinks_output(self):
        texts = ["The meal was tasty", "The meal was delicious",
                 "The meal was flavorful", "We went home"]
        pool = _doc_candidates(texts)
        forms = [("f", form_containing("tasty", "A"))]
        strict = {a.doc_id for a in weak_label_corpus(forms, pool, Thresholds(accept=1.0), EMB)}
        loose = {a.doc_id for a in weak_label_corpus(forms, pool, Thresholds(accept=0.7), EMB)}
        looser = {a.doc_id for a in weak_label_corpus(forms, pool, Thresholds(accept=0.3), EMB)}
        assert strict <= loose <= looser
        assert len(strict) == 1 and len(loose) >= 3

    def test_forms_needing_absent_anchors_are_skipped(self):
        pool = _doc_candidates(["The burst was caused by pressure"])
        out = weak_label_corpus([("f", FIG_FORM)], pool, Thresholds(), EMB)
        assert out == []

    def test_audit_log_is_json_lines(self, tmp_path):
        pool = _doc_candidates(["The meal was tasty"])
        audit = tmp_path / "audit.jsonl"
        weak_label_corpus([("f", form_containing("tasty", "A"))],
                          pool, Thresholds(), EMB, audit_path=audit)
        lines = [json.loads(l) for l in audit.read_text().splitlines()]
        assert len(lines) == 1
        assert set(lines[0]) == {"doc_id", "form_id", "score", "label", "clause_scores"}
