"""Explanation parsing, error reporting, and autosuggest."""

import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from explanno.core import Task
from explanno.grammar import grammar_predicates, pretty
from explanno.parser import (
    ExplanationParseError,
    UnknownAnchorError,
    UnterminatedQuoteError,
    parse,
    suggest,
)

from golden_corpus import GOLDEN, NER, RE, SA, AND, NOT, OR, contains


class TestGoldenCorpus:
    @pytest.mark.parametrize("text,task,expected",
                             GOLDEN, ids=[g[0][:40] for g in GOLDEN])
    def test_parses_to_expected_tree(self, text, task, expected):
        form = parse(text, task, "some-label")
        assert form.root == expected
        assert form.label == "some-label"

    def test_corpus_is_large_enough(self):
        assert len(GOLDEN) >= 20


class TestPrecedence:
    def test_and_binds_tighter_than_or(self):
        form = parse("the sentence contains 'a1' and the sentence contains 'b2' "
                     "or the sentence contains 'c3'", SA, "x")
        assert form.root == OR(AND(contains("a1"), contains("b2")), contains("c3"))

    def test_not_binds_tighter_than_and(self):
        form = parse("not the sentence contains 'a1' and the sentence contains 'b2'",
                     SA, "x")
        assert form.root == AND(NOT(contains("a1")), contains("b2"))

    def test_left_associative_chain(self):
        form = parse("the sentence contains 'a1' and the sentence contains 'b2' "
                     "and the sentence contains 'c3'", SA, "x")
        assert form.root == AND(AND(contains("a1"), contains("b2")), contains("c3"))


class TestErrors:
    def test_unparseable_names_offending_token(self):
        with pytest.raises(ExplanationParseError) as err:
            parse("the word 'happy' flibbers", SA, "x")
        assert "flibbers" in str(err.value)

    def test_gibberish_after_complete_clause(self):
        with pytest.raises(ExplanationParseError) as err:
            parse("the sentence contains 'fine' wobbly", SA, "x")
        assert "wobbly" in str(err.value)

    def test_empty_text(self):
        with pytest.raises(ExplanationParseError):
            parse("   ", SA, "x")

    def test_anchor_invalid_for_task(self):
        with pytest.raises(UnknownAnchorError) as err:
            parse("the word 'born' occurs to the left of OBJ", SA, "x")
        assert "OBJ" in str(err.value)

    def test_term_invalid_for_relation_task(self):
        with pytest.raises(UnknownAnchorError):
            parse("the word 'born' occurs to the left of TERM", RE, "x")

    def test_unterminated_quote(self):
        with pytest.raises(UnterminatedQuoteError):
            parse("the sentence contains 'oops", SA, "x")

    def test_number_expected(self):
        with pytest.raises(ExplanationParseError) as err:
            parse("the word 'happy' is within five words of TERM", SA, "x")
        assert "five" in str(err.value)


class TestPrettyRoundTrip:
    @pytest.mark.parametrize("text,task,expected",
                             GOLDEN, ids=[g[0][:40] for g in GOLDEN])
    def test_golden_forms_survive_rendering(self, text, task, expected):
        form = parse(text, task, "L")
        rendered = pretty(form)
        reparsed = parse(rendered, task, "L")
        assert reparsed.root == form.root


class TestSuggest:
    def test_clause_starters_on_empty_prefix(self):
        got = suggest("", SA)
        assert set(got) == {"the word", "the phrase", "the sentence", "there are", "not"}

    def test_continuations_after_phrase_and_verb(self):
        got = suggest("the phrase 'caused by' occurs ", RE)
        assert "between SUBJ and OBJ" in got
        assert "to the left of" in got
        assert "to the right of" in got

    def test_anchor_suggestions_respect_task(self):
        re_got = suggest("the word 'born' occurs to the left of ", RE)
        assert "SUBJ" in re_got and "OBJ" in re_got and "TERM" not in re_got
        sa_got = suggest("the word 'happy' is within 5 words of ", SA)
        assert sa_got == ["TERM"]

    def test_complete_parse_suggests_nothing(self):
        assert suggest("the sentence contains 'fine'", SA) == []

    def test_open_quote_suggests_nothing(self):
        assert suggest("the sentence contains 'fi", SA) == []

    def test_after_word_glue_expects_freeform_phrase(self):
        assert suggest("the word ", SA) == []

    def test_connective_reopens_starters(self):
        got = suggest("the sentence contains 'fine' and ", SA)
        assert "the word" in got and "the sentence" in got

    def test_usage_frequency_ranks_first(self):
        base = suggest("the phrase 'caused by' occurs ", RE)
        boosted = suggest("the phrase 'caused by' occurs ", RE,
                          usage={"BETWEEN": 10})
        assert boosted[0].startswith("between")
        assert set(boosted) == set(base)

    def test_cursor_limits_visible_prefix(self):
        text = "the sentence contains 'fine'"
        got = suggest(text, SA, cursor=len("the sentence "))
        assert "contains" in got

    @given(st.sampled_from(GOLDEN), st.data())
    @settings(max_examples=60, deadline=None)
    def test_never_crashes_on_any_cursor_split(self, golden, data):
        text, task, _ = golden
        cut = data.draw(st.integers(0, len(text)))
        suggest(text[:cut], task)


def _next_user_token(rest: str) -> str:
    if rest[0] in "'\"":
        close = rest.find(rest[0], 1)
        return rest[:close + 1]
    m = re.match(r"\S+", rest)
    return m.group()


def _boundary_ok(rest: str, n: int) -> bool:
    return n == len(rest) or rest[n] in " '\""


def drive_with_suggestions(text: str, task) -> str:
    """Type out an explanation, preferring the top consistent suggestion
    at every step and falling back to the user's own next token (quoted
    phrases, numbers) when no suggestion applies."""
    typed, rest = "", text
    steps = 0
    while rest.strip():
        steps += 1
        assert steps < 120, f"no progress typing {text!r}"
        rest = rest.lstrip()
        chosen = None
        for s in suggest(typed, task):
            if rest.lower().startswith(s.lower()) and _boundary_ok(rest, len(s)):
                chosen = rest[:len(s)]
                break
        if chosen is None:
            chosen = _next_user_token(rest)
        typed = (typed + " " + chosen).strip()
        rest = rest[len(chosen):]
    return typed


class TestSuggestClosure:
    @pytest.mark.parametrize("text,task,expected",
                             GOLDEN, ids=[g[0][:40] for g in GOLDEN])
    def test_suggestions_cover_the_golden_path(self, text, task, expected):
        typed = drive_with_suggestions(text, task)
        form = parse(typed, task, "L")
        assert form.root == expected


# random well-formed trees: left-associative chains with NOT on leaves only,
# mirroring what the surface grammar can express
@st.composite
def leaf_and_text(draw, task):
    pool = [(t, tk, e) for (t, tk, e) in GOLDEN if tk == task]
    return draw(st.sampled_from(pool))


@st.composite
def chain_texts(draw):
    task = draw(st.sampled_from([RE, SA, NER]))
    n = draw(st.integers(1, 3))
    parts = []
    for _ in range(n):
        text, _, _ = draw(leaf_and_text(task))
        if draw(st.booleans()):
            text = "not " + text
        parts.append(text)
    ops = [draw(st.sampled_from([" and ", " or "])) for _ in range(n - 1)]
    joined = parts[0]
    for op, part in zip(ops, parts[1:]):
        joined += op + part
    return joined, task


class TestParserProperties:
    @given(chain_texts())
    @settings(max_examples=50, deadline=None)
    def test_parse_is_deterministic_and_pretty_round_trips(self, pair):
        text, task = pair
        first = parse(text, task, "L")
        second = parse(text, task, "L")
        assert first == second
        assert parse(pretty(first), task, "L").root == first.root

    @given(chain_texts())
    @settings(max_examples=30, deadline=None)
    def test_every_leaf_category_is_known(self, pair):
        text, task = pair
        form = parse(text, task, "L")
        known = {p.name for p in grammar_predicates()}
        for leaf in form.root.leaves():
            assert leaf.predicate in known
