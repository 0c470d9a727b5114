"""Rule-based parsing of natural-language explanations into logical forms.

Parsing is deterministic, not learned: a small pattern table maps phrase
subjects ("the word 'happy' ...") and sentence subjects ("the sentence
contains ...") onto predicate clauses, with "and"/"or"/"not" building the
logical tree.  The same table drives incremental autosuggest, so the UI
can only lead users toward text this parser accepts.

Every input token must either be consumed by a clause or be one of the
five ignorable glue words; anything else fails the parse loudly with the
offending token.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .core import Task
from .grammar import (
    OBJ,
    SUBJ,
    TERM,
    Anchor,
    Arg,
    Clause,
    IntArg,
    LogicalForm,
    Phrase,
)

STOP_WORDS = frozenset({"the", "a", "is", "word", "phrase"})

_ANCHORS_BY_TASK: dict[Task, tuple[str, ...]] = {
    Task.RELATION_EXTRACTION: (SUBJ, OBJ),
    Task.SENTIMENT_ANALYSIS: (TERM,),
    Task.SEQUENCE_LABELING: (TERM,),
}

CLAUSE_STARTERS = ("the word", "the phrase", "the sentence", "there are", "not")


class ExplanationParseError(ValueError):
    """Input contains a token the grammar cannot consume."""

    def __init__(self, token: str, position: int, text: str):
        self.token = token
        self.position = position
        super().__init__(
            f"cannot parse explanation {text!r}: no rule consumes {token!r} "
            f"(token {position})")


class UnknownAnchorError(ValueError):
    """An anchor placeholder was used in a task that does not provide it."""

    def __init__(self, anchor: str, task: Task):
        self.anchor = anchor
        self.task = task
        super().__init__(
            f"anchor {anchor} is not available in a {task.value} task "
            f"(allowed: {', '.join(_ANCHORS_BY_TASK[task]) or 'none'})")


class UnterminatedQuoteError(ValueError):
    def __init__(self, position: int):
        self.position = position
        super().__init__(f"unterminated quote starting at character {position}")


# --- lexer -------------------------------------------------------------------

WORD_T = "word"
QUOTED_T = "quoted"
INT_T = "int"
ANCHOR_T = "anchor"


@dataclass(frozen=True)
class Lexeme:
    kind: str
    value: str
    raw: str


_TOKEN_RE = re.compile(r"(\d+)|([A-Za-z][A-Za-z_-]*)|(\S)")


def lex(text: str, allow_open_quote: bool = False):
    """Tokenize explanation text.  Returns (lexemes, open_quote)."""
    out: list[Lexeme] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "'\"":
            close = text.find(ch, i + 1)
            if close == -1:
                if allow_open_quote:
                    return out, True
                raise UnterminatedQuoteError(i)
            out.append(Lexeme(QUOTED_T, text[i + 1:close], text[i:close + 1]))
            i = close + 1
            continue
        m = _TOKEN_RE.match(text, i)
        assert m is not None
        raw = m.group()
        if m.group(1):
            out.append(Lexeme(INT_T, raw, raw))
        elif m.group(2):
            if raw in (SUBJ, OBJ, TERM):
                out.append(Lexeme(ANCHOR_T, raw, raw))
            else:
                out.append(Lexeme(WORD_T, raw.lower(), raw))
        else:
            out.append(Lexeme(WORD_T, raw, raw))
        i = m.end()
    return out, False


# --- pattern table -----------------------------------------------------------
#
# Patterns are written as display strings; stop-words in a display attach to
# the following element so partially matched patterns render naturally in
# suggestions ("to the left of", not "to left of").

LIT = "lit"
A_SLOT = "A"
N_SLOT = "N"
P_SLOT = "P"


@dataclass(frozen=True)
class Element:
    kind: str           # LIT / A_SLOT / N_SLOT / P_SLOT
    word: str = ""      # matching word for LIT
    display: str = ""   # rendering, may include attached glue


@dataclass(frozen=True)
class Pattern:
    predicate: str        # predicate of the resulting leaf (reporting/ranking)
    subject: str          # "phrase" | "sentence" | "there"
    display: str
    elements: tuple[Element, ...]
    shape: str            # how to assemble the clause, see _build


def _compile(predicate: str, subject: str, display: str, shape: str) -> Pattern:
    elements: list[Element] = []
    pending = ""
    for piece in display.split():
        if piece in ("{A}", "{B}"):
            elements.append(Element(A_SLOT, display=(pending + piece).strip()))
        elif piece == "{N}":
            elements.append(Element(N_SLOT, display=(pending + piece).strip()))
        elif piece == "{P}":
            elements.append(Element(P_SLOT, display=(pending + piece).strip()))
        elif piece in STOP_WORDS:
            pending += piece + " "
            continue
        else:
            elements.append(Element(LIT, word=piece, display=(pending + piece).strip()))
        pending = ""
    return Pattern(predicate=predicate, subject=subject, display=display,
                   elements=tuple(elements), shape=shape)


_PATTERNS: tuple[Pattern, ...] = (
    # deterministic position tests, phrase subject
    _compile("BETWEEN", "phrase", "occurs between {A} and {B}", "p_aa"),
    _compile("BETWEEN", "phrase", "appears between {A} and {B}", "p_aa"),
    _compile("BETWEEN", "phrase", "is between {A} and {B}", "p_aa"),
    _compile("LEFT", "phrase", "occurs to the left of {A}", "p_a"),
    _compile("LEFT", "phrase", "is to the left of {A}", "p_a"),
    _compile("LEFT", "phrase", "precedes {A}", "p_a"),
    _compile("LEFT", "phrase", "occurs before {A}", "p_a"),
    _compile("RIGHT", "phrase", "occurs to the right of {A}", "p_a"),
    _compile("RIGHT", "phrase", "is to the right of {A}", "p_a"),
    _compile("RIGHT", "phrase", "follows {A}", "p_a"),
    _compile("RIGHT", "phrase", "occurs after {A}", "p_a"),
    _compile("DIRECTLY_PRECEDES", "phrase", "directly precedes {A}", "p_a"),
    _compile("DIRECTLY_PRECEDES", "phrase", "immediately precedes {A}", "p_a"),
    # distance and counting, phrase subject
    _compile("WITHIN", "phrase", "is within {N} words of {A}", "within_idiom"),
    _compile("WITHIN", "phrase", "occurs within {N} words of {A}", "within_idiom"),
    _compile("WITHIN", "phrase", "is no more than {N} words from {A}", "within_idiom"),
    _compile("COUNT_OCCURRENCES", "phrase", "occurs at least {N} times", "p_n"),
    _compile("COUNT_OCCURRENCES", "phrase", "appears at least {N} times", "p_n"),
    # plain presence, phrase subject
    _compile("CONTAINS", "phrase", "appears in the sentence", "p"),
    _compile("CONTAINS", "phrase", "occurs in the sentence", "p"),
    # sentence subject
    _compile("CONTAINS", "sentence", "the sentence contains {P}", "s_p"),
    _compile("STARTS_WITH", "sentence", "the sentence starts with {P}", "s_p"),
    _compile("STARTS_WITH", "sentence", "the sentence begins with {P}", "s_p"),
    _compile("ENDS_WITH", "sentence", "the sentence ends with {P}", "s_p"),
    # counting words between anchors
    _compile("AT_LEAST_N_WORDS_BETWEEN", "there",
             "there are at least {N} words between {A} and {B}", "naa"),
)

# sentence patterns skip their leading subject element during matching; the
# dispatcher has already consumed the "sentence" token itself
_SUBJECT_SKIP = {"phrase": 0, "sentence": 1, "there": 0}


def _build(pattern: Pattern, subject: Optional[Phrase], slots: list[Arg]) -> Clause:
    shape = pattern.shape
    if shape == "p":
        return Clause("CONTAINS", (subject,))
    if shape == "p_a":
        return Clause(pattern.predicate, (subject, slots[0]))
    if shape == "p_aa":
        return Clause(pattern.predicate, (subject, slots[0], slots[1]))
    if shape == "p_n":
        return Clause(pattern.predicate, (subject, slots[0]))
    if shape == "within_idiom":
        within = Clause("WITHIN", (subject, slots[0], slots[1]))
        return Clause("AND", (Clause("CONTAINS", (subject,)), within))
    if shape == "s_p":
        return Clause(pattern.predicate, (slots[0],))
    if shape == "naa":
        return Clause(pattern.predicate, (slots[0], slots[1], slots[2]))
    raise AssertionError(f"unknown pattern shape {shape}")


# --- matching ----------------------------------------------------------------


class _Tracker:
    """Remembers the furthest token any attempt consumed, for error blame."""

    def __init__(self) -> None:
        self.furthest = 0

    def reach(self, i: int) -> None:
        self.furthest = max(self.furthest, i)


def _skip_stops(toks: Sequence[Lexeme], i: int) -> int:
    while i < len(toks) and toks[i].kind == WORD_T and toks[i].value in STOP_WORDS:
        i += 1
    return i


def _match_pattern(pattern: Pattern, toks: Sequence[Lexeme], i: int, task: Task,
                   tracker: _Tracker, start_element: int = 0):
    """Try to match pattern elements from token i.

    Returns ("full", j, slots), ("partial", elements_consumed) when input
    ran out mid-pattern, or ("fail", None).
    """
    slots: list[Arg] = []
    allowed = _ANCHORS_BY_TASK[task]
    pos = i
    for k in range(start_element, len(pattern.elements)):
        el = pattern.elements[k]
        if el.kind == LIT:
            pos = _skip_not_matching(toks, pos, el.word)
        else:
            pos = _skip_stops(toks, pos)
        tracker.reach(pos)
        if pos >= len(toks):
            return ("partial", k)
        tok = toks[pos]
        if el.kind == LIT:
            if tok.kind == WORD_T and tok.value == el.word:
                pos += 1
            else:
                return ("fail", None)
        elif el.kind == A_SLOT:
            if tok.kind == ANCHOR_T:
                if tok.value not in allowed:
                    raise UnknownAnchorError(tok.value, task)
                slots.append(Anchor(tok.value))
                pos += 1
            else:
                return ("fail", None)
        elif el.kind == N_SLOT:
            if tok.kind == INT_T:
                slots.append(IntArg(int(tok.value)))
                pos += 1
            else:
                return ("fail", None)
        elif el.kind == P_SLOT:
            if tok.kind == QUOTED_T:
                slots.append(Phrase(tok.value))
                pos += 1
            else:
                return ("fail", None)
        tracker.reach(pos)
    return ("full", pos, slots)


def _skip_not_matching(toks: Sequence[Lexeme], i: int, expected: str) -> int:
    """Skip glue words, but never one the pattern itself expects next."""
    while (i < len(toks) and toks[i].kind == WORD_T
           and toks[i].value in STOP_WORDS and toks[i].value != expected):
        i += 1
    return i


def _clause_candidates(toks: Sequence[Lexeme], i: int, task: Task, tracker: _Tracker):
    """All pattern matches for a clause starting at token i (stop-words
    already skippable).  Returns (fulls, partials)."""
    j = _skip_stops(toks, i)
    tracker.reach(j)
    fulls: list[tuple[int, Pattern, Optional[Phrase], list[Arg]]] = []
    partials: list[tuple[Pattern, int]] = []
    if j >= len(toks):
        return fulls, partials, "start"
    head = toks[j]
    if head.kind == QUOTED_T:
        subject = Phrase(head.value)
        for pat in _PATTERNS:
            if pat.subject != "phrase":
                continue
            res = _match_pattern(pat, toks, j + 1, task, tracker)
            if res[0] == "full":
                fulls.append((res[1], pat, subject, res[2]))
            elif res[0] == "partial":
                partials.append((pat, res[1]))
        return fulls, partials, "phrase"
    if head.kind == WORD_T and head.value == "sentence":
        for pat in _PATTERNS:
            if pat.subject != "sentence":
                continue
            res = _match_pattern(pat, toks, j + 1, task, tracker,
                                 start_element=_SUBJECT_SKIP["sentence"])
            if res[0] == "full":
                fulls.append((res[1], pat, None, res[2]))
            elif res[0] == "partial":
                partials.append((pat, res[1]))
        return fulls, partials, "sentence"
    if head.kind == WORD_T and head.value == "there":
        for pat in _PATTERNS:
            if pat.subject != "there":
                continue
            res = _match_pattern(pat, toks, j, task, tracker)
            if res[0] == "full":
                fulls.append((res[1], pat, None, res[2]))
            elif res[0] == "partial":
                partials.append((pat, res[1]))
        return fulls, partials, "there"
    return fulls, partials, "none"


def _parse_clause(toks, i, task, tracker):
    fulls, _partials, _state = _clause_candidates(toks, i, task, tracker)
    if not fulls:
        return None
    j, pat, subject, slots = max(fulls, key=lambda f: f[0])
    return _build(pat, subject, slots), j


def _parse_unary(toks, i, task, tracker):
    j = _skip_stops(toks, i)
    if j < len(toks) and toks[j].kind == WORD_T and toks[j].value == "not":
        inner = _parse_unary(toks, j + 1, task, tracker)
        if inner is None:
            return None
        clause, k = inner
        return Clause("NOT", (clause,)), k
    return _parse_clause(toks, i, task, tracker)


def _peek_connective(toks, i):
    j = _skip_stops(toks, i)
    if j < len(toks) and toks[j].kind == WORD_T and toks[j].value in ("and", "or"):
        return toks[j].value, j + 1
    return None, j


def _parse_expr(toks, i, task, tracker):
    first = _parse_unary(toks, i, task, tracker)
    if first is None:
        return None
    items: list = [first[0]]
    ops: list[str] = []
    pos = first[1]
    while True:
        conn, nxt = _peek_connective(toks, pos)
        if conn is None:
            break
        nxt_unary = _parse_unary(toks, nxt, task, tracker)
        if nxt_unary is None:
            return None
        items.append(nxt_unary[0])
        ops.append(conn)
        pos = nxt_unary[1]
    # AND binds tighter than OR; both associate left
    groups: list[Clause] = [items[0]]
    for op, item in zip(ops, items[1:]):
        if op == "and":
            groups[-1] = Clause("AND", (groups[-1], item))
        else:
            groups.append(item)
    node = groups[0]
    for g in groups[1:]:
        node = Clause("OR", (node, g))
    return node, pos


def parse(nl_text: str, task: Task | str, label: str) -> LogicalForm:
    """Parse an explanation into a logical form justifying ``label``.

    Raises ExplanationParseError on the first token no rule consumes,
    UnknownAnchorError when an anchor is invalid for the task, and
    UnterminatedQuoteError on a dangling quote.
    """
    task = Task(task)
    if not nl_text.strip():
        raise ExplanationParseError("", 0, nl_text)
    toks, _open = lex(nl_text)
    tracker = _Tracker()
    result = _parse_expr(toks, 0, task, tracker)
    if result is not None:
        clause, j = result
        j = _skip_stops(toks, j)
        if j >= len(toks):
            return LogicalForm(root=clause, label=label)
        tracker.reach(j)
    _raise_parse_error(toks, tracker, nl_text)


def _raise_parse_error(toks, tracker, text):
    for idx in range(min(tracker.furthest, len(toks) - 1), len(toks)):
        t = toks[idx]
        if not (t.kind == WORD_T and t.value in STOP_WORDS):
            raise ExplanationParseError(t.raw, idx, text)
    raise ExplanationParseError(toks[-1].raw if toks else "", len(toks), text)


# --- autosuggest -------------------------------------------------------------


def _render_remaining(pattern: Pattern, k: int, allowed: tuple[str, ...]):
    """Suggestion strings for the unmatched tail of a pattern.

    Yields (string, predicate) pairs: the literal run up to the next slot,
    plus full instantiations when every remaining slot is an anchor.
    """
    remaining = pattern.elements[k:]
    lead: list[str] = []
    for el in remaining:
        if el.kind != LIT:
            break
        lead.append(el.display)
    if lead:
        yield " ".join(lead), pattern.predicate
    slot_kinds = [el.kind for el in remaining if el.kind != LIT]
    if not slot_kinds or any(s in (N_SLOT, P_SLOT) for s in slot_kinds):
        return
    assignments: list[tuple[str, ...]]
    n_anchor = slot_kinds.count(A_SLOT)
    if n_anchor == 1:
        assignments = [(a,) for a in allowed]
    else:
        assignments = [
            (a, b) for a in allowed for b in allowed if a != b
        ] or [(a, a) for a in allowed]
    for assign in assignments:
        parts: list[str] = []
        it = iter(assign)
        for el in remaining:
            if el.kind == A_SLOT:
                anchor = next(it)
                parts.append(el.display.replace("{A}", anchor).replace("{B}", anchor))
            else:
                parts.append(el.display)
        yield " ".join(parts), pattern.predicate


def _starter_suggestions(glue: list[str]):
    if glue and glue[-1] in ("word", "phrase"):
        return  # a quoted phrase is expected next; that is free-form input
    for starter in CLAUSE_STARTERS:
        words = starter.split()
        # drop starter words the user already typed as trailing glue
        strip = 0
        for k in range(min(len(words), len(glue)), 0, -1):
            if glue[-k:] == words[:k]:
                strip = k
                break
        rest = words[strip:]
        if rest:
            yield " ".join(rest), None


def suggest(prefix: str, task: Task | str, cursor: Optional[int] = None,
            usage: Optional[Mapping[str, int]] = None) -> list[str]:
    """Grammatical continuations for a partial explanation at the cursor.

    Ranked by usage frequency of the underlying predicate in this project
    (descending), then lexicographically.  Empty when the prefix already
    parses completely or when free-form input (a quoted phrase, a number)
    is expected next.
    """
    task = Task(task)
    text = prefix if cursor is None else prefix[:cursor]
    try:
        toks, open_quote = lex(text, allow_open_quote=True)
    except UnterminatedQuoteError:  # pragma: no cover - allow_open_quote is set
        return []
    if open_quote:
        return []
    usage = usage or {}
    allowed = _ANCHORS_BY_TASK[task]
    tracker = _Tracker()

    items: list[tuple[str, Optional[str]]] = []
    i = 0
    while True:
        j = _skip_stops(toks, i)
        if j >= len(toks):
            glue = [t.value for t in toks[i:j]]
            items.extend(_starter_suggestions(glue))
            break
        if toks[j].kind == WORD_T and toks[j].value == "not":
            i = j + 1
            continue
        try:
            fulls, partials, _state = _clause_candidates(toks, i, task, tracker)
        except UnknownAnchorError:
            return []
        if fulls:
            clause_end, _, _, _ = max(fulls, key=lambda f: f[0])
            k = _skip_stops(toks, clause_end)
            if k >= len(toks):
                return []  # complete parse
            conn, nxt = _peek_connective(toks, clause_end)
            if conn is None:
                return []  # trailing unparseable text
            i = nxt
            continue
        if partials:
            for pat, consumed in partials:
                items.extend(_render_remaining(pat, consumed, allowed))
            break
        return []

    ranked: dict[str, int] = {}
    for text_item, predicate in items:
        freq = usage.get(predicate, 0) if predicate else 0
        if text_item not in ranked or freq > ranked[text_item]:
            ranked[text_item] = freq
    return sorted(ranked, key=lambda s: (-ranked[s], s))
