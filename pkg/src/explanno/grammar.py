"""Predicate grammar for natural-language labeling explanations.

An explanation like "the phrase 'caused by' occurs between SUBJ and OBJ"
is represented as a tree of clauses.  Leaf clauses apply one predicate
from the built-in inventory; internal nodes are the logical connectives
AND / OR / NOT.

The inventory is fixed and shared verbatim (via ``inventory_json``) with
the UI autosuggest so both sides agree on what is parseable.  The exact
predicate set is a reconstruction: it is the minimal set covering string
matching, distance/count constraints and exact positional tests, grouped
into those four categories.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Union

SUBJ = "SUBJ"
OBJ = "OBJ"
TERM = "TERM"

ANCHOR_NAMES = (SUBJ, OBJ, TERM)


class PredicateCategory(str, Enum):
    STRING_MATCH = "string_match"
    DISTANCE_COUNT = "distance_count"
    DETERMINISTIC = "deterministic"
    LOGICAL = "logical"


@dataclass(frozen=True)
class Phrase:
    text: str

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("phrase literal must be non-empty")


@dataclass(frozen=True)
class Anchor:
    name: str

    def __post_init__(self) -> None:
        if self.name not in ANCHOR_NAMES:
            raise ValueError(f"unknown anchor {self.name!r}")


@dataclass(frozen=True)
class IntArg:
    value: int

    def __post_init__(self) -> None:
        if self.value < 0:
            raise ValueError("integer argument must be >= 0")


Arg = Union[Phrase, Anchor, IntArg, "Clause"]


@dataclass(frozen=True)
class Clause:
    predicate: str
    args: tuple[Arg, ...] = ()

    def __post_init__(self) -> None:
        pred = PREDICATES.get(self.predicate)
        if pred is None:
            raise ValueError(f"unknown predicate {self.predicate!r}")
        if pred.category is PredicateCategory.LOGICAL:
            if self.predicate == "NOT" and len(self.args) != 1:
                raise ValueError("NOT takes exactly one child")
            if self.predicate in ("AND", "OR") and len(self.args) < 2:
                raise ValueError(f"{self.predicate} needs at least two children")
            if not all(isinstance(a, Clause) for a in self.args):
                raise ValueError("logical connectives take clause children")
        elif len(self.args) != pred.arity:
            raise ValueError(
                f"{self.predicate} expects {pred.arity} args, got {len(self.args)}")

    @property
    def is_leaf(self) -> bool:
        return PREDICATES[self.predicate].category is not PredicateCategory.LOGICAL

    def leaves(self) -> list["Clause"]:
        if self.is_leaf:
            return [self]
        out: list[Clause] = []
        for child in self.args:
            out.extend(child.leaves())  # type: ignore[union-attr]
        return out

    def anchors(self) -> set[str]:
        found: set[str] = set()
        for leaf in self.leaves():
            for a in leaf.args:
                if isinstance(a, Anchor):
                    found.add(a.name)
        return found

    def phrases(self) -> list[Phrase]:
        seen: dict[str, Phrase] = {}
        for leaf in self.leaves():
            for a in leaf.args:
                if isinstance(a, Phrase) and a.text not in seen:
                    seen[a.text] = a
        return list(seen.values())


@dataclass(frozen=True)
class LogicalForm:
    """The matchable rule an explanation parses to, plus the label it
    justifies."""
    root: Clause
    label: str

    def __post_init__(self) -> None:
        if not self.root.leaves():
            raise ValueError("logical form must contain at least one leaf clause")


@dataclass(frozen=True)
class Predicate:
    name: str
    category: PredicateCategory
    arity: int
    surface_forms: tuple[str, ...]
    example: str = field(default="", compare=False)


def _p(name, category, arity, surface_forms, example=""):
    return Predicate(name=name, category=PredicateCategory(category), arity=arity,
                     surface_forms=tuple(surface_forms), example=example)


# Arities count the full argument tuple including the subject phrase where
# one applies, e.g. BETWEEN(phrase, anchor, anchor) has arity 3.
_INVENTORY = (
    _p("CONTAINS", "string_match", 1,
       ("contains", "appears in the sentence", "occurs in the sentence"),
       "the sentence contains 'cheap'"),
    _p("STARTS_WITH", "string_match", 1,
       ("starts with", "begins with"),
       "the sentence starts with 'we'"),
    _p("ENDS_WITH", "string_match", 1,
       ("ends with",),
       "the sentence ends with 'cheap'"),
    _p("WITHIN", "distance_count", 3,
       ("within", "no more than"),
       "the word 'happy' is within 5 words of TERM"),
    _p("AT_LEAST_N_WORDS_BETWEEN", "distance_count", 3,
       ("there are at least",),
       "there are at least 3 words between SUBJ and OBJ"),
    _p("COUNT_OCCURRENCES", "distance_count", 2,
       ("occurs at least", "appears at least"),
       "the word 'food' occurs at least 2 times"),
    _p("LEFT", "deterministic", 2,
       ("to the left of", "precedes", "occurs before"),
       "the word 'born' occurs to the left of OBJ"),
    _p("RIGHT", "deterministic", 2,
       ("to the right of", "follows", "occurs after"),
       "the word 'citizen' occurs to the right of SUBJ"),
    _p("BETWEEN", "deterministic", 3,
       ("occurs between", "between"),
       "the phrase 'caused by' occurs between SUBJ and OBJ"),
    _p("DIRECTLY_PRECEDES", "deterministic", 2,
       ("directly precedes", "immediately precedes"),
       "the word 'in' directly precedes OBJ"),
    _p("AND", "logical", 2, ("and",), ""),
    _p("OR", "logical", 2, ("or",), ""),
    _p("NOT", "logical", 1, ("not",), ""),
)

PREDICATES: dict[str, Predicate] = {p.name: p for p in _INVENTORY}


def grammar_predicates() -> list[Predicate]:
    """The fixed built-in predicate inventory, stable across calls."""
    return list(_INVENTORY)


def predicates_by_category() -> dict[PredicateCategory, list[Predicate]]:
    out: dict[PredicateCategory, list[Predicate]] = {c: [] for c in PredicateCategory}
    for p in _INVENTORY:
        out[p.category].append(p)
    return out


def inventory_json() -> list[dict]:
    """JSON-ready inventory shared with the UI autosuggest."""
    return [
        {
            "name": p.name,
            "category": p.category.value,
            "arity": p.arity,
            "surface_forms": list(p.surface_forms),
            "example": p.example,
        }
        for p in _INVENTORY
    ]


# --- serialization ---------------------------------------------------------

def arg_to_dict(arg: Arg) -> dict:
    if isinstance(arg, Phrase):
        return {"phrase": arg.text}
    if isinstance(arg, Anchor):
        return {"anchor": arg.name}
    if isinstance(arg, IntArg):
        return {"int": arg.value}
    if isinstance(arg, Clause):
        return {"clause": clause_to_dict(arg)}
    raise TypeError(f"unexpected argument {arg!r}")


def arg_from_dict(d: dict) -> Arg:
    if "phrase" in d:
        return Phrase(d["phrase"])
    if "anchor" in d:
        return Anchor(d["anchor"])
    if "int" in d:
        return IntArg(int(d["int"]))
    if "clause" in d:
        return clause_from_dict(d["clause"])
    raise ValueError(f"cannot decode argument {d!r}")


def clause_to_dict(clause: Clause) -> dict:
    return {"pred": clause.predicate, "args": [arg_to_dict(a) for a in clause.args]}


def clause_from_dict(d: dict) -> Clause:
    return Clause(predicate=d["pred"], args=tuple(arg_from_dict(a) for a in d["args"]))


def form_to_dict(form: LogicalForm) -> dict:
    return {"label": form.label, "root": clause_to_dict(form.root)}


def form_from_dict(d: dict) -> LogicalForm:
    return LogicalForm(root=clause_from_dict(d["root"]), label=d["label"])


# --- pretty printing -------------------------------------------------------
#
# pretty(parse(text)) re-parses to a structurally identical tree.  Printing
# is defined for grammar-expressible trees; programmatic trees that the
# grammar cannot express (e.g. an OR nested under an AND) have no faithful
# rendering and printing them raises.

def _q(text: str) -> str:
    return f"'{text}'"


def _pretty_leaf(c: Clause) -> str:
    p, a = c.predicate, c.args
    if p == "CONTAINS":
        return f"the sentence contains {_q(a[0].text)}"
    if p == "STARTS_WITH":
        return f"the sentence starts with {_q(a[0].text)}"
    if p == "ENDS_WITH":
        return f"the sentence ends with {_q(a[0].text)}"
    if p == "BETWEEN":
        return f"the phrase {_q(a[0].text)} occurs between {a[1].name} and {a[2].name}"
    if p == "LEFT":
        return f"the phrase {_q(a[0].text)} occurs to the left of {a[1].name}"
    if p == "RIGHT":
        return f"the phrase {_q(a[0].text)} occurs to the right of {a[1].name}"
    if p == "DIRECTLY_PRECEDES":
        return f"the phrase {_q(a[0].text)} directly precedes {a[1].name}"
    if p == "WITHIN":
        return f"the word {_q(a[0].text)} is within {a[1].value} words of {a[2].name}"
    if p == "COUNT_OCCURRENCES":
        return f"the word {_q(a[0].text)} occurs at least {a[1].value} times"
    if p == "AT_LEAST_N_WORDS_BETWEEN":
        return (f"there are at least {a[0].value} words between "
                f"{a[1].name} and {a[2].name}")
    raise ValueError(f"no rendering for predicate {p}")


def _is_within_idiom(c: Clause) -> bool:
    # "is within N words of X" parses to AND(CONTAINS(p), WITHIN(p, n, x));
    # recognize the pair so the idiom prints back as itself.
    return (c.predicate == "AND" and len(c.args) == 2
            and isinstance(c.args[0], Clause) and isinstance(c.args[1], Clause)
            and c.args[0].predicate == "CONTAINS"
            and c.args[1].predicate == "WITHIN"
            and c.args[0].args[0] == c.args[1].args[0])


def pretty_clause(c: Clause, parent: str = "") -> str:
    if _is_within_idiom(c):
        return _pretty_leaf(c.args[1])  # type: ignore[arg-type]
    if c.predicate == "NOT":
        child = c.args[0]
        assert isinstance(child, Clause)
        if child.predicate in ("AND", "OR") and not _is_within_idiom(child):
            raise ValueError("cannot render NOT over a connective")
        return "not " + pretty_clause(child, parent="NOT")
    if c.predicate in ("AND", "OR"):
        if parent == "AND" and c.predicate == "OR":
            raise ValueError("cannot render OR nested under AND")
        sep = f" {c.predicate.lower()} "
        return sep.join(pretty_clause(ch, parent=c.predicate) for ch in c.args)  # type: ignore[arg-type]
    return _pretty_leaf(c)


def pretty(form: LogicalForm) -> str:
    return pretty_clause(form.root)
