"""Ground atoms, normal rules, and answer-set evaluation for a restricted rule class.

The rule class supported here is what the learning tasks produce: normal rules
whose negation ranges over facts derived strictly below them (stratified
programs).  For such programs the unique answer set equals the least fixed
point of grounding + forward chaining, which is what ``evaluate`` computes.
Non-stratifiable programs are rejected, never approximated.

Numeric terms are scaled integers (raw value times a power-of-10 multiplier,
rounded half away from zero), so comparisons are exact and hashing is
deterministic.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Union


class LogicError(ValueError):
    """Base class for errors raised by this module."""


class SafetyError(LogicError):
    """A rule uses a variable not bound by a positive body atom."""


class StratificationError(LogicError):
    """The program has a cycle through negation."""


class RuleParseError(LogicError):
    """Malformed rule text."""


@dataclass(frozen=True)
class Var:
    """A rule variable.  Names starting with ``_`` print as the anonymous ``_``."""

    name: str

    def __str__(self) -> str:
        return "_" if self.name.startswith("_") else self.name


Term = Union[str, int, Var]


@dataclass(frozen=True)
class Atom:
    """A predicate applied to terms; ground when no term is a Var."""

    pred: str
    args: tuple[Term, ...] = ()

    def __post_init__(self) -> None:
        if not self.pred:
            raise LogicError("empty predicate name")

    @property
    def arity(self) -> int:
        return len(self.args)

    @property
    def is_ground(self) -> bool:
        return not any(isinstance(a, Var) for a in self.args)

    def variables(self) -> set[Var]:
        return {a for a in self.args if isinstance(a, Var)}

    def substitute(self, binding: dict[Var, Term]) -> "Atom":
        return Atom(self.pred, tuple(binding.get(a, a) if isinstance(a, Var) else a for a in self.args))

    def __str__(self) -> str:
        if not self.args:
            return self.pred
        return f"{self.pred}({','.join(_term_str(a) for a in self.args)})"


@dataclass(frozen=True)
class NafLiteral:
    """Negation-as-failure over an atom."""

    atom: Atom

    def __str__(self) -> str:
        return f"not {self.atom}"


OP_LE = "<="
OP_GE = ">="


@dataclass(frozen=True)
class Comparison:
    """``V <= bound`` or ``V >= bound`` over a scaled-integer capture variable."""

    var: Var
    op: str
    bound: int

    def __post_init__(self) -> None:
        if self.op not in (OP_LE, OP_GE):
            raise LogicError(f"bad comparison operator {self.op!r}")

    def holds(self, value: int) -> bool:
        return value <= self.bound if self.op == OP_LE else value >= self.bound

    def __str__(self) -> str:
        return f"{self.var} {self.op} {self.bound}"


BodyLiteral = Union[Atom, NafLiteral, Comparison]


@dataclass(frozen=True)
class Rule:
    """A normal rule ``head :- body`` (a fact when the body is empty)."""

    head: Atom
    body: tuple[BodyLiteral, ...] = ()

    def positive_atoms(self) -> tuple[Atom, ...]:
        return tuple(l for l in self.body if isinstance(l, Atom))

    def naf_atoms(self) -> tuple[Atom, ...]:
        return tuple(l.atom for l in self.body if isinstance(l, NafLiteral))

    def comparisons(self) -> tuple[Comparison, ...]:
        return tuple(l for l in self.body if isinstance(l, Comparison))

    def __str__(self) -> str:
        return format_rule(self)


FactSet = frozenset[Atom]


@dataclass(frozen=True)
class PartialInterpretation:
    """Inclusion/exclusion atom sets; an interpretation extends it when it
    contains every inclusion and no exclusion."""

    inc: FactSet = frozenset()
    exc: FactSet = frozenset()

    def __post_init__(self) -> None:
        if self.inc & self.exc:
            raise LogicError(f"inclusions and exclusions overlap: {sorted(map(str, self.inc & self.exc))}")


@dataclass(frozen=True)
class Wcdpi:
    """Weighted context-dependent partial interpretation: one training example."""

    example_id: str
    penalty: int
    pi: PartialInterpretation
    ctx_facts: FactSet = frozenset()
    ctx_rules: tuple[Rule, ...] = ()

    def __post_init__(self) -> None:
        if self.penalty < 1:
            raise LogicError(f"penalty must be >= 1, got {self.penalty}")


# ---------------------------------------------------------------------------
# Safety
# ---------------------------------------------------------------------------

def check_safety(rule: Rule) -> None:
    """Every head / negated / comparison variable must occur in a positive body atom."""
    bound: set[Var] = set()
    for atom in rule.positive_atoms():
        bound |= atom.variables()
    unbound: set[Var] = set()
    unbound |= rule.head.variables() - bound
    for atom in rule.naf_atoms():
        unbound |= atom.variables() - bound
    for comp in rule.comparisons():
        if comp.var not in bound:
            unbound.add(comp.var)
    if unbound:
        names = ", ".join(sorted(v.name for v in unbound))
        raise SafetyError(f"unsafe variables {{{names}}} in rule: {rule}")


def is_safe(rule: Rule) -> bool:
    try:
        check_safety(rule)
    except SafetyError:
        return False
    return True


# ---------------------------------------------------------------------------
# Stratification
# ---------------------------------------------------------------------------

def stratify(rules: Iterable[Rule], edb: Iterable[str] = ()) -> dict[str, int]:
    """Assign a stratum to every predicate, or raise StratificationError.

    Predicates never appearing in a head (plus any in ``edb``) sit at stratum 0.
    A rule's head must sit at least as high as its positive body predicates and
    strictly above its negated ones; failure to stabilise means a cycle through
    negation exists.
    """
    rules = list(rules)
    preds: set[str] = set(edb)
    for r in rules:
        preds.add(r.head.pred)
        for a in r.positive_atoms():
            preds.add(a.pred)
        for a in r.naf_atoms():
            preds.add(a.pred)
    level = {p: 0 for p in preds}
    for _ in range(len(preds) + 1):
        changed = False
        for r in rules:
            h = r.head.pred
            lo = 0
            for a in r.positive_atoms():
                lo = max(lo, level[a.pred])
            for a in r.naf_atoms():
                lo = max(lo, level[a.pred] + 1)
            if lo > level[h]:
                level[h] = lo
                changed = True
        if not changed:
            return level
    unstable = sorted(p for p in preds if level[p] > len(preds))
    raise StratificationError(
        "program is not stratifiable: negative cycle through predicates "
        + ", ".join(unstable if unstable else sorted(preds))
    )


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

FactIndex = dict[str, list[tuple[Term, ...]]]


def index_facts(facts: Iterable[Atom]) -> FactIndex:
    index: FactIndex = {}
    for f in facts:
        index.setdefault(f.pred, []).append(f.args)
    return index


def _unify_args(pattern: tuple[Term, ...], ground: tuple[Term, ...], binding: dict[Var, Term]) -> dict[Var, Term] | None:
    if len(pattern) != len(ground):
        return None
    out = binding
    for p, g in zip(pattern, ground):
        if isinstance(p, Var):
            seen = out.get(p)
            if seen is None:
                if out is binding:
                    out = dict(binding)
                out[p] = g
            elif seen != g:
                return None
        elif p != g:
            return None
    return out


def _bindings(atoms: tuple[Atom, ...], index: FactIndex, binding: dict[Var, Term]) -> Iterator[dict[Var, Term]]:
    if not atoms:
        yield binding
        return
    first, rest = atoms[0], atoms[1:]
    for args in index.get(first.pred, ()):
        b = _unify_args(first.args, args, binding)
        if b is not None:
            yield from _bindings(rest, index, b)


def _body_holds(rule: Rule, binding: dict[Var, Term], facts: set[Atom]) -> bool:
    for comp in rule.comparisons():
        value = binding.get(comp.var)
        if not isinstance(value, int) or not comp.holds(value):
            return False
    for atom in rule.naf_atoms():
        if atom.substitute(binding) in facts:
            return False
    return True


def body_satisfied(body: tuple[BodyLiteral, ...], facts: FactSet, index: FactIndex | None = None) -> bool:
    """True when some binding of the body's positive atoms satisfies all literals."""
    rule = Rule(Atom("_q"), body)
    if index is None:
        index = index_facts(facts)
    fact_set = set(facts)
    for binding in _bindings(rule.positive_atoms(), index, {}):
        if _body_holds(rule, binding, fact_set):
            return True
    return False


def evaluate(program: Iterable[Rule], facts: FactSet) -> FactSet:
    """Least fixed point of grounding + firing over a stratified program.

    Strata are evaluated bottom-up; within a stratum, rules fire to a fixed
    point.  Stratification guarantees negated predicates are fully decided
    before they are tested, so the result is the program's unique answer set.
    """
    rules = list(program)
    for r in rules:
        check_safety(r)
    edb = {f.pred for f in facts}
    level = stratify(rules, edb=edb)
    by_level: dict[int, list[Rule]] = {}
    for r in rules:
        by_level.setdefault(level[r.head.pred], []).append(r)

    derived: set[Atom] = set(facts)
    index = index_facts(derived)
    for lvl in sorted(by_level):
        changed = True
        while changed:
            changed = False
            for rule in by_level[lvl]:
                for binding in _bindings(rule.positive_atoms(), index, {}):
                    if not _body_holds(rule, binding, derived):
                        continue
                    head = rule.head.substitute(binding)
                    if head not in derived:
                        derived.add(head)
                        index.setdefault(head.pred, []).append(head.args)
                        changed = True
    return frozenset(derived)


def extends(interp: FactSet, pi: PartialInterpretation) -> bool:
    """True iff ``pi.inc`` is contained in ``interp`` and ``pi.exc`` is disjoint from it."""
    return pi.inc <= interp and not (pi.exc & interp)


def accepts(program: Iterable[Rule], example: Wcdpi) -> bool:
    """True iff the answer set of program + example context extends the example's
    partial interpretation."""
    model = evaluate(tuple(program) + example.ctx_rules, example.ctx_facts)
    return extends(model, example.pi)


# ---------------------------------------------------------------------------
# Textual syntax
# ---------------------------------------------------------------------------
#
#   0.7: k1_p1(low2) :- srcr1_p(P), P <= 9.
#   failure(beforeCompressor,leak) :- unchanged(m2_pv), e2_tti_up(_).
#
# Constants are lowercase identifiers or integers, variables start uppercase,
# `_` is an anonymous variable (fresh per occurrence).  `%` starts a comment.

_TOKEN = re.compile(
    r"\s*(?:(?P<comment>%[^\n]*)|(?P<prob>\d+\.\d+|\d+(?=\s*:))|(?P<int>-?\d+)"
    r"|(?P<if>:-)|(?P<op><=|>=)|(?P<punct>[(),.:])|(?P<name>[A-Za-z_][A-Za-z0-9_]*))"
)


def _term_str(t: Term) -> str:
    return str(t)


def format_rule(rule: Rule, phi: float | None = None) -> str:
    head = str(rule.head)
    prefix = f"{phi:g}: " if phi is not None else ""
    if not rule.body:
        return f"{prefix}{head}."
    body = ", ".join(str(l) for l in rule.body)
    return f"{prefix}{head} :- {body}."


def format_program(rules: Iterable[tuple[float | None, Rule]]) -> str:
    return "\n".join(format_rule(r, phi) for phi, r in rules) + "\n"


class _Tokens:
    def __init__(self, text: str) -> None:
        self.items: list[tuple[str, str]] = []
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if m is None:
                if text[pos:].strip():
                    raise RuleParseError(f"unexpected character {text[pos:pos + 10]!r}")
                break
            pos = m.end()
            kind = m.lastgroup
            if kind == "comment":
                continue
            self.items.append((kind, m.group(kind)))
        self.i = 0

    def peek(self) -> tuple[str, str] | None:
        return self.items[self.i] if self.i < len(self.items) else None

    def next(self) -> tuple[str, str]:
        tok = self.peek()
        if tok is None:
            raise RuleParseError("unexpected end of input")
        self.i += 1
        return tok

    def expect(self, kind: str, value: str | None = None) -> str:
        k, v = self.next()
        if k != kind or (value is not None and v != value):
            raise RuleParseError(f"expected {value or kind}, got {v!r}")
        return v


def _parse_term(tokens: _Tokens, fresh: list[int]) -> Term:
    kind, value = tokens.next()
    if kind == "int" or kind == "prob":
        if "." in value:
            raise RuleParseError(f"float term {value!r} not allowed; terms are scaled integers")
        return int(value)
    if kind != "name":
        raise RuleParseError(f"expected term, got {value!r}")
    if value == "_":
        fresh[0] += 1
        return Var(f"_{fresh[0]}")
    if value[0].isupper():
        return Var(value)
    return value


def _parse_atom(tokens: _Tokens, fresh: list[int]) -> Atom:
    kind, name = tokens.next()
    if kind != "name" or not name[0].islower():
        raise RuleParseError(f"expected predicate, got {name!r}")
    args: list[Term] = []
    nxt = tokens.peek()
    if nxt == ("punct", "("):
        tokens.next()
        while True:
            args.append(_parse_term(tokens, fresh))
            k, v = tokens.next()
            if v == ")":
                break
            if v != ",":
                raise RuleParseError(f"expected ',' or ')', got {v!r}")
    return Atom(name, tuple(args))


def _parse_body_literal(tokens: _Tokens, fresh: list[int]) -> BodyLiteral:
    kind, value = tokens.peek()
    if kind == "name" and value == "not":
        tokens.next()
        return NafLiteral(_parse_atom(tokens, fresh))
    if kind == "name" and (value[0].isupper() or value == "_"):
        term = _parse_term(tokens, fresh)
        op = tokens.expect("op")
        bkind, bval = tokens.next()
        if bkind not in ("int", "prob") or "." in bval:
            raise RuleParseError(f"expected integer bound, got {bval!r}")
        if not isinstance(term, Var) or term.name.startswith("_"):
            raise RuleParseError("comparison over anonymous variable")
        return Comparison(term, op, int(bval))
    return _parse_atom(tokens, fresh)


def parse_rule(text: str) -> tuple[float | None, Rule]:
    """Parse a single rule statement; returns (probability or None, rule)."""
    tokens = _Tokens(text)
    phi, rule = _parse_statement(tokens)
    if tokens.peek() is not None:
        raise RuleParseError(f"trailing input after rule: {tokens.peek()[1]!r}")
    return phi, rule


def _parse_statement(tokens: _Tokens) -> tuple[float | None, Rule]:
    fresh = [0]
    phi: float | None = None
    tok = tokens.peek()
    if tok is not None and tok[0] in ("prob", "int") and tokens.items[tokens.i + 1 : tokens.i + 2] == [("punct", ":")]:
        phi = float(tokens.next()[1])
        tokens.expect("punct", ":")
    head = _parse_atom(tokens, fresh)
    body: list[BodyLiteral] = []
    kind, value = tokens.next()
    if value == ":-":
        while True:
            body.append(_parse_body_literal(tokens, fresh))
            kind, value = tokens.next()
            if value == ".":
                break
            if value != ",":
                raise RuleParseError(f"expected ',' or '.', got {value!r}")
    elif value != ".":
        raise RuleParseError(f"expected ':-' or '.', got {value!r}")
    rule = Rule(head, tuple(body))
    check_safety(rule)
    return phi, rule


def parse_program(text: str) -> list[tuple[float | None, Rule]]:
    """Parse a newline/period-separated sequence of rule statements."""
    tokens = _Tokens(text)
    out: list[tuple[float | None, Rule]] = []
    while tokens.peek() is not None:
        out.append(_parse_statement(tokens))
    return out
