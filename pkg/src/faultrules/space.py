"""Candidate-rule generation: mode bias, numeric thresholds, and rule pricing.

A mode bias lists the ground event atoms allowed in rule heads, the ground
atoms allowed in bodies, and the numeric variables whose captured values may
be constrained by ``<=`` / ``>=`` comparisons at data-derived thresholds.
``enumerate_rules`` walks the resulting space deterministically and prices
each rule with a cost-based prior that penalises heads more than body
literals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence, Union

from .logic import (
    Atom,
    BodyLiteral,
    Comparison,
    LogicError,
    NafLiteral,
    Rule,
    Var,
    check_safety,
    format_rule,
    parse_rule,
)

DEFAULT_PHI: tuple[float, ...] = tuple(round(0.1 * i, 1) for i in range(1, 11))

#: Rule pricing: heads cost more than body literals so that hypotheses stay short.
HEAD_WEIGHT = 2
LITERAL_WEIGHT = 1
PRIOR_BASE = 0.5

DEFAULT_CANDIDATE_BUDGET = 5_000_000

_CAPTURE_NAMES = ("A", "B", "C", "D", "E", "F")


class SpaceError(LogicError):
    """Invalid bias or enumeration failure."""


class CandidateBudgetExceeded(SpaceError):
    """Enumeration would exceed the configured candidate cap."""


@dataclass(frozen=True)
class NumericVarSpec:
    """A numeric body predicate with its scaled-integer range and thresholds."""

    predicate: str
    lo: int
    hi: int
    multiplier: float
    thresholds: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.lo > self.hi:
            raise SpaceError(f"numeric range inverted for {self.predicate}: [{self.lo}, {self.hi}]")
        exponent = math.log10(self.multiplier)
        if abs(exponent - round(exponent)) > 1e-9 or not (1e-2 - 1e-12 <= self.multiplier <= 1e3 + 1e-9):
            raise SpaceError(f"multiplier for {self.predicate} must be a power of 10 in [0.01, 1000]")

    def effective_thresholds(self) -> tuple[int, ...]:
        if self.thresholds:
            return self.thresholds
        return (self.lo,) if self.lo == self.hi else (self.lo, self.hi)


@dataclass(frozen=True)
class MaxBodyLength:
    limit: int

    def __post_init__(self) -> None:
        if self.limit < 1:
            raise SpaceError("max body length must be >= 1")


@dataclass(frozen=True)
class ForbidAllNominalBody:
    """Reject rules whose body contains no literal outside the nominal markers.

    Bodiless rules are vacuously all-nominal and are rejected too.
    """

    nominal_atoms: frozenset[Atom] = frozenset()
    nominal_preds: frozenset[str] = frozenset()


@dataclass(frozen=True)
class ForbidPredicatePair:
    first: str
    second: str


BiasConstraint = Union[MaxBodyLength, ForbidAllNominalBody, ForbidPredicatePair]


@dataclass(frozen=True)
class ModeBias:
    """Head declarations, body declarations, numeric variables and constraints."""

    heads: tuple[Atom, ...]
    nominal_body: tuple[Atom, ...] = ()
    numeric_vars: tuple[NumericVarSpec, ...] = ()
    constraints: tuple[BiasConstraint, ...] = ()
    phi: tuple[float, ...] = DEFAULT_PHI

    def __post_init__(self) -> None:
        arity: dict[str, int] = {}
        for atom in (*self.heads, *self.nominal_body):
            if not atom.is_ground:
                raise SpaceError(f"bias atoms must be ground: {atom}")
            if arity.setdefault(atom.pred, atom.arity) != atom.arity:
                raise SpaceError(f"predicate {atom.pred} declared with two arities")
        if not self.phi or any(not (0.0 < p <= 1.0) for p in self.phi):
            raise SpaceError("phi grid must be non-empty probabilities in (0, 1]")

    def max_body_length(self, default: int) -> int:
        limits = [c.limit for c in self.constraints if isinstance(c, MaxBodyLength)]
        return min(limits + [default])


def _nominal_literal(lit: BodyLiteral, constraint: ForbidAllNominalBody) -> bool:
    if isinstance(lit, Comparison):
        return False
    atom = lit.atom if isinstance(lit, NafLiteral) else lit
    return atom in constraint.nominal_atoms or atom.pred in constraint.nominal_preds


def violates(rule: Rule, constraints: Iterable[BiasConstraint]) -> bool:
    """Post-hoc constraint check; enumeration prunes with the same predicate."""
    for c in constraints:
        if isinstance(c, MaxBodyLength):
            if len(rule.body) > c.limit:
                return True
        elif isinstance(c, ForbidAllNominalBody):
            if all(_nominal_literal(l, c) for l in rule.body):
                return True
        elif isinstance(c, ForbidPredicatePair):
            preds = {a.pred for a in rule.positive_atoms()}
            if c.first in preds and c.second in preds:
                return True
    return False


# ---------------------------------------------------------------------------
# Thresholds
# ---------------------------------------------------------------------------

def threshold_candidates(values: Sequence[int], max_count: int) -> list[int]:
    """Candidate comparison bounds: extremes plus floor-midpoints of consecutive
    distinct values, evenly subsampled down to ``max_count`` when necessary."""
    if not values:
        raise SpaceError("threshold_candidates needs at least one value")
    if max_count < 1:
        raise SpaceError("max_count must be >= 1")
    distinct = sorted(set(values))
    if len(distinct) == 1:
        return [distinct[0]]
    full = {distinct[0], distinct[-1]}
    for lo, hi in zip(distinct, distinct[1:]):
        full.add((lo + hi) // 2)
    ordered = sorted(full)
    if len(ordered) <= max_count:
        return ordered
    if max_count == 1:
        return [ordered[0]]
    picks = [round(i * (len(ordered) - 1) / (max_count - 1)) for i in range(max_count)]
    return [ordered[i] for i in dict.fromkeys(picks)]


# ---------------------------------------------------------------------------
# Rule pricing
# ---------------------------------------------------------------------------

def cost(rule: Rule) -> int:
    """Head weight plus one per body literal (comparisons count)."""
    return HEAD_WEIGHT + LITERAL_WEIGHT * len(rule.body)


def prior(rule: Rule) -> float:
    """Prior probability of a candidate rule, strictly decreasing in cost."""
    check_safety(rule)
    return PRIOR_BASE ** cost(rule)


@dataclass(frozen=True)
class ScoredRule:
    """A candidate rule annotated with its grid probability, prior and cost."""

    rule: Rule
    phi: float
    prior: float
    cost: int

    def __post_init__(self) -> None:
        if not (0.0 < self.prior < 1.0):
            raise SpaceError(f"prior must be in (0, 1): {self.prior}")

    @property
    def text(self) -> str:
        return format_rule(self.rule, self.phi)

    @property
    def sort_key(self) -> tuple[int, str]:
        return (self.cost, self.text)


def make_scored(rule: Rule, phi: float) -> ScoredRule:
    return ScoredRule(rule=rule, phi=phi, prior=prior(rule), cost=cost(rule))


# ---------------------------------------------------------------------------
# Enumeration
# ---------------------------------------------------------------------------

def _numeric_choices(spec: NumericVarSpec, max_comparisons: int = 2) -> list[tuple[str, ...]]:
    """Comparison patterns for one captured variable: bare, one-sided, interval."""
    ts = spec.effective_thresholds()
    choices: list[tuple] = [()]
    choices += [((">=", t),) for t in ts]
    choices += [(("<=", t),) for t in ts]
    if max_comparisons >= 2:
        choices += [((">=", lo), ("<=", hi)) for lo in ts for hi in ts if lo <= hi]
    return choices


def _bodies(slots: list[tuple[str, object]], max_len: int) -> Iterator[tuple[BodyLiteral, ...]]:
    """Depth-first enumeration over atom slots; each slot is skipped or included
    with one of its comparison patterns."""

    def rec(i: int, remaining: int, acc: list[BodyLiteral], n_numeric: int) -> Iterator[tuple[BodyLiteral, ...]]:
        yield tuple(acc)
        if remaining == 0:
            return
        for j in range(i, len(slots)):
            kind, payload = slots[j]
            if kind == "nominal":
                acc.append(payload)
                yield from rec(j + 1, remaining - 1, acc, n_numeric)
                acc.pop()
            else:
                spec, choices = payload
                var = Var(_CAPTURE_NAMES[n_numeric]) if n_numeric < len(_CAPTURE_NAMES) else Var(f"X{n_numeric}")
                anon = Var(f"_{j}")
                for comps in choices:
                    length = 1 + len(comps)
                    if length > remaining:
                        continue
                    v = var if comps else anon
                    acc.append(Atom(spec.predicate, (v,)))
                    for op, t in comps:
                        acc.append(Comparison(v, op, t))
                    yield from rec(j + 1, remaining - length, acc, n_numeric + 1)
                    for _ in range(length):
                        acc.pop()

    yield from rec(0, max_len, [], 0)


def enumerate_rules(
    bias: ModeBias,
    max_body_len: int,
    *,
    budget: int = DEFAULT_CANDIDATE_BUDGET,
) -> Iterator[ScoredRule]:
    """Yield every constraint-satisfying candidate rule once per grid probability.

    Enumeration order is deterministic: heads in declaration order, bodies in
    depth-first slot order, probabilities ascending.  Raises
    CandidateBudgetExceeded past ``budget`` candidates, naming the body schema
    with the most comparison patterns.
    """
    if max_body_len < 1:
        raise SpaceError("max_body_len must be >= 1")
    max_len = bias.max_body_length(max_body_len)

    slots: list[tuple[str, object]] = [("nominal", a) for a in bias.nominal_body]
    option_counts: dict[str, int] = {a.pred: 1 for a in bias.nominal_body}
    for spec in bias.numeric_vars:
        choices = _numeric_choices(spec)
        slots.append(("numeric", (spec, choices)))
        option_counts[spec.predicate] = len(choices)
    dominant = max(option_counts, key=lambda p: option_counts[p]) if option_counts else "(none)"

    emitted = 0
    phis = tuple(sorted(bias.phi))
    for head in bias.heads:
        for body in _bodies(slots, max_len):
            rule = Rule(head, body)
            if violates(rule, bias.constraints):
                continue
            emitted += len(phis)
            if emitted > budget:
                raise CandidateBudgetExceeded(
                    f"candidate budget {budget} exceeded; dominating schema: {dominant} "
                    f"({option_counts.get(dominant, 0)} comparison patterns)"
                )
            for phi in phis:
                yield make_scored(rule, phi)


# ---------------------------------------------------------------------------
# Bias serialization (declarative text format)
# ---------------------------------------------------------------------------
#
#   phi 0.1 0.2 ... 1
#   head failure(source,missingEthylene)
#   body failure(null,null)
#   numeric m1_pv 140 170 1 : 145 150 160
#   constraint max_body_length 3
#   constraint forbid_all_nominal_body atoms failure(null,null) ; preds unchanged
#   constraint forbid_predicate_pair m1_pv_up m1_pv_down

def _atom_from_text(text: str) -> Atom:
    _, rule = parse_rule(text.strip() + ".")
    if rule.body:
        raise SpaceError(f"expected a plain atom, got rule: {text}")
    return rule.head


def bias_to_text(bias: ModeBias) -> str:
    lines = ["phi " + " ".join(f"{p:g}" for p in bias.phi)]
    lines += [f"head {a}" for a in bias.heads]
    lines += [f"body {a}" for a in bias.nominal_body]
    for s in bias.numeric_vars:
        thr = " ".join(str(t) for t in s.thresholds)
        lines.append(f"numeric {s.predicate} {s.lo} {s.hi} {s.multiplier:g}" + (f" : {thr}" if thr else ""))
    for c in bias.constraints:
        if isinstance(c, MaxBodyLength):
            lines.append(f"constraint max_body_length {c.limit}")
        elif isinstance(c, ForbidPredicatePair):
            lines.append(f"constraint forbid_predicate_pair {c.first} {c.second}")
        elif isinstance(c, ForbidAllNominalBody):
            atoms = " ".join(sorted(str(a) for a in c.nominal_atoms))
            preds = " ".join(sorted(c.nominal_preds))
            lines.append(f"constraint forbid_all_nominal_body atoms {atoms} ; preds {preds}".rstrip())
    return "\n".join(lines) + "\n"


def bias_from_text(text: str) -> ModeBias:
    phi: tuple[float, ...] = DEFAULT_PHI
    heads: list[Atom] = []
    body: list[Atom] = []
    numeric: list[NumericVarSpec] = []
    constraints: list[BiasConstraint] = []
    for raw in text.splitlines():
        line = raw.split("%", 1)[0].strip()
        if not line:
            continue
        keyword, _, rest = line.partition(" ")
        rest = rest.strip()
        if keyword == "phi":
            phi = tuple(float(x) for x in rest.split())
        elif keyword == "head":
            heads.append(_atom_from_text(rest))
        elif keyword == "body":
            body.append(_atom_from_text(rest))
        elif keyword == "numeric":
            spec_part, _, thr_part = rest.partition(":")
            parts = spec_part.split()
            if len(parts) != 4:
                raise SpaceError(f"bad numeric line: {raw!r}")
            thresholds = tuple(int(t) for t in thr_part.split())
            numeric.append(NumericVarSpec(parts[0], int(parts[1]), int(parts[2]), float(parts[3]), thresholds))
        elif keyword == "constraint":
            kind, _, args = rest.partition(" ")
            if kind == "max_body_length":
                constraints.append(MaxBodyLength(int(args)))
            elif kind == "forbid_predicate_pair":
                first, second = args.split()
                constraints.append(ForbidPredicatePair(first, second))
            elif kind == "forbid_all_nominal_body":
                atoms_part, _, preds_part = args.partition(";")
                atom_tokens = atoms_part.replace("atoms", "", 1).split()
                pred_tokens = preds_part.replace("preds", "", 1).split()
                constraints.append(
                    ForbidAllNominalBody(
                        frozenset(_atom_from_text(t) for t in atom_tokens),
                        frozenset(pred_tokens),
                    )
                )
            else:
                raise SpaceError(f"unknown constraint kind {kind!r}")
        else:
            raise SpaceError(f"unknown bias line {raw!r}")
    return ModeBias(tuple(heads), tuple(body), tuple(numeric), tuple(constraints), phi)
