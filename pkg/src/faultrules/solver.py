"""Posterior-maximising search over the discretized probabilistic rule space.

The task is solved independently per event: every example whose inclusions
contain the event counts as a positive observation, every example excluding it
as a negative one, and example penalties act as weights (penalty / 100).  A
hypothesis predicts an event's probability in a context as the largest grid
probability among its firing rules, with a floor of ``EPS`` when nothing
fires; predicted probabilities are clamped to [EPS, 1 - EPS] so that the
weighted log-likelihood stays finite.

Search per event: exhaustive scoring of all single rules, greedy forward
selection after that, and (below a configurable candidate count) an exhaustive
sweep over all two-rule hypotheses so that small instances are solved exactly.
All tie-breaks are total (lower cost, then lexicographic rule text), which
makes results independent of example order and worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .logic import (
    Atom,
    BodyLiteral,
    Comparison,
    FactSet,
    LogicError,
    NafLiteral,
    Rule,
    Wcdpi,
    body_satisfied,
    evaluate,
    format_rule,
    index_facts,
    parse_program,
)
from .space import (
    CandidateBudgetExceeded,
    DEFAULT_CANDIDATE_BUDGET,
    ModeBias,
    ScoredRule,
    _bodies,
    _numeric_choices,
    cost as rule_cost,
    make_scored,
    violates,
)

#: Probability floor for contexts where no rule fires; also the clamp margin.
EPS = 0.05

#: Penalty value that maps to weight 1.0.
BASE_PENALTY = 100.0


class SolverError(LogicError):
    pass


def clamp_probability(p: float) -> float:
    return min(max(p, EPS), 1.0 - EPS)


@dataclass(frozen=True)
class SearchBudget:
    """Knobs bounding the per-event search."""

    max_rules_per_event: int = 4
    max_body_len: int = 3
    candidate_budget: int = DEFAULT_CANDIDATE_BUDGET
    pair_exhaustive_cap: int = 512

    def __post_init__(self) -> None:
        if self.max_rules_per_event < 1:
            raise SolverError("max_rules_per_event must be >= 1")
        if self.max_body_len < 1:
            raise SolverError("max_body_len must be >= 1")


@dataclass(frozen=True)
class RuleLearningTask:
    """Background program, mode bias and weighted examples."""

    background: tuple[Rule, ...]
    bias: ModeBias
    positives: tuple[Wcdpi, ...]
    negatives: tuple[Wcdpi, ...] = ()

    def __post_init__(self) -> None:
        head_preds = {a.pred for a in self.bias.heads}
        for e in self.positives:
            if len(e.pi.inc) != 1:
                raise SolverError(f"positive example {e.example_id} must have a singleton inclusion")
            (inc,) = e.pi.inc
            if inc.pred not in head_preds:
                raise SolverError(f"inclusion {inc} of {e.example_id} is not a declared event predicate")

    @property
    def examples(self) -> tuple[Wcdpi, ...]:
        return self.positives + self.negatives


@dataclass(frozen=True)
class PosteriorScore:
    log_likelihood: float
    log_prior_odds: float

    @property
    def total(self) -> float:
        return self.log_likelihood + self.log_prior_odds


@dataclass(frozen=True)
class Hypothesis:
    """A set of probability-annotated rules, grouped by event head."""

    rules: tuple[ScoredRule, ...]

    def __post_init__(self) -> None:
        seen = set()
        for r in self.rules:
            key = (r.rule.head, r.rule.body, r.phi)
            if key in seen:
                raise SolverError(f"duplicate rule in hypothesis: {r.text}")
            seen.add(key)

    @property
    def per_event_index(self) -> dict[Atom, tuple[ScoredRule, ...]]:
        index: dict[Atom, list[ScoredRule]] = {}
        for r in self.rules:
            index.setdefault(r.rule.head, []).append(r)
        return {ev: tuple(rs) for ev, rs in index.items()}

    def rules_for(self, event: Atom) -> tuple[ScoredRule, ...]:
        return tuple(r for r in self.rules if r.rule.head == event)


EMPTY_HYPOTHESIS = Hypothesis(())


# ---------------------------------------------------------------------------
# Prediction
# ---------------------------------------------------------------------------

def predicted_probability(
    h: Hypothesis,
    background: Sequence[Rule],
    ctx_facts: FactSet,
    event: Atom,
    ctx_rules: Sequence[Rule] = (),
) -> float:
    """Largest grid probability whose rule body holds in the evaluated context,
    or the EPS floor when no rule for the event fires."""
    model = evaluate(tuple(background) + tuple(ctx_rules), ctx_facts)
    index = index_facts(model)
    best = 0.0
    for r in h.rules_for(event):
        if r.phi > best and body_satisfied(r.rule.body, model, index):
            best = r.phi
    return best if best > 0.0 else EPS


def predict(
    h: Hypothesis,
    background: Sequence[Rule],
    ctx_facts: FactSet,
    events: Sequence[Atom] | None = None,
    ctx_rules: Sequence[Rule] = (),
) -> dict[Atom, float]:
    """Predicted probability for every declared event under one context."""
    if events is None:
        events = tuple(h.per_event_index)
    model = evaluate(tuple(background) + tuple(ctx_rules), ctx_facts)
    index = index_facts(model)
    out: dict[Atom, float] = {}
    for ev in events:
        best = 0.0
        for r in h.rules_for(ev):
            if r.phi > best and body_satisfied(r.rule.body, model, index):
                best = r.phi
        out[ev] = best if best > 0.0 else EPS
    return out


def example_weight(e: Wcdpi) -> float:
    return e.penalty / BASE_PENALTY


def _event_observations(task: RuleLearningTask, event: Atom) -> list[tuple[Wcdpi, bool]]:
    """(example, is_positive) pairs relevant to an event: inclusions of positive
    examples assert the event, exclusions (and negative-set inclusions) deny it."""
    obs: list[tuple[Wcdpi, bool]] = []
    for e in task.positives:
        if event in e.pi.inc:
            obs.append((e, True))
        elif event in e.pi.exc:
            obs.append((e, False))
    for e in task.negatives:
        if event in e.pi.inc:
            obs.append((e, False))
    return obs


def log_posterior(h: Hypothesis, task: RuleLearningTask, event: Atom) -> PosteriorScore:
    """Weighted Bernoulli log-likelihood of the event observations plus the
    log prior odds of the selected rules."""
    ll = 0.0
    for e, is_pos in _event_observations(task, event):
        p = clamp_probability(
            predicted_probability(h, task.background, e.ctx_facts, event, e.ctx_rules)
        )
        ll += example_weight(e) * (math.log(p) if is_pos else math.log1p(-p))
    odds = sum(math.log(r.prior) - math.log1p(-r.prior) for r in h.rules_for(event))
    return PosteriorScore(log_likelihood=ll, log_prior_odds=odds)


# ---------------------------------------------------------------------------
# Candidate machinery
# ---------------------------------------------------------------------------

def _condition_groups(body: tuple[BodyLiteral, ...]):
    """Split a body into independently evaluable literal groups, or None when
    variables are shared across atoms (forces the slow whole-body path)."""
    by_var: dict = {}
    for lit in body:
        if isinstance(lit, Comparison):
            by_var.setdefault(lit.var, []).append(lit)
    groups = []
    seen_vars: set = set()
    for lit in body:
        if isinstance(lit, Atom):
            vs = lit.variables()
            if vs & seen_vars:
                return None
            seen_vars |= vs
            comps = tuple(c for v in sorted(vs, key=lambda v: v.name) for c in by_var.get(v, ()))
            groups.append((lit, *comps))
        elif isinstance(lit, NafLiteral):
            if lit.atom.variables():
                return None
            groups.append((lit,))
    return tuple(groups)


class _TaskMatrix:
    """Shared per-task state: candidate bodies, fire matrix, example weights."""

    def __init__(self, task: RuleLearningTask, budget: SearchBudget) -> None:
        bias = task.bias
        max_len = bias.max_body_length(budget.max_body_len)

        slots: list[tuple[str, object]] = [("nominal", a) for a in bias.nominal_body]
        option_counts: dict[str, int] = {a.pred: 1 for a in bias.nominal_body}
        for spec in bias.numeric_vars:
            choices = _numeric_choices(spec)
            slots.append(("numeric", (spec, choices)))
            option_counts[spec.predicate] = len(choices)
        dominant = max(option_counts, key=lambda p: option_counts[p]) if option_counts else "(none)"

        probe_head = bias.heads[0] if bias.heads else Atom("_ev")
        bodies: list[tuple[BodyLiteral, ...]] = []
        cap = budget.candidate_budget
        per_body_cost = len(bias.phi)  # events are solved independently
        for body in _bodies(slots, max_len):
            if violates(Rule(probe_head, body), bias.constraints):
                continue
            bodies.append(body)
            if len(bodies) * per_body_cost > cap:
                raise CandidateBudgetExceeded(
                    f"candidate budget {cap} exceeded; dominating schema: {dominant} "
                    f"({option_counts.get(dominant, 0)} comparison patterns)"
                )

        examples = task.examples
        self.n_examples = len(examples)
        self.weights = np.array([example_weight(e) for e in examples])

        models = []
        for e in examples:
            model = evaluate(tuple(task.background) + e.ctx_rules, e.ctx_facts)
            models.append((model, index_facts(model)))

        cond_rows: dict = {}

        def row_for(group) -> np.ndarray:
            row = cond_rows.get(group)
            if row is None:
                row = np.fromiter(
                    (body_satisfied(group, model, index) for model, index in models),
                    dtype=bool,
                    count=len(models),
                )
                cond_rows[group] = row
            return row

        keep_bodies: list[tuple[BodyLiteral, ...]] = []
        fire_rows: list[np.ndarray] = []
        for body in bodies:
            groups = _condition_groups(body)
            if groups is None:
                row = np.fromiter(
                    (body_satisfied(body, model, index) for model, index in models),
                    dtype=bool,
                    count=len(models),
                )
            else:
                row = np.ones(len(models), dtype=bool)
                for g in groups:
                    row = row & row_for(g)
            if not body or row.any():  # zero-fire bodies can never improve the posterior
                keep_bodies.append(body)
                fire_rows.append(row)

        self.bodies = keep_bodies
        self.fires = (
            np.vstack(fire_rows) if fire_rows else np.zeros((0, len(models)), dtype=bool)
        )
        self.body_costs = np.array([rule_cost(Rule(probe_head, b)) for b in keep_bodies], dtype=int)
        priors = 0.5 ** self.body_costs.astype(float)
        self.body_odds = np.log(priors) - np.log1p(-priors)
        self.pos_masks: dict[Atom, np.ndarray] = {}
        self.neg_masks: dict[Atom, np.ndarray] = {}
        n_pos = len(task.positives)
        for ev in bias.heads:
            pos = np.zeros(len(examples), dtype=bool)
            neg = np.zeros(len(examples), dtype=bool)
            for i, e in enumerate(examples):
                if i < n_pos and ev in e.pi.inc:
                    pos[i] = True
                elif (i < n_pos and ev in e.pi.exc) or (i >= n_pos and ev in e.pi.inc):
                    neg[i] = True
            self.pos_masks[ev] = pos
            self.neg_masks[ev] = neg

        phis = tuple(sorted(bias.phi))
        self.phis = phis
        self.levels = sorted({EPS} | {clamp_probability(p) for p in phis})
        self.level_of_phi = [self.levels.index(clamp_probability(p)) for p in phis]
        L, P = len(self.levels), len(phis)
        lv = np.array(self.levels)
        self.gain_pos = np.zeros((L, P))
        self.gain_neg = np.zeros((L, P))
        for j, p in enumerate(phis):
            pc = clamp_probability(p)
            higher = lv < pc
            self.gain_pos[higher, j] = math.log(pc) - np.log(lv[higher])
            self.gain_neg[higher, j] = math.log1p(-pc) - np.log1p(-lv[higher])


@lru_cache(maxsize=1)
def _task_matrix(task: RuleLearningTask, budget: SearchBudget) -> _TaskMatrix:
    return _TaskMatrix(task, budget)


# ---------------------------------------------------------------------------
# Per-event search
# ---------------------------------------------------------------------------

def _candidate_rank(tm: _TaskMatrix, event: Atom, b: int, j: int) -> tuple[int, str]:
    # lower cost first, then lexicographic printed rule text
    return (int(tm.body_costs[b]), format_rule(Rule(event, tm.bodies[b]), tm.phis[j]))


def _weighted_fire_counts(fires: np.ndarray, wvec: np.ndarray) -> np.ndarray:
    """``fires @ wvec`` in float64 without materialising a full float copy."""
    out = np.empty(fires.shape[0])
    step = 4096
    for i in range(0, fires.shape[0], step):
        out[i : i + step] = fires[i : i + step].astype(np.float64) @ wvec
    return out


def _ll_of_levels(levels_idx: np.ndarray, tm: _TaskMatrix, w_pos: np.ndarray, w_neg: np.ndarray) -> float:
    lv = np.array(tm.levels)[levels_idx]
    return float(w_pos @ np.log(lv) + w_neg @ np.log1p(-lv))


def solve_event(task: RuleLearningTask, event: Atom, budget: SearchBudget = SearchBudget()) -> tuple[ScoredRule, ...]:
    """Best-scoring rule set found for one event.

    Exhaustive over single rules, then greedy forward selection while the
    posterior improves; on instances with few candidates an exhaustive sweep
    over all two-rule hypotheses guards the greedy result.
    """
    if event not in task.bias.heads:
        raise SolverError(f"{event} is not a declared event")
    tm = _task_matrix(task, budget)
    n_bodies = len(tm.bodies)
    if n_bodies == 0:
        return ()

    w = tm.weights
    w_pos = w * tm.pos_masks[event]
    w_neg = w * tm.neg_masks[event]
    L = len(tm.levels)
    P = len(tm.phis)

    selected: list[tuple[int, int]] = []  # (body index, phi index)
    levels_idx = np.zeros(tm.n_examples, dtype=int)
    cur_ll = _ll_of_levels(levels_idx, tm, w_pos, w_neg)
    cur_odds = 0.0

    # per-body weighted fire counts, bucketed by each example's current level;
    # updated incrementally as greedy additions raise example levels
    pc = np.zeros((n_bodies, L))
    nc = np.zeros((n_bodies, L))
    pc[:, 0] = _weighted_fire_counts(tm.fires, w_pos)
    nc[:, 0] = _weighted_fire_counts(tm.fires, w_neg)

    while len(selected) < budget.max_rules_per_event:
        gains = pc @ tm.gain_pos + nc @ tm.gain_neg + tm.body_odds[:, None]
        for b, j in selected:
            gains[b, j] = -np.inf
        best_gain = float(gains.max())
        if not (best_gain > 1e-12):
            break
        tied = np.argwhere(gains == best_gain)
        b, j = min(((int(bb), int(jj)) for bb, jj in tied), key=lambda bj: _candidate_rank(tm, event, *bj))
        selected.append((b, j))
        cur_ll += float(gains[b, j]) - float(tm.body_odds[b])
        cur_odds += float(tm.body_odds[b])
        new_lvl = tm.level_of_phi[j]
        moved = tm.fires[b] & (levels_idx < new_lvl)
        if moved.any():
            for old_lvl in np.unique(levels_idx[moved]):
                sel = moved & (levels_idx == old_lvl)
                wp = w_pos * sel
                wn = w_neg * sel
                if wp.any():
                    delta = _weighted_fire_counts(tm.fires, wp)
                    pc[:, old_lvl] -= delta
                    pc[:, new_lvl] += delta
                if wn.any():
                    delta = _weighted_fire_counts(tm.fires, wn)
                    nc[:, old_lvl] -= delta
                    nc[:, new_lvl] += delta
            levels_idx[moved] = new_lvl

    best_set = list(selected)
    best_score = cur_ll + cur_odds
    empty_score = _ll_of_levels(np.zeros(tm.n_examples, dtype=int), tm, w_pos, w_neg)
    if empty_score > best_score:
        best_set, best_score = [], empty_score

    if 0 < n_bodies * P <= budget.pair_exhaustive_cap:
        best_set, best_score = _exhaustive_small(tm, w_pos, w_neg, best_set, best_score)

    ordered = sorted(best_set, key=lambda bj: _candidate_rank(tm, event, *bj))
    return tuple(
        make_scored(Rule(event, tm.bodies[b]), tm.phis[j]) for b, j in ordered
    )


def _exhaustive_small(tm, w_pos, w_neg, best_set, best_score):
    """Sweep all <= 2-rule hypotheses exactly; keep the incumbent unless beaten."""
    eps_row = np.full(tm.n_examples, EPS)
    singles = []
    for b in range(len(tm.bodies)):
        for j, p in enumerate(tm.phis):
            pe = np.where(tm.fires[b], clamp_probability(p), EPS)
            singles.append(((b, j), pe))
    empty_ll = float(w_pos @ np.log(eps_row) + w_neg @ np.log1p(-eps_row))

    def score_of(pe, odds):
        return float(w_pos @ np.log(pe) + w_neg @ np.log1p(-pe)) + odds

    for (bj, pe) in singles:
        s = score_of(pe, float(tm.body_odds[bj[0]]))
        if s > best_score + 1e-12:
            best_set, best_score = [bj], s
    for i in range(len(singles)):
        (bi, pi_row) = singles[i]
        for k in range(i + 1, len(singles)):
            (bk, pk_row) = singles[k]
            pe = np.maximum(pi_row, pk_row)
            s = score_of(pe, float(tm.body_odds[bi[0]] + tm.body_odds[bk[0]]))
            if s > best_score + 1e-12:
                best_set, best_score = [bi, bk], s
    if empty_ll > best_score + 1e-12:
        best_set, best_score = [], empty_ll
    return best_set, best_score


def solve(task: RuleLearningTask, budget: SearchBudget = SearchBudget(), workers: int = 1) -> Hypothesis:
    """Union of per-event solutions over every declared event."""
    events = task.bias.heads
    if workers > 1 and len(events) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            fragments = list(pool.map(lambda ev: solve_event(task, ev, budget), events))
    else:
        fragments = [solve_event(task, ev, budget) for ev in events]
    rules: list[ScoredRule] = []
    for frag in fragments:
        rules.extend(frag)
    return Hypothesis(tuple(rules))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def hypothesis_to_text(h: Hypothesis) -> str:
    if not h.rules:
        return "% empty hypothesis\n"
    return "\n".join(r.text for r in h.rules) + "\n"


def hypothesis_from_text(text: str) -> Hypothesis:
    rules = []
    for phi, rule in parse_program(text):
        rules.append(make_scored(rule, 1.0 if phi is None else phi))
    return Hypothesis(tuple(rules))


def score_report(h: Hypothesis, task: RuleLearningTask) -> str:
    """Key-value report with the per-event log-posterior decomposition."""
    lines = [f"rules: {len(h.rules)}"]
    total = 0.0
    for ev in task.bias.heads:
        s = log_posterior(h, task, ev)
        total += s.total
        lines.append(
            f"event {ev}: rules={len(h.rules_for(ev))} "
            f"log_likelihood={s.log_likelihood:.6f} log_prior_odds={s.log_prior_odds:.6f} "
            f"total={s.total:.6f}"
        )
    lines.append(f"total_log_posterior: {total:.6f}")
    return "\n".join(lines) + "\n"


def task_to_las(task: RuleLearningTask) -> str:
    """Human-inspectable dump of a task in an ASP-like LAS syntax."""
    lines = []
    for r in task.background:
        lines.append(str(r))
    for a in task.bias.heads:
        lines.append(f"#modeh({a}).")
    for a in task.bias.nominal_body:
        lines.append(f"#modeb({a}).")
    for s in task.bias.numeric_vars:
        lines.append(f"#modeb(num, {s.predicate}, {s.lo}, {s.hi}, {s.multiplier:g}).")
    lines.append("#phi(" + ", ".join(f"{p:g}" for p in task.bias.phi) + ").")
    for kind, examples in (("pos", task.positives), ("neg", task.negatives)):
        for e in examples:
            inc = ", ".join(sorted(str(a) for a in e.pi.inc))
            exc = ", ".join(sorted(str(a) for a in e.pi.exc))
            ctx = " ".join(sorted(str(a) + "." for a in e.ctx_facts) + [str(r) for r in e.ctx_rules])
            lines.append(f"#{kind}({e.example_id}@{e.penalty}, {{{inc}}}, {{{exc}}}, {{{ctx}}}).")
    return "\n".join(lines) + "\n"
