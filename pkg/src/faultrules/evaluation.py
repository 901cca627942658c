"""Train/validate splitting, one-vs-rest ROC/AUC and learning-parameter sweeps.

AUC is computed as the Mann-Whitney pair statistic with half credit for ties,
which equals the trapezoidal area under the tie-grouped ROC curve.  Metrics
aggregate one-vs-rest AUCs over the failure classes (the nominal class is
listed but excluded from the min/avg aggregates, matching the reading of the
headline numbers as averages over the selected failures).

``run_pipeline`` wires campaign generation, task construction, solving and
evaluation behind one deterministic entry point shared by the CLI and the
sweep driver; datasets are cached per (experiments, runs, mode, seed) so that
sweeping a task-level parameter reuses identical data.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .campaign import (
    DEFAULT_TIMEPOINTS,
    Dataset,
    NULL_LABEL,
    derive_seed,
    run_campaign,
    select_experiments,
)
from .logic import Atom, Wcdpi
from .solver import Hypothesis, RuleLearningTask, predict, solve
from .taskbuild import LearningParams, build_task, failure_atom

NULL_ATOM = failure_atom(NULL_LABEL)


class EvaluationError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Splitting
# ---------------------------------------------------------------------------

def split(
    examples: Sequence[Wcdpi], fraction: float, seed: int
) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Stratified train/validate split over example indices.

    Stratification is by the example's inclusion atom; each class is shuffled
    with its own derived seed, so the split is invariant to example order
    across classes.
    """
    if not (0.0 < fraction < 1.0):
        raise EvaluationError("fraction must lie in (0, 1)")
    by_class: dict[str, list[int]] = {}
    for i, e in enumerate(examples):
        (inc,) = e.pi.inc
        by_class.setdefault(str(inc), []).append(i)
    train: list[int] = []
    validate: list[int] = []
    for label in sorted(by_class):
        idx = sorted(by_class[label], key=lambda i: examples[i].example_id)
        if len(idx) < 2:
            raise EvaluationError(f"class {label} has fewer than 2 examples")
        rng = np.random.default_rng(derive_seed(seed, f"split:{label}", 0))
        order = rng.permutation(len(idx))
        k_val = int(round(fraction * len(idx)))
        k_val = min(max(k_val, 1), len(idx) - 1)
        chosen = [idx[i] for i in order]
        validate.extend(chosen[:k_val])
        train.extend(chosen[k_val:])
    return tuple(sorted(train)), tuple(sorted(validate))


def split_index_text(examples: Sequence[Wcdpi], train: Sequence[int], validate: Sequence[int]) -> str:
    """The exported split-index file: ``example_id,fold`` per line."""
    fold = {}
    for i in train:
        fold[i] = "train"
    for i in validate:
        fold[i] = "validate"
    lines = ["example_id,fold"]
    for i in range(len(examples)):
        lines.append(f"{examples[i].example_id},{fold[i]}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# ROC / AUC
# ---------------------------------------------------------------------------

def roc_auc(scores: Sequence[tuple[float, bool]]) -> tuple[list[tuple[float, float]], float]:
    """ROC points at every distinct threshold plus the tie-aware AUC."""
    pos = sum(1 for _, y in scores if y)
    neg = len(scores) - pos
    if pos == 0 or neg == 0:
        raise EvaluationError("ROC needs at least one positive and one negative")
    ordered = sorted(scores, key=lambda sy: -sy[0])
    points = [(0.0, 0.0)]
    tp = fp = 0
    area = 0.0
    i = 0
    while i < len(ordered):
        j = i
        d_tp = d_fp = 0
        while j < len(ordered) and ordered[j][0] == ordered[i][0]:
            if ordered[j][1]:
                d_tp += 1
            else:
                d_fp += 1
            j += 1
        # trapezoid over the tie block gives half credit to tied pairs
        area += (d_fp / neg) * (tp / pos + (d_tp / pos) / 2.0)
        tp += d_tp
        fp += d_fp
        points.append((fp / neg, tp / pos))
        i = j
    return points, area


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PredictionMatrix:
    events: tuple[Atom, ...]
    rows: tuple[tuple[float, ...], ...]
    true_labels: tuple[Atom, ...]

    def __post_init__(self) -> None:
        for row in self.rows:
            if len(row) != len(self.events) or any(not (0.0 <= p <= 1.0) for p in row):
                raise EvaluationError("prediction rows must hold one probability per event")

    def column(self, event: Atom) -> tuple[float, ...]:
        i = self.events.index(event)
        return tuple(r[i] for r in self.rows)


@dataclass(frozen=True)
class ClassMetrics:
    event: Atom
    auc: float
    n_pos: int
    n_neg: int
    roc: tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class MetricsReport:
    min_auc: float
    avg_auc: float
    avg_body_len: float
    avg_rules_per_class: float
    avg_rule_prob: float
    per_class: tuple[ClassMetrics, ...]
    n_rules: int
    n_validate: int

    def __post_init__(self) -> None:
        if self.min_auc > self.avg_auc + 1e-12:
            raise EvaluationError("min AUC cannot exceed the average")

    def to_text(self) -> str:
        head = (
            f"min(auc)={self.min_auc:.4f} avg(auc)={self.avg_auc:.4f} "
            f"avg(n_body)={self.avg_body_len:.2f} avg(n_r|cl)={self.avg_rules_per_class:.2f} "
            f"avg(prob)={self.avg_rule_prob:.2f} rules={self.n_rules} validate={self.n_validate}"
        )
        lines = [head]
        for cm in self.per_class:
            lines.append(f"  {str(cm.event):52s} auc={cm.auc:.4f} pos={cm.n_pos} neg={cm.n_neg}")
        return "\n".join(lines) + "\n"


def build_prediction_matrix(
    h: Hypothesis, task: RuleLearningTask, examples: Sequence[Wcdpi]
) -> PredictionMatrix:
    events = task.bias.heads
    rows = []
    labels = []
    for e in examples:
        probs = predict(h, task.background, e.ctx_facts, events=events, ctx_rules=e.ctx_rules)
        rows.append(tuple(probs[ev] for ev in events))
        (inc,) = e.pi.inc
        labels.append(inc)
    return PredictionMatrix(tuple(events), tuple(rows), tuple(labels))


def evaluate_hypothesis(
    h: Hypothesis, task: RuleLearningTask, validate: Sequence[Wcdpi]
) -> MetricsReport:
    """One-vs-rest metrics of a hypothesis on held-out examples."""
    if not validate:
        raise EvaluationError("validate set is empty")
    matrix = build_prediction_matrix(h, task, validate)
    per_class: list[ClassMetrics] = []
    for ev in matrix.events:
        scores: list[tuple[float, bool]] = []
        for e, row in zip(validate, matrix.rows):
            if ev in e.pi.inc:
                scores.append((row[matrix.events.index(ev)], True))
            elif ev in e.pi.exc:
                scores.append((row[matrix.events.index(ev)], False))
        n_pos = sum(1 for _, y in scores if y)
        n_neg = len(scores) - n_pos
        if n_pos == 0 or n_neg == 0:
            continue
        roc, auc = roc_auc(scores)
        per_class.append(ClassMetrics(ev, auc, n_pos, n_neg, tuple(roc)))
    scored = [cm for cm in per_class if cm.event != NULL_ATOM]
    if not scored:
        raise EvaluationError("no scorable failure classes in the validate set")
    aucs = [cm.auc for cm in scored]
    rules = h.rules
    classes_with_rules = {r.rule.head for r in rules}
    return MetricsReport(
        min_auc=min(aucs),
        avg_auc=sum(aucs) / len(aucs),
        avg_body_len=(sum(len(r.rule.body) for r in rules) / len(rules)) if rules else 0.0,
        avg_rules_per_class=(len(rules) / len(classes_with_rules)) if classes_with_rules else 0.0,
        avg_rule_prob=(sum(r.phi for r in rules) / len(rules)) if rules else 0.0,
        per_class=tuple(per_class),
        n_rules=len(rules),
        n_validate=len(validate),
    )


def roc_points_csv(report: MetricsReport) -> str:
    lines = ["event,fpr,tpr"]
    for cm in report.per_class:
        for fpr, tpr in cm.roc:
            lines.append(f"{cm.event},{fpr:.6f},{tpr:.6f}")
    return "\n".join(lines) + "\n"


def report_csv_row(label: str, report: MetricsReport) -> str:
    return (
        f"{label},{report.min_auc:.4f},{report.avg_auc:.4f},"
        f"{report.avg_body_len:.4f},{report.avg_rules_per_class:.4f},{report.avg_rule_prob:.4f}"
    )


REPORT_CSV_HEADER = "config,min_auc,avg_auc,avg_body_len,avg_rules_per_class,avg_rule_prob"


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PipelineResult:
    params: LearningParams
    dataset: Dataset
    task: RuleLearningTask
    train_idx: tuple[int, ...]
    validate_idx: tuple[int, ...]
    hypothesis: Hypothesis
    report: MetricsReport

    @property
    def train_examples(self) -> tuple[Wcdpi, ...]:
        return tuple(self.task.positives[i] for i in self.train_idx)

    @property
    def validate_examples(self) -> tuple[Wcdpi, ...]:
        return tuple(self.task.positives[i] for i in self.validate_idx)


@lru_cache(maxsize=8)
def _campaign_cached(experiments: str, n_runs: int, mode: str, master_seed: int, timepoints: tuple) -> Dataset:
    exps = select_experiments(experiments)
    return run_campaign(exps, n_runs, mode, timepoints, master_seed=master_seed, workers=4)


def generate_dataset(params: LearningParams, master_seed: int) -> Dataset:
    mode = "static" if params.task == "static" else "dynamic"
    timepoints = DEFAULT_TIMEPOINTS if mode == "dynamic" else ()
    return _campaign_cached(params.experiments, params.n_runs, mode, master_seed, tuple(timepoints))


def run_pipeline(
    params: LearningParams,
    master_seed: int,
    workers: int = 1,
    dataset: Dataset | None = None,
) -> PipelineResult:
    """Data generation, task construction, learning and held-out evaluation."""
    if dataset is None:
        dataset = generate_dataset(params, master_seed)
    task = build_task(dataset, params)
    train_idx, validate_idx = split(task.positives, params.validation_fraction, master_seed)
    train_task = RuleLearningTask(
        background=task.background,
        bias=task.bias,
        positives=tuple(task.positives[i] for i in train_idx),
        negatives=task.negatives,
    )
    hypothesis = solve(train_task, params.budget(), workers=workers)
    report = evaluate_hypothesis(
        hypothesis, task, tuple(task.positives[i] for i in validate_idx)
    )
    return PipelineResult(params, dataset, task, train_idx, validate_idx, hypothesis, report)


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

_AXIS_ALIASES = {"exp": "experiments", "short_term": "t_short_term", "n_runs": "n_runs"}


def _with_axis(params: LearningParams, axis: str, value) -> LearningParams:
    import dataclasses as dc

    field = _AXIS_ALIASES.get(axis, axis)
    if field not in {f.name for f in dc.fields(LearningParams)}:
        raise EvaluationError(f"unknown sweep axis {axis!r}")
    kind = type(getattr(params, field))
    return dc.replace(params, **{field: kind(value)})


@dataclass(frozen=True)
class SweepRow:
    axis: str
    value: str
    report: MetricsReport | None
    error: str | None = None


def sweep(
    params: LearningParams, axis: str, values: Sequence, master_seed: int, workers: int = 1
) -> list[SweepRow]:
    """One full pipeline execution per axis value under a shared master seed;
    failures are recorded per row and the sweep continues."""
    import dataclasses as dc

    field = _AXIS_ALIASES.get(axis, axis)
    if field not in {f.name for f in dc.fields(LearningParams)}:
        raise EvaluationError(f"unknown sweep axis {axis!r}")
    rows: list[SweepRow] = []
    for value in values:
        try:
            result = run_pipeline(_with_axis(params, axis, value), master_seed, workers)
            rows.append(SweepRow(axis, str(value), result.report))
        except Exception as exc:  # noqa: BLE001 - per-row isolation is the contract
            rows.append(SweepRow(axis, str(value), None, error=str(exc)))
    return rows


def table2_axes(params: LearningParams) -> list[tuple[str, LearningParams]]:
    """The 16-row sweep layout: experiment set, run count, short-term instant
    and process-variable selection, varied one at a time around the defaults."""
    import dataclasses as dc

    rows: list[tuple[str, LearningParams]] = []
    for exp in ("trivial", "nontrivial6", "nontrivial10"):
        rows.append((f"exp={exp}", dc.replace(params, experiments=exp)))
    rows.append(("exp=nontrivial10;n_runs=125", dc.replace(params, experiments="nontrivial10", n_runs=125)))
    for n in (10, 25, 75, 125):
        rows.append((f"n_runs={n}", dc.replace(params, n_runs=n)))
    for t in (2.0, 4.0, 6.0, 10.0, 20.0):
        rows.append((f"short_term={t:g}", dc.replace(params, t_short_term=t)))
    for pv in ("all", "real_world", "m1_m2"):
        rows.append((f"proc_vars={pv}", dc.replace(params, proc_vars=pv)))
    return rows


def sweep_table(rows: Iterable[SweepRow]) -> str:
    lines = [f"{'config':34s} {'min(auc)':>9s} {'avg(auc)':>9s} {'n_body':>7s} {'n_r|cl':>7s} {'prob':>6s}"]
    for row in rows:
        label = f"{row.axis}={row.value}"
        if row.report is None:
            lines.append(f"{label:34s} error: {row.error}")
        else:
            r = row.report
            lines.append(
                f"{label:34s} {r.min_auc:9.4f} {r.avg_auc:9.4f} "
                f"{r.avg_body_len:7.2f} {r.avg_rules_per_class:7.2f} {r.avg_rule_prob:6.2f}"
            )
    return "\n".join(lines) + "\n"
