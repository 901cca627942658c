"""Build learning tasks from campaign datasets.

Two encodings are supported.  The static task predicts, per run and per
"reference" process variable, which discretized bucket that variable falls
into, given the injected failure atom and the scaled values of every variable
upstream of it.  The dynamic task predicts the failure label of a run from
the short-term snapshot: each selected variable contributes its scaled value
at ``t_short_term`` plus exactly one change atom -- ``<var>_up(|delta|)``,
``<var>_down(|delta|)`` or ``unchanged(<var>)`` -- where "unchanged" means
the variable stayed in its bucket between t = 0 and the short-term instant.

Buckets are 2k+1 ordered bands around each variable's nominal value, with
per-type boundaries (relative bands for pressures, flows, fractions and the
like; absolute Kelvin offsets for temperatures).  Numeric context values are
scaled integers: raw value times a power-of-10 multiplier chosen from the
data so that magnitudes land at 10 or above.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

from .campaign import Dataset, NULL_LABEL
from .flowsheet import MONITORED_VARS, SteadyState, default_config, solve_static
from .logic import Atom, PartialInterpretation, Wcdpi
from .solver import RuleLearningTask, SearchBudget
from .space import (
    DEFAULT_PHI,
    ForbidAllNominalBody,
    ForbidPredicatePair,
    MaxBodyLength,
    ModeBias,
    NumericVarSpec,
    threshold_candidates,
)


class TaskBuildError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Variable typing and flow-path order
# ---------------------------------------------------------------------------

VAR_TYPES: dict[str, str] = {
    "srcr1_p": "pressure", "k1_p1": "pressure", "k1_p2": "pressure", "snk1_p": "pressure",
    "srcr1_t": "temperature", "m1_pv": "temperature", "e2_tsi": "temperature",
    "e2_tti": "temperature", "r1_t2": "temperature", "snk1_t": "temperature",
    "e2_tso": "temperature", "xc1_sp": "temperature",
    "m2_pv": "flow", "fc1_sp": "flow",
    "r1_xmax": "fraction", "snk1_z_c2h4o": "fraction", "fc1_op": "fraction",
    "xc1_op": "fraction", "cw1_op": "fraction", "r1_zin_c2h4": "fraction",
    "r1_zout_o2": "fraction",
    "r1_tau": "time",
    "k1_power": "power", "e2_duty": "power",
    "srcr1_m": "inventory",
}

#: Flow-path stage of each variable's component (used for the upstream order).
_STAGE = {
    "srcr1_p": 0, "srcr1_t": 0, "srcr1_m": 0,
    "m2_pv": 1, "fc1_op": 1, "fc1_sp": 1,
    "k1_p1": 2, "k1_p2": 2, "k1_power": 2,
    "e2_tti": 3, "e2_tsi": 3, "e2_tso": 3, "e2_duty": 3, "m1_pv": 3, "xc1_op": 3, "xc1_sp": 3, "cw1_op": 3,
    "r1_t2": 4, "r1_tau": 4, "r1_xmax": 4, "r1_zin_c2h4": 4, "r1_zout_o2": 4,
    "snk1_p": 5, "snk1_t": 5, "snk1_z_c2h4o": 5,
}

#: The "real-world" sensor subset (pressures, temperatures, flow).
REAL_WORLD_VARS = (
    "srcr1_p", "srcr1_t", "m2_pv", "k1_p1", "k1_p2",
    "m1_pv", "e2_tsi", "e2_tti", "r1_t2", "snk1_p", "snk1_t",
)

M1_M2_VARS = ("m1_pv", "m2_pv")

PROC_VAR_SETS = {"all": MONITORED_VARS, "real_world": REAL_WORLD_VARS, "m1_m2": M1_M2_VARS}


def upstream(var: str) -> tuple[str, ...]:
    """Monitored variables at strictly earlier flow-path stages."""
    if var not in _STAGE:
        raise TaskBuildError(f"unknown process variable {var!r}")
    stage = _STAGE[var]
    return tuple(v for v in MONITORED_VARS if _STAGE[v] < stage)


def reference_variables() -> tuple[str, ...]:
    """Variables with a nonempty upstream set (static-task prediction targets)."""
    return tuple(v for v in MONITORED_VARS if upstream(v))


@lru_cache(maxsize=1)
def nominal_values() -> dict[str, float]:
    out = solve_static(default_config())
    if not isinstance(out, SteadyState):
        raise TaskBuildError(f"nominal configuration unsolved: {out.reason}")
    return {v: getattr(out.state, v) for v in MONITORED_VARS}


# ---------------------------------------------------------------------------
# Buckets
# ---------------------------------------------------------------------------

#: Relative band edges (fractions of nominal) and temperature offsets (K).
_RATIO_BOUNDS = {1: (0.5, 1.5), 2: (0.5, 0.8, 1.2, 1.5)}
_TEMP_OFFSETS = {1: (-30.0, 30.0), 2: (-30.0, -10.0, 10.0, 30.0)}


def bucket_labels(k: int) -> tuple[str, ...]:
    if k == 0:
        return ("normal",)
    if k == 1:
        return ("low", "normal", "high")
    lows = [f"low{i}" for i in range(k, 0, -1)]
    highs = [f"high{i}" for i in range(1, k + 1)]
    return (*lows, "normal", *highs)


@dataclass(frozen=True)
class BucketScheme:
    """2k+1 ordered buckets; boundaries are closed toward the normal bucket."""

    k: int = 2

    def __post_init__(self) -> None:
        if self.k not in (1, 2):
            raise TaskBuildError("bucket scheme supports k = 1 or 2")

    def boundaries(self, var: str, nominal: float) -> tuple[float, ...]:
        vtype = VAR_TYPES[var]
        if vtype == "temperature":
            return tuple(nominal + o for o in _TEMP_OFFSETS[self.k])
        if nominal <= 0:
            raise TaskBuildError(f"{var}: ratio-typed variable needs a positive nominal value")
        return tuple(nominal * f for f in _RATIO_BOUNDS[self.k])

    @property
    def labels(self) -> tuple[str, ...]:
        return bucket_labels(self.k)


def bucketize(value: float, var: str, scheme: BucketScheme, nominal: float) -> str:
    """The single bucket owning ``value``; boundaries belong to the bucket
    nearer normal."""
    if not math.isfinite(value):
        raise TaskBuildError(f"{var}: cannot bucketize non-finite value {value}")
    bounds = scheme.boundaries(var, nominal)
    labels = scheme.labels
    k = scheme.k
    # below-normal boundaries are owned by the bucket above them (nearer
    # normal), above-normal boundaries by the bucket below them
    for i, b in enumerate(bounds[:k]):
        if value < b:
            return labels[i]
    for i in range(k - 1, -1, -1):
        if value > bounds[k + i]:
            return labels[k + 1 + i]
    return "normal"


# ---------------------------------------------------------------------------
# Scaling
# ---------------------------------------------------------------------------

def choose_multiplier(values: Sequence[float]) -> float:
    """Smallest power of 10 that stretches the observed span to at least 10
    scaled units, clamped to [0.01, 1000]; constant columns fall back to 1
    with a warning.

    The span criterion keeps roughly ten distinguishable integer levels
    across the values a variable actually takes, however subtle the
    perturbations are.
    """
    finite = [v for v in values if math.isfinite(v)]
    if not finite:
        raise TaskBuildError("no finite values to scale")
    span = max(finite) - min(finite)
    if span == 0.0:
        warnings.warn("constant column; multiplier defaults to 1", stacklevel=2)
        return 1.0
    mult = 0.01
    while span * mult < 10.0 and mult < 1000.0:
        mult *= 10.0
    return mult


def scale_value(value: float, multiplier: float) -> int:
    """Scaled integer: value times multiplier, rounded half away from zero."""
    scaled = value * multiplier
    return int(math.floor(scaled + 0.5)) if scaled >= 0 else -int(math.floor(-scaled + 0.5))


def column_multiplier(dataset: Dataset, var: str) -> float:
    """The power-of-10 multiplier for one dataset column."""
    return choose_multiplier(dataset.values(var).tolist())


@dataclass(frozen=True)
class ScalingSpec:
    """Frozen variable-to-multiplier map for a dataset."""

    multipliers: tuple[tuple[str, float], ...]

    @classmethod
    def from_dataset(cls, dataset: Dataset, variables: Sequence[str]) -> "ScalingSpec":
        return cls(tuple((v, column_multiplier(dataset, v)) for v in variables))

    def multiplier(self, var: str) -> float:
        for name, m in self.multipliers:
            if name == var:
                return m
        raise TaskBuildError(f"no multiplier for {var!r}")


# ---------------------------------------------------------------------------
# Learning parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LearningParams:
    task: str = "dynamic"  # "static" | "dynamic"
    experiments: str = "nontrivial6"
    n_runs: int = 75
    t_short_term: float = 6.0
    proc_vars: str = "real_world"  # "all" | "real_world" | "m1_m2"
    validation_fraction: float = 0.2
    k: int = 2
    phi: tuple[float, ...] = DEFAULT_PHI
    max_body_len: int = 3
    max_rules_per_event: int = 4
    threshold_cap: int = 8

    def __post_init__(self) -> None:
        if self.task not in ("static", "dynamic"):
            raise TaskBuildError(f"unknown task {self.task!r}")
        if self.proc_vars not in PROC_VAR_SETS:
            raise TaskBuildError(f"proc_vars must be one of {sorted(PROC_VAR_SETS)}")
        if not (0.0 < self.validation_fraction < 1.0):
            raise TaskBuildError("validation_fraction must lie in (0, 1)")
        if self.n_runs < 1:
            raise TaskBuildError("n_runs must be >= 1")

    @property
    def selected_vars(self) -> tuple[str, ...]:
        return tuple(PROC_VAR_SETS[self.proc_vars])

    def budget(self) -> SearchBudget:
        return SearchBudget(
            max_rules_per_event=self.max_rules_per_event, max_body_len=self.max_body_len
        )


_PARAM_FIELDS = {
    "task": str,
    "experiments": str,
    "n_runs": int,
    "t_short_term": float,
    "proc_vars": str,
    "validation_fraction": float,
    "k": int,
    "max_body_len": int,
    "max_rules_per_event": int,
    "threshold_cap": int,
}


def parse_params_file(text: str) -> LearningParams:
    """``key = value`` lines; ``phi`` is a space-separated probability list."""
    kwargs: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key == "phi":
            kwargs["phi"] = tuple(float(x) for x in value.split())
        elif key in _PARAM_FIELDS:
            kwargs[key] = _PARAM_FIELDS[key](value)
        else:
            raise TaskBuildError(f"line {lineno}: unknown parameter {key!r}")
    return LearningParams(**kwargs)


def format_params(params: LearningParams) -> str:
    lines = [f"{name} = {getattr(params, name)}" for name in _PARAM_FIELDS]
    lines.append("phi = " + " ".join(f"{p:g}" for p in params.phi))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------

def failure_atom(label: str) -> Atom:
    if label == NULL_LABEL:
        return Atom("failure", (NULL_LABEL, NULL_LABEL))
    loc, _, kind = label.partition(":")
    if not kind:
        raise TaskBuildError(f"failure label {label!r} is not 'location:kind'")
    return Atom("failure", (loc, kind))


def _finite_row(row: Sequence, start: int) -> bool:
    return all(math.isfinite(v) for v in row[start:])


def _column_multipliers(rows: list[tuple], columns: tuple[str, ...], vars_needed: Iterable[str], start: int) -> dict[str, float]:
    out = {}
    for var in vars_needed:
        idx = columns.index(var)
        out[var] = choose_multiplier([r[idx] for r in rows])
    return out


def _numeric_spec(pred: str, scaled: Sequence[int], multiplier: float, cap: int) -> NumericVarSpec:
    values = sorted(scaled)
    return NumericVarSpec(
        predicate=pred,
        lo=values[0],
        hi=values[-1],
        multiplier=multiplier,
        thresholds=tuple(threshold_candidates(values, cap)),
    )


# ---------------------------------------------------------------------------
# Static task
# ---------------------------------------------------------------------------

def build_static_task(dataset: Dataset, params: LearningParams) -> RuleLearningTask:
    """One example per (solved run, reference variable): predict the reference
    variable's bucket from the failure atom plus scaled upstream values."""
    if dataset.mode != "static":
        raise TaskBuildError("build_static_task needs a static-schema dataset")
    scheme = BucketScheme(params.k)
    nominal = nominal_values()
    columns = dataset.columns
    rows = [r for r in dataset.rows if _finite_row(r, 2)]
    if not rows:
        raise TaskBuildError("dataset contains no solved runs")

    selected = set(params.selected_vars)
    refs = [v for v in reference_variables() if v in selected]
    if not refs:
        raise TaskBuildError("no reference variables in the selected set")
    failures = sorted({r[0] for r in dataset.rows})
    mults = _column_multipliers(rows, columns, selected, start=2)

    labels = scheme.labels
    heads = tuple(Atom(v, (b,)) for v in refs for b in labels)
    numeric_specs = []
    for var in sorted(selected):
        idx = columns.index(var)
        scaled = [scale_value(r[idx], mults[var]) for r in rows]
        numeric_specs.append(_numeric_spec(var, scaled, mults[var], params.threshold_cap))
    failure_atoms = tuple(failure_atom(f) for f in failures)
    bias = ModeBias(
        heads=heads,
        nominal_body=failure_atoms,
        numeric_vars=tuple(numeric_specs),
        constraints=(
            MaxBodyLength(params.max_body_len),
            ForbidAllNominalBody(nominal_atoms=frozenset({failure_atom(NULL_LABEL)})),
        ),
        phi=params.phi,
    )

    examples = []
    for row in rows:
        fail, run = row[0], row[1]
        f_atom = failure_atom(fail)
        for var in refs:
            value = row[columns.index(var)]
            bucket = bucketize(value, var, scheme, nominal[var])
            ctx = {f_atom}
            for up_var in upstream(var):
                if up_var not in selected:
                    continue
                ctx.add(Atom(up_var, (scale_value(row[columns.index(up_var)], mults[up_var]),)))
            examples.append(
                Wcdpi(
                    example_id=f"{fail}|r{run}|{var}",
                    penalty=100,
                    pi=PartialInterpretation(
                        inc=frozenset({Atom(var, (bucket,))}),
                        exc=frozenset(Atom(var, (b,)) for b in labels if b != bucket),
                    ),
                    ctx_facts=frozenset(ctx),
                )
            )
    return RuleLearningTask(background=(), bias=bias, positives=tuple(examples))


# ---------------------------------------------------------------------------
# Dynamic task
# ---------------------------------------------------------------------------

def build_dynamic_task(dataset: Dataset, params: LearningParams) -> RuleLearningTask:
    """One example per run: predict the failure atom from the short-term
    snapshot (scaled values plus per-variable change atoms)."""
    if dataset.mode != "dynamic":
        raise TaskBuildError("build_dynamic_task needs a dynamic-schema dataset")
    scheme = BucketScheme(params.k)
    nominal = nominal_values()
    columns = dataset.columns
    t_short = params.t_short_term

    available = sorted({r[2] for r in dataset.rows})
    if not any(abs(t - t_short) < 1e-9 for t in available):
        raise TaskBuildError(
            f"t_short_term={t_short:g} not recorded; available timepoints: "
            + ", ".join(f"{t:g}" for t in available)
        )

    by_run: dict[tuple[str, int], dict[float, tuple]] = {}
    for r in dataset.rows:
        by_run.setdefault((r[0], r[1]), {})[r[2]] = r

    selected = params.selected_vars
    failures = sorted({r[0] for r in dataset.rows})
    failure_atoms = {f: failure_atom(f) for f in failures}

    pairs = []  # (failure, run, row0, row_short)
    for (fail, run), per_t in sorted(by_run.items()):
        row0 = per_t.get(0.0)
        row_s = next((row for t, row in per_t.items() if abs(t - t_short) < 1e-9), None)
        if row0 is None or row_s is None:
            raise TaskBuildError(f"run {fail}:{run} lacks t=0 or t={t_short:g} rows")
        if _finite_row(row0, 3) and _finite_row(row_s, 3):
            pairs.append((fail, run, row0, row_s))
    if not pairs:
        raise TaskBuildError("dataset contains no solved runs")

    value_mults = _column_multipliers([p[3] for p in pairs], columns, selected, start=3)

    # per-variable change atoms, plus the delta magnitudes for scaling
    deltas: dict[str, list[float]] = {v: [] for v in selected}
    changes: dict[tuple[str, int], dict[str, tuple[str, float]]] = {}
    for fail, run, row0, row_s in pairs:
        per_var = {}
        for var in selected:
            idx = columns.index(var)
            v0, vs = row0[idx], row_s[idx]
            b0 = bucketize(v0, var, scheme, nominal[var])
            bs = bucketize(vs, var, scheme, nominal[var])
            if b0 == bs:
                per_var[var] = ("unchanged", 0.0)
            else:
                direction = "up" if vs > v0 else "down"
                per_var[var] = (direction, abs(vs - v0))
                deltas[var].append(abs(vs - v0))
        changes[(fail, run)] = per_var

    delta_mults = {
        var: (choose_multiplier(deltas[var]) if deltas[var] else 1.0) for var in selected
    }

    numeric_specs = []
    constraints: list = [MaxBodyLength(params.max_body_len)]
    for var in selected:
        idx = columns.index(var)
        scaled_vals = [scale_value(p[3][idx], value_mults[var]) for p in pairs]
        numeric_specs.append(_numeric_spec(var, scaled_vals, value_mults[var], params.threshold_cap))
        for direction in ("up", "down"):
            observed = [
                scale_value(mag, delta_mults[var])
                for pv in changes.values()
                for d, mag in [pv[var]]
                if d == direction
            ]
            numeric_specs.append(
                _numeric_spec(f"{var}_{direction}", observed or [0], delta_mults[var], params.threshold_cap)
            )
        constraints.append(ForbidPredicatePair(f"{var}_up", f"{var}_down"))
    constraints.append(ForbidAllNominalBody(nominal_preds=frozenset({"unchanged"})))

    bias = ModeBias(
        heads=tuple(failure_atoms[f] for f in failures),
        nominal_body=tuple(Atom("unchanged", (v,)) for v in selected),
        numeric_vars=tuple(numeric_specs),
        constraints=tuple(constraints),
        phi=params.phi,
    )

    examples = []
    for fail, run, row0, row_s in pairs:
        ctx = set()
        for var in selected:
            idx = columns.index(var)
            ctx.add(Atom(var, (scale_value(row_s[idx], value_mults[var]),)))
            direction, mag = changes[(fail, run)][var]
            if direction == "unchanged":
                ctx.add(Atom("unchanged", (var,)))
            else:
                ctx.add(Atom(f"{var}_{direction}", (scale_value(mag, delta_mults[var]),)))
        examples.append(
            Wcdpi(
                example_id=f"{fail}|r{run}",
                penalty=225 if fail == NULL_LABEL else 100,
                pi=PartialInterpretation(
                    inc=frozenset({failure_atoms[fail]}),
                    exc=frozenset(failure_atoms[f] for f in failures if f != fail),
                ),
                ctx_facts=frozenset(ctx),
            )
        )
    return RuleLearningTask(background=(), bias=bias, positives=tuple(examples))


def build_task(dataset: Dataset, params: LearningParams) -> RuleLearningTask:
    if params.task == "static":
        return build_static_task(dataset, params)
    return build_dynamic_task(dataset, params)
