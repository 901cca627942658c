"""Declarative fault-injection campaigns over the flowsheet simulator.

A perturbation file is a small CSV (``param,unit,default,min,max,instr``)
whose value rows pin or uniformly sample flowsheet parameters and whose
boolean rows toggle whether a parameter is specified (e.g. taking a
controller to manual before pinning its valve).  A campaign runs a list of
named experiments for a number of seeded runs each and collects one dataset:

    static columns   failure, run_index, <25 monitored variables>
    dynamic columns  failure, run_index, timepoint, <25 monitored variables>

Per-run seeds derive from the master seed by splitmix64 mixing of the
experiment name hash and the run index, so datasets are bit-reproducible and
independent of worker count.  Runs whose simulation comes back unsolved are
resampled up to three times and then recorded as a NaN sentinel row.
"""

from __future__ import annotations

import csv
import dataclasses as dc
import hashlib
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .flowsheet import (
    FlowsheetConfig,
    FlowsheetError,
    LeakConfig,
    MONITORED_VARS,
    SteadyState,
    Trajectory,
    default_config,
    simulate_dynamic,
    solve_static,
    with_c2h4_fraction,
    with_c2h4_inventory,
)

#: Recording instants for dynamic runs, seconds after the perturbation.
DEFAULT_TIMEPOINTS = (2.0, 4.0, 6.0, 8.0, 10.0, 20.0, 30.0, 40.0, 60.0, 80.0, 100.0)

NULL_LABEL = "null"

PERTURBATION_HEADER = ("param", "unit", "default", "min", "max", "instr")


class CampaignError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Parameter registry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Param:
    set_value: Callable[[FlowsheetConfig, float], FlowsheetConfig] | None
    toggle: Callable[[FlowsheetConfig, bool], FlowsheetConfig] | None
    pins: tuple[str, ...] = ()


def _set_src(field):
    return lambda cfg, v: dc.replace(cfg, source=dc.replace(cfg.source, **{field: v}))


def _set_fc(field):
    return lambda cfg, v: dc.replace(cfg, flow_controller=dc.replace(cfg.flow_controller, **{field: v}))


def _set_hx(field):
    return lambda cfg, v: dc.replace(cfg, heat_exchanger=dc.replace(cfg.heat_exchanger, **{field: v}))


def _fc_manual(cfg: FlowsheetConfig, specified: bool) -> FlowsheetConfig:
    # unchecking the setpoint takes the loop to manual at its nominal stroke
    op = None if specified else cfg.flow_controller.gains.bias
    return dc.replace(cfg, flow_controller=dc.replace(cfg.flow_controller, fixed_op=op))


def _xc_manual(cfg: FlowsheetConfig, specified: bool) -> FlowsheetConfig:
    op = None if specified else cfg.heat_exchanger.tc_gains.bias
    return dc.replace(cfg, heat_exchanger=dc.replace(cfg.heat_exchanger, tc_fixed_op=op))


PARAMS: dict[str, _Param] = {
    "SRCR1.P": _Param(_set_src("pressure"), None, ("srcr1_p",)),
    "SRCR1.T": _Param(_set_src("temperature"), None, ("srcr1_t",)),
    "SRCR1.Z[C2H4]": _Param(
        lambda cfg, v: dc.replace(cfg, source=with_c2h4_fraction(cfg.source, v)), None, ("r1_zin_c2h4",)
    ),
    "SRCR1.M[C2H4]": _Param(
        lambda cfg, v: dc.replace(cfg, source=with_c2h4_inventory(cfg.source, v)), None, ("r1_zin_c2h4",)
    ),
    "FC1.SP": _Param(_set_fc("setpoint"), _fc_manual, ("fc1_sp",)),
    "FC1.OP": _Param(_set_fc("fixed_op"), None, ("fc1_op",)),
    "XC1.SP": _Param(_set_hx("tc_setpoint"), _xc_manual, ("xc1_sp",)),
    "XC1.OP": _Param(_set_hx("tc_fixed_op"), lambda cfg, s: cfg, ("xc1_op",)),
    "CW1.OP": _Param(_set_hx("outlet_valve_pos"), None, ("cw1_op",)),
    "CW.P": _Param(_set_hx("cw_pressure"), None, ()),
    "SRCE1.P": _Param(_set_hx("cw_pressure"), None, ()),  # cooling-water supply alias
    "E2.TSI": _Param(_set_hx("cw_inlet_temp"), None, ("e2_tsi",)),
    "E2.UA": _Param(_set_hx("ua"), None, ()),
    "K1.ETA": _Param(
        lambda cfg, v: dc.replace(cfg, compressor=dc.replace(cfg.compressor, efficiency=v)), None, ()
    ),
    "SNK1.P": _Param(
        lambda cfg, v: dc.replace(cfg, sink=dc.replace(cfg.sink, pressure=v)), None, ("snk1_p",)
    ),
    "LEAK.BEFORE_K1": _Param(
        lambda cfg, v: dc.replace(cfg, leak=LeakConfig("beforeCompressor", v)), None, ()
    ),
    "LEAK.AFTER_K1": _Param(
        lambda cfg, v: dc.replace(cfg, leak=LeakConfig("afterCompressor", v)), None, ()
    ),
}


# ---------------------------------------------------------------------------
# Perturbation files
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PerturbRow:
    param: str
    unit: str
    default: str
    lo: float | None
    hi: float | None
    instr: str

    @property
    def is_toggle(self) -> bool:
        return self.unit == "bool"


@dataclass(frozen=True)
class PerturbationFile:
    rows: tuple[PerturbRow, ...]

    def to_text(self) -> str:
        out = io.StringIO()
        w = csv.writer(out)
        w.writerow(PERTURBATION_HEADER)
        for r in self.rows:
            w.writerow(
                [r.param, r.unit, r.default, "" if r.lo is None else f"{r.lo:g}",
                 "" if r.hi is None else f"{r.hi:g}", r.instr]
            )
        return out.getvalue()


def parse_perturbation_file(text: str) -> PerturbationFile:
    """Parse and structurally validate one perturbation CSV."""
    reader = csv.reader(io.StringIO(text))
    rows: list[PerturbRow] = []
    header = None
    for lineno, rec in enumerate(reader, start=1):
        if not rec or all(not c.strip() for c in rec):
            continue
        if header is None:
            header = tuple(c.strip() for c in rec)
            if header != PERTURBATION_HEADER:
                raise CampaignError(f"line {lineno}: expected header {','.join(PERTURBATION_HEADER)}")
            continue
        if len(rec) != 6:
            raise CampaignError(f"line {lineno}: expected 6 columns, got {len(rec)}")
        param, unit, default, lo_s, hi_s, instr = (c.strip() for c in rec)
        if param not in PARAMS:
            known = ", ".join(sorted(PARAMS))
            raise CampaignError(f"line {lineno}: unknown parameter path {param!r} (known: {known})")
        if unit == "bool":
            if default not in ("check", "uncheck"):
                raise CampaignError(f"line {lineno}: bool rows need default check/uncheck")
            if PARAMS[param].toggle is None:
                raise CampaignError(f"line {lineno}: {param} is not toggleable")
            rows.append(PerturbRow(param, unit, default, None, None, instr))
            continue
        try:
            lo = float(lo_s) if lo_s else None
            hi = float(hi_s) if hi_s else None
            float(default)
        except ValueError as exc:
            raise CampaignError(f"line {lineno}: {exc}") from None
        if lo is not None and hi is not None and lo > hi:
            raise CampaignError(f"line {lineno}: min {lo} above max {hi}")
        if instr == "uniform" and (lo is None or hi is None):
            raise CampaignError(f"line {lineno}: uniform sampling needs both bounds")
        if instr not in ("", "uniform"):
            raise CampaignError(f"line {lineno}: unknown instruction {instr!r}")
        if PARAMS[param].set_value is None:
            raise CampaignError(f"line {lineno}: {param} cannot take a value")
        rows.append(PerturbRow(param, unit, default, lo, hi, instr))
    if header is None:
        raise CampaignError("empty perturbation file (missing header)")
    return PerturbationFile(tuple(rows))


def apply_perturbation(
    config: FlowsheetConfig, pfile: PerturbationFile, rng: np.random.Generator
) -> tuple[FlowsheetConfig, frozenset[str], dict[str, float]]:
    """Sample one perturbed configuration.

    Returns (config, pinned monitored variables, sampled values by path).
    """
    cfg = config
    pinned: set[str] = set()
    sampled: dict[str, float] = {}
    for row in pfile.rows:
        spec = PARAMS[row.param]
        if row.is_toggle:
            cfg = spec.toggle(cfg, row.default == "check")
            continue
        if row.instr == "uniform":
            value = float(rng.uniform(row.lo, row.hi))
        else:
            value = float(row.default)
        try:
            cfg = spec.set_value(cfg, value)
        except FlowsheetError as exc:
            raise CampaignError(f"{row.param}={value}: {exc}") from None
        sampled[row.param] = value
        pinned.update(spec.pins)
    return cfg, frozenset(pinned), sampled


# ---------------------------------------------------------------------------
# Experiment catalog
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Experiment:
    name: str  # "null" or "location:failureKind"
    perturbation: PerturbationFile
    trivial: bool = False

    @property
    def failure_atom_args(self) -> tuple[str, str]:
        if self.name == NULL_LABEL:
            return (NULL_LABEL, NULL_LABEL)
        loc, _, kind = self.name.partition(":")
        return (loc, kind)


def _exp(name: str, body: str, trivial: bool = False) -> Experiment:
    text = ",".join(PERTURBATION_HEADER) + "\n" + body
    return Experiment(name, parse_perturbation_file(text), trivial)


_CATALOG: tuple[Experiment, ...] = (
    _exp(NULL_LABEL, ""),
    # trivial: the failed quantity is measured directly at its origin
    _exp("source:lowPressure", "SRCR1.P,bar,2,1.6,1.98,uniform\n", trivial=True),
    _exp("source:lowTemperature", "SRCR1.T,C,25,5,16,uniform\n", trivial=True),
    _exp(
        "tempControlValve:stuckOpen",
        "XC1.SP,bool,uncheck,,,\nXC1.OP,bool,check,,,\nXC1.OP,fraction,1,1,1,\n",
        trivial=True,
    ),
    _exp("sink:highPressure", "SNK1.P,bar,7,7.6,8.2,uniform\n", trivial=True),
    # nontrivial: only downstream signatures reveal the failure
    _exp("source:missingEthylene", "SRCR1.Z[C2H4],fraction,0.025,0.004,0.018,uniform\n"),
    _exp("flowControl:lowSetpoint", "FC1.SP,kg/s,1,0.6,0.85,uniform\n"),
    _exp("tempControl:lowSetpoint", "XC1.SP,C,150,132,144,uniform\n"),
    _exp("beforeCompressor:leak", "LEAK.BEFORE_K1,fraction,0,0.12,0.35,uniform\n"),
    _exp("coolingWater:lowPressure", "CW.P,bar,10,1.5,4.0,uniform\n"),
    _exp("coolingWaterOutValve:stuckClosed", "CW1.OP,fraction,0,0,0,\n"),
    # nontrivial10 extras
    _exp("afterCompressor:leak", "LEAK.AFTER_K1,fraction,0,0.12,0.35,uniform\n"),
    _exp("heatExchanger:fouling", "E2.UA,kW/K,0.8,0.3,0.55,uniform\n"),
    _exp("compressor:efficiencyLoss", "K1.ETA,fraction,0.75,0.55,0.68,uniform\n"),
    _exp("flowValve:stiction", "FC1.SP,bool,uncheck,,,\nFC1.OP,fraction,0.6,0.42,0.52,uniform\n"),
)

NONTRIVIAL6 = (
    "source:missingEthylene",
    "flowControl:lowSetpoint",
    "tempControl:lowSetpoint",
    "beforeCompressor:leak",
    "coolingWater:lowPressure",
    "coolingWaterOutValve:stuckClosed",
)


def experiment_catalog() -> dict[str, Experiment]:
    return {e.name: e for e in _CATALOG}


def select_experiments(selector: str | Sequence[str]) -> tuple[Experiment, ...]:
    """Resolve a campaign selector; the nominal class is always included.

    Selectors: ``trivial``, ``nontrivial6``, ``nontrivial10`` or an explicit
    list of experiment names.
    """
    catalog = experiment_catalog()
    if isinstance(selector, str):
        if selector == "trivial":
            names = [e.name for e in _CATALOG if e.trivial]
        elif selector == "nontrivial6":
            names = list(NONTRIVIAL6)
        elif selector == "nontrivial10":
            names = [e.name for e in _CATALOG if not e.trivial and e.name != NULL_LABEL]
        else:
            names = [s.strip() for s in selector.split(",") if s.strip()]
    else:
        names = [s for s in selector]
    out = [catalog[NULL_LABEL]]
    for n in names:
        if n == NULL_LABEL:
            continue
        if n not in catalog:
            raise CampaignError(f"unknown experiment {n!r} (catalog: {', '.join(sorted(catalog))})")
        out.append(catalog[n])
    return tuple(out)


# ---------------------------------------------------------------------------
# Seed derivation (splitmix64)
# ---------------------------------------------------------------------------

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (x ^ (x >> 31)) & _MASK64


def derive_seed(master_seed: int, label: str, index: int) -> int:
    """Per-run seed: splitmix64 over the master seed, a label hash and an index."""
    h = int.from_bytes(hashlib.blake2b(label.encode(), digest_size=8).digest(), "big")
    return _splitmix64(_splitmix64(master_seed & _MASK64 ^ h) ^ (index & _MASK64))


# ---------------------------------------------------------------------------
# Dataset
# ---------------------------------------------------------------------------

STATIC_COLUMNS = ("failure", "run_index", *MONITORED_VARS)
DYNAMIC_COLUMNS = ("failure", "run_index", "timepoint", *MONITORED_VARS)


@dataclass(frozen=True)
class Dataset:
    mode: str  # "static" | "dynamic"
    rows: tuple[tuple, ...]  # (failure, run, [timepoint], 25 floats)

    def __post_init__(self) -> None:
        if self.mode not in ("static", "dynamic"):
            raise CampaignError(f"unknown dataset mode {self.mode!r}")
        width = len(self.columns)
        for r in self.rows:
            if len(r) != width:
                raise CampaignError(f"row width {len(r)} != {width}")

    @property
    def columns(self) -> tuple[str, ...]:
        return STATIC_COLUMNS if self.mode == "static" else DYNAMIC_COLUMNS

    @property
    def failures(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for r in self.rows:
            seen.setdefault(r[0])
        return tuple(seen)

    def values(self, var: str) -> np.ndarray:
        i = self.columns.index(var)
        return np.array([r[i] for r in self.rows], dtype=float)


def write_dataset(dataset: Dataset, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(dataset.columns)
        for row in dataset.rows:
            out = [row[0], str(row[1])]
            rest = row[2:]
            w.writerow(out + [f"{v:.17g}" for v in rest])


def read_dataset(path) -> Dataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = tuple(next(reader))
        except StopIteration:
            raise CampaignError(f"{path}: empty file") from None
        if header == STATIC_COLUMNS:
            mode = "static"
        elif header == DYNAMIC_COLUMNS:
            mode = "dynamic"
        else:
            raise CampaignError(f"{path}: header does not match the static or dynamic schema")
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != len(header):
                raise CampaignError(f"{path}:{lineno}: expected {len(header)} columns, got {len(rec)}")
            try:
                if mode == "static":
                    rows.append((rec[0], int(rec[1]), *[float(v) for v in rec[2:]]))
                else:
                    rows.append((rec[0], int(rec[1]), float(rec[2]), *[float(v) for v in rec[3:]]))
            except ValueError as exc:
                raise CampaignError(f"{path}:{lineno}: {exc}") from None
    return Dataset(mode, tuple(rows))


# ---------------------------------------------------------------------------
# Campaign runner
# ---------------------------------------------------------------------------

def _sentinel_values() -> tuple[float, ...]:
    return tuple(float("nan") for _ in MONITORED_VARS)


def _run_one(
    base: FlowsheetConfig,
    exp: Experiment,
    run: int,
    mode: str,
    timepoints: Sequence[float],
    master_seed: int,
    noise_sigma: float,
) -> list[tuple]:
    seed = derive_seed(master_seed, exp.name, run)
    rng = np.random.default_rng(seed)
    for _attempt in range(3):
        cfg, pinned, _ = apply_perturbation(base, exp.perturbation, rng)
        noise_seed = int(rng.integers(0, 2**63 - 1))
        if mode == "static":
            out = solve_static(cfg)
            if isinstance(out, SteadyState):
                return [(exp.name, run, *out.state.as_row())]
        else:
            out = simulate_dynamic(
                base, cfg, timepoints, noise_seed=noise_seed, noise_sigma=noise_sigma, pinned=pinned
            )
            if isinstance(out, Trajectory):
                return [(exp.name, run, t, *s.as_row()) for t, s in zip(out.times, out.states)]
    if mode == "static":
        return [(exp.name, run, *_sentinel_values())]
    return [(exp.name, run, t, *_sentinel_values()) for t in (0.0, *timepoints)]


def run_campaign(
    experiments: Sequence[Experiment],
    n_runs: int,
    mode: str = "dynamic",
    timepoints: Sequence[float] = DEFAULT_TIMEPOINTS,
    master_seed: int = 0,
    workers: int = 1,
    base_config: FlowsheetConfig | None = None,
    noise_sigma: float = 0.005,
) -> Dataset:
    """Execute every experiment for ``n_runs`` seeded runs and gather a dataset."""
    if n_runs < 1:
        raise CampaignError("n_runs must be >= 1")
    if mode not in ("static", "dynamic"):
        raise CampaignError(f"unknown mode {mode!r}")
    base = base_config if base_config is not None else default_config()
    jobs = [(exp, run) for exp in experiments for run in range(n_runs)]

    def work(job):
        exp, run = job
        return _run_one(base, exp, run, mode, tuple(timepoints), master_seed, noise_sigma)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(work, jobs))
    else:
        chunks = [work(j) for j in jobs]
    rows: list[tuple] = []
    for chunk in chunks:
        rows.extend(chunk)
    return Dataset(mode, tuple(rows))


def manifest_text(experiments: Sequence[Experiment], mode: str, n_runs: int, master_seed: int) -> str:
    lines = [f"mode {mode}", f"n_runs {n_runs}", f"seed {master_seed}"]
    for e in experiments:
        lines.append(f"experiment {e.name}{' trivial' if e.trivial else ''}")
    return "\n".join(lines) + "\n"
