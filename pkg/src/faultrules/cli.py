"""Command-line entry point: simulate, gen-data, learn, eval, sweep.

Exit codes: 0 success, 1 usage/configuration error, 2 domain failure (an
unsolved simulation).  All randomness flows from ``--seed``; reruns with the
same flags, files and seed produce byte-identical outputs at any worker
count.  Environment variables are never consulted.
"""

from __future__ import annotations

import argparse
import dataclasses as dc
import sys
from pathlib import Path

import numpy as np

from .campaign import (
    CampaignError,
    DEFAULT_TIMEPOINTS,
    PARAMS,
    apply_perturbation,
    manifest_text,
    parse_perturbation_file,
    read_dataset,
    run_campaign,
    select_experiments,
    write_dataset,
)
from .evaluation import (
    EvaluationError,
    REPORT_CSV_HEADER,
    report_csv_row,
    roc_points_csv,
    run_pipeline,
    split,
    split_index_text,
    sweep,
    sweep_table,
    table2_axes,
)
from .flowsheet import (
    FlowsheetConfig,
    MONITORED_VARS,
    Unsolved,
    default_config,
    simulate_dynamic,
    solve_static,
)
from .logic import LogicError
from .solver import hypothesis_from_text, hypothesis_to_text, score_report, solve, task_to_las
from .space import SpaceError
from .taskbuild import LearningParams, TaskBuildError, build_task, parse_params_file

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DOMAIN = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # exit 1 on usage errors, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


class ConfigError(ValueError):
    pass


def _load_config(path: str | None) -> FlowsheetConfig:
    """Flowsheet config file: ``PARAM.PATH = value`` lines over the defaults."""
    cfg = default_config()
    if path is None:
        return cfg
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(str(exc)) from None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in PARAMS:
            raise ConfigError(f"{path}:{lineno}: unknown parameter path {key!r}")
        spec = PARAMS[key]
        if value in ("check", "uncheck"):
            if spec.toggle is None:
                raise ConfigError(f"{path}:{lineno}: {key} is not toggleable")
            cfg = spec.toggle(cfg, value == "check")
        else:
            try:
                cfg = spec.set_value(cfg, float(value))
            except (ValueError, Exception) as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from None
    return cfg


def _load_params(args) -> LearningParams:
    params = LearningParams()
    if getattr(args, "params", None):
        try:
            params = parse_params_file(Path(args.params).read_text())
        except OSError as exc:
            raise ConfigError(str(exc)) from None
    overrides = {}
    for flag, field in (
        ("experiments", "experiments"),
        ("n_runs", "n_runs"),
        ("task", "task"),
        ("t_short_term", "t_short_term"),
        ("proc_vars", "proc_vars"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[field] = value
    return dc.replace(params, **overrides) if overrides else params


def _write(path: str, text: str) -> None:
    Path(path).write_text(text)


def _state_csv(states, times=None) -> str:
    lines = []
    if times is None:
        lines.append(",".join(MONITORED_VARS))
        for s in states:
            lines.append(",".join(f"{v:.17g}" for v in s.as_row()))
    else:
        lines.append("timepoint," + ",".join(MONITORED_VARS))
        for t, s in zip(times, states):
            lines.append(f"{t:.17g}," + ",".join(f"{v:.17g}" for v in s.as_row()))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    pinned = frozenset()
    if args.perturbation:
        pfile = parse_perturbation_file(Path(args.perturbation).read_text())
        rng = np.random.default_rng(args.seed)
        cfg_p, pinned, _ = apply_perturbation(cfg, pfile, rng)
    else:
        cfg_p = cfg
    if args.mode == "static":
        out = solve_static(cfg_p)
        if isinstance(out, Unsolved):
            print(f"unsolved: {out.reason}", file=sys.stderr)
            return EXIT_DOMAIN
        sys.stdout.write(_state_csv([out.state]))
        return EXIT_OK
    timepoints = [float(t) for t in args.timepoints.split(",")]
    noise_seed = args.seed if args.noise else None
    out = simulate_dynamic(cfg, cfg_p, timepoints, noise_seed=noise_seed, pinned=pinned)
    if isinstance(out, Unsolved):
        print(f"unsolved: {out.reason}", file=sys.stderr)
        return EXIT_DOMAIN
    sys.stdout.write(_state_csv(out.states, out.times))
    return EXIT_OK


def cmd_gen_data(args) -> int:
    params = _load_params(args)
    mode = "static" if params.task == "static" else "dynamic"
    exps = select_experiments(params.experiments)
    dataset = run_campaign(
        exps,
        params.n_runs,
        mode,
        DEFAULT_TIMEPOINTS if mode == "dynamic" else (),
        master_seed=args.seed,
        workers=args.workers,
    )
    write_dataset(dataset, args.out)
    if args.manifest_out:
        _write(args.manifest_out, manifest_text(exps, mode, params.n_runs, args.seed))
    print(f"wrote {len(dataset.rows)} rows to {args.out}")
    return EXIT_OK


def cmd_learn(args) -> int:
    params = _load_params(args)
    dataset = read_dataset(args.data)
    task = build_task(dataset, params)
    train_idx, validate_idx = split(task.positives, params.validation_fraction, args.seed)
    train_task = dc.replace(task, positives=tuple(task.positives[i] for i in train_idx))
    if args.dump_task:
        _write(args.dump_task, task_to_las(train_task))
    hypothesis = solve(train_task, params.budget(), workers=args.workers)
    _write(args.out, hypothesis_to_text(hypothesis))
    if args.split_out:
        _write(args.split_out, split_index_text(task.positives, train_idx, validate_idx))
    if args.score_out:
        _write(args.score_out, score_report(hypothesis, train_task))
    print(f"learned {len(hypothesis.rules)} rules -> {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from .evaluation import evaluate_hypothesis

    params = _load_params(args)
    dataset = read_dataset(args.data)
    task = build_task(dataset, params)
    train_idx, validate_idx = split(task.positives, params.validation_fraction, args.seed)
    hypothesis = hypothesis_from_text(Path(args.hypothesis).read_text())
    report = evaluate_hypothesis(hypothesis, task, tuple(task.positives[i] for i in validate_idx))
    text = report.to_text()
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    if args.csv_out:
        _write(args.csv_out, REPORT_CSV_HEADER + "\n" + report_csv_row("eval", report) + "\n")
    if args.roc_out:
        _write(args.roc_out, roc_points_csv(report))
    if args.split_out:
        _write(args.split_out, split_index_text(task.positives, train_idx, validate_idx))
    return EXIT_OK


def cmd_sweep(args) -> int:
    params = _load_params(args)
    if args.axis == "table2":
        rows = []
        from .evaluation import SweepRow

        for label, row_params in table2_axes(params):
            axis, _, value = label.partition("=")
            try:
                result = run_pipeline(row_params, args.seed, args.workers)
                rows.append(SweepRow(axis, value, result.report))
            except Exception as exc:  # noqa: BLE001 - row isolation
                rows.append(SweepRow(axis, value, None, error=str(exc)))
    else:
        values = [v for v in args.values.split(",") if v]
        rows = sweep(params, args.axis, values, master_seed=args.seed, workers=args.workers)
    text = sweep_table(rows)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    if args.csv_out:
        lines = [REPORT_CSV_HEADER]
        for row in rows:
            if row.report is not None:
                lines.append(report_csv_row(f"{row.axis}={row.value}", row.report))
            else:
                lines.append(f"{row.axis}={row.value},error,,,,")
        _write(args.csv_out, "\n".join(lines) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument wiring
# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="master seed (all randomness derives from it)")
    p.add_argument("--workers", type=int, default=1, help="worker pool bound; results are worker-count independent")
    p.add_argument("--params", help="learning-parameters file (key = value lines)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="faultrules", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one simulation and print the state(s) as CSV")
    p.add_argument("--mode", choices=("static", "dynamic"), default="static")
    p.add_argument("--config", help="flowsheet config file (PARAM.PATH = value lines)")
    p.add_argument("--perturbation", help="perturbation CSV applied at t=0+")
    p.add_argument("--timepoints", default=",".join(f"{t:g}" for t in DEFAULT_TIMEPOINTS))
    p.add_argument("--noise", action="store_true", help="apply measurement noise (dynamic mode)")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("gen-data", help="run a fault-injection campaign and write the dataset CSV")
    p.add_argument("--experiments", help="trivial | nontrivial6 | nontrivial10 | comma-separated names")
    p.add_argument("--n-runs", dest="n_runs", type=int)
    p.add_argument("--task", choices=("static", "dynamic"), help="dataset mode")
    p.add_argument("--out", required=True)
    p.add_argument("--manifest-out")
    _add_common(p)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("learn", help="build the task from a dataset and learn a hypothesis")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="hypothesis file (probabilistic rule syntax)")
    p.add_argument("--task", choices=("static", "dynamic"))
    p.add_argument("--t-short-term", dest="t_short_term", type=float)
    p.add_argument("--proc-vars", dest="proc_vars", choices=("all", "real_world", "m1_m2"))
    p.add_argument("--split-out", help="write the train/validate index file")
    p.add_argument("--score-out", help="write the per-event log-posterior report")
    p.add_argument("--dump-task", help="dump the learning task in LAS-like syntax")
    _add_common(p)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("eval", help="evaluate a hypothesis file on the held-out split")
    p.add_argument("--data", required=True)
    p.add_argument("--hypothesis", required=True)
    p.add_argument("--task", choices=("static", "dynamic"))
    p.add_argument("--t-short-term", dest="t_short_term", type=float)
    p.add_argument("--proc-vars", dest="proc_vars", choices=("all", "real_world", "m1_m2"))
    p.add_argument("--out", help="report file (stdout when omitted)")
    p.add_argument("--csv-out")
    p.add_argument("--roc-out", help="per-class ROC points CSV (plotting interface)")
    p.add_argument("--split-out")
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="vary one learning parameter and tabulate the metrics")
    p.add_argument("--axis", required=True, help="LearningParams field, or 'table2' for the 16-row layout")
    p.add_argument("--values", default="", help="comma-separated axis values")
    p.add_argument("--out")
    p.add_argument("--csv-out")
    p.add_argument("--experiments")
    p.add_argument("--n-runs", dest="n_runs", type=int)
    _add_common(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, CampaignError, TaskBuildError, EvaluationError, SpaceError, LogicError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
