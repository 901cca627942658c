"""Interpretable probabilistic failure-detection rules for a simulated
ethylene-oxidation process: a flowsheet simulator with fault injection, a
discretized-posterior rule learner, task builders and a ROC/AUC harness."""

from .flowsheet import (
    FlowsheetConfig,
    LeakConfig,
    ProcessState,
    SteadyState,
    Trajectory,
    Unsolved,
    default_config,
    simulate_dynamic,
    solve_static,
)
from .campaign import (
    Dataset,
    Experiment,
    parse_perturbation_file,
    read_dataset,
    run_campaign,
    select_experiments,
    write_dataset,
)
from .logic import Atom, PartialInterpretation, Rule, Wcdpi, accepts, evaluate, parse_program
from .solver import Hypothesis, RuleLearningTask, SearchBudget, hypothesis_to_text, predict, solve
from .space import ModeBias, NumericVarSpec, ScoredRule, enumerate_rules, prior
from .taskbuild import (
    BucketScheme,
    LearningParams,
    bucketize,
    build_dynamic_task,
    build_static_task,
    choose_multiplier,
)
from .evaluation import MetricsReport, evaluate_hypothesis, roc_auc, run_pipeline, split, sweep

__version__ = "0.1.0"
