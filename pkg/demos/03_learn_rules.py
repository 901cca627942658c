"""Learn probabilistic failure-detection rules from a generated campaign.

Run: python demos/03_learn_rules.py
"""

from __future__ import annotations

from faultrules import LearningParams, run_campaign, select_experiments, solve
from faultrules.solver import hypothesis_to_text, score_report
from faultrules.taskbuild import build_dynamic_task

params = LearningParams(experiments="nontrivial6", n_runs=15)
dataset = run_campaign(select_experiments(params.experiments), params.n_runs, "dynamic", master_seed=7, workers=4)
task = build_dynamic_task(dataset, params)
print(f"task: {len(task.positives)} examples, {len(task.bias.heads)} events, "
      f"{len(task.bias.numeric_vars)} numeric variables")

hypothesis = solve(task, params.budget())
print()
print("learned rules:")
print(hypothesis_to_text(hypothesis))
print(score_report(hypothesis, task))
