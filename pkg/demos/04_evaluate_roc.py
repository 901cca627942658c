"""Hold out a validation split, evaluate the learned rules, dump ROC points.

Run: python demos/04_evaluate_roc.py
"""

from __future__ import annotations

from faultrules import LearningParams
from faultrules.evaluation import roc_points_csv, run_pipeline

params = LearningParams(experiments="trivial", n_runs=15)
result = run_pipeline(params, master_seed=5, workers=4)

print(result.report.to_text())
with open("demo_roc.csv", "w") as fh:
    fh.write(roc_points_csv(result.report))
print("wrote demo_roc.csv (plot fpr/tpr per event with any plotting tool)")
