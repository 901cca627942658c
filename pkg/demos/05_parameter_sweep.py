"""Sweep the short-term observation instant and tabulate the metrics.

Run: python demos/05_parameter_sweep.py   (takes a couple of minutes)
"""

from __future__ import annotations

from faultrules import LearningParams
from faultrules.evaluation import sweep, sweep_table

params = LearningParams(experiments="nontrivial6", n_runs=15)
rows = sweep(params, "t_short_term", [2.0, 6.0, 20.0], master_seed=3, workers=4)
print(sweep_table(rows))
print("later observation instants usually rank failures more cleanly,")
print("because slow thermal effects have had time to develop.")
