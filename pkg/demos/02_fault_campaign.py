"""Generate a small fault-injection dataset and inspect its shape.

Run: python demos/02_fault_campaign.py
"""

from __future__ import annotations

from collections import Counter

from faultrules import run_campaign, select_experiments, write_dataset

experiments = select_experiments("nontrivial6")
print("experiments:", ", ".join(e.name for e in experiments))

dataset = run_campaign(experiments, n_runs=5, mode="dynamic", master_seed=42, workers=4)
print(f"dynamic dataset: {len(dataset.rows)} rows x {len(dataset.columns)} columns")
print("rows per class:", dict(Counter(r[0] for r in dataset.rows)))

write_dataset(dataset, "demo_dataset.csv")
print("wrote demo_dataset.csv")

# one perturbation file, as the campaign sees it
print()
print("perturbation file for 'leak before compressor':")
print(experiments[4].perturbation.to_text())
