/** Turn a dynamic dataset into one feature vector per run: raw values at the
 * short-term instant concatenated with signed deltas from t = 0. */

import { DynamicDataset, DynamicRow, M1_M2_VARS, MONITORED_VARS, REAL_WORLD_VARS } from "./csv";

export type ProcVars = "all" | "real_world" | "m1_m2";

export interface FeatureMatrix {
  x: number[][];
  labels: string[];
  exampleIds: string[];
  featureNames: string[];
  classes: string[];
}

export function selectedVars(procVars: ProcVars): readonly string[] {
  if (procVars === "all") return MONITORED_VARS;
  if (procVars === "real_world") return REAL_WORLD_VARS;
  return M1_M2_VARS;
}

export function featurize(dataset: DynamicDataset, tShortTerm: number, procVars: ProcVars): FeatureMatrix {
  const vars = selectedVars(procVars);
  const byRun = new Map<string, Map<number, DynamicRow>>();
  for (const row of dataset.rows) {
    const key = `${row.failure}|r${row.run}`;
    let per = byRun.get(key);
    if (!per) {
      per = new Map();
      byRun.set(key, per);
    }
    per.set(row.timepoint, row.timepoint === tShortTerm || row.timepoint === 0 ? row : per.get(row.timepoint) ?? row);
  }
  const x: number[][] = [];
  const labels: string[] = [];
  const exampleIds: string[] = [];
  for (const [key, per] of [...byRun.entries()].sort((a, b) => (a[0] < b[0] ? -1 : 1))) {
    const row0 = per.get(0);
    const rowS = [...per.entries()].find(([t]) => Math.abs(t - tShortTerm) < 1e-9)?.[1];
    if (!row0 || !rowS) {
      throw new Error(`run ${key} lacks t=0 or t=${tShortTerm} rows`);
    }
    const vec: number[] = [];
    for (const v of vars) vec.push(rowS.values[v]);
    for (const v of vars) vec.push(rowS.values[v] - row0.values[v]);
    if (vec.some((f) => !Number.isFinite(f))) continue; // unsolved sentinel run
    x.push(vec);
    labels.push(rowS.failure);
    exampleIds.push(key);
  }
  if (x.length === 0) throw new Error("no solved runs in the dataset");
  const featureNames = [...vars.map((v) => `${v}@t${tShortTerm}`), ...vars.map((v) => `d_${v}`)];
  return { x, labels, exampleIds, featureNames, classes: [...new Set(labels)].sort() };
}

export interface SplitMatrices {
  trainX: number[][];
  trainY: string[];
  valX: number[][];
  valY: string[];
}

export function applySplit(features: FeatureMatrix, fold: Map<string, "train" | "validate">): SplitMatrices {
  const out: SplitMatrices = { trainX: [], trainY: [], valX: [], valY: [] };
  features.exampleIds.forEach((id, i) => {
    const f = fold.get(id);
    if (f === undefined) throw new Error(`example ${id} missing from the split-index file`);
    if (f === "train") {
      out.trainX.push(features.x[i]);
      out.trainY.push(features.labels[i]);
    } else {
      out.valX.push(features.x[i]);
      out.valY.push(features.labels[i]);
    }
  });
  return out;
}
