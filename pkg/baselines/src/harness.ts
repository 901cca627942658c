/** The baseline run: featurize, honour the primary's split file, tune each
 * classifier, and emit the AUC table. */

import { macroAuc } from "./auc";
import { DynamicDataset, Fold } from "./csv";
import { FeatureMatrix, ProcVars, applySplit, featurize } from "./featurize";
import { RandomForest } from "./models";
import { exportTreeText } from "./tree";
import { CLASSIFIERS, ClassifierName, tuneAndFit } from "./tune";

export interface BaselineRow {
  classifier: ClassifierName;
  avgAuc: number | null;
  perClass: Map<string, number>;
  config: Record<string, number>;
  error?: string;
}

export interface BaselineTable {
  rows: BaselineRow[];
  nTrain: number;
  nValidate: number;
}

export function runBaselines(
  dataset: DynamicDataset,
  fold: Map<string, Fold>,
  options: { tShortTerm: number; procVars: ProcVars; trials: number; seed: number },
): BaselineTable {
  const features = featurize(dataset, options.tShortTerm, options.procVars);
  const { trainX, trainY, valX, valY } = applySplit(features, fold);
  const classes = features.classes;
  const rows: BaselineRow[] = [];
  for (const name of CLASSIFIERS) {
    try {
      const tuned = tuneAndFit(name, trainX, trainY, options.trials, options.seed);
      const { avg, perClass } = macroAuc(tuned.classifier.predictProba(valX), valY, classes);
      rows.push({ classifier: name, avgAuc: avg, perClass, config: tuned.config });
    } catch (err) {
      rows.push({
        classifier: name,
        avgAuc: null,
        perClass: new Map(),
        config: {},
        error: err instanceof Error ? err.message : String(err),
      });
    }
  }
  return { rows, nTrain: trainX.length, nValidate: valX.length };
}

export function tableText(table: BaselineTable): string {
  const lines = [
    `n_train=${table.nTrain} n_validate=${table.nValidate}`,
    `${"classifier".padEnd(11)}${"avg(auc)".padStart(9)}  config`,
  ];
  for (const row of table.rows) {
    if (row.avgAuc === null) {
      lines.push(`${row.classifier.padEnd(11)}${"error".padStart(9)}  ${row.error}`);
    } else {
      lines.push(
        `${row.classifier.padEnd(11)}${row.avgAuc.toFixed(4).padStart(9)}  ${JSON.stringify(row.config)}`,
      );
    }
  }
  return lines.join("\n") + "\n";
}

export function tableCsv(table: BaselineTable): string {
  const lines = ["classifier,avg_auc"];
  for (const row of table.rows) {
    lines.push(`${row.classifier},${row.avgAuc === null ? "error" : row.avgAuc.toFixed(6)}`);
  }
  return lines.join("\n") + "\n";
}

/** Depth-limited readable tree from the first forest member. */
export function exportForestTree(
  dataset: DynamicDataset,
  fold: Map<string, Fold>,
  options: { tShortTerm: number; procVars: ProcVars; seed: number; maxDepth: number },
): string {
  const features = featurize(dataset, options.tShortTerm, options.procVars);
  const { trainX, trainY } = applySplit(features, fold);
  const forest = new RandomForest(
    { nTrees: 1, maxDepth: options.maxDepth, minSamplesLeaf: 2, maxFeatures: 0 },
    options.seed,
  );
  forest.fit(trainX, trainY);
  return exportTreeText(forest.trees[0].root, features.featureNames, forest.classes, options.maxDepth);
}
