/** Budgeted random-search hyperparameter tuning.
 *
 * Each trial samples a configuration from the classifier's documented grid,
 * trains on an inner 80/20 split of the training fold and scores by macro
 * AUC; the best configuration is refit on the full training fold.  Seeds fix
 * everything, so tables reproduce exactly.
 */

import { macroAuc } from "./auc";
import {
  AdaBoost,
  Classifier,
  HistGradientBoosting,
  LinearSvm,
  Mlp,
  RandomForest,
} from "./models";
import { Rng } from "./rng";

export type ClassifierName = "SVM" | "MLP" | "RF" | "HGB" | "AB";

export const CLASSIFIERS: ClassifierName[] = ["SVM", "MLP", "RF", "HGB", "AB"];

/** Documented search grids, sampled uniformly by the tuner. */
export const GRIDS: Record<ClassifierName, Record<string, (number | string)[]>> = {
  SVM: { c: [0.1, 0.3, 1, 3, 10, 30], epochs: [20, 40, 80] },
  MLP: { hidden: [8, 16, 32, 64], learningRate: [0.003, 0.01, 0.03], epochs: [40, 80, 160], l2: [0, 1e-4, 1e-3] },
  RF: { nTrees: [50, 100, 200], maxDepth: [6, 10, 15], minSamplesLeaf: [1, 2, 4], maxFeatures: [0] },
  HGB: { nRounds: [30, 60, 120], maxDepth: [2, 3, 4], learningRate: [0.05, 0.1, 0.2], nBins: [16, 32, 64] },
  AB: { nEstimators: [30, 60, 120], maxDepth: [1, 2, 3], learningRate: [0.5, 1.0] },
};

export function buildClassifier(name: ClassifierName, config: Record<string, number>, seed: number): Classifier {
  switch (name) {
    case "SVM":
      return new LinearSvm({ c: config.c, epochs: config.epochs }, seed);
    case "MLP":
      return new Mlp(
        { hidden: config.hidden, epochs: config.epochs, learningRate: config.learningRate, l2: config.l2 },
        seed,
      );
    case "RF":
      return new RandomForest(
        { nTrees: config.nTrees, maxDepth: config.maxDepth, minSamplesLeaf: config.minSamplesLeaf, maxFeatures: config.maxFeatures },
        seed,
      );
    case "HGB":
      return new HistGradientBoosting({
        nRounds: config.nRounds,
        maxDepth: config.maxDepth,
        learningRate: config.learningRate,
        nBins: config.nBins,
      });
    case "AB":
      return new AdaBoost(
        { nEstimators: config.nEstimators, maxDepth: config.maxDepth, learningRate: config.learningRate },
        seed,
      );
  }
}

function sampleConfig(name: ClassifierName, rng: Rng): Record<string, number> {
  const grid = GRIDS[name];
  const config: Record<string, number> = {};
  for (const key of Object.keys(grid)) {
    config[key] = rng.choice(grid[key]) as number;
  }
  return config;
}

function stratifiedInnerSplit(y: string[], rng: Rng): { fit: number[]; score: number[] } {
  const byClass = new Map<string, number[]>();
  y.forEach((label, i) => {
    const bucket = byClass.get(label) ?? [];
    bucket.push(i);
    byClass.set(label, bucket);
  });
  const fit: number[] = [];
  const score: number[] = [];
  for (const label of [...byClass.keys()].sort()) {
    const idx = byClass.get(label)!;
    const order = rng.shuffled(idx.length).map((i) => idx[i]);
    const k = Math.max(1, Math.round(0.2 * idx.length));
    score.push(...order.slice(0, k));
    fit.push(...order.slice(k));
  }
  return { fit, score };
}

export interface TuneResult {
  config: Record<string, number>;
  classifier: Classifier;
  tuneAuc: number;
  trialsRun: number;
}

export function tuneAndFit(
  name: ClassifierName,
  trainX: number[][],
  trainY: string[],
  trials: number,
  seed: number,
): TuneResult {
  const rng = new Rng((seed ^ 0x5bd1e995) >>> 0);
  const inner = stratifiedInnerSplit(trainY, rng.fork(1));
  const fitX = inner.fit.map((i) => trainX[i]);
  const fitY = inner.fit.map((i) => trainY[i]);
  const scoreX = inner.score.map((i) => trainX[i]);
  const scoreY = inner.score.map((i) => trainY[i]);
  const classes = [...new Set(trainY)].sort();

  let best: { config: Record<string, number>; auc: number } | null = null;
  const seen = new Set<string>();
  for (let t = 0; t < Math.max(trials, 1); t++) {
    const config = sampleConfig(name, rng);
    const key = JSON.stringify(config);
    if (seen.has(key)) continue;
    seen.add(key);
    try {
      const model = buildClassifier(name, config, seed + 1000 + t);
      model.fit(fitX, fitY);
      const { avg } = macroAuc(model.predictProba(scoreX), scoreY, classes);
      if (!best || avg > best.auc + 1e-12) best = { config, auc: avg };
    } catch {
      continue; // a failed trial just burns budget
    }
  }
  const config = best ? best.config : sampleConfig(name, rng.fork(99));
  const classifier = buildClassifier(name, config, seed + 7);
  classifier.fit(trainX, trainY);
  return { config, classifier, tuneAuc: best?.auc ?? NaN, trialsRun: seen.size };
}
