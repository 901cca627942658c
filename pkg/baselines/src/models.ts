/** The five baseline classifiers behind one probability-emitting interface.
 *
 * All of them are deliberately small, dependency-free implementations:
 * a random forest and AdaBoost (SAMME) over CART trees, a histogram-flavoured
 * gradient booster over least-squares trees, a one-vs-rest linear SVM trained
 * by averaged subgradient descent, and a single-hidden-layer MLP with softmax
 * cross-entropy.  Scores only feed rank-based AUCs, so calibration is not a
 * concern.
 */

import { Rng } from "./rng";
import { ClassificationTree, RegressionTree, TreeOptions } from "./tree";

export interface Classifier {
  fit(x: number[][], y: string[]): void;
  /** per-class scores aligned with `classes` */
  predictProba(x: number[][]): Map<string, number[]>;
  readonly name: string;
}

export function encodeLabels(y: string[], classes: string[]): number[] {
  const index = new Map(classes.map((c, i) => [c, i]));
  return y.map((l) => {
    const i = index.get(l);
    if (i === undefined) throw new Error(`unknown label ${l}`);
    return i;
  });
}

function probaMap(classes: string[], rows: number[][]): Map<string, number[]> {
  const out = new Map<string, number[]>();
  classes.forEach((c, j) => out.set(c, rows.map((r) => r[j])));
  return out;
}

export class Standardizer {
  mean: number[] = [];
  std: number[] = [];

  fit(x: number[][]): this {
    const d = x[0].length;
    this.mean = new Array(d).fill(0);
    this.std = new Array(d).fill(0);
    for (const row of x) row.forEach((v, j) => (this.mean[j] += v));
    this.mean = this.mean.map((m) => m / x.length);
    for (const row of x) row.forEach((v, j) => (this.std[j] += (v - this.mean[j]) ** 2));
    this.std = this.std.map((s) => Math.sqrt(s / x.length) || 1);
    return this;
  }

  apply(x: number[][]): number[][] {
    return x.map((row) => row.map((v, j) => (v - this.mean[j]) / this.std[j]));
  }
}

// ---------------------------------------------------------------------------
// Random forest
// ---------------------------------------------------------------------------

export interface ForestParams {
  nTrees: number;
  maxDepth: number;
  minSamplesLeaf: number;
  maxFeatures: number; // 0 = sqrt(d)
}

export class RandomForest implements Classifier {
  readonly name = "RF";
  classes: string[] = [];
  trees: ClassificationTree[] = [];

  constructor(
    readonly params: ForestParams,
    private readonly seed: number,
  ) {}

  fit(x: number[][], y: string[]): void {
    this.classes = [...new Set(y)].sort();
    const labels = encodeLabels(y, this.classes);
    const rng = new Rng(this.seed);
    const d = x[0].length;
    const maxFeatures = this.params.maxFeatures || Math.max(1, Math.round(Math.sqrt(d)));
    const opts: TreeOptions = {
      maxDepth: this.params.maxDepth,
      minSamplesLeaf: this.params.minSamplesLeaf,
      maxFeatures,
    };
    this.trees = [];
    for (let t = 0; t < this.params.nTrees; t++) {
      const treeRng = rng.fork(t);
      const bootX: number[][] = [];
      const bootY: number[] = [];
      for (let i = 0; i < x.length; i++) {
        const j = treeRng.int(x.length);
        bootX.push(x[j]);
        bootY.push(labels[j]);
      }
      this.trees.push(new ClassificationTree(this.classes, opts).fit(bootX, bootY, null, treeRng));
    }
  }

  predictProba(x: number[][]): Map<string, number[]> {
    const rows = x.map((row) => {
      const acc = new Array(this.classes.length).fill(0);
      for (const tree of this.trees) {
        tree.predictProba(row).forEach((p, j) => (acc[j] += p));
      }
      return acc.map((a: number) => a / this.trees.length);
    });
    return probaMap(this.classes, rows);
  }
}

// ---------------------------------------------------------------------------
// AdaBoost (SAMME)
// ---------------------------------------------------------------------------

export interface AdaBoostParams {
  nEstimators: number;
  maxDepth: number;
  learningRate: number;
}

export class AdaBoost implements Classifier {
  readonly name = "AB";
  classes: string[] = [];
  stages: { tree: ClassificationTree; alpha: number }[] = [];

  constructor(
    readonly params: AdaBoostParams,
    private readonly seed: number,
  ) {}

  fit(x: number[][], y: string[]): void {
    this.classes = [...new Set(y)].sort();
    const labels = encodeLabels(y, this.classes);
    const k = this.classes.length;
    const n = x.length;
    let w = new Array(n).fill(1 / n);
    this.stages = [];
    const opts: TreeOptions = { maxDepth: this.params.maxDepth, minSamplesLeaf: 1, maxFeatures: 0 };
    for (let m = 0; m < this.params.nEstimators; m++) {
      const tree = new ClassificationTree(this.classes, opts).fit(x, labels, w, null);
      const wrong = x.map((row, i) => tree.predict(row) !== labels[i]);
      let err = 0;
      wrong.forEach((bad, i) => {
        if (bad) err += w[i];
      });
      err = Math.min(Math.max(err, 1e-10), 1 - 1e-10);
      const alpha = this.params.learningRate * (Math.log((1 - err) / err) + Math.log(k - 1));
      if (alpha <= 0) break;
      this.stages.push({ tree, alpha });
      w = w.map((wi, i) => wi * Math.exp(wrong[i] ? alpha : 0));
      const total = w.reduce((a, b) => a + b, 0);
      w = w.map((wi) => wi / total);
      if (err < 1e-9) break;
    }
  }

  predictProba(x: number[][]): Map<string, number[]> {
    const rows = x.map((row) => {
      const votes = new Array(this.classes.length).fill(0);
      for (const { tree, alpha } of this.stages) {
        votes[tree.predict(row)] += alpha;
      }
      const total = votes.reduce((a: number, b: number) => a + b, 0) || 1;
      return votes.map((v: number) => v / total);
    });
    return probaMap(this.classes, rows);
  }
}

// ---------------------------------------------------------------------------
// Histogram gradient boosting (one-vs-rest logistic)
// ---------------------------------------------------------------------------

export interface HgbParams {
  nRounds: number;
  maxDepth: number;
  learningRate: number;
  nBins: number;
}

export class HistGradientBoosting implements Classifier {
  readonly name = "HGB";
  classes: string[] = [];
  private binEdges: number[][] = [];
  private stages: RegressionTree[][] = []; // [class][round]
  private base: number[] = [];

  constructor(readonly params: HgbParams) {}

  private binize(x: number[][]): number[][] {
    return x.map((row) => row.map((v, j) => {
      const edges = this.binEdges[j];
      let lo = 0;
      let hi = edges.length;
      while (lo < hi) {
        const mid = (lo + hi) >> 1;
        if (v <= edges[mid]) hi = mid;
        else lo = mid + 1;
      }
      return lo;
    }));
  }

  fit(x: number[][], y: string[]): void {
    this.classes = [...new Set(y)].sort();
    const labels = encodeLabels(y, this.classes);
    const d = x[0].length;
    // quantile bin edges per feature: the "histogram" part
    this.binEdges = [];
    for (let j = 0; j < d; j++) {
      const values = [...new Set(x.map((row) => row[j]))].sort((a, b) => a - b);
      const edges: number[] = [];
      for (let b = 1; b < this.params.nBins; b++) {
        edges.push(values[Math.min(values.length - 1, Math.floor((b * values.length) / this.params.nBins))]);
      }
      this.binEdges.push([...new Set(edges)]);
    }
    const xb = this.binize(x);
    const n = x.length;
    this.stages = [];
    this.base = [];
    for (let c = 0; c < this.classes.length; c++) {
      const target: number[] = labels.map((l) => (l === c ? 1 : 0));
      const rate = Math.min(Math.max(target.reduce((a, b) => a + b, 0) / n, 1e-6), 1 - 1e-6);
      let f = new Array(n).fill(Math.log(rate / (1 - rate)));
      this.base.push(f[0]);
      const rounds: RegressionTree[] = [];
      const opts: TreeOptions = { maxDepth: this.params.maxDepth, minSamplesLeaf: 4, maxFeatures: 0 };
      for (let r = 0; r < this.params.nRounds; r++) {
        const grad = f.map((fi, i) => target[i] - 1 / (1 + Math.exp(-fi)));
        const tree = new RegressionTree(opts).fit(xb, grad);
        rounds.push(tree);
        f = f.map((fi, i) => fi + this.params.learningRate * tree.predict(xb[i]));
      }
      this.stages.push(rounds);
    }
  }

  predictProba(x: number[][]): Map<string, number[]> {
    const xb = this.binize(x);
    const rows = xb.map((row) => {
      const scores = this.classes.map((_, c) => {
        let f = this.base[c];
        for (const tree of this.stages[c]) f += this.params.learningRate * tree.predict(row);
        return 1 / (1 + Math.exp(-f));
      });
      return scores;
    });
    return probaMap(this.classes, rows);
  }
}

// ---------------------------------------------------------------------------
// Linear SVM (one-vs-rest, averaged subgradient on the hinge loss)
// ---------------------------------------------------------------------------

export interface SvmParams {
  c: number;
  epochs: number;
}

export class LinearSvm implements Classifier {
  readonly name = "SVM";
  classes: string[] = [];
  private scaler = new Standardizer();
  private weights: number[][] = [];
  private bias: number[] = [];

  constructor(
    readonly params: SvmParams,
    private readonly seed: number,
  ) {}

  fit(x: number[][], y: string[]): void {
    this.classes = [...new Set(y)].sort();
    const labels = encodeLabels(y, this.classes);
    const xs = this.scaler.fit(x).apply(x);
    const d = xs[0].length;
    const n = xs.length;
    const lambda = 1 / (this.params.c * n);
    this.weights = [];
    this.bias = [];
    for (let c = 0; c < this.classes.length; c++) {
      const target = labels.map((l) => (l === c ? 1 : -1));
      const w = new Array(d).fill(0);
      let b = 0;
      const avgW = new Array(d).fill(0);
      let avgB = 0;
      const rng = new Rng((this.seed ^ (c * 2654435761)) >>> 0);
      let t = 0;
      for (let epoch = 0; epoch < this.params.epochs; epoch++) {
        const order = rng.shuffled(n);
        for (const i of order) {
          t += 1;
          const eta = 1 / (lambda * t);
          let margin = b;
          for (let j = 0; j < d; j++) margin += w[j] * xs[i][j];
          for (let j = 0; j < d; j++) w[j] *= 1 - eta * lambda;
          if (target[i] * margin < 1) {
            for (let j = 0; j < d; j++) w[j] += eta * target[i] * xs[i][j];
            b += eta * target[i] * 0.1; // unregularized intercept, small step
          }
          for (let j = 0; j < d; j++) avgW[j] += w[j];
          avgB += b;
        }
      }
      const total = this.params.epochs * n;
      this.weights.push(avgW.map((v) => v / total));
      this.bias.push(avgB / total);
    }
  }

  predictProba(x: number[][]): Map<string, number[]> {
    const xs = this.scaler.apply(x);
    const rows = xs.map((row) => {
      return this.classes.map((_, c) => {
        let m = this.bias[c];
        for (let j = 0; j < row.length; j++) m += this.weights[c][j] * row[j];
        return 1 / (1 + Math.exp(-m)); // monotone squash; AUC only needs ranks
      });
    });
    return probaMap(this.classes, rows);
  }
}

// ---------------------------------------------------------------------------
// MLP (one hidden layer, softmax cross-entropy, momentum SGD)
// ---------------------------------------------------------------------------

export interface MlpParams {
  hidden: number;
  epochs: number;
  learningRate: number;
  l2: number;
}

export class Mlp implements Classifier {
  readonly name = "MLP";
  classes: string[] = [];
  private scaler = new Standardizer();
  private w1: number[][] = [];
  private b1: number[] = [];
  private w2: number[][] = [];
  private b2: number[] = [];

  constructor(
    readonly params: MlpParams,
    private readonly seed: number,
  ) {}

  fit(x: number[][], y: string[]): void {
    this.classes = [...new Set(y)].sort();
    const labels = encodeLabels(y, this.classes);
    const xs = this.scaler.fit(x).apply(x);
    const n = xs.length;
    const d = xs[0].length;
    const h = this.params.hidden;
    const k = this.classes.length;
    const rng = new Rng(this.seed);
    const init = (rows: number, cols: number, scale: number) =>
      Array.from({ length: rows }, () => Array.from({ length: cols }, () => rng.normal() * scale));
    this.w1 = init(d, h, Math.sqrt(2 / d));
    this.b1 = new Array(h).fill(0);
    this.w2 = init(h, k, Math.sqrt(2 / h));
    this.b2 = new Array(k).fill(0);
    const vW1 = init(d, h, 0);
    const vW2 = init(h, k, 0);
    const vB1 = new Array(h).fill(0);
    const vB2 = new Array(k).fill(0);
    const mom = 0.9;
    for (let epoch = 0; epoch < this.params.epochs; epoch++) {
      const order = rng.shuffled(n);
      const lr = this.params.learningRate / (1 + 0.01 * epoch);
      for (const i of order) {
        const { hidden, probs } = this.forward(xs[i]);
        const dOut = probs.map((p, c) => p - (labels[i] === c ? 1 : 0));
        const dHidden = hidden.map((a, j) => {
          if (a <= 0) return 0;
          let g = 0;
          for (let c = 0; c < k; c++) g += dOut[c] * this.w2[j][c];
          return g;
        });
        for (let j = 0; j < h; j++) {
          for (let c = 0; c < k; c++) {
            const g = dOut[c] * hidden[j] + this.params.l2 * this.w2[j][c];
            vW2[j][c] = mom * vW2[j][c] - lr * g;
            this.w2[j][c] += vW2[j][c];
          }
        }
        for (let c = 0; c < k; c++) {
          vB2[c] = mom * vB2[c] - lr * dOut[c];
          this.b2[c] += vB2[c];
        }
        for (let f = 0; f < d; f++) {
          for (let j = 0; j < h; j++) {
            const g = dHidden[j] * xs[i][f] + this.params.l2 * this.w1[f][j];
            vW1[f][j] = mom * vW1[f][j] - lr * g;
            this.w1[f][j] += vW1[f][j];
          }
        }
        for (let j = 0; j < h; j++) {
          vB1[j] = mom * vB1[j] - lr * dHidden[j];
          this.b1[j] += vB1[j];
        }
      }
    }
  }

  private forward(row: number[]): { hidden: number[]; probs: number[] } {
    const h = this.b1.length;
    const k = this.b2.length;
    const hidden = new Array(h).fill(0);
    for (let j = 0; j < h; j++) {
      let a = this.b1[j];
      for (let f = 0; f < row.length; f++) a += row[f] * this.w1[f][j];
      hidden[j] = a > 0 ? a : 0;
    }
    const logits = new Array(k).fill(0);
    for (let c = 0; c < k; c++) {
      let a = this.b2[c];
      for (let j = 0; j < h; j++) a += hidden[j] * this.w2[j][c];
      logits[c] = a;
    }
    const peak = Math.max(...logits);
    const exps = logits.map((l) => Math.exp(l - peak));
    const total = exps.reduce((a, b) => a + b, 0);
    return { hidden, probs: exps.map((e) => e / total) };
  }

  predictProba(x: number[][]): Map<string, number[]> {
    const xs = this.scaler.apply(x);
    const rows = xs.map((row) => this.forward(row).probs);
    return probaMap(this.classes, rows);
  }
}
