/** CART trees: gini classification (for RF / AdaBoost) and least-squares
 * regression (for gradient boosting), with optional per-node feature
 * subsampling and a plain-text export. */

import { Rng } from "./rng";

export interface TreeOptions {
  maxDepth: number;
  minSamplesLeaf: number;
  /** number of features considered per split; 0 = all */
  maxFeatures: number;
}

interface Split {
  feature: number;
  threshold: number;
  gain: number;
}

export interface TreeNode {
  feature: number;
  threshold: number;
  left: TreeNode | null;
  right: TreeNode | null;
  /** class-probability vector (classification) or mean target (regression) */
  value: number[];
  samples: number;
}

function argsortBy(idx: number[], key: (i: number) => number): number[] {
  return [...idx].sort((a, b) => key(a) - key(b));
}

function candidateFeatures(nFeatures: number, opts: TreeOptions, rng: Rng | null): number[] {
  const all = Array.from({ length: nFeatures }, (_, i) => i);
  if (!opts.maxFeatures || opts.maxFeatures >= nFeatures || !rng) return all;
  const order = rng.shuffled(nFeatures);
  return order.slice(0, opts.maxFeatures).sort((a, b) => a - b);
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

export class ClassificationTree {
  root!: TreeNode;

  constructor(
    readonly classes: string[],
    private readonly opts: TreeOptions,
  ) {}

  fit(x: number[][], y: number[], weights: number[] | null = null, rng: Rng | null = null): this {
    const idx = Array.from({ length: x.length }, (_, i) => i);
    const w = weights ?? new Array(x.length).fill(1);
    this.root = this.build(x, y, w, idx, 0, rng);
    return this;
  }

  private leaf(y: number[], w: number[], idx: number[]): TreeNode {
    const counts = new Array(this.classes.length).fill(0);
    let total = 0;
    for (const i of idx) {
      counts[y[i]] += w[i];
      total += w[i];
    }
    const value = counts.map((c: number) => (total > 0 ? c / total : 1 / counts.length));
    return { feature: -1, threshold: 0, left: null, right: null, value, samples: idx.length };
  }

  private gini(counts: number[], total: number): number {
    if (total <= 0) return 0;
    let s = 0;
    for (const c of counts) s += (c / total) * (c / total);
    return 1 - s;
  }

  private bestSplit(x: number[][], y: number[], w: number[], idx: number[], rng: Rng | null): Split | null {
    const k = this.classes.length;
    const totalCounts = new Array(k).fill(0);
    let total = 0;
    for (const i of idx) {
      totalCounts[y[i]] += w[i];
      total += w[i];
    }
    const parent = this.gini(totalCounts, total);
    let best: Split | null = null;
    for (const f of candidateFeatures(x[0].length, this.opts, rng)) {
      const order = argsortBy(idx, (i) => x[i][f]);
      const leftCounts = new Array(k).fill(0);
      let leftTotal = 0;
      for (let pos = 0; pos < order.length - 1; pos++) {
        const i = order[pos];
        leftCounts[y[i]] += w[i];
        leftTotal += w[i];
        const a = x[i][f];
        const b = x[order[pos + 1]][f];
        if (a === b) continue;
        if (pos + 1 < this.opts.minSamplesLeaf || order.length - pos - 1 < this.opts.minSamplesLeaf) continue;
        const rightTotal = total - leftTotal;
        const rightCounts = totalCounts.map((c: number, j: number) => c - leftCounts[j]);
        const gain =
          parent -
          (leftTotal / total) * this.gini(leftCounts, leftTotal) -
          (rightTotal / total) * this.gini(rightCounts, rightTotal);
        if (!best || gain > best.gain + 1e-15) {
          best = { feature: f, threshold: (a + b) / 2, gain };
        }
      }
    }
    return best && best.gain > 1e-12 ? best : null;
  }

  private build(x: number[][], y: number[], w: number[], idx: number[], depth: number, rng: Rng | null): TreeNode {
    const node = this.leaf(y, w, idx);
    if (depth >= this.opts.maxDepth || idx.length < 2 * this.opts.minSamplesLeaf) return node;
    const split = this.bestSplit(x, y, w, idx, rng);
    if (!split) return node;
    const leftIdx = idx.filter((i) => x[i][split.feature] <= split.threshold);
    const rightIdx = idx.filter((i) => x[i][split.feature] > split.threshold);
    if (leftIdx.length === 0 || rightIdx.length === 0) return node;
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = this.build(x, y, w, leftIdx, depth + 1, rng);
    node.right = this.build(x, y, w, rightIdx, depth + 1, rng);
    return node;
  }

  predictProba(row: number[]): number[] {
    let node = this.root;
    while (node.left && node.right) {
      node = row[node.feature] <= node.threshold ? node.left : node.right;
    }
    return node.value;
  }

  predict(row: number[]): number {
    const p = this.predictProba(row);
    let best = 0;
    for (let i = 1; i < p.length; i++) if (p[i] > p[best]) best = i;
    return best;
  }
}

// ---------------------------------------------------------------------------
// Regression (used by gradient boosting)
// ---------------------------------------------------------------------------

export class RegressionTree {
  root!: TreeNode;

  constructor(private readonly opts: TreeOptions) {}

  fit(x: number[][], target: number[], idx: number[] | null = null): this {
    const all = idx ?? Array.from({ length: x.length }, (_, i) => i);
    this.root = this.build(x, target, all, 0);
    return this;
  }

  private leaf(target: number[], idx: number[]): TreeNode {
    let sum = 0;
    for (const i of idx) sum += target[i];
    return {
      feature: -1,
      threshold: 0,
      left: null,
      right: null,
      value: [idx.length ? sum / idx.length : 0],
      samples: idx.length,
    };
  }

  private build(x: number[][], target: number[], idx: number[], depth: number): TreeNode {
    const node = this.leaf(target, idx);
    if (depth >= this.opts.maxDepth || idx.length < 2 * this.opts.minSamplesLeaf) return node;
    let best: Split | null = null;
    let sum = 0;
    let sq = 0;
    for (const i of idx) {
      sum += target[i];
      sq += target[i] * target[i];
    }
    const parentSse = sq - (sum * sum) / idx.length;
    for (let f = 0; f < x[0].length; f++) {
      const order = argsortBy(idx, (i) => x[i][f]);
      let leftSum = 0;
      let leftSq = 0;
      for (let pos = 0; pos < order.length - 1; pos++) {
        const i = order[pos];
        leftSum += target[i];
        leftSq += target[i] * target[i];
        const a = x[i][f];
        const b = x[order[pos + 1]][f];
        if (a === b) continue;
        const nl = pos + 1;
        const nr = order.length - nl;
        if (nl < this.opts.minSamplesLeaf || nr < this.opts.minSamplesLeaf) continue;
        const rightSum = sum - leftSum;
        const rightSq = sq - leftSq;
        const sse = leftSq - (leftSum * leftSum) / nl + (rightSq - (rightSum * rightSum) / nr);
        const gain = parentSse - sse;
        if (!best || gain > best.gain + 1e-15) best = { feature: f, threshold: (a + b) / 2, gain };
      }
    }
    if (!best || best.gain <= 1e-12) return node;
    const leftIdx = idx.filter((i) => x[i][best!.feature] <= best!.threshold);
    const rightIdx = idx.filter((i) => x[i][best!.feature] > best!.threshold);
    if (leftIdx.length === 0 || rightIdx.length === 0) return node;
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = this.build(x, target, leftIdx, depth + 1);
    node.right = this.build(x, target, rightIdx, depth + 1);
    return node;
  }

  predict(row: number[]): number {
    let node = this.root;
    while (node.left && node.right) {
      node = row[node.feature] <= node.threshold ? node.left : node.right;
    }
    return node.value[0];
  }
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

export function exportTreeText(
  node: TreeNode,
  featureNames: string[],
  classes: string[] | null,
  maxDepth: number,
  depth = 0,
): string {
  const pad = "  ".repeat(depth);
  if (!node.left || !node.right || depth >= maxDepth) {
    if (classes) {
      let best = 0;
      for (let i = 1; i < node.value.length; i++) if (node.value[i] > node.value[best]) best = i;
      const p = node.value[best];
      return `${pad}-> ${classes[best]} (p=${p.toFixed(2)}, n=${node.samples})\n`;
    }
    return `${pad}-> ${node.value[0].toFixed(4)} (n=${node.samples})\n`;
  }
  const name = featureNames[node.feature] ?? `x${node.feature}`;
  let out = `${pad}if ${name} <= ${node.threshold.toPrecision(6)}:\n`;
  out += exportTreeText(node.left, featureNames, classes, maxDepth, depth + 1);
  out += `${pad}else:\n`;
  out += exportTreeText(node.right, featureNames, classes, maxDepth, depth + 1);
  return out;
}
