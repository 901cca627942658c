import assert from "node:assert/strict";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { test } from "node:test";

import { binaryAuc, macroAuc } from "../src/auc";
import { MONITORED_VARS, parseDynamicDataset, parseSplitIndex } from "../src/csv";
import { applySplit, featurize } from "../src/featurize";
import { AdaBoost, HistGradientBoosting, LinearSvm, Mlp, RandomForest } from "../src/models";
import { Rng } from "../src/rng";
import { ClassificationTree, exportTreeText } from "../src/tree";
import { tuneAndFit } from "../src/tune";

// ---------------------------------------------------------------------------
// helpers
// ---------------------------------------------------------------------------

function tmpFile(name: string, content: string): string {
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), "baselines-"));
  const p = path.join(dir, name);
  fs.writeFileSync(p, content);
  return p;
}

function syntheticCsv(nRuns: number, timepoints: number[]): string {
  // two failure classes + null; class signal lives in m1_pv and its delta
  const header = ["failure", "run_index", "timepoint", ...MONITORED_VARS].join(",");
  const rng = new Rng(7);
  const lines = [header];
  const classes = ["null", "a:hot", "b:cold"];
  for (const failure of classes) {
    for (let run = 0; run < nRuns; run++) {
      for (const t of [0, ...timepoints]) {
        const values = MONITORED_VARS.map((v) => {
          let base = 100 + MONITORED_VARS.indexOf(v);
          if (v === "m1_pv") {
            if (failure === "a:hot" && t > 0) base += 20 + t;
            if (failure === "b:cold" && t > 0) base -= 20 + t;
          }
          if (v === "r1_xmax" || v === "snk1_z_c2h4o") base = 0.4;
          return base + rng.normal() * 0.01;
        });
        lines.push([failure, run, t, ...values.map((v) => v.toPrecision(17))].join(","));
      }
    }
  }
  return lines.join("\n") + "\n";
}

function splitCsv(nRuns: number, kVal: number): string {
  const lines = ["example_id,fold"];
  for (const failure of ["null", "a:hot", "b:cold"]) {
    for (let run = 0; run < nRuns; run++) {
      lines.push(`${failure}|r${run},${run < kVal ? "validate" : "train"}`);
    }
  }
  return lines.join("\n") + "\n";
}

function separableToy(n: number, seed: number): { x: number[][]; y: string[] } {
  // triangle corners, so each class is linearly separable one-vs-rest
  const rng = new Rng(seed);
  const centers = [
    [-3, -2],
    [3, -2],
    [0, 3],
  ];
  const x: number[][] = [];
  const y: string[] = [];
  for (let i = 0; i < n; i++) {
    const cls = i % 3;
    x.push([centers[cls][0] + rng.normal() * 0.5, centers[cls][1] + rng.normal() * 0.5]);
    y.push(`c${cls}`);
  }
  return { x, y };
}

// ---------------------------------------------------------------------------
// AUC
// ---------------------------------------------------------------------------

test("binary AUC hand case is 0.75", () => {
  const auc = binaryAuc([0.9, 0.8, 0.7, 0.1], [true, false, true, false]);
  assert.equal(auc, 0.75);
});

test("binary AUC matches pair counting on random data", () => {
  const rng = new Rng(3);
  for (let trial = 0; trial < 50; trial++) {
    const n = 5 + rng.int(60);
    const scores = Array.from({ length: n }, () => Math.round(rng.next() * 10) / 10);
    const labels = Array.from({ length: n }, () => rng.next() < 0.5);
    if (!labels.some(Boolean) || labels.every(Boolean)) continue;
    let wins = 0;
    let pairs = 0;
    for (let i = 0; i < n; i++) {
      if (!labels[i]) continue;
      for (let j = 0; j < n; j++) {
        if (labels[j]) continue;
        pairs += 1;
        if (scores[i] > scores[j]) wins += 1;
        else if (scores[i] === scores[j]) wins += 0.5;
      }
    }
    assert.ok(Math.abs(binaryAuc(scores, labels) - wins / pairs) < 1e-12);
  }
});

test("macro AUC skips the null class", () => {
  const probs = new Map([
    ["null", [0.9, 0.1, 0.5, 0.5]],
    ["a:hot", [0.9, 0.2, 0.8, 0.1]],
  ]);
  const labels = ["a:hot", "null", "a:hot", "null"];
  const { perClass } = macroAuc(probs, labels, ["a:hot", "null"]);
  assert.ok(perClass.has("a:hot"));
  assert.ok(!perClass.has("null"));
});

// ---------------------------------------------------------------------------
// CSV + featurization
// ---------------------------------------------------------------------------

test("dataset parse validates the schema", () => {
  const p = tmpFile("d.csv", syntheticCsv(2, [6]));
  const ds = parseDynamicDataset(p);
  assert.equal(ds.rows.length, 3 * 2 * 2);
  assert.deepEqual(ds.failures, ["a:hot", "b:cold", "null"]);
  const bad = tmpFile("bad.csv", "a,b,c\n1,2,3\n");
  assert.throws(() => parseDynamicDataset(bad), /schema/);
});

test("featurize builds values plus signed deltas", () => {
  const p = tmpFile("d.csv", syntheticCsv(3, [2, 6]));
  const ds = parseDynamicDataset(p);
  const features = featurize(ds, 6, "m1_m2");
  assert.equal(features.featureNames.length, 4); // 2 values + 2 deltas
  assert.equal(features.x.length, 9); // one row per run
  const hot = features.exampleIds.findIndex((id) => id.startsWith("a:hot"));
  const deltaM1 = features.x[hot][features.featureNames.indexOf("d_m1_pv")];
  assert.ok(deltaM1 > 20, `delta should be the short-term rise, got ${deltaM1}`);
});

test("nominal runs have near-zero deltas", () => {
  const p = tmpFile("d.csv", syntheticCsv(3, [6]));
  const features = featurize(parseDynamicDataset(p), 6, "real_world");
  const nullRow = features.exampleIds.findIndex((id) => id.startsWith("null"));
  const deltas = features.x[nullRow].slice(11);
  assert.ok(deltas.every((d) => Math.abs(d) < 0.1));
});

test("split file application matches folds exactly", () => {
  const p = tmpFile("d.csv", syntheticCsv(4, [6]));
  const s = tmpFile("s.csv", splitCsv(4, 1));
  const features = featurize(parseDynamicDataset(p), 6, "m1_m2");
  const fold = parseSplitIndex(s);
  const { trainX, valX } = applySplit(features, fold);
  assert.equal(valX.length, 3);
  assert.equal(trainX.length, 9);
});

// ---------------------------------------------------------------------------
// models
// ---------------------------------------------------------------------------

test("classification tree separates a separable toy set", () => {
  const { x, y } = separableToy(90, 5);
  const classes = [...new Set(y)].sort();
  const labels = y.map((l) => classes.indexOf(l));
  const tree = new ClassificationTree(classes, { maxDepth: 4, minSamplesLeaf: 1, maxFeatures: 0 });
  tree.fit(x, labels);
  const correct = x.filter((row, i) => tree.predict(row) === labels[i]).length;
  assert.ok(correct / x.length > 0.95);
  const text = exportTreeText(tree.root, ["f0", "f1"], classes, 4);
  assert.match(text, /if f0 <=/);
});

test("tree export respects the depth limit", () => {
  const { x, y } = separableToy(60, 8);
  const classes = [...new Set(y)].sort();
  const tree = new ClassificationTree(classes, { maxDepth: 6, minSamplesLeaf: 1, maxFeatures: 0 });
  tree.fit(x, y.map((l) => classes.indexOf(l)));
  const text = exportTreeText(tree.root, ["f0", "f1"], classes, 1);
  const deepest = Math.max(...text.split("\n").map((l) => (l.match(/^(\s*)/)?.[1].length ?? 0) / 2));
  assert.ok(deepest <= 2);
});

for (const [name, build] of [
  ["RF", () => new RandomForest({ nTrees: 30, maxDepth: 8, minSamplesLeaf: 1, maxFeatures: 0 }, 3)],
  ["AB", () => new AdaBoost({ nEstimators: 30, maxDepth: 2, learningRate: 1.0 }, 3)],
  ["HGB", () => new HistGradientBoosting({ nRounds: 40, maxDepth: 3, learningRate: 0.1, nBins: 16 })],
  ["SVM", () => new LinearSvm({ c: 1, epochs: 40 }, 3)],
  ["MLP", () => new Mlp({ hidden: 16, epochs: 60, learningRate: 0.01, l2: 1e-4 }, 3)],
] as const) {
  test(`${name} reaches high AUC on a separable toy set`, () => {
    const { x, y } = separableToy(120, 11);
    const model = build();
    model.fit(x, y);
    const { avg } = macroAuc(model.predictProba(x), y, [...new Set(y)].sort());
    assert.ok(avg > 0.95, `${name} toy AUC ${avg}`);
  });
}

test("random forest is deterministic given its seed", () => {
  const { x, y } = separableToy(60, 2);
  const a = new RandomForest({ nTrees: 10, maxDepth: 5, minSamplesLeaf: 1, maxFeatures: 2 }, 9);
  const b = new RandomForest({ nTrees: 10, maxDepth: 5, minSamplesLeaf: 1, maxFeatures: 2 }, 9);
  a.fit(x, y);
  b.fit(x, y);
  const pa = a.predictProba(x).get("c0")!;
  const pb = b.predictProba(x).get("c0")!;
  assert.deepEqual(pa, pb);
});

test("tuner returns a fitted classifier and a config from the grid", () => {
  const { x, y } = separableToy(90, 4);
  const result = tuneAndFit("RF", x, y, 5, 17);
  assert.ok(result.trialsRun >= 1);
  assert.ok([50, 100, 200].includes(result.config.nTrees));
  const { avg } = macroAuc(result.classifier.predictProba(x), y, [...new Set(y)].sort());
  assert.ok(avg > 0.95);
});
