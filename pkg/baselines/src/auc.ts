/** One-vs-rest ROC AUC via the Mann-Whitney pair statistic (ties = half). */

export function binaryAuc(scores: number[], positive: boolean[]): number {
  const pos: number[] = [];
  const neg: number[] = [];
  scores.forEach((s, i) => (positive[i] ? pos : neg).push(s));
  if (pos.length === 0 || neg.length === 0) {
    throw new Error("AUC needs both classes");
  }
  // rank-based formulation keeps this O(n log n)
  const all = scores
    .map((s, i) => ({ s, y: positive[i] }))
    .sort((a, b) => a.s - b.s);
  let i = 0;
  let posRankSum = 0;
  while (i < all.length) {
    let j = i;
    while (j < all.length && all[j].s === all[i].s) j++;
    const avgRank = (i + 1 + j) / 2; // 1-based average rank of the tie block
    for (let k = i; k < j; k++) if (all[k].y) posRankSum += avgRank;
    i = j;
  }
  return (posRankSum - (pos.length * (pos.length + 1)) / 2) / (pos.length * neg.length);
}

/** Average one-vs-rest AUC over the failure classes, skipping `null`. */
export function macroAuc(
  probs: Map<string, number[]>,
  labels: string[],
  classes: string[],
): { avg: number; perClass: Map<string, number> } {
  const perClass = new Map<string, number>();
  for (const cls of classes) {
    if (cls === "null") continue;
    const scores = probs.get(cls);
    if (!scores) throw new Error(`no scores for class ${cls}`);
    const positive = labels.map((l) => l === cls);
    if (!positive.some(Boolean) || positive.every(Boolean)) continue;
    perClass.set(cls, binaryAuc(scores, positive));
  }
  if (perClass.size === 0) throw new Error("no scorable classes");
  let sum = 0;
  for (const v of perClass.values()) sum += v;
  return { avg: sum / perClass.size, perClass };
}
