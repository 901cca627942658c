/** Readers for the faultrules dataset CSV and the exported split-index file. */

import * as fs from "node:fs";

export const MONITORED_VARS = [
  "srcr1_p", "srcr1_t", "m2_pv", "k1_p1", "k1_p2",
  "m1_pv", "e2_tsi", "e2_tti", "r1_t2", "snk1_p",
  "snk1_t", "r1_tau", "r1_xmax", "snk1_z_c2h4o", "fc1_op",
  "xc1_op", "cw1_op", "fc1_sp", "xc1_sp", "k1_power",
  "e2_duty", "e2_tso", "r1_zin_c2h4", "r1_zout_o2", "srcr1_m",
] as const;

export const REAL_WORLD_VARS = [
  "srcr1_p", "srcr1_t", "m2_pv", "k1_p1", "k1_p2",
  "m1_pv", "e2_tsi", "e2_tti", "r1_t2", "snk1_p", "snk1_t",
] as const;

export const M1_M2_VARS = ["m1_pv", "m2_pv"] as const;

export interface DynamicRow {
  failure: string;
  run: number;
  timepoint: number;
  values: Record<string, number>;
}

export interface DynamicDataset {
  rows: DynamicRow[];
  failures: string[];
}

export function parseDynamicDataset(path: string): DynamicDataset {
  const text = fs.readFileSync(path, "utf8");
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) throw new Error(`${path}: empty file`);
  const header = lines[0].split(",");
  const expected = ["failure", "run_index", "timepoint", ...MONITORED_VARS];
  if (header.join(",") !== expected.join(",")) {
    throw new Error(`${path}: header does not match the dynamic dataset schema`);
  }
  const rows: DynamicRow[] = [];
  const failures = new Set<string>();
  for (let i = 1; i < lines.length; i++) {
    const cells = lines[i].split(",");
    if (cells.length !== expected.length) {
      throw new Error(`${path}:${i + 1}: expected ${expected.length} columns, got ${cells.length}`);
    }
    const values: Record<string, number> = {};
    MONITORED_VARS.forEach((v, j) => {
      values[v] = Number(cells[3 + j]);
    });
    rows.push({
      failure: cells[0],
      run: Number(cells[1]),
      timepoint: Number(cells[2]),
      values,
    });
    failures.add(cells[0]);
  }
  return { rows, failures: [...failures].sort() };
}

export type Fold = "train" | "validate";

/** Split-index file written by the primary CLI: `example_id,fold` lines with
 * example ids of the form `<failure>|r<run>`. */
export function parseSplitIndex(path: string): Map<string, Fold> {
  const text = fs.readFileSync(path, "utf8");
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines[0] !== "example_id,fold") {
    throw new Error(`${path}: expected header 'example_id,fold'`);
  }
  const out = new Map<string, Fold>();
  for (let i = 1; i < lines.length; i++) {
    const [id, fold] = lines[i].split(",");
    if (fold !== "train" && fold !== "validate") {
      throw new Error(`${path}:${i + 1}: unknown fold ${fold}`);
    }
    out.set(id, fold);
  }
  return out;
}
