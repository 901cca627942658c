/** CLI: train the baseline classifiers on a faultrules dataset + split file.
 *
 *   node dist/src/main.js --data data.csv --split split.csv \
 *       [--t-short-term 6] [--proc-vars real_world] [--trials 50] [--seed 1] \
 *       [--out table.csv] [--text-out table.txt] [--export-tree tree.txt --tree-depth 4]
 */

import * as fs from "node:fs";

import { parseDynamicDataset, parseSplitIndex } from "./csv";
import { ProcVars } from "./featurize";
import { exportForestTree, runBaselines, tableCsv, tableText } from "./harness";

interface Args {
  data: string;
  split: string;
  tShortTerm: number;
  procVars: ProcVars;
  trials: number;
  seed: number;
  out?: string;
  textOut?: string;
  exportTree?: string;
  treeDepth: number;
}

function parseArgs(argv: string[]): Args {
  const args: Args = {
    data: "",
    split: "",
    tShortTerm: 6,
    procVars: "real_world",
    trials: 50,
    seed: 1,
    treeDepth: 4,
  };
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    const value = argv[i + 1];
    if (value === undefined) throw new Error(`missing value for ${key}`);
    switch (key) {
      case "--data": args.data = value; break;
      case "--split": args.split = value; break;
      case "--t-short-term": args.tShortTerm = Number(value); break;
      case "--proc-vars":
        if (value !== "all" && value !== "real_world" && value !== "m1_m2") {
          throw new Error(`unknown proc-vars ${value}`);
        }
        args.procVars = value;
        break;
      case "--trials": args.trials = Number(value); break;
      case "--seed": args.seed = Number(value); break;
      case "--out": args.out = value; break;
      case "--text-out": args.textOut = value; break;
      case "--export-tree": args.exportTree = value; break;
      case "--tree-depth": args.treeDepth = Number(value); break;
      default: throw new Error(`unknown flag ${key}`);
    }
  }
  if (!args.data || !args.split) throw new Error("--data and --split are required");
  return args;
}

export function main(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error(`usage error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
  try {
    const dataset = parseDynamicDataset(args.data);
    const fold = parseSplitIndex(args.split);
    const table = runBaselines(dataset, fold, {
      tShortTerm: args.tShortTerm,
      procVars: args.procVars,
      trials: args.trials,
      seed: args.seed,
    });
    const text = tableText(table);
    process.stdout.write(text);
    if (args.textOut) fs.writeFileSync(args.textOut, text);
    if (args.out) fs.writeFileSync(args.out, tableCsv(table));
    if (args.exportTree) {
      fs.writeFileSync(
        args.exportTree,
        exportForestTree(dataset, fold, {
          tShortTerm: args.tShortTerm,
          procVars: args.procVars,
          seed: args.seed,
          maxDepth: args.treeDepth,
        }),
      );
    }
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
