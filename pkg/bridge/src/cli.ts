/**
 * Bridge CLI:
 *   detect --in <tfi dir> --out <boxes dir> [--conf-floor 0.05]
 *   export --in <corpus dir> --out <dataset dir> [--seed 0] [--class 0]
 */
import { detectAndExport } from './detectAndExport';
import { exportTrainingSet } from './exportTrainingSet';

function argValue(args: string[], flag: string, fallback?: string): string {
  const i = args.indexOf(flag);
  if (i >= 0 && i + 1 < args.length) return args[i + 1];
  if (fallback !== undefined) return fallback;
  console.error(`missing required flag ${flag}`);
  process.exit(2);
}

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  if (command === 'detect') {
    const result = detectAndExport({
      inputDir: argValue(rest, '--in'),
      outputDir: argValue(rest, '--out'),
      confidenceFloor: parseFloat(argValue(rest, '--conf-floor', '0.0')),
    });
    for (const f of result.failed) console.error(`skip ${f.file}: ${f.reason}`);
    console.log(`detected over ${result.processed.length} images, ${result.failed.length} skipped`);
    return 0;
  }
  if (command === 'export') {
    const split = exportTrainingSet({
      corpusDir: argValue(rest, '--in'),
      outputDir: argValue(rest, '--out'),
      seed: parseInt(argValue(rest, '--seed', '0'), 10),
      classIndex: parseInt(argValue(rest, '--class', '0'), 10),
    });
    console.log(`split: train ${split.train.length} / val ${split.val.length} / test ${split.test.length}`);
    return 0;
  }
  console.error('usage: bridge <detect|export> ...');
  return 2;
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
