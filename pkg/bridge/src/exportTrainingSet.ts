/**
 * Turn a synthetic corpus (TFI PNGs + sidecars + truth boxes) into a
 * detector training set: one normalized label file per image and an
 * 8:1:1 train/val/test split by seeded shuffle.
 */
import * as fs from 'node:fs';
import * as path from 'node:path';
import { physicalToPixel } from './axes';
import { BoxesFileSchema, Sidecar, SidecarSchema } from './schema';

export interface ExportConfig {
  corpusDir: string;  // <stem>.png, <stem>.png.json, <stem>.truth.json
  outputDir: string;  // labels/<stem>.txt plus split lists
  seed: number;
  classIndex: number;
}

export interface SplitResult {
  train: string[];
  val: string[];
  test: string[];
}

/** Deterministic 32-bit PRNG so splits reproduce across runs. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function seededShuffle<T>(items: T[], seed: number): T[] {
  const rand = mulberry32(seed);
  const out = [...items];
  for (let i = out.length - 1; i > 0; i--) {
    const j = Math.floor(rand() * (i + 1));
    [out[i], out[j]] = [out[j], out[i]];
  }
  return out;
}

/** Exact 8:1:1 partition: remainders of the 10% blocks go to train. */
export function splitCounts(n: number): { train: number; val: number; test: number } {
  const val = Math.floor(n / 10);
  const test = Math.floor(n / 10);
  return { train: n - val - test, val, test };
}

export function labelLines(
  stem: string,
  corpusDir: string,
  classIndex: number,
): string[] {
  const sidecar: Sidecar = SidecarSchema.parse(
    JSON.parse(fs.readFileSync(path.join(corpusDir, `${stem}.png.json`), 'utf8')),
  );
  const truth = BoxesFileSchema.parse(
    JSON.parse(fs.readFileSync(path.join(corpusDir, `${stem}.truth.json`), 'utf8')),
  );
  return truth.boxes.map((b) => {
    const px = physicalToPixel(b, sidecar);
    const w = (px.colMax - px.colMin + 1) / sidecar.num_cols;
    const h = (px.rowMax - px.rowMin + 1) / sidecar.num_rows;
    const cx = (px.colMin + px.colMax + 1) / 2 / sidecar.num_cols;
    const cy = (px.rowMin + px.rowMax + 1) / 2 / sidecar.num_rows;
    const fmt = (v: number) => v.toFixed(6);
    return `${classIndex} ${fmt(cx)} ${fmt(cy)} ${fmt(w)} ${fmt(h)}`;
  });
}

export function exportTrainingSet(cfg: ExportConfig): SplitResult {
  const stems = fs.readdirSync(cfg.corpusDir)
    .filter((f) => f.endsWith('.png'))
    .map((f) => f.replace(/\.png$/, ''))
    .sort();
  const labelsDir = path.join(cfg.outputDir, 'labels');
  fs.mkdirSync(labelsDir, { recursive: true });
  for (const stem of stems) {
    const lines = labelLines(stem, cfg.corpusDir, cfg.classIndex);
    fs.writeFileSync(path.join(labelsDir, `${stem}.txt`), lines.join('\n') + '\n');
  }
  const shuffled = seededShuffle(stems, cfg.seed);
  const { train, val } = splitCounts(stems.length);
  const split: SplitResult = {
    train: shuffled.slice(0, train).sort(),
    val: shuffled.slice(train, train + val).sort(),
    test: shuffled.slice(train + val).sort(),
  };
  for (const name of ['train', 'val', 'test'] as const) {
    fs.writeFileSync(
      path.join(cfg.outputDir, `${name}.txt`),
      split[name].map((s) => `${s}.png`).join('\n') + (split[name].length ? '\n' : ''),
    );
  }
  return split;
}
