/**
 * Batch adapter: run a detector over exported TFI images and emit boxes
 * in the interchange schema, converting pixel coordinates to seconds/Hz
 * via each image's axis sidecar.
 */
import * as fs from 'node:fs';
import * as path from 'node:path';
import { pixelToPhysical } from './axes';
import { loadGrayPng } from './png';
import { BoxesFile, Sidecar, SidecarSchema } from './schema';
import { DEFAULT_STUB_PARAMS, StubParams, stubDetect } from './stubDetector';

export interface BridgeConfig {
  inputDir: string;        // TFI PNGs + .png.json sidecars
  outputDir: string;       // <stem>.boxes.json per image
  confidenceFloor: number; // detections below this are dropped
  stubParams?: StubParams;
}

export interface BridgeResult {
  processed: string[];
  failed: { file: string; reason: string }[];
}

export function detectAndExport(cfg: BridgeConfig): BridgeResult {
  const result: BridgeResult = { processed: [], failed: [] };
  fs.mkdirSync(cfg.outputDir, { recursive: true });
  const images = fs.readdirSync(cfg.inputDir).filter((f) => f.endsWith('.png')).sort();
  for (const file of images) {
    const sidecarPath = path.join(cfg.inputDir, file + '.json');
    if (!fs.existsSync(sidecarPath)) {
      result.failed.push({ file, reason: 'missing axis sidecar' });
      continue;
    }
    let sidecar: Sidecar;
    try {
      sidecar = SidecarSchema.parse(JSON.parse(fs.readFileSync(sidecarPath, 'utf8')));
    } catch (err) {
      result.failed.push({ file, reason: `bad sidecar: ${err}` });
      continue;
    }
    const img = loadGrayPng(path.join(cfg.inputDir, file));
    const pixelBoxes = stubDetect(img, cfg.stubParams ?? DEFAULT_STUB_PARAMS);
    const out: BoxesFile = {
      boxes: pixelBoxes
        .filter((b) => b.confidence >= cfg.confidenceFloor)
        .map((b) => pixelToPhysical(b, sidecar)),
    };
    const stem = file.replace(/\.png$/, '');
    fs.writeFileSync(
      path.join(cfg.outputDir, `${stem}.boxes.json`),
      JSON.stringify(out, null, 2),
    );
    result.processed.push(file);
  }
  return result;
}
