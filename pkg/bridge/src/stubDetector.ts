/**
 * Built-in stand-in for a neural detector: grayscale threshold plus
 * 4-connected component extraction on the TFI image. Good enough to
 * exercise the bridge contract end to end.
 */
import { PixelBox } from './schema';

export interface GrayImage {
  width: number;   // time columns
  height: number;  // frequency rows
  pixels: Uint8Array; // row-major, row 0 at the top
}

export interface StubParams {
  percentile: number;  // seed threshold on pixel intensity
  minArea: number;     // component size gate, pixels
  floorOffset: number; // support threshold above the median intensity
}

export const DEFAULT_STUB_PARAMS: StubParams = {
  percentile: 99.0,
  minArea: 30,
  floorOffset: 40,
};

function percentileOf(sorted: Uint8Array, p: number): number {
  const idx = Math.min(sorted.length - 1, Math.floor((p / 100) * sorted.length));
  return sorted[idx];
}

export function stubDetect(img: GrayImage, params: StubParams = DEFAULT_STUB_PARAMS): PixelBox[] {
  const { width, height, pixels } = img;
  const sorted = Uint8Array.from(pixels).sort();
  const median = sorted[Math.floor(sorted.length / 2)];
  const supportLevel = median + params.floorOffset;
  const seedLevel = Math.max(percentileOf(sorted, params.percentile), supportLevel);
  // strong floor contrast also seeds, so one very bright emitter does not
  // mask every other region (mirrors the pipeline's baseline detector)
  const floorSeedLevel = median + 2 * params.floorOffset;
  const max = sorted[sorted.length - 1];
  if (max < supportLevel) return [];

  const labels = new Int32Array(width * height).fill(-1);
  const boxes: PixelBox[] = [];
  let nextLabel = 0;
  const stack: number[] = [];

  for (let start = 0; start < pixels.length; start++) {
    if (labels[start] !== -1 || pixels[start] < supportLevel) continue;
    const label = nextLabel++;
    let rowMin = height, rowMax = -1, colMin = width, colMax = -1;
    let area = 0, peak = 0, sum = 0;
    stack.push(start);
    labels[start] = label;
    while (stack.length) {
      const idx = stack.pop()!;
      const r = Math.floor(idx / width);
      const c = idx % width;
      area += 1;
      sum += pixels[idx];
      if (pixels[idx] > peak) peak = pixels[idx];
      if (r < rowMin) rowMin = r;
      if (r > rowMax) rowMax = r;
      if (c < colMin) colMin = c;
      if (c > colMax) colMax = c;
      const neighbors = [idx - width, idx + width, c > 0 ? idx - 1 : -1, c < width - 1 ? idx + 1 : -1];
      for (const n of neighbors) {
        if (n >= 0 && n < pixels.length && labels[n] === -1 && pixels[n] >= supportLevel) {
          labels[n] = label;
          stack.push(n);
        }
      }
    }
    if (area >= params.minArea && (peak >= seedLevel || peak >= floorSeedLevel)) {
      const denom = Math.max(max - median, 1);
      const confidence = Math.max(0, Math.min(1, (sum / area - median) / denom));
      boxes.push({ rowMin, rowMax, colMin, colMax, confidence });
    }
  }
  boxes.sort((a, b) => b.confidence - a.confidence);
  return boxes;
}
