/**
 * Pixel <-> physical coordinate mapping. The sidecar describes pixel
 * CENTERS, so cell edges sit half a pixel outside the center grid; the
 * mapping round-trips exactly on integer pixel boxes.
 */
import { BoundingBox, PixelBox, Sidecar } from './schema';

export function pixelToPhysical(px: PixelBox, sc: Sidecar, label = 'drone_broadcast'): BoundingBox {
  const tMin = sc.time_of_col0_s + (px.colMin - 0.5) * sc.time_step_s;
  const tMax = sc.time_of_col0_s + (px.colMax + 0.5) * sc.time_step_s;
  // freq_step is negative: smaller row index means higher frequency
  const fHi = sc.freq_of_row0_hz + (px.rowMin - 0.5) * sc.freq_step_hz;
  const fLo = sc.freq_of_row0_hz + (px.rowMax + 0.5) * sc.freq_step_hz;
  return {
    t_min_s: tMin,
    t_max_s: tMax,
    f_min_hz: Math.min(fLo, fHi),
    f_max_hz: Math.max(fLo, fHi),
    confidence: px.confidence,
    label,
  };
}

export function physicalToPixel(box: BoundingBox, sc: Sidecar): PixelBox {
  const colMin = Math.round((box.t_min_s - sc.time_of_col0_s) / sc.time_step_s + 0.5);
  const colMax = Math.round((box.t_max_s - sc.time_of_col0_s) / sc.time_step_s - 0.5);
  const rowMin = Math.round((box.f_max_hz - sc.freq_of_row0_hz) / sc.freq_step_hz + 0.5);
  const rowMax = Math.round((box.f_min_hz - sc.freq_of_row0_hz) / sc.freq_step_hz - 0.5);
  const clamp = (v: number, hi: number) => Math.max(0, Math.min(hi, v));
  return {
    rowMin: clamp(Math.min(rowMin, rowMax), sc.num_rows - 1),
    rowMax: clamp(Math.max(rowMin, rowMax), sc.num_rows - 1),
    colMin: clamp(Math.min(colMin, colMax), sc.num_cols - 1),
    colMax: clamp(Math.max(colMin, colMax), sc.num_cols - 1),
    confidence: box.confidence,
  };
}
