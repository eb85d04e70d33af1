/**
 * Wire schemas shared with the signal pipeline: the boxes JSON contract
 * and the TFI axis-mapping sidecar written next to every exported PNG.
 */
import { z } from 'zod';

export const BoundingBoxSchema = z.object({
  t_min_s: z.number(),
  t_max_s: z.number(),
  f_min_hz: z.number(),
  f_max_hz: z.number(),
  confidence: z.number().min(0).max(1),
  label: z.string(),
}).refine((b) => b.t_min_s < b.t_max_s && b.f_min_hz < b.f_max_hz, {
  message: 'box must have positive extent in both axes',
});

export const BoxesFileSchema = z.object({
  boxes: z.array(BoundingBoxSchema),
});

export const SidecarSchema = z.object({
  num_rows: z.number().int().positive(),
  num_cols: z.number().int().positive(),
  time_of_col0_s: z.number(),
  time_step_s: z.number().positive(),
  freq_of_row0_hz: z.number(),
  freq_step_hz: z.number().negative(), // rows run top (high freq) to bottom
  sample_rate_hz: z.number().positive(),
  fft_size: z.number().int().positive(),
  hop_samples: z.number().int().positive(),
});

export type BoundingBox = z.infer<typeof BoundingBoxSchema>;
export type BoxesFile = z.infer<typeof BoxesFileSchema>;
export type Sidecar = z.infer<typeof SidecarSchema>;

/** Axis-aligned rectangle in pixel coordinates (inclusive bounds). */
export interface PixelBox {
  rowMin: number;
  rowMax: number;
  colMin: number;
  colMax: number;
  confidence: number;
}
