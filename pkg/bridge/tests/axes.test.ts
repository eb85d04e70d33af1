import { describe, expect, it } from 'vitest';
import { physicalToPixel, pixelToPhysical } from '../src/axes';
import { PixelBox, Sidecar } from '../src/schema';

const SC: Sidecar = {
  num_rows: 1024,
  num_cols: 778,
  time_of_col0_s: 5.12e-6,
  time_step_s: 2.56e-6,
  freq_of_row0_hz: 49_902_343.75,
  freq_step_hz: -97_656.25,
  sample_rate_hz: 100e6,
  fft_size: 1024,
  hop_samples: 256,
};

describe('pixel/physical mapping', () => {
  it('round-trips integer pixel boxes exactly', () => {
    const cases: PixelBox[] = [
      { rowMin: 0, rowMax: 10, colMin: 0, colMax: 5, confidence: 0.5 },
      { rowMin: 100, rowMax: 200, colMin: 30, colMax: 400, confidence: 1.0 },
      { rowMin: 1023, rowMax: 1023, colMin: 777, colMax: 777, confidence: 0.1 },
    ];
    for (const px of cases) {
      const back = physicalToPixel(pixelToPhysical(px, SC), SC);
      expect(back.rowMin).toBe(px.rowMin);
      expect(back.rowMax).toBe(px.rowMax);
      expect(back.colMin).toBe(px.colMin);
      expect(back.colMax).toBe(px.colMax);
    }
  });

  it('inverts physical boxes within one pixel', () => {
    const box = {
      t_min_s: 0.4e-3, t_max_s: 0.98e-3,
      f_min_hz: 2.3e6, f_max_hz: 17.7e6,
      confidence: 0.9, label: 'drone_broadcast',
    };
    const px = physicalToPixel(box, SC);
    const round = pixelToPhysical(px, SC);
    expect(Math.abs(round.t_min_s - box.t_min_s)).toBeLessThanOrEqual(SC.time_step_s);
    expect(Math.abs(round.t_max_s - box.t_max_s)).toBeLessThanOrEqual(SC.time_step_s);
    expect(Math.abs(round.f_min_hz - box.f_min_hz)).toBeLessThanOrEqual(-SC.freq_step_hz);
    expect(Math.abs(round.f_max_hz - box.f_max_hz)).toBeLessThanOrEqual(-SC.freq_step_hz);
  });

  it('orders frequencies despite the top-down row axis', () => {
    const phys = pixelToPhysical({ rowMin: 10, rowMax: 50, colMin: 0, colMax: 1, confidence: 1 }, SC);
    expect(phys.f_min_hz).toBeLessThan(phys.f_max_hz);
  });
});
