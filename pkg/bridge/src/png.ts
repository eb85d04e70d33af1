/** PNG loading for the detector input, reduced to grayscale. */
import * as fs from 'node:fs';
import { PNG } from 'pngjs';
import { GrayImage } from './stubDetector';

export function loadGrayPng(path: string): GrayImage {
  const png = PNG.sync.read(fs.readFileSync(path));
  const { width, height, data } = png; // RGBA
  const pixels = new Uint8Array(width * height);
  for (let i = 0; i < width * height; i++) {
    // luma approximation is fine: exported TFIs are gray or viridis
    const r = data[4 * i], g = data[4 * i + 1], b = data[4 * i + 2];
    pixels[i] = Math.round(0.299 * r + 0.587 * g + 0.114 * b);
  }
  return { width, height, pixels };
}
