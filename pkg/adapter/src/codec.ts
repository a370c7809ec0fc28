/**
 * PNG helpers for the adapter: grayscale masks in and out, plus image
 * dimension probing. pngjs decodes everything to 8-bit RGBA internally.
 */

import { PNG } from "pngjs";

export interface GrayImage {
  width: number;
  height: number;
  /** row-major, one byte per pixel */
  pixels: Uint8Array;
}

export function decodeGray(buffer: Buffer): GrayImage {
  const png = PNG.sync.read(buffer);
  const pixels = new Uint8Array(png.width * png.height);
  for (let i = 0; i < pixels.length; i++) {
    pixels[i] = png.data[i * 4]; // R channel carries the gray value
  }
  return { width: png.width, height: png.height, pixels };
}

export function encodeGray(image: GrayImage): Buffer {
  const png = new PNG({ width: image.width, height: image.height });
  for (let i = 0; i < image.pixels.length; i++) {
    const v = image.pixels[i];
    png.data[i * 4] = v;
    png.data[i * 4 + 1] = v;
    png.data[i * 4 + 2] = v;
    png.data[i * 4 + 3] = 255;
  }
  return PNG.sync.write(png, { colorType: 0 }); // 8-bit grayscale output
}

export function imageSize(buffer: Buffer): { width: number; height: number } {
  const png = PNG.sync.read(buffer);
  return { width: png.width, height: png.height };
}

/** Encode an RGB raster (used by tests to fabricate query images). */
export function encodeRgb(width: number, height: number, rgb: Uint8Array): Buffer {
  const png = new PNG({ width, height });
  for (let i = 0; i < width * height; i++) {
    png.data[i * 4] = rgb[i * 3];
    png.data[i * 4 + 1] = rgb[i * 3 + 1];
    png.data[i * 4 + 2] = rgb[i * 3 + 2];
    png.data[i * 4 + 3] = 255;
  }
  return PNG.sync.write(png, { colorType: 2 }); // 8-bit RGB output
}
