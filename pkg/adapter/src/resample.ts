import { GrayImage } from "./codec";

/**
 * Nearest-neighbor resample with the protocol's floor convention:
 * src_index = floor(dst_index * src_dim / dst_dim), per axis.
 */
export function resampleNearest(src: GrayImage, width: number, height: number): GrayImage {
  const pixels = new Uint8Array(width * height);
  for (let r = 0; r < height; r++) {
    const sr = Math.floor((r * src.height) / height);
    for (let c = 0; c < width; c++) {
      const sc = Math.floor((c * src.width) / width);
      pixels[r * width + c] = src.pixels[sr * src.width + sc];
    }
  }
  return { width, height, pixels };
}

/** Clamp a mask strictly to the protocol's 0/255 alphabet. */
export function binarize(image: GrayImage): GrayImage {
  const pixels = new Uint8Array(image.pixels.length);
  for (let i = 0; i < pixels.length; i++) {
    pixels[i] = image.pixels[i] !== 0 ? 255 : 0;
  }
  return { width: image.width, height: image.height, pixels };
}
