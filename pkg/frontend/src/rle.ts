import type { RleMask } from "./types.js";

/** Decode a row-major run-length mask into a flat class array. */
export function decodeRle(mask: RleMask): Uint8Array {
  const [height, width] = mask.shape;
  const out = new Uint8Array(height * width);
  let pos = 0;
  for (const [value, length] of mask.runs) {
    if (length < 0) throw new Error("negative run length");
    out.fill(value, pos, pos + length);
    pos += length;
  }
  if (pos !== height * width) {
    throw new Error(`RLE covers ${pos} pixels, raster has ${height * width}`);
  }
  return out;
}

/** Inverse of decodeRle; used by round-trip tests. */
export function encodeRle(labels: Uint8Array, height: number, width: number): RleMask {
  if (labels.length !== height * width) {
    throw new Error("labels length does not match shape");
  }
  const runs: Array<[number, number]> = [];
  let i = 0;
  while (i < labels.length) {
    const value = labels[i];
    let j = i + 1;
    while (j < labels.length && labels[j] === value) j++;
    runs.push([value, j - i]);
    i = j;
  }
  return { v: 1, shape: [height, width], runs };
}
