import { classColor } from "./palette.js";

/** True where a pixel touches a 4-neighbour with a different class. */
export function contour(labels: Uint8Array, height: number, width: number): Uint8Array {
  const edge = new Uint8Array(height * width);
  for (let r = 0; r < height; r++) {
    for (let c = 0; c < width; c++) {
      const i = r * width + c;
      const v = labels[i];
      if (v === 0) continue;
      if (
        (r > 0 && labels[i - width] !== v) ||
        (r + 1 < height && labels[i + width] !== v) ||
        (c > 0 && labels[i - 1] !== v) ||
        (c + 1 < width && labels[i + 1] !== v)
      ) {
        edge[i] = 1;
      }
    }
  }
  return edge;
}

/** Translucent per-class fill plus an opaque contour line, as RGBA bytes. */
export function overlayPixels(
  labels: Uint8Array,
  height: number,
  width: number,
  fillAlpha = 96,
): Uint8ClampedArray {
  const rgba = new Uint8ClampedArray(height * width * 4);
  const edge = contour(labels, height, width);
  for (let i = 0; i < labels.length; i++) {
    const v = labels[i];
    if (v === 0) continue;
    const [r, g, b] = classColor(v);
    rgba[i * 4] = r;
    rgba[i * 4 + 1] = g;
    rgba[i * 4 + 2] = b;
    rgba[i * 4 + 3] = edge[i] ? 255 : fillAlpha;
  }
  return rgba;
}
