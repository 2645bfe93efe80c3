/** Class colours shared by overlay fills, contours, and click markers.
 * Index 0 (background) only ever paints markers, never overlay fill. */
export const CLASS_COLORS: Array<[number, number, number]> = [
  [90, 90, 90], // background clicks
  [230, 60, 60],
  [60, 120, 230],
  [60, 200, 120],
  [230, 200, 60],
];

export function classColor(classLabel: number): [number, number, number] {
  return CLASS_COLORS[classLabel % CLASS_COLORS.length];
}

export function cssColor(classLabel: number): string {
  const [r, g, b] = classColor(classLabel);
  return `rgb(${r}, ${g}, ${b})`;
}
