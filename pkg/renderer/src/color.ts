/** Fixed viridis-style colormap (piecewise-linear between anchor stops). */

const STOPS: [number, number, number][] = [
  [68, 1, 84],
  [72, 36, 117],
  [65, 68, 135],
  [53, 95, 141],
  [42, 120, 142],
  [33, 145, 140],
  [34, 168, 132],
  [68, 191, 112],
  [122, 209, 81],
  [189, 223, 38],
  [253, 231, 37],
];

export function viridis(value: number): string {
  const v = Math.min(1, Math.max(0, value));
  const pos = v * (STOPS.length - 1);
  const lo = Math.floor(pos);
  const hi = Math.min(STOPS.length - 1, lo + 1);
  const frac = pos - lo;
  const mix = STOPS[lo].map((c, i) => Math.round(c + frac * (STOPS[hi][i] - c)));
  return `rgb(${mix[0]},${mix[1]},${mix[2]})`;
}
