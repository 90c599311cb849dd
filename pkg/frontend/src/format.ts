/**
 * Display formatting for service-provided values.
 *
 * This is the only module allowed to touch numbers before they reach the
 * DOM, and it only reformats them (fixed decimals, counts as-is); it never
 * aggregates, scales, or otherwise derives new figures.
 */

export function formatScore(value: number): string {
  return value.toFixed(2);
}

export function formatVolume(value: number): string {
  return `${value.toFixed(3)} mm³`;
}

export function formatCount(value: number): string {
  return String(value);
}

export function formatPercentile(value: number): string {
  return `p${String(value).replace(/\.0$/, "")}`;
}

export function formatBbox(bbox: { min: number[]; max: number[] } | null): string {
  if (!bbox) {
    return "n/a";
  }
  const point = (p: number[]) => `(${p.map((v) => v.toFixed(1)).join(", ")})`;
  return `${point(bbox.min)} to ${point(bbox.max)}`;
}
