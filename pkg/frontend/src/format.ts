/** Display formatting driven by the schema; no numeric derivation beyond rounding. */

import type { AttributeInfo } from "./types.js";

/** Trim trailing zeros from a fixed-precision rendering ("659.40" -> "659.4"). */
function trimmed(value: number, precision: number): string {
  const text = value.toFixed(precision);
  return text.includes(".") ? text.replace(/\.?0+$/, "") : text;
}

/** Money-style rendering used across the grid: 659400 -> "659.4K". */
export function formatTarget(value: number, unit: string): string {
  const sign = value < 0 ? "-" : "";
  const magnitude = Math.abs(value);
  let body: string;
  if (magnitude >= 1_000_000) {
    body = `${trimmed(magnitude / 1_000_000, 2)}M`;
  } else if (magnitude >= 1_000) {
    body = `${trimmed(magnitude / 1_000, 1)}K`;
  } else {
    body = trimmed(magnitude, 1);
  }
  const prefix = unit === "$" ? "$" : "";
  const suffix = unit && unit !== "$" ? ` ${unit}` : "";
  return `${sign}${prefix}${body}${suffix}`;
}

export function formatDelta(value: number, unit: string): string {
  const rendered = formatTarget(Math.abs(value), unit);
  return `${value >= 0 ? "+" : "-"}${rendered.replace(/^-/, "")}`;
}

export function formatAttribute(
  value: number | string,
  attribute: AttributeInfo,
): string {
  if (typeof value === "string") {
    return value;
  }
  return trimmed(value, attribute.display_precision);
}

export function formatSimilarity(rho: number): string {
  return `${Math.round(rho * 100)}%`;
}
