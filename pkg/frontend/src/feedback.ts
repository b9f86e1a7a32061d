/** Practice-mode feedback: within/outside verdict and the too-wide warning. */

import { formatTarget } from "./format.js";
import type { ScoredResponse } from "./types.js";

export function renderFeedback(result: ScoredResponse, targetUnit: string): HTMLElement {
  const panel = document.createElement("div");
  panel.className = "feedback-panel";
  if (!result.feedback) {
    panel.classList.add("feedback-none");
    panel.textContent = "Response recorded.";
    return panel;
  }
  const { actual, within, too_wide } = result.feedback;
  const verdict = document.createElement("div");
  verdict.className = within ? "verdict within" : "verdict outside";
  verdict.textContent = `${formatTarget(actual, targetUnit)} is ${
    within ? "within" : "outside"
  } your range`;
  panel.appendChild(verdict);
  if (too_wide) {
    const warning = document.createElement("div");
    warning.className = "too-wide-warning";
    warning.textContent =
      "Your selected range is too wide (beyond ±10% of the actual value).";
    panel.appendChild(warning);
  }
  return panel;
}
