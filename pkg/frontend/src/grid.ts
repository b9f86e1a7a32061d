/** The sales-comparison decision grid: subject and comparable columns with
 * similarity, AI prediction and error rows, the reconciled "approximately"
 * estimate with its arithmetic tooltip, and expandable trace step columns.
 *
 * Every number displayed comes straight from the explanation document; the
 * grid formats but never derives.
 */

import { formatAttribute, formatDelta, formatSimilarity, formatTarget } from "./format.js";
import type { ComparableDoc, ExplanationDocument, TraceStepsDoc } from "./types.js";

export interface GridController {
  root: HTMLElement;
  expandTrace(comparableIndex: number): void;
  collapseTrace(comparableIndex: number): void;
  isExpanded(comparableIndex: number): boolean;
  columnCount(): number;
}

function el(tag: string, className?: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function malformed(doc: unknown): string | null {
  const d = doc as ExplanationDocument;
  if (!d || typeof d !== "object") return "document is not an object";
  if (!d.schema || !Array.isArray(d.schema.attributes)) return "missing schema";
  if (!Array.isArray(d.comparables)) return "missing comparables";
  if (!d.estimate || !Array.isArray(d.estimate.bounds)) return "missing estimate";
  if (!d.subject || typeof d.subject.attributes !== "object") return "missing subject";
  for (const comp of d.comparables) {
    if (typeof comp.similarity !== "number") return "comparable without similarity";
    if (typeof comp.actual_value !== "number") return "comparable without actual value";
  }
  return null;
}

/** "46% x 600K + 54% x 710K = 659.4K" from the served weights and values. */
export function estimateTooltip(doc: ExplanationDocument): string {
  const unit = doc.schema.target_unit;
  if (doc.method === "comparables" && doc.detail.weights && doc.detail.values) {
    const terms = doc.detail.weights.map(
      (w, i) =>
        `${formatSimilarity(w)} × ${formatTarget(doc.detail.values![i], unit)}`,
    );
    return `${terms.join(" + ")} = ${formatTarget(doc.estimate.value, unit)}`;
  }
  if (doc.method === "regression" && doc.detail.factors) {
    const terms = doc.detail.factors.map(
      (f) => `${f.attribute}: ${formatDelta(f.contribution, unit)}`,
    );
    terms.push(`bias: ${formatDelta(doc.detail.bias ?? 0, unit)}`);
    return `${terms.join(", ")} = ${formatTarget(doc.estimate.value, unit)}`;
  }
  const adjusted = adjustedValues(doc);
  if (adjusted) {
    const terms = doc.comparables.map(
      (comp, i) =>
        `${formatSimilarity(comp.similarity)} × ${formatTarget(adjusted[i], unit)}`,
    );
    return `${terms.join(" + ")} = ${formatTarget(doc.estimate.value, unit)}`;
  }
  return formatTarget(doc.estimate.value, unit);
}

function adjustedValues(doc: ExplanationDocument): number[] | null {
  if (doc.detail.breakdowns) {
    return doc.detail.breakdowns.map((b) => b.adjusted_value);
  }
  if (doc.detail.traces) {
    return doc.detail.traces.map((t) => t.steps.final_adjusted_value);
  }
  return null;
}

export function renderGrid(doc: ExplanationDocument): GridController {
  const root = el("div", "comparables-grid");
  const problem = malformed(doc);
  if (problem) {
    const panel = el("div", "grid-error-panel", `cannot render explanation: ${problem}`);
    root.appendChild(panel);
    return {
      root,
      expandTrace: () => undefined,
      collapseTrace: () => undefined,
      isExpanded: () => false,
      columnCount: () => 0,
    };
  }

  const unit = doc.schema.target_unit;
  const adjusted = adjustedValues(doc);
  const table = el("table", "grid-table");
  root.appendChild(table);

  const header = el("tr", "grid-header");
  header.appendChild(el("th", "corner", doc.schema.target_name));
  header.appendChild(el("th", "subject-col", "Subject"));
  doc.comparables.forEach((comp, i) => {
    const cell = el("th", "comparable-col", `Comparable ${i + 1}`);
    cell.dataset.comparable = String(i);
    if (doc.detail.traces) {
      const button = el("button", "expand-trace", "…");
      button.setAttribute("data-expand", String(i));
      cell.appendChild(button);
    }
    header.appendChild(cell);
  });
  table.appendChild(header);

  for (const attr of doc.schema.attributes) {
    const row = el("tr", "attribute-row");
    row.dataset.attribute = attr.name;
    row.appendChild(el("td", "attribute-name", attr.name));
    row.appendChild(
      el("td", "subject-value", formatAttribute(doc.subject.attributes[attr.name], attr)),
    );
    doc.comparables.forEach((comp, i) => {
      const cell = el("td", "comparable-value", formatAttribute(comp.attributes[attr.name], attr));
      cell.dataset.comparable = String(i);
      row.appendChild(cell);
    });
    table.appendChild(row);
  }

  const actualRow = el("tr", "actual-row");
  actualRow.appendChild(el("td", "row-label", `Actual ${doc.schema.target_name}`));
  const estimateCell = el("td", "estimate-cell");
  const approx = el("span", "approx-mark", "≈");
  approx.setAttribute("title", estimateTooltip(doc));
  estimateCell.appendChild(approx);
  estimateCell.appendChild(
    el("span", "estimate-value", ` ${formatTarget(doc.estimate.value, unit)}`),
  );
  actualRow.appendChild(estimateCell);
  doc.comparables.forEach((comp, i) => {
    const cell = el("td", "actual-value", formatTarget(comp.actual_value, unit));
    cell.dataset.comparable = String(i);
    actualRow.appendChild(cell);
  });
  table.appendChild(actualRow);

  const predictionRow = el("tr", "prediction-row");
  predictionRow.appendChild(el("td", "row-label", "AI Prediction"));
  predictionRow.appendChild(
    el("td", "subject-prediction", formatTarget(doc.subject.ai_prediction, unit)),
  );
  doc.comparables.forEach((comp, i) => {
    const cell = el("td", "comparable-prediction", formatTarget(comp.ai_prediction, unit));
    cell.dataset.comparable = String(i);
    cell.appendChild(el("span", "prediction-error-badge", ` (${comp.prediction_error})`));
    predictionRow.appendChild(cell);
  });
  table.appendChild(predictionRow);

  if (adjusted) {
    const adjRow = el("tr", "adjusted-row");
    adjRow.appendChild(el("td", "row-label", `Adjusted ${doc.schema.target_name}`));
    adjRow.appendChild(el("td", "subject-adjusted", ""));
    adjusted.forEach((value, i) => {
      const cell = el("td", "adjusted-value", formatTarget(value, unit));
      cell.dataset.comparable = String(i);
      adjRow.appendChild(cell);
    });
    table.appendChild(adjRow);
  }

  const similarityRow = el("tr", "similarity-row");
  similarityRow.appendChild(el("td", "row-label", "Similarity"));
  similarityRow.appendChild(el("td", "subject-similarity", ""));
  doc.comparables.forEach((comp, i) => {
    const cell = el("td", "similarity-badge", formatSimilarity(comp.similarity));
    cell.dataset.comparable = String(i);
    similarityRow.appendChild(cell);
  });
  table.appendChild(similarityRow);

  const expanded = new Set<number>();

  function stepColumns(comparableIndex: number): HTMLElement[] {
    const trace = doc.detail.traces?.[comparableIndex];
    if (!trace) return [];
    return buildStepColumns(doc, trace.steps, comparableIndex);
  }

  function expandTrace(i: number) {
    if (expanded.has(i) || !doc.detail.traces?.[i]) return;
    // snapshot cells before moving them out of their staging columns
    const columnCells = stepColumns(i).map(
      (column) => Array.from(column.children) as HTMLElement[],
    );
    const rows = Array.from(table.querySelectorAll("tr"));
    rows.forEach((row, rowIdx) => {
      let anchor: Element | null = row.querySelector(`[data-comparable="${i}"]`);
      if (!anchor) return;
      for (const cells of columnCells) {
        const cell = cells[rowIdx];
        if (!cell) break;
        anchor.after(cell);
        anchor = cell;
      }
    });
    expanded.add(i);
    table.dataset.expanded = Array.from(expanded).sort().join(",");
  }

  function collapseTrace(i: number) {
    if (!expanded.has(i)) return;
    table.querySelectorAll(`[data-step-of="${i}"]`).forEach((n) => n.remove());
    expanded.delete(i);
    table.dataset.expanded = Array.from(expanded).sort().join(",");
  }

  header.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const idx = target.getAttribute?.("data-expand");
    if (idx === null || idx === undefined) return;
    const i = Number(idx);
    if (expanded.has(i)) collapseTrace(i);
    else expandTrace(i);
  });

  return {
    root,
    expandTrace,
    collapseTrace,
    isExpanded: (i) => expanded.has(i),
    columnCount: () => header.children.length,
  };
}

/** One synthetic column per trace step plus the closing "approximately Subject"
 * column; each is a vertical strip of cells aligned with the table rows. */
function buildStepColumns(
  doc: ExplanationDocument,
  steps: TraceStepsDoc,
  comparableIndex: number,
): HTMLElement[] {
  const unit = doc.schema.target_unit;
  const columns: HTMLElement[] = [];
  const attributeStates: Record<string, number | string>[] = [];
  let state: Record<string, number | string> = {};
  for (const attr of doc.schema.attributes) {
    state[attr.name] = doc.comparables[comparableIndex].attributes[attr.name];
  }
  for (const step of steps.steps) {
    state = { ...state };
    for (const change of step.changed_attributes) {
      state[change.attribute] = change.to;
    }
    attributeStates.push(state);
  }

  steps.steps.forEach((step, stepIdx) => {
    const column = el("div");
    const head = el("th", "step-col", `${stepIdx + 1}`);
    head.dataset.stepOf = String(comparableIndex);
    const changedNames = new Set(step.changed_attributes.map((c) => c.attribute));
    if (changedNames.size === 0) {
      head.classList.add("no-change");
      head.appendChild(el("span", "no-change-marker", " (no change)"));
    }
    column.appendChild(head);
    for (const attr of doc.schema.attributes) {
      const cell = el(
        "td",
        changedNames.has(attr.name) ? "step-value changed" : "step-value",
        formatAttribute(attributeStates[stepIdx][attr.name], attr),
      );
      cell.dataset.stepOf = String(comparableIndex);
      if (changedNames.has(attr.name)) {
        cell.dataset.changed = attr.name;
      }
      column.appendChild(cell);
    }
    const moneyCell = el(
      "td",
      "step-running",
      `${formatTarget(step.running_value, unit)} (${formatDelta(step.money_delta, unit)})`,
    );
    moneyCell.dataset.stepOf = String(comparableIndex);
    column.appendChild(moneyCell);
    // prediction, adjusted, similarity rows get placeholders to stay aligned
    for (let i = 0; i < 3; i += 1) {
      const filler = el("td", "step-filler", "");
      filler.dataset.stepOf = String(comparableIndex);
      column.appendChild(filler);
    }
    columns.push(column);
  });

  const finalColumn = el("div");
  const head = el("th", "step-col subject-like", "≈ Subject");
  head.dataset.stepOf = String(comparableIndex);
  finalColumn.appendChild(head);
  for (const attr of doc.schema.attributes) {
    const cell = el(
      "td",
      "step-value",
      formatAttribute(doc.subject.attributes[attr.name], attr),
    );
    cell.dataset.stepOf = String(comparableIndex);
    finalColumn.appendChild(cell);
  }
  const finalMoney = el(
    "td",
    "step-running final",
    formatTarget(steps.final_adjusted_value, unit),
  );
  finalMoney.dataset.stepOf = String(comparableIndex);
  finalColumn.appendChild(finalMoney);
  for (let i = 0; i < 3; i += 1) {
    const filler = el("td", "step-filler", "");
    filler.dataset.stepOf = String(comparableIndex);
    finalColumn.appendChild(filler);
  }
  columns.push(finalColumn);
  return columns;
}
