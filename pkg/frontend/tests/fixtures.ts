import type { ExplanationDocument, TraceDetailDoc } from "../src/types.js";

/** Two-comparable fixture mirroring the worked weighted-average example:
 * 600K at 46% and 710K at 54% reconcile to 659.4K. */
export function comparablesDocument(): ExplanationDocument {
  return {
    method: "comparables",
    seed: 0,
    k: 2,
    schema: {
      attributes: [
        { name: "bathrooms", kind: "numeric", unit: "count", levels: [], display_precision: 1 },
        { name: "living_area", kind: "numeric", unit: "ksqft", levels: [], display_precision: 2 },
        { name: "condition", kind: "categorical", unit: "", levels: ["2", "3", "4", "5"], display_precision: 0 },
      ],
      target_name: "price",
      target_unit: "$",
    },
    subject: {
      id: "s",
      attributes: { bathrooms: 1.5, living_area: 0.91, condition: "4" },
      actual_value: null,
      ai_prediction: 504_600,
    },
    comparables: [
      {
        id: "c1",
        attributes: { bathrooms: 1.0, living_area: 1.18, condition: "3" },
        actual_value: 600_000,
        ai_prediction: 554_400,
        prediction_error: "7.6% lower",
        similarity: 0.46,
        distance: 1.2,
      },
      {
        id: "c2",
        attributes: { bathrooms: 2.0, living_area: 1.53, condition: "4" },
        actual_value: 710_000,
        ai_prediction: 630_000,
        prediction_error: "11.3% lower",
        similarity: 0.54,
        distance: 1.0,
      },
    ],
    estimate: { value: 659_400, bounds: [600_000, 710_000], approximate: true },
    prediction_estimate: { value: 595_224, bounds: [554_400, 630_000] },
    detail: {
      weights: [0.46, 0.54],
      values: [600_000, 710_000],
      weighted_terms: [276_000, 383_400],
    },
  };
}

export function traceDetail(): TraceDetailDoc {
  return {
    steps: {
      steps: [
        {
          changed_attributes: [{ attribute: "living_area", from: 1.18, to: 0.91 }],
          money_delta: -76_800,
          running_value: 523_200,
        },
        {
          changed_attributes: [{ attribute: "condition", from: "3", to: "4" }],
          money_delta: 2_800,
          running_value: 526_000,
        },
        {
          changed_attributes: [{ attribute: "bathrooms", from: 1.0, to: 1.5 }],
          money_delta: 44_700,
          running_value: 570_700,
        },
      ],
      final_adjusted_value: 570_700,
      anchor_value: 600_000,
    },
    loss: {},
    trace: {},
  };
}

/** Trace-method document: same grid plus expandable step details. */
export function traceDocument(): ExplanationDocument {
  const doc = comparablesDocument();
  doc.method = "trace";
  doc.detail = {
    traces: [
      traceDetail(),
      {
        steps: {
          steps: [
            {
              changed_attributes: [{ attribute: "living_area", from: 1.53, to: 0.91 }],
              money_delta: -98_700,
              running_value: 611_300,
            },
            {
              changed_attributes: [
                { attribute: "bathrooms", from: 2.0, to: 1.5 },
                { attribute: "condition", from: "4", to: "4" },
              ],
              money_delta: 51_000,
              running_value: 662_300,
            },
          ],
          final_adjusted_value: 662_300,
          anchor_value: 710_000,
        },
        loss: {},
        trace: {},
      },
    ],
  };
  doc.estimate = { value: 620_164, bounds: [570_700, 662_300], approximate: true };
  return doc;
}
