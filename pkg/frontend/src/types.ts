/** Shapes of the documents served by the explanation API. */

export interface AttributeInfo {
  name: string;
  kind: "numeric" | "categorical";
  unit: string;
  levels: string[];
  display_precision: number;
}

export interface ExplanationSchema {
  attributes: AttributeInfo[];
  target_name: string;
  target_unit: string;
}

export interface SubjectDoc {
  id: string | null;
  attributes: Record<string, number | string>;
  actual_value: number | null;
  ai_prediction: number;
}

export interface ComparableDoc {
  id: string | null;
  attributes: Record<string, number | string>;
  actual_value: number;
  ai_prediction: number;
  prediction_error: string;
  similarity: number;
  distance: number;
}

export interface EstimateDoc {
  value: number;
  bounds: [number, number];
  approximate: boolean;
}

export interface AttributeChange {
  attribute: string;
  from: number | string;
  to: number | string;
}

export interface TraceStepDoc {
  changed_attributes: AttributeChange[];
  money_delta: number;
  running_value: number;
}

export interface TraceStepsDoc {
  steps: TraceStepDoc[];
  final_adjusted_value: number;
  anchor_value: number;
}

export interface TraceDetailDoc {
  steps: TraceStepsDoc;
  loss: Record<string, unknown>;
  trace: Record<string, unknown>;
}

export interface RegressionFactor {
  attribute: string;
  weight: number[];
  contribution: number;
}

export interface AdjustmentDeltaDoc {
  attribute: string;
  from: number | string;
  to: number | string;
  money_delta: number;
}

export interface AdjustmentBreakdownDoc {
  deltas: AdjustmentDeltaDoc[];
  total_adjustment: number;
  adjusted_value: number;
  anchor_value: number;
}

export interface ExplanationDocument {
  method: string;
  seed: number;
  k: number;
  schema: ExplanationSchema;
  subject: SubjectDoc;
  comparables: ComparableDoc[];
  estimate: EstimateDoc;
  prediction_estimate: { value: number; bounds: [number, number] };
  detail: {
    weights?: number[];
    values?: number[];
    weighted_terms?: number[];
    factors?: RegressionFactor[];
    bias?: number;
    breakdowns?: AdjustmentBreakdownDoc[];
    traces?: TraceDetailDoc[];
  };
}

export interface DecisionMetrics {
  mean_error_log: number;
  credible_interval_log: number;
  density: number;
  zero_error_floored: boolean;
}

export interface ResponseFeedback {
  actual: number;
  within: boolean;
  too_wide: boolean;
}

export interface ScoredResponse {
  session: string;
  case: string;
  y_min: number;
  y_max: number;
  metrics: DecisionMetrics;
  feedback?: ResponseFeedback;
}
