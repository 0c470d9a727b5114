/** Wire types for the annotation service.
 *
 * Every position on the wire is a character offset into the document
 * text; the server converts to token spans and rejects ranges that do
 * not line up with token boundaries.
 */

export type TaskName =
  | "sequence_labeling"
  | "relation_extraction"
  | "sentiment_analysis";

export interface LabelInfo {
  name: string;
  shortcut_key: string;
  color: string;
}

export interface ProjectInfo {
  project_id: string;
  name: string;
  task: TaskName;
  labels: LabelInfo[];
}

export interface Token {
  text: string;
  start: number;
  end: number;
}

/** Char range as sent in a submission. */
export interface CharSpan {
  start: number;
  end: number;
}

/** Char range as echoed back by the server, with the covered text. */
export interface EchoSpan extends CharSpan {
  text: string;
}

export type ExplanationPayload =
  | { variant: "trigger"; trigger_spans: CharSpan[] }
  | { variant: "natural_language"; nl_text: string };

export type AnnotationKind = "span" | "relation" | "class";

/** The `annotation` object inside a POST /annotations body. */
export interface AnnotationDraft {
  id: string;
  kind: AnnotationKind;
  label: string;
  span?: CharSpan;
  subj?: CharSpan;
  obj?: CharSpan;
  aspect?: CharSpan;
  explanation?: ExplanationPayload;
}

export interface SubmitBody {
  doc_id: string;
  request_id?: string;
  annotation: AnnotationDraft;
}

export type EchoExplanation =
  | { variant: "trigger"; trigger_spans: EchoSpan[] }
  | { variant: "natural_language"; nl_text: string };

export interface AnnotationEcho {
  id: string;
  doc_id: string;
  kind: AnnotationKind;
  label: string;
  span: EchoSpan | null;
  subj: EchoSpan | null;
  obj: EchoSpan | null;
  aspect: EchoSpan | null;
  explanation: EchoExplanation | null;
  source: "human" | "weak" | "model";
  provenance: Record<string, string>;
}

export interface TickReport {
  parsed_forms: number;
  failures: [string, string][];
  weak_labels: number;
  trigger_count: number;
  snapshot_version: number;
  no_op: boolean;
}

export interface SubmitResponse {
  annotation: AnnotationEcho;
  training: TickReport | null;
}

export interface DocSummary {
  id: string;
  text: string;
  annotated: boolean;
}

export interface DocDetail {
  id: string;
  text: string;
  tokens: Token[];
  annotations: AnnotationEcho[];
}

export type Recommendation =
  | {
      kind: "span";
      label: string;
      char_start: number;
      char_end: number;
      text: string;
      confidence: number;
    }
  | {
      kind: "relation";
      label: string;
      confidence: number;
      subj: [number, number];
      obj: [number, number];
    }
  | { kind: "class"; label: string; confidence: number };

export interface RecommendationsResponse {
  recommendations: Recommendation[];
  snapshot_version: number;
}

export interface PredicateInfo {
  name: string;
  category: string;
  arity: number;
  surface_forms: string[];
  example: string;
}

export interface StatusResponse {
  snapshot_version: number;
  documents: number;
  gold_annotations: number;
  weak_labels: number;
  pending_changes: boolean;
  trigger_count: number;
  queue_depth: number;
  last_tick: TickReport | null;
}

/** 400 body: {"detail": {"violations": [...]}} */
export interface ViolationDetail {
  violations: string[];
}
