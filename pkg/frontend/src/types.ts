// Wire types mirroring the incident-session HTTP API.

export type PatchFormFields = Record<string, string>;

export interface ConfidenceLevel {
  order: string;
  confidence: string; // three-decimal string, ascending order in the list
}

export interface Recommendation {
  confidence_levels: ConfidenceLevel[];
  timestamp: string;
}

export interface DispatchInfo {
  problem_nature_type?: string;
  problem_nature?: string;
  gender?: string;
  comment?: string;
  age?: string;
  time?: number;
}

export interface SessionCreated {
  id: string;
  recommendation?: Recommendation;
}

export interface SentenceClassification {
  sentence: string;
  label: string;
}

export interface ReminderView {
  id: string;
  drug: string;
  dose_amount: number;
  dose_unit: string;
  route: string;
  due_time: number;
  status: "pending" | "fired" | "acknowledged";
}

export interface TranscriptResponse {
  classification: SentenceClassification[];
  patch_form_delta: PatchFormFields;
  new_reminders: ReminderView[];
  recommendation_update?: Recommendation;
}

export interface FeedEvent {
  seq: number;
  time: number;
  kind: string;
  payload: Record<string, unknown>;
}

export interface EventBatch {
  events: FeedEvent[];
  next: number;
}

export interface ApiErrorBody {
  code: "bad_request" | "not_found" | "insufficient_information" | "conflict";
  message: string;
  fields?: Record<string, string>;
}

export interface ConfirmResponse {
  epcr: string;
  sidecar: Record<string, unknown>;
}
