// Console view-model: a thin mirror of server responses. Reducers are
// pure so the panels can be driven headlessly in tests; nothing here
// recomputes extraction or recommendation logic.

import type {
  FeedEvent,
  PatchFormFields,
  Recommendation,
  ReminderView,
  SentenceClassification,
  SessionCreated,
  TranscriptResponse,
} from "./types.js";

export type Provenance = "extracted" | "edited";

export interface FieldView {
  value: string;
  provenance: Provenance;
}

export interface Alert {
  id: string;
  kind: "reminder" | "warning";
  text: string;
  reminder?: ReminderView;
}

export interface ConsoleState {
  sessionId: string | null;
  fields: Record<string, FieldView>;
  recommendation: Recommendation | null;
  alerts: Alert[];
  feed: FeedEvent[];
  nextSeq: number;
  classifications: SentenceClassification[];
  confirmed: boolean;
  epcrText: string | null;
  banner: string | null;
}

export function initialState(): ConsoleState {
  return {
    sessionId: null,
    fields: {},
    recommendation: null,
    alerts: [],
    feed: [],
    nextSeq: 0,
    classifications: [],
    confirmed: false,
    epcrText: null,
    banner: null,
  };
}

export function formValues(state: ConsoleState): PatchFormFields {
  const out: PatchFormFields = {};
  for (const [key, view] of Object.entries(state.fields)) {
    out[key] = view.value;
  }
  return out;
}

export function applySessionCreated(state: ConsoleState, created: SessionCreated): ConsoleState {
  return {
    ...initialState(),
    sessionId: created.id,
    recommendation: created.recommendation ?? null,
    banner: created.recommendation ? null : "more information needed",
  };
}

export function applyTranscriptResponse(
  state: ConsoleState,
  response: TranscriptResponse,
): ConsoleState {
  const fields = { ...state.fields };
  for (const [key, value] of Object.entries(response.patch_form_delta)) {
    fields[key] = { value, provenance: "extracted" };
  }
  return {
    ...state,
    fields,
    classifications: [...state.classifications, ...response.classification],
    recommendation: response.recommendation_update ?? state.recommendation,
  };
}

export function applyEdit(state: ConsoleState, field: string, value: string): ConsoleState {
  const fields = { ...state.fields };
  if (value === "") {
    delete fields[field];
  } else {
    fields[field] = { value, provenance: "edited" };
  }
  return { ...state, fields };
}

function reminderAlert(reminder: ReminderView): Alert {
  return {
    id: reminder.id,
    kind: "reminder",
    text: `${reminder.drug} ${reminder.dose_amount} ${reminder.dose_unit} ` +
      `${reminder.route} due at ${reminder.due_time}s`,
    reminder,
  };
}

export function applyFeedEvents(state: ConsoleState, events: FeedEvent[]): ConsoleState {
  if (events.length === 0) {
    return state;
  }
  let alerts = [...state.alerts];
  let recommendation = state.recommendation;
  let confirmed = state.confirmed;
  let nextSeq = state.nextSeq;
  for (const event of events) {
    nextSeq = Math.max(nextSeq, event.seq + 1);
    if (event.kind === "reminder_fired") {
      const reminder = event.payload as unknown as ReminderView;
      if (!alerts.some((a) => a.kind === "reminder" && a.id === reminder.id)) {
        alerts.push(reminderAlert(reminder));
      }
    } else if (event.kind === "reminder_acknowledged") {
      const id = String(event.payload.id);
      alerts = alerts.filter((a) => !(a.kind === "reminder" && a.id === id));
    } else if (event.kind === "warning") {
      alerts.push({
        id: `warning-${event.seq}`,
        kind: "warning",
        text: `${event.payload.material}: ${event.payload.guidance}`,
      });
    } else if (event.kind === "standing_order") {
      recommendation = event.payload as unknown as Recommendation;
    } else if (event.kind === "epcr_confirmed") {
      confirmed = true;
    }
  }
  return {
    ...state,
    alerts,
    recommendation,
    confirmed,
    nextSeq,
    feed: [...state.feed, ...events],
  };
}

export function dismissReminderAlert(state: ConsoleState, reminderId: string): ConsoleState {
  return {
    ...state,
    alerts: state.alerts.filter((a) => !(a.kind === "reminder" && a.id === reminderId)),
  };
}

export function applyConfirm(state: ConsoleState, epcrText: string): ConsoleState {
  return { ...state, confirmed: true, epcrText };
}

/** Confidence bars scaled to the tallest order, for rendering. */
export function recommendationBars(
  recommendation: Recommendation | null,
): Array<{ order: string; confidence: number; widthPercent: number }> {
  if (!recommendation) {
    return [];
  }
  const levels = recommendation.confidence_levels.map((level) => ({
    order: level.order,
    confidence: Number(level.confidence),
  }));
  const tallest = Math.max(...levels.map((l) => l.confidence), 1e-9);
  return levels.map((l) => ({
    ...l,
    widthPercent: Math.round((100 * l.confidence) / tallest),
  }));
}
