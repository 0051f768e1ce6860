// Thin fetch client for the incident-session service. The console never
// computes extraction or recommendation logic itself; everything rendered
// comes back from these calls.

import type {
  ApiErrorBody,
  ConfirmResponse,
  DispatchInfo,
  EventBatch,
  PatchFormFields,
  ReminderView,
  SessionCreated,
  TranscriptResponse,
} from "./types.js";

export class ApiError extends Error {
  readonly code: ApiErrorBody["code"];
  readonly fields: Record<string, string>;
  readonly status: number;

  constructor(status: number, body: ApiErrorBody) {
    super(body.message);
    this.status = status;
    this.code = body.code;
    this.fields = body.fields ?? {};
  }
}

async function parseError(response: Response): Promise<never> {
  let body: ApiErrorBody;
  try {
    body = (await response.json()) as ApiErrorBody;
  } catch {
    body = { code: "bad_request", message: `HTTP ${response.status}` };
  }
  throw new ApiError(response.status, body);
}

export class ApiClient {
  constructor(readonly baseUrl: string) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await fetch(`${this.baseUrl}${path}`, {
      method,
      headers: body === undefined ? undefined : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      await parseError(response);
    }
    return (await response.json()) as T;
  }

  health(): Promise<{ status: string; simulated_clock: boolean }> {
    return this.request("GET", "/health");
  }

  createSession(dispatch: DispatchInfo): Promise<SessionCreated> {
    return this.request("POST", "/sessions", dispatch);
  }

  submitTranscript(sessionId: string, line: string, time: number): Promise<TranscriptResponse> {
    return this.request("POST", `/sessions/${sessionId}/transcript`, { line, time });
  }

  getPatchForm(sessionId: string): Promise<PatchFormFields> {
    return this.request("GET", `/sessions/${sessionId}/patch-form`);
  }

  pollReminders(sessionId: string, now: number): Promise<{ due: ReminderView[]; reminders: ReminderView[] }> {
    return this.request("GET", `/sessions/${sessionId}/reminders?now=${now}`);
  }

  acknowledgeReminder(sessionId: string, reminderId: string): Promise<{ reminder: ReminderView }> {
    return this.request("POST", `/sessions/${sessionId}/reminders/${reminderId}/ack`);
  }

  pollEvents(sessionId: string, since: number, timeoutSeconds = 0): Promise<EventBatch> {
    return this.request(
      "GET",
      `/sessions/${sessionId}/events?since=${since}&timeout=${timeoutSeconds}`,
    );
  }

  confirmEpcr(sessionId: string, fields: PatchFormFields): Promise<ConfirmResponse> {
    return this.request("POST", `/sessions/${sessionId}/epcr/confirm`, { fields });
  }

  matchOcr(sessionId: string, text: string): Promise<Record<string, unknown>> {
    return this.request("POST", `/sessions/${sessionId}/ocr`, { text });
  }

  lookupPlacard(sessionId: string, number: string): Promise<Record<string, unknown>> {
    return this.request("POST", `/sessions/${sessionId}/placard`, { number });
  }
}
