// Glue between the API client and the view-model. Every console action
// goes through the public HTTP API; the controller is what the browser
// page and the end-to-end tests both drive.

import { ApiClient, ApiError } from "./api.js";
import {
  applyConfirm,
  applyEdit,
  applyFeedEvents,
  applySessionCreated,
  applyTranscriptResponse,
  ConsoleState,
  formValues,
  initialState,
} from "./state.js";
import type { ConfirmResponse, DispatchInfo, PatchFormFields } from "./types.js";
import { maintainInvariants, validateForm } from "./validate.js";

export class ConsoleController {
  state: ConsoleState = initialState();
  /** simulated incident clock, advanced per submitted line */
  private clockSeconds = 0;
  private readonly listeners: Array<(state: ConsoleState) => void> = [];

  constructor(readonly api: ApiClient, readonly secondsPerLine = 10) {}

  onChange(listener: (state: ConsoleState) => void): void {
    this.listeners.push(listener);
  }

  private setState(state: ConsoleState): void {
    this.state = state;
    for (const listener of this.listeners) {
      listener(state);
    }
  }

  private requireSession(): string {
    if (!this.state.sessionId) {
      throw new Error("no active session");
    }
    return this.state.sessionId;
  }

  async startIncident(dispatch: DispatchInfo): Promise<void> {
    const created = await this.api.createSession({ time: 0, ...dispatch });
    this.clockSeconds = dispatch.time ?? 0;
    this.setState(applySessionCreated(this.state, created));
    await this.drainFeed();
  }

  async submitTranscriptLine(line: string): Promise<void> {
    const sessionId = this.requireSession();
    this.clockSeconds += this.secondsPerLine;
    const response = await this.api.submitTranscript(sessionId, line, this.clockSeconds);
    this.setState(applyTranscriptResponse(this.state, response));
    await this.drainFeed();
  }

  /** Pull pending push events and fold them into the panels. */
  async drainFeed(): Promise<void> {
    const sessionId = this.requireSession();
    const batch = await this.api.pollEvents(sessionId, this.state.nextSeq);
    this.setState(applyFeedEvents(this.state, batch.events));
  }

  /** Advance the simulated clock and let due reminders fire as alerts. */
  async pollReminders(now?: number): Promise<void> {
    const sessionId = this.requireSession();
    this.clockSeconds = Math.max(this.clockSeconds, now ?? this.clockSeconds);
    await this.api.pollReminders(sessionId, this.clockSeconds);
    await this.drainFeed();
  }

  async acknowledgeReminder(reminderId: string): Promise<void> {
    const sessionId = this.requireSession();
    await this.api.acknowledgeReminder(sessionId, reminderId);
    await this.drainFeed();
  }

  editField(field: string, value: string): void {
    this.setState(applyEdit(this.state, field, value));
  }

  /** Validate client-side, then confirm; returns field errors instead of
   * calling the network when the edited form breaks an invariant. */
  async reviewAndConfirm(
    edits: PatchFormFields = {},
  ): Promise<{ errors?: Record<string, string>; epcr?: ConfirmResponse }> {
    const sessionId = this.requireSession();
    let merged = { ...formValues(this.state), ...edits };
    merged = maintainInvariants(merged);
    const errors = validateForm(merged);
    if (Object.keys(errors).length > 0) {
      return { errors };
    }
    try {
      const confirmed = await this.api.confirmEpcr(sessionId, merged);
      this.setState(applyConfirm(this.state, confirmed.epcr));
      return { epcr: confirmed };
    } catch (error) {
      if (error instanceof ApiError && error.code === "conflict") {
        this.setState({ ...this.state, confirmed: true, banner: "session is locked" });
      }
      throw error;
    }
  }

  get clock(): number {
    return this.clockSeconds;
  }
}
