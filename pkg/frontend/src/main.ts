// Browser wire-up: one controller per page, server push merged into the
// state via the event subscription, DOM events mapped to controller calls.

import { ApiClient } from "./api.js";
import { ConsoleController } from "./controller.js";
import { applyFeedEvents } from "./state.js";
import { subscribe } from "./sse.js";
import { render } from "./ui.js";

function value(id: string): string {
  return (document.getElementById(id) as HTMLInputElement).value.trim();
}

function main(): void {
  const api = new ApiClient(
    (document.getElementById("server-url") as HTMLInputElement)?.value ||
      window.location.origin,
  );
  const controller = new ConsoleController(api);
  controller.onChange(render);

  let feed: { close(): void } | null = null;

  document.getElementById("start-form")!.addEventListener("submit", async (event) => {
    event.preventDefault();
    try {
      await controller.startIncident({
        problem_nature_type: value("dispatch-type") || undefined,
        problem_nature: value("dispatch-nature") || undefined,
        gender: value("dispatch-gender") || undefined,
        comment: value("dispatch-comment") || undefined,
      });
      feed?.close();
      feed = subscribe(api, controller.state.sessionId!, controller.state.nextSeq,
        (events) => {
          controller.state = applyFeedEvents(controller.state, events);
          render(controller.state);
        });
    } catch (error) {
      alert(`could not start incident: ${(error as Error).message}`);
    }
  });

  document.getElementById("line-form")!.addEventListener("submit", async (event) => {
    event.preventDefault();
    const line = value("line-input");
    if (!line) {
      return;
    }
    try {
      await controller.submitTranscriptLine(line);
      (document.getElementById("line-input") as HTMLInputElement).value = "";
    } catch (error) {
      alert(`line rejected: ${(error as Error).message}`);
    }
  });

  document.getElementById("poll-reminders")!.addEventListener("click", () => {
    const now = Number(value("clock-input") || controller.clock);
    void controller.pollReminders(now);
  });

  document.getElementById("alerts-panel")!.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const ack = target.getAttribute("data-ack");
    if (ack) {
      void controller.acknowledgeReminder(ack);
    }
  });

  document.getElementById("form-panel")!.addEventListener("change", (event) => {
    const target = event.target as HTMLInputElement;
    const field = target.getAttribute("data-field");
    if (field) {
      controller.editField(field, target.value);
    }
  });

  document.getElementById("confirm-button")!.addEventListener("click", async () => {
    const result = await controller.reviewAndConfirm().catch((error) => {
      alert(`confirm failed: ${(error as Error).message}`);
      return null;
    });
    if (result?.errors) {
      alert(
        "fix these fields first:\n" +
          Object.entries(result.errors)
            .map(([field, message]) => `${field}: ${message}`)
            .join("\n"),
      );
    }
  });

  render(controller.state);
}

main();
