// Push-channel consumers: the browser uses the server-sent event stream,
// anything without EventSource (tests, node) falls back to long polling.

import type { ApiClient } from "./api.js";
import type { FeedEvent } from "./types.js";

export type FeedHandler = (events: FeedEvent[]) => void;

export interface FeedSubscription {
  close(): void;
}

export function subscribeStream(
  baseUrl: string,
  sessionId: string,
  since: number,
  onEvents: FeedHandler,
): FeedSubscription {
  const source = new EventSource(
    `${baseUrl}/sessions/${sessionId}/events/stream?since=${since}`,
  );
  source.onmessage = (message: MessageEvent) => {
    try {
      onEvents([JSON.parse(message.data as string) as FeedEvent]);
    } catch {
      // malformed frames are dropped; the next poll resynchronises
    }
  };
  return { close: () => source.close() };
}

export function subscribeLongPoll(
  api: ApiClient,
  sessionId: string,
  since: number,
  onEvents: FeedHandler,
  waitSeconds = 2,
): FeedSubscription {
  let cursor = since;
  let closed = false;

  const loop = async () => {
    while (!closed) {
      try {
        const batch = await api.pollEvents(sessionId, cursor, waitSeconds);
        if (closed) {
          return;
        }
        if (batch.events.length > 0) {
          cursor = batch.next;
          onEvents(batch.events);
        }
      } catch {
        await new Promise((resolve) => setTimeout(resolve, 500));
      }
    }
  };
  void loop();
  return {
    close: () => {
      closed = true;
    },
  };
}

export function subscribe(
  api: ApiClient,
  sessionId: string,
  since: number,
  onEvents: FeedHandler,
): FeedSubscription {
  if (typeof EventSource !== "undefined") {
    return subscribeStream(api.baseUrl, sessionId, since, onEvents);
  }
  return subscribeLongPoll(api, sessionId, since, onEvents);
}
