/** NDJSON loss-event stream reader. */

import type { LossEvent } from "./api.js";

/**
 * Consume an NDJSON body, invoking onEvent per parsed line. Resolves
 * when the stream ends; malformed lines are skipped.
 */
export async function readEventStream(
  body: ReadableStream<Uint8Array>,
  onEvent: (event: LossEvent) => void,
): Promise<number> {
  const reader = body.getReader();
  const decoder = new TextDecoder();
  let buffer = "";
  let count = 0;

  const emit = (line: string) => {
    const trimmed = line.trim();
    if (!trimmed) return;
    try {
      const parsed = JSON.parse(trimmed) as LossEvent;
      if (typeof parsed.round === "number" && typeof parsed.loss === "number") {
        count += 1;
        onEvent(parsed);
      }
    } catch {
      // skip malformed line
    }
  };

  for (;;) {
    const { done, value } = await reader.read();
    if (done) break;
    buffer += decoder.decode(value, { stream: true });
    let newline = buffer.indexOf("\n");
    while (newline >= 0) {
      emit(buffer.slice(0, newline));
      buffer = buffer.slice(newline + 1);
      newline = buffer.indexOf("\n");
    }
  }
  emit(buffer);
  return count;
}
