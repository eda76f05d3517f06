// Minimal SSE reader over fetch + ReadableStream. Works in browsers and
// node alike (no EventSource dependency), which lets the tests exercise
// the exact code the page runs.

export interface SseMessage {
  id?: string;
  event?: string;
  data: string;
}

export class SseParser {
  private buffer = "";
  private current: { id?: string; event?: string; data: string[] } = { data: [] };

  /** Feed a chunk of text; returns every complete message it closed. */
  push(chunk: string): SseMessage[] {
    this.buffer += chunk;
    const out: SseMessage[] = [];
    for (;;) {
      const nl = this.buffer.indexOf("\n");
      if (nl < 0) {
        break;
      }
      const line = this.buffer.slice(0, nl).replace(/\r$/, "");
      this.buffer = this.buffer.slice(nl + 1);
      if (line === "") {
        if (this.current.data.length > 0) {
          out.push({
            id: this.current.id,
            event: this.current.event,
            data: this.current.data.join("\n"),
          });
        }
        this.current = { data: [] };
      } else if (line.startsWith(":")) {
        // comment / keep-alive
      } else {
        const colon = line.indexOf(":");
        const field = colon < 0 ? line : line.slice(0, colon);
        let value = colon < 0 ? "" : line.slice(colon + 1);
        if (value.startsWith(" ")) {
          value = value.slice(1);
        }
        if (field === "id") {
          this.current.id = value;
        } else if (field === "event") {
          this.current.event = value;
        } else if (field === "data") {
          this.current.data.push(value);
        }
      }
    }
    return out;
  }
}

export interface SseConnection {
  messages: AsyncGenerator<SseMessage>;
  abort: () => void;
}

/** Open one SSE connection; the generator ends when the stream closes. */
export function openSse(url: string, lastEventId?: string): SseConnection {
  const controller = new AbortController();
  const headers: Record<string, string> = { Accept: "text/event-stream" };
  if (lastEventId !== undefined) {
    headers["Last-Event-ID"] = lastEventId;
  }

  async function* generate(): AsyncGenerator<SseMessage> {
    const resp = await fetch(url, { headers, signal: controller.signal });
    if (!resp.ok || resp.body === null) {
      throw new Error(`stream failed: HTTP ${resp.status}`);
    }
    const reader = resp.body.getReader();
    const decoder = new TextDecoder();
    const parser = new SseParser();
    try {
      for (;;) {
        const { done, value } = await reader.read();
        if (done) {
          return;
        }
        for (const message of parser.push(decoder.decode(value, { stream: true }))) {
          yield message;
        }
      }
    } finally {
      reader.releaseLock();
    }
  }

  return { messages: generate(), abort: () => controller.abort() };
}
