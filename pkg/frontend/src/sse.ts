// Minimal text/event-stream consumer over fetch's ReadableStream, so the
// same code runs in the browser and under node for tests.

export interface SseMessage {
  event: string;
  data: string;
}

/** Incremental SSE line parser; feed arbitrary chunks, get whole messages. */
export class SseParser {
  private buffer = "";
  private event = "";
  private data: string[] = [];

  push(chunk: string): SseMessage[] {
    this.buffer += chunk;
    const out: SseMessage[] = [];
    for (;;) {
      const nl = this.buffer.indexOf("\n");
      if (nl < 0) break;
      let line = this.buffer.slice(0, nl);
      this.buffer = this.buffer.slice(nl + 1);
      if (line.endsWith("\r")) line = line.slice(0, -1);
      if (line === "") {
        if (this.event !== "" || this.data.length > 0) {
          out.push({ event: this.event || "message", data: this.data.join("\n") });
        }
        this.event = "";
        this.data = [];
      } else if (line.startsWith("event:")) {
        this.event = line.slice(6).trimStart();
      } else if (line.startsWith("data:")) {
        this.data.push(line.slice(5).trimStart());
      }
      // comment lines (":" prefix) and unknown fields are ignored
    }
    return out;
  }
}

export async function* sseMessages(
  stream: ReadableStream<Uint8Array>,
): AsyncGenerator<SseMessage> {
  const reader = stream.getReader();
  const decoder = new TextDecoder();
  const parser = new SseParser();
  try {
    for (;;) {
      const { value, done } = await reader.read();
      if (done) return;
      for (const msg of parser.push(decoder.decode(value, { stream: true }))) {
        yield msg;
      }
    }
  } finally {
    reader.releaseLock();
  }
}
