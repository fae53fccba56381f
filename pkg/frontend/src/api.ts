import { sseMessages } from "./sse.js";
import type { JobState, ServerEvent } from "./types.js";

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(`${status}: ${detail}`);
  }
}

async function expectOk(res: Response): Promise<Response> {
  if (!res.ok) {
    let detail = res.statusText;
    try {
      const body = (await res.json()) as { detail?: string };
      if (body.detail) detail = body.detail;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(res.status, detail);
  }
  return res;
}

const EVENT_KINDS = new Set(["snapshot", "phase", "position", "job", "done"]);

// Short requests opt out of keep-alive: browsers strip the forbidden
// header, and under node it avoids reusing sockets the server may have
// idle-closed between user actions.
const SHORT_REQUEST_HEADERS = { connection: "close" };

/** Typed client for the control service. Every call hits a documented endpoint. */
export class ControlApi {
  constructor(readonly base: string) {}

  async home(): Promise<void> {
    await expectOk(
      await fetch(`${this.base}/home`, { method: "POST", headers: SHORT_REQUEST_HEADERS }),
    );
  }

  async write(text: string): Promise<string> {
    const res = await expectOk(
      await fetch(`${this.base}/jobs`, {
        method: "POST",
        headers: { "content-type": "application/json", ...SHORT_REQUEST_HEADERS },
        body: JSON.stringify({ text }),
      }),
    );
    const body = (await res.json()) as { id: string };
    return body.id;
  }

  async abort(jobId: string): Promise<void> {
    await expectOk(
      await fetch(`${this.base}/jobs/${jobId}`, {
        method: "DELETE",
        headers: SHORT_REQUEST_HEADERS,
      }),
    );
  }

  async job(jobId: string): Promise<JobState> {
    const res = await expectOk(
      await fetch(`${this.base}/jobs/${jobId}`, { headers: SHORT_REQUEST_HEADERS }),
    );
    return (await res.json()) as JobState;
  }

  async config(): Promise<Record<string, unknown>> {
    const res = await expectOk(
      await fetch(`${this.base}/config`, { headers: SHORT_REQUEST_HEADERS }),
    );
    return (await res.json()) as Record<string, unknown>;
  }

  async traceSvg(jobId: string): Promise<string> {
    const res = await expectOk(
      await fetch(`${this.base}/trace/${jobId}.svg`, { headers: SHORT_REQUEST_HEADERS }),
    );
    return res.text();
  }

  async *events(signal?: AbortSignal): AsyncGenerator<ServerEvent> {
    const res = await expectOk(await fetch(`${this.base}/events`, { signal }));
    if (!res.body) throw new ApiError(0, "event stream has no body");
    for await (const msg of sseMessages(res.body)) {
      if (!EVENT_KINDS.has(msg.event)) continue;
      yield { kind: msg.event, data: JSON.parse(msg.data) } as ServerEvent;
    }
  }
}
