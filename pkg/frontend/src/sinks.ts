import { EventSink, NewsletterLayout, layoutToJson } from "./types";

export interface HttpSinkOptions {
  /** injectable for tests; defaults to global fetch */
  fetchFn?: typeof fetch;
}

/**
 * POSTs layout JSON to <base>/layout and event JSONL batches to
 * <base>/events with an X-Idempotency-Key header, matching the backend
 * contract documented in the analysis package.
 */
export class HttpSink implements EventSink {
  private readonly fetchFn: typeof fetch;

  constructor(private readonly baseUrl: string, options: HttpSinkOptions = {}) {
    this.fetchFn = options.fetchFn ?? fetch;
  }

  async deliverLayout(layout: NewsletterLayout): Promise<void> {
    const response = await this.fetchFn(`${this.baseUrl}/layout`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: layoutToJson(layout),
    });
    if (!response.ok) throw new Error(`layout delivery failed: ${response.status}`);
  }

  async deliverEvents(jsonl: string, idempotencyKey: string): Promise<void> {
    const response = await this.fetchFn(`${this.baseUrl}/events`, {
      method: "POST",
      headers: {
        "Content-Type": "application/x-ndjson",
        "X-Idempotency-Key": idempotencyKey,
      },
      body: jsonl,
    });
    if (!response.ok) throw new Error(`event delivery failed: ${response.status}`);
  }
}

/** Collects everything in memory; the browser wiring turns the result into
 * file downloads, tests read it directly. */
export class CollectingSink implements EventSink {
  layout: NewsletterLayout | null = null;
  batches: { jsonl: string; key: string }[] = [];

  async deliverLayout(layout: NewsletterLayout): Promise<void> {
    this.layout = layout;
  }

  async deliverEvents(jsonl: string, idempotencyKey: string): Promise<void> {
    this.batches.push({ jsonl, key: idempotencyKey });
  }

  eventsJsonl(): string {
    return this.batches.map((b) => b.jsonl).join("");
  }
}
