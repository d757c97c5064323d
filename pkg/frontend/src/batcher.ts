import { Tracker } from "./tracker";
import { EventSink, InteractionEvent, NewsletterLayout, eventsToJsonl } from "./types";

export interface BatcherOptions {
  /** retry delays in ms; after the last one the fallback sink takes over */
  backoffMs?: number[];
  /** receives everything still undelivered once retries are exhausted
   * (the browser wiring points this at a file download) */
  fallback?: (jsonl: string) => void;
  /** injectable timer for tests */
  wait?: (ms: number) => Promise<void>;
}

const DEFAULT_BACKOFF = [100, 500, 2000];

const sleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

/**
 * Orders captured events into delivery batches. Delivery is at-least-once:
 * a batch is only dropped after the sink accepts it, and every retry of a
 * batch reuses the same idempotency key so the receiver can deduplicate.
 */
export class EventBatcher {
  private queue: InteractionEvent[] = [];
  private inFlight: { jsonl: string; key: string } | null = null;
  private seq = 0;
  private layoutSent = false;
  private readonly backoff: number[];
  private readonly wait: (ms: number) => Promise<void>;

  constructor(
    private readonly sink: EventSink,
    private readonly instanceId: string,
    private readonly layout: NewsletterLayout,
    private readonly options: BatcherOptions = {},
  ) {
    this.backoff = options.backoffMs ?? DEFAULT_BACKOFF;
    this.wait = options.wait ?? sleep;
  }

  /** Wire a tracker so its events stream into the buffer as they happen. */
  attach(tracker: Tracker): void {
    for (const record of tracker.records) {
      if (record.type === "event") this.queue.push(record.event);
    }
    tracker.onRecord((record) => {
      if (record.type === "event") this.queue.push(record.event);
    });
  }

  get buffered(): number {
    return this.queue.length;
  }

  /**
   * Drain the buffer in order. An empty buffer is a no-op (no request).
   * Returns the events that were durably delivered by this call.
   */
  async flush(): Promise<InteractionEvent[]> {
    if (!this.layoutSent) {
      await this.deliverWithRetry(() => this.sink.deliverLayout(this.layout), "layout");
      this.layoutSent = true;
    }
    const delivered: InteractionEvent[] = [];
    // a batch that failed earlier goes out first, under its original key
    if (this.inFlight !== null) {
      const batch = this.inFlight;
      await this.deliverWithRetry(() => this.sink.deliverEvents(batch.jsonl, batch.key), batch.key);
      this.inFlight = null;
    }
    if (this.queue.length === 0) return delivered;
    const events = this.queue;
    this.queue = [];
    const key = `${this.instanceId}-${this.seq++}`;
    const batch = { jsonl: eventsToJsonl(events), key };
    this.inFlight = batch;
    await this.deliverWithRetry(() => this.sink.deliverEvents(batch.jsonl, batch.key), key);
    this.inFlight = null;
    delivered.push(...events);
    return delivered;
  }

  private async deliverWithRetry(attempt: () => Promise<void>, label: string): Promise<void> {
    let lastError: unknown = null;
    for (let i = 0; i <= this.backoff.length; i++) {
      try {
        await attempt();
        return;
      } catch (error) {
        lastError = error;
        if (i < this.backoff.length) await this.wait(this.backoff[i]);
      }
    }
    if (this.options.fallback) {
      const undelivered = this.inFlight ? this.inFlight.jsonl : "";
      this.options.fallback(undelivered + eventsToJsonl(this.queue));
      this.queue = [];
      this.inFlight = null;
      return;
    }
    throw lastError;
  }
}
