import {
  EventKind,
  InteractionEvent,
  NewsletterLayout,
  PageAdapter,
  TrackedPageConfig,
  TrackerRecord,
} from "./types";

export class TrackerInitError extends Error {}

const DEFAULT_MOVE_THROTTLE_MS = 50; // <= 20 Hz

/**
 * Captures one page visit as an ordered record log: an open event and the
 * layout snapshot first, then interaction events on a monotonic seconds
 * clock. Timestamps never decrease, and a throttled mouse move is always
 * emitted before the click that follows it so click positions stay
 * attributable.
 */
export class Tracker {
  readonly records: TrackerRecord[] = [];
  readonly layout: NewsletterLayout;

  private readonly t0: number;
  private readonly throttleMs: number;
  private lastMoveEmittedAt = -Infinity;
  private pendingMove: InteractionEvent | null = null;
  private lastT = 0;
  private closed = false;
  private teardown: (() => void)[] = [];
  private listeners: ((record: TrackerRecord) => void)[] = [];

  constructor(private readonly page: PageAdapter, private readonly config: TrackedPageConfig) {
    const messages = [];
    for (const [selector, msgId] of Object.entries(config.selectors)) {
      const resolved = page.resolve(selector);
      if (resolved === null) {
        throw new TrackerInitError(
          `selector "${selector}" must resolve to exactly one element`,
        );
      }
      messages.push({ msg_id: msgId, ...resolved.box, words: Math.max(1, resolved.words) });
    }
    messages.sort((a, b) => a.y - b.y || a.x - b.x);
    const ids = new Set(messages.map((m) => m.msg_id));
    if (ids.size !== messages.length) {
      throw new TrackerInitError("msg_ids must be unique");
    }
    this.layout = {
      newsletter_id: config.newsletterId,
      doc_height: page.documentHeight(),
      messages,
    };
    this.throttleMs = config.moveThrottleMs ?? DEFAULT_MOVE_THROTTLE_MS;
    this.t0 = page.now();

    this.pushEvent({ t: 0, kind: "open", newsletter_id: config.newsletterId });
    this.push({ type: "layout", layout: this.layout });
    const { w, h } = page.viewport();
    this.pushEvent({ t: this.seconds(), kind: "viewport", win_w: w, win_h: h });
    if (page.scrollY() !== 0) {
      this.pushEvent({ t: this.seconds(), kind: "scroll", scroll_y: page.scrollY() });
    }

    this.teardown = [
      page.onMouseMove((cx, cy) => this.handleMove(cx, cy)),
      page.onClick((cx, cy) => this.handleClick(cx, cy)),
      page.onScroll(() => this.pushEvent({ t: this.seconds(), kind: "scroll", scroll_y: page.scrollY() })),
      page.onResize(() => {
        const size = page.viewport();
        this.pushEvent({ t: this.seconds(), kind: "viewport", win_w: size.w, win_h: size.h });
      }),
      page.onVisibility((visible) => this.pushEvent({ t: this.seconds(), kind: "visibility", visible })),
      page.onPageHide(() => this.close()),
    ];
  }

  /** Subscribe to records as they are captured (used by the batcher). */
  onRecord(listener: (record: TrackerRecord) => void): void {
    this.listeners.push(listener);
  }

  get events(): InteractionEvent[] {
    return this.records.flatMap((r) => (r.type === "event" ? [r.event] : []));
  }

  close(): void {
    if (this.closed) return;
    this.pushEvent({ t: this.seconds(), kind: "close" });
    this.closed = true;
    for (const stop of this.teardown) stop();
    this.teardown = [];
  }

  private seconds(): number {
    // monotonic and non-decreasing even if the clock source misbehaves
    const t = Math.max(0, (this.page.now() - this.t0) / 1000);
    this.lastT = Math.max(this.lastT, t);
    return this.lastT;
  }

  private docPoint(clientX: number, clientY: number): { x: number; y: number } {
    return { x: clientX + this.page.scrollX(), y: clientY + this.page.scrollY() };
  }

  private handleMove(clientX: number, clientY: number): void {
    const { x, y } = this.docPoint(clientX, clientY);
    const now = this.page.now();
    const event: InteractionEvent = { t: this.seconds(), kind: "move", x, y };
    if (now - this.lastMoveEmittedAt >= this.throttleMs) {
      this.lastMoveEmittedAt = now;
      this.pendingMove = null;
      this.pushEvent(event);
    } else {
      this.pendingMove = event; // keep only the latest suppressed move
    }
  }

  private flushPendingMove(): void {
    if (this.pendingMove !== null) {
      const pending = this.pendingMove;
      this.pendingMove = null;
      this.push({ type: "event", event: pending });
      this.lastMoveEmittedAt = this.page.now();
    }
  }

  private handleClick(clientX: number, clientY: number): void {
    const { x, y } = this.docPoint(clientX, clientY);
    const msgId = this.hitTest(x, y);
    const event: InteractionEvent = { t: this.seconds(), kind: "click", x, y };
    if (msgId !== null) event.msg_id = msgId;
    this.pushEvent(event);
  }

  private hitTest(x: number, y: number): string | null {
    for (const m of this.layout.messages) {
      if (x >= m.x && x <= m.x + m.w && y >= m.y && y <= m.y + m.h) {
        return m.msg_id;
      }
    }
    return null;
  }

  private pushEvent(event: InteractionEvent): void {
    if (this.closed) return;
    // any suppressed move is chronologically older than this event; emit it
    // first so the stream stays non-decreasing in t (and so a click never
    // loses the move that preceded it)
    if (event.kind !== "move") this.flushPendingMove();
    this.push({ type: "event", event });
  }

  private push(record: TrackerRecord): void {
    this.records.push(record);
    for (const listener of this.listeners) listener(record);
  }
}

export function startTracking(page: PageAdapter, config: TrackedPageConfig): Tracker {
  return new Tracker(page, config);
}
