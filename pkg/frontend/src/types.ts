// Canonical wire types shared with the analysis pipeline. Field names and
// applicability rules mirror the JSON Schemas shipped with the Python
// package (src/readmeter/schemas/).

export type EventKind =
  | "open"
  | "close"
  | "move"
  | "scroll"
  | "click"
  | "viewport"
  | "visibility";

export interface InteractionEvent {
  t: number; // seconds since the open event, monotonic
  kind: EventKind;
  x?: number; // document pixels (move/click)
  y?: number;
  scroll_y?: number; // scroll only
  win_w?: number; // viewport only
  win_h?: number;
  msg_id?: string; // click only, when the click lands inside a message
  visible?: boolean; // visibility only
  newsletter_id?: string; // open only
}

export interface MessageGeometry {
  msg_id: string;
  x: number;
  y: number;
  w: number;
  h: number;
  words: number;
}

export interface NewsletterLayout {
  newsletter_id: string;
  doc_height: number;
  messages: MessageGeometry[];
}

export type TrackerRecord =
  | { type: "event"; event: InteractionEvent }
  | { type: "layout"; layout: NewsletterLayout };

export interface TrackedPageConfig {
  newsletterId: string;
  /** CSS selector -> msg_id; every selector must resolve to exactly one element. */
  selectors: Record<string, string>;
  flushIntervalMs?: number;
  /** Mouse-move throttle floor in ms (defaults to 50ms, i.e. <= 20 Hz). */
  moveThrottleMs?: number;
}

/** Everything the tracker needs from a page; the browser adapter wires the
 * real DOM, tests drive a scripted fake. */
export interface PageAdapter {
  /** milliseconds on a monotonic clock */
  now(): number;
  scrollX(): number;
  scrollY(): number;
  viewport(): { w: number; h: number };
  /** document-pixel box and whitespace-token word count; null when the
   * selector does not resolve to exactly one element */
  resolve(selector: string): { box: { x: number; y: number; w: number; h: number }; words: number } | null;
  documentHeight(): number;
  onMouseMove(handler: (clientX: number, clientY: number) => void): () => void;
  onClick(handler: (clientX: number, clientY: number) => void): () => void;
  onScroll(handler: () => void): () => void;
  onResize(handler: () => void): () => void;
  onVisibility(handler: (visible: boolean) => void): () => void;
  onPageHide(handler: () => void): () => void;
}

export interface EventSink {
  deliverLayout(layout: NewsletterLayout): Promise<void>;
  /** body is canonical JSONL; the same key is reused verbatim on retries */
  deliverEvents(jsonl: string, idempotencyKey: string): Promise<void>;
}

const KEY_ORDER: (keyof InteractionEvent)[] = [
  "t", "kind", "x", "y", "scroll_y", "win_w", "win_h", "msg_id", "visible", "newsletter_id",
];

/** Canonical single-line JSON: fixed key order, absent-if-inapplicable. */
export function eventToJson(event: InteractionEvent): string {
  const ordered: Record<string, unknown> = {};
  for (const key of KEY_ORDER) {
    const value = event[key];
    if (value !== undefined) ordered[key] = value;
  }
  return JSON.stringify(ordered);
}

export function eventsToJsonl(events: InteractionEvent[]): string {
  return events.map(eventToJson).join("\n") + (events.length ? "\n" : "");
}

export function layoutToJson(layout: NewsletterLayout): string {
  return JSON.stringify({
    newsletter_id: layout.newsletter_id,
    doc_height: layout.doc_height,
    messages: layout.messages.map((m) => ({
      msg_id: m.msg_id, x: m.x, y: m.y, w: m.w, h: m.h, words: m.words,
    })),
  });
}
