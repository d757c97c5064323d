import { PageAdapter } from "./types";

/** Real-browser adapter: document-pixel geometry, whitespace-token word
 * counts, and the listener set the tracker needs. */
export function domAdapter(doc: Document = document, win: Window = window): PageAdapter {
  const listen = <K extends keyof WindowEventMap>(
    target: Window | Document,
    type: string,
    handler: (event: any) => void,
  ) => {
    target.addEventListener(type, handler, { passive: true });
    return () => target.removeEventListener(type, handler);
  };

  return {
    now: () => performance.now(),
    scrollX: () => win.scrollX,
    scrollY: () => win.scrollY,
    viewport: () => ({ w: win.innerWidth, h: win.innerHeight }),
    documentHeight: () => doc.documentElement.scrollHeight,
    resolve(selector: string) {
      const found = doc.querySelectorAll(selector);
      if (found.length !== 1) return null;
      const element = found[0] as HTMLElement;
      const rect = element.getBoundingClientRect();
      const words = (element.textContent ?? "").trim().split(/\s+/).filter(Boolean).length;
      return {
        box: {
          x: rect.left + win.scrollX,
          y: rect.top + win.scrollY,
          w: rect.width,
          h: rect.height,
        },
        words,
      };
    },
    onMouseMove: (handler) =>
      listen(doc, "mousemove", (e: MouseEvent) => handler(e.clientX, e.clientY)),
    onClick: (handler) =>
      listen(doc, "click", (e: MouseEvent) => handler(e.clientX, e.clientY)),
    onScroll: (handler) => listen(win, "scroll", () => handler()),
    onResize: (handler) => listen(win, "resize", () => handler()),
    onVisibility: (handler) =>
      listen(doc, "visibilitychange", () => handler(doc.visibilityState === "visible")),
    onPageHide: (handler) => listen(win, "pagehide", () => handler()),
  };
}
