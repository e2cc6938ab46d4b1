// Span rendering for the highlight viewer. The invariant that matters:
// concatenating the rendered text nodes reproduces the server text exactly,
// character for character, marks included.

import type { Span } from "./api.js";

/** Drop malformed spans and resolve overlaps longest-match-first.
 *  A well-behaved server never sends overlaps; if one does, we keep the
 *  longest span and log a console warning rather than corrupt the text. */
export function sanitizeSpans(text: string, spans: Span[]): Span[] {
  const inBounds = spans.filter(
    (s) => s.start >= 0 && s.end > s.start && s.end <= text.length,
  );
  if (inBounds.length !== spans.length) {
    console.warn("highlight: dropped out-of-bounds spans from server payload");
  }
  const chosen: Span[] = [];
  const byLength = [...inBounds].sort(
    (a, b) => (b.end - b.start) - (a.end - a.start) || a.start - b.start,
  );
  let overlapped = false;
  for (const span of byLength) {
    if (chosen.every((c) => span.end <= c.start || span.start >= c.end)) {
      chosen.push(span);
    } else {
      overlapped = true;
    }
  }
  if (overlapped) {
    console.warn("highlight: server sent overlapping spans; keeping longest matches");
  }
  return chosen.sort((a, b) => a.start - b.start);
}

/** Render text with <mark> elements over the given spans into container. */
export function renderHighlights(
  container: HTMLElement,
  text: string,
  spans: Span[],
): void {
  container.textContent = "";
  const clean = sanitizeSpans(text, spans);
  let cursor = 0;
  for (const span of clean) {
    if (span.start > cursor) {
      container.appendChild(document.createTextNode(text.slice(cursor, span.start)));
    }
    const mark = document.createElement("mark");
    mark.textContent = text.slice(span.start, span.end);
    mark.dataset.term = span.term;
    container.appendChild(mark);
    cursor = span.end;
  }
  if (cursor < text.length) {
    container.appendChild(document.createTextNode(text.slice(cursor)));
  }
}

/** Offsets of the rendered <mark> nodes, for tests and debugging. */
export function renderedMarkRanges(container: HTMLElement): Span[] {
  const ranges: Span[] = [];
  let offset = 0;
  container.childNodes.forEach((node) => {
    const length = node.textContent?.length ?? 0;
    if (node instanceof HTMLElement && node.tagName === "MARK") {
      ranges.push({ start: offset, end: offset + length, term: node.dataset.term ?? "" });
    }
    offset += length;
  });
  return ranges;
}
