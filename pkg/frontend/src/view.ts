// Highlight viewer: the ranked document with vocabulary terms marked, the
// relevance score at full stored precision, and a matched-term sidebar.

import { ApiError, fetchHighlight } from "./api.js";
import { renderHighlights } from "./highlight.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export async function initHighlightView(
  root: HTMLElement,
  docId: string,
): Promise<void> {
  root.textContent = "";
  try {
    const payload = await fetchHighlight(docId);
    const header = el("div", "score-row");
    header.appendChild(el("span", "doc-id", payload.doc_id));
    const badge = el("span", "score-badge");
    // String(number) round-trips the stored double exactly
    badge.textContent = payload.r === null ? "unranked" : `r = ${String(payload.r)}`;
    header.appendChild(badge);
    root.appendChild(header);

    const body = el("div", "viewer-body");
    const textPane = el("div", "doc-text");
    renderHighlights(textPane, payload.text, payload.spans);
    body.appendChild(textPane);

    const sidebar = el("ul", "matched-terms");
    for (const { term, count } of payload.matched_terms) {
      sidebar.appendChild(el("li", undefined, `${term} × ${count}`));
    }
    body.appendChild(sidebar);
    root.appendChild(body);
  } catch (err) {
    const empty = el("div", "empty-state");
    if (err instanceof ApiError && err.code === "not_ranked") {
      empty.textContent =
        "This document has not been ranked yet; run the ranking stage first.";
    } else if (err instanceof ApiError && err.status === 404) {
      empty.textContent = "No such document.";
    } else {
      empty.textContent = "Could not load the document.";
    }
    root.appendChild(empty);
  }
}
