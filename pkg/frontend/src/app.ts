// Two-route single-page shell: /judge for grading, /view/<doc_id> for the
// highlight viewer. Served statically by the judgment service.

import { initJudgeScreen } from "./judge.js";
import { initHighlightView } from "./view.js";

export async function mount(root: HTMLElement, path: string): Promise<void> {
  const viewMatch = path.match(/^\/view\/([^/]+)$/);
  if (viewMatch) {
    await initHighlightView(root, decodeURIComponent(viewMatch[1]));
    return;
  }
  await initJudgeScreen(root);
}

const rootEl = typeof document !== "undefined"
  ? document.getElementById("app")
  : null;
if (rootEl) {
  void mount(rootEl, window.location.pathname);
}
