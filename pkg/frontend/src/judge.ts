// Judgment screen: show a sampled document, capture a 4-point grade,
// submit, move on. One POST per submission, never silently dropped.

import {
  ApiError,
  fetchConfig,
  fetchSample,
  postJudgment,
  SampleResponse,
} from "./api.js";

const JUDGE_ID_KEY = "ctiharvest.judge_id";

export interface JudgeScreen {
  root: HTMLElement;
  loadNext(): Promise<void>;
}

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

export async function initJudgeScreen(
  root: HTMLElement = document.getElementById("app") as HTMLElement,
  strategy: string = "random",
): Promise<JudgeScreen> {
  root.textContent = "";

  const judgeRow = el("div", "judge-row");
  judgeRow.appendChild(el("label", undefined, "Judge id: "));
  const judgeInput = el("input");
  judgeInput.value = window.localStorage.getItem(JUDGE_ID_KEY) ?? "anonymous";
  judgeInput.addEventListener("input", () => {
    window.localStorage.setItem(JUDGE_ID_KEY, judgeInput.value);
  });
  window.localStorage.setItem(JUDGE_ID_KEY, judgeInput.value);
  judgeRow.appendChild(judgeInput);
  root.appendChild(judgeRow);

  const title = el("h2", "doc-title");
  const link = el("a", "doc-url");
  link.target = "_blank";
  const text = el("div", "doc-text");
  const banner = el("div", "banner");
  banner.hidden = true;
  const gradeBox = el("div", "grades");
  const submit = el("button", "submit", "Submit judgment");
  submit.disabled = true;

  root.append(title, link, text, banner, gradeBox, submit);

  let labels: string[];
  try {
    labels = (await fetchConfig()).scale_labels;
  } catch {
    labels = ["0", "1", "2", "3"];
  }

  let current: SampleResponse | null = null;
  let selected: number | null = null;
  let inFlight = false;

  const gradeButtons: HTMLButtonElement[] = labels.map((label, grade) => {
    const button = el("button", "grade", `${grade} - ${label}`);
    button.dataset.grade = String(grade);
    button.addEventListener("click", () => {
      selected = grade;
      gradeButtons.forEach((b, i) => b.classList.toggle("selected", i === grade));
      submit.disabled = current === null || inFlight;
    });
    gradeBox.appendChild(button);
    return button;
  });

  function showBanner(message: string, retry: (() => void) | null): void {
    banner.textContent = message + " ";
    if (retry) {
      const button = el("button", "retry", "Retry");
      button.addEventListener("click", retry);
      banner.appendChild(button);
    }
    banner.hidden = false;
  }

  async function loadNext(): Promise<void> {
    selected = null;
    submit.disabled = true;
    gradeButtons.forEach((b) => b.classList.remove("selected"));
    try {
      current = await fetchSample(strategy);
      banner.hidden = true;
      title.textContent = current.title || "(untitled document)";
      link.textContent = current.url;
      link.href = current.url;
      text.textContent = current.text;
    } catch (err) {
      current = null;
      const message = err instanceof ApiError && err.code === "empty_store"
        ? "No harvested documents to judge yet."
        : "Could not load a document.";
      title.textContent = "";
      link.textContent = "";
      text.textContent = "";
      showBanner(message, () => void loadNext());
    }
  }

  async function doSubmit(): Promise<void> {
    // double-click protection: the in-flight flag is checked and set
    // synchronously, so a second click cannot produce a second POST
    if (current === null || selected === null || inFlight) return;
    inFlight = true;
    submit.disabled = true;
    const doc = current;
    const grade = selected;
    try {
      await postJudgment(doc.doc_id, judgeInput.value, grade);
      inFlight = false;
      await loadNext();
    } catch {
      inFlight = false;
      submit.disabled = false;
      showBanner("Submitting the judgment failed; nothing was recorded.",
        () => void doSubmit());
    }
  }

  submit.addEventListener("click", () => void doSubmit());

  await loadNext();
  return { root, loadNext };
}
