// Judgment-flow tests: the four-grade submission contract, double-click
// protection, retry on failure, and judge-id persistence.

import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";
import { initJudgeScreen } from "../src/judge";

interface RecordedPost {
  doc_id: string;
  judge_id: string;
  grade: number;
}

function jsonResponse(status: number, payload: unknown) {
  return {
    ok: status >= 200 && status < 300,
    status,
    json: async () => payload,
  };
}

class FakeApi {
  posts: RecordedPost[] = [];
  failNextPost = false;
  samples: Array<{ doc_id: string; title: string; text: string }>;
  served = 0;

  constructor(nDocs: number = 8) {
    this.samples = Array.from({ length: nDocs }, (_, i) => ({
      doc_id: `doc${i}`,
      title: `Document ${i}`,
      text: `body of document ${i}`,
    }));
  }

  fetch = async (url: string, init?: RequestInit) => {
    if (url.startsWith("/api/config")) {
      return jsonResponse(200, {
        scale_labels: ["irrelevant", "on-topic", "relevant", "actionable"],
      });
    }
    if (url.startsWith("/api/sample")) {
      const doc = this.samples[this.served % this.samples.length];
      this.served += 1;
      return jsonResponse(200, {
        ...doc,
        url: `http://fixture.example/${doc.doc_id}`,
        r: null,
        served_at: "2026-03-01T00:00:00Z",
      });
    }
    if (url === "/api/judgments" && init?.method === "POST") {
      if (this.failNextPost) {
        this.failNextPost = false;
        return jsonResponse(500, { error: { code: "internal", message: "boom" } });
      }
      const body = JSON.parse(String(init.body)) as RecordedPost;
      this.posts.push(body);
      return jsonResponse(200, { ...body, judged_at: "2026-03-01T00:00:01Z" });
    }
    return jsonResponse(404, { error: { code: "no_route", message: url } });
  };
}

function flush(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}

let api: FakeApi;
let root: HTMLElement;

beforeEach(() => {
  api = new FakeApi();
  vi.stubGlobal("fetch", api.fetch);
  window.localStorage.clear();
  document.body.innerHTML = '<main id="app"></main>';
  root = document.getElementById("app") as HTMLElement;
});

afterEach(() => {
  vi.unstubAllGlobals();
});

function gradeButton(grade: number): HTMLButtonElement {
  const button = root.querySelector<HTMLButtonElement>(
    `button.grade[data-grade="${grade}"]`,
  );
  if (!button) throw new Error(`no grade button ${grade}`);
  return button;
}

function submitButton(): HTMLButtonElement {
  return root.querySelector<HTMLButtonElement>("button.submit")!;
}

describe("judgment flow", () => {
  it("renders the sampled document and the four scale labels", async () => {
    await initJudgeScreen(root);
    expect(root.querySelector(".doc-title")?.textContent).toBe("Document 0");
    expect(root.querySelector(".doc-url")?.textContent).toContain("doc0");
    expect(root.querySelector(".doc-text")?.textContent).toBe("body of document 0");
    const labels = [...root.querySelectorAll("button.grade")].map(
      (b) => b.textContent,
    );
    expect(labels).toEqual([
      "0 - irrelevant", "1 - on-topic", "2 - relevant", "3 - actionable",
    ]);
  });

  it("submits exactly one POST per grade, grade matching the selection", async () => {
    await initJudgeScreen(root);
    for (const grade of [0, 1, 2, 3]) {
      const before = api.posts.length;
      const expectedDoc = `doc${grade}`; // docs are served in order
      gradeButton(grade).click();
      submitButton().click();
      await flush();
      await flush();
      expect(api.posts.length).toBe(before + 1);
      const post = api.posts[api.posts.length - 1];
      expect(post.grade).toBe(grade);
      expect(post.doc_id).toBe(expectedDoc);
      expect(post.judge_id).toBe("anonymous");
    }
  });

  it("blocks submission until a grade is selected", async () => {
    await initJudgeScreen(root);
    const submit = submitButton();
    expect(submit.disabled).toBe(true);
    submit.click();
    await flush();
    expect(api.posts.length).toBe(0);
    gradeButton(2).click();
    expect(submit.disabled).toBe(false);
  });

  it("double-click produces a single POST", async () => {
    await initJudgeScreen(root);
    gradeButton(1).click();
    const submit = submitButton();
    submit.click();
    submit.click(); // disabled synchronously by the first activation
    await flush();
    await flush();
    expect(api.posts.length).toBe(1);
  });

  it("keeps the judgment and offers retry when the API fails", async () => {
    await initJudgeScreen(root);
    api.failNextPost = true;
    gradeButton(3).click();
    submitButton().click();
    await flush();
    await flush();
    expect(api.posts.length).toBe(0);
    const banner = root.querySelector<HTMLElement>(".banner")!;
    expect(banner.hidden).toBe(false);
    expect(banner.textContent).toContain("failed");
    // same document still on screen, selection retained
    expect(root.querySelector(".doc-title")?.textContent).toBe("Document 0");
    expect(gradeButton(3).classList.contains("selected")).toBe(true);

    banner.querySelector<HTMLButtonElement>("button.retry")!.click();
    await flush();
    await flush();
    expect(api.posts.length).toBe(1);
    expect(api.posts[0]).toMatchObject({ doc_id: "doc0", grade: 3 });
    expect(root.querySelector(".doc-title")?.textContent).toBe("Document 1");
  });

  it("advances to the next sample only after the ack", async () => {
    await initJudgeScreen(root);
    gradeButton(2).click();
    submitButton().click();
    await flush();
    await flush();
    expect(root.querySelector(".doc-title")?.textContent).toBe("Document 1");
    expect(submitButton().disabled).toBe(true); // selection reset for the new doc
  });

  it("persists the judge id across sessions", async () => {
    await initJudgeScreen(root);
    const input = root.querySelector<HTMLInputElement>(".judge-row input")!;
    input.value = "analyst-7";
    input.dispatchEvent(new Event("input"));
    expect(window.localStorage.getItem("ctiharvest.judge_id")).toBe("analyst-7");

    document.body.innerHTML = '<main id="app"></main>';
    const fresh = document.getElementById("app") as HTMLElement;
    await initJudgeScreen(fresh);
    expect(
      fresh.querySelector<HTMLInputElement>(".judge-row input")!.value,
    ).toBe("analyst-7");
  });

  it("shows the empty-store state with a retry affordance", async () => {
    vi.stubGlobal("fetch", async (url: string) => {
      if (url.startsWith("/api/config")) {
        return jsonResponse(200, { scale_labels: ["a", "b", "c", "d"] });
      }
      return jsonResponse(404, {
        error: { code: "empty_store", message: "no harvested documents" },
      });
    });
    await initJudgeScreen(root);
    const banner = root.querySelector<HTMLElement>(".banner")!;
    expect(banner.hidden).toBe(false);
    expect(banner.textContent).toContain("No harvested documents");
    expect(banner.querySelector("button.retry")).not.toBeNull();
  });
});
