import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";
import { mount } from "../src/app";

function jsonResponse(status: number, payload: unknown) {
  return { ok: status < 300, status, json: async () => payload };
}

describe("router", () => {
  let root: HTMLElement;

  beforeEach(() => {
    document.body.innerHTML = "<main id='app'></main>";
    root = document.getElementById("app") as HTMLElement;
    window.localStorage.clear();
  });

  afterEach(() => vi.unstubAllGlobals());

  it("mounts the highlight viewer for /view/:doc_id", async () => {
    const seen: string[] = [];
    vi.stubGlobal("fetch", async (url: string) => {
      seen.push(url);
      return jsonResponse(200, {
        doc_id: "deadbeef", text: "plain", r: 0.5, spans: [], matched_terms: [],
      });
    });
    await mount(root, "/view/deadbeef");
    expect(seen).toEqual(["/api/docs/deadbeef/highlight"]);
    expect(root.querySelector(".score-badge")).not.toBeNull();
  });

  it("mounts the judgment screen elsewhere", async () => {
    vi.stubGlobal("fetch", async (url: string) => {
      if (url.startsWith("/api/config")) {
        return jsonResponse(200, { scale_labels: ["a", "b", "c", "d"] });
      }
      return jsonResponse(200, {
        doc_id: "d0", url: "http://x/", title: "t", text: "x", r: null,
        served_at: "now",
      });
    });
    await mount(root, "/judge");
    expect(root.querySelectorAll("button.grade").length).toBe(4);
  });
});
