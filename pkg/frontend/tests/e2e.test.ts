// Browser-level loop against a real service instance loaded with the
// synthetic corpus (spawned by the global setup): describe, rank, refine.
import { readFileSync } from "node:fs";
import { beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { App } from "../src/app.js";
import { INFO_PATH } from "../test-support/global-setup.js";

interface ServiceInfo {
  base_url: string;
  doc_ids: string[];
  class_names: Record<string, string>;
  template_captions: Record<string, string>;
  signature_captions: Record<string, string>;
}

let info: ServiceInfo;

beforeAll(() => {
  info = JSON.parse(readFileSync(INFO_PATH, "utf-8"));
});

function mountApp(baseUrl: string): { app: App; root: HTMLElement } {
  document.body.innerHTML = "<div id='app'></div>";
  const root = document.getElementById("app")!;
  const app = new App(root, new ApiClient(baseUrl));
  app.init();
  return { app, root };
}

function typeDescription(root: HTMLElement, index: number, text: string): void {
  const input = root.querySelectorAll(".description-input")[index] as HTMLInputElement;
  input.value = text;
  input.dispatchEvent(new Event("input", { bubbles: true }));
}

function click(root: HTMLElement, selector: string): void {
  (root.querySelector(selector) as HTMLElement).dispatchEvent(
    new MouseEvent("click", { bubbles: true }),
  );
}

async function waitFor<T>(probe: () => T | null, timeoutMs = 15_000): Promise<T> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    const value = probe();
    if (value !== null) return value;
    await new Promise((r) => setTimeout(r, 50));
  }
  throw new Error("condition not met in time");
}

function rankedDocIds(root: HTMLElement): string[] {
  return Array.from(root.querySelectorAll(".result .doc-id")).map(
    (node) => node.textContent ?? "",
  );
}

describe("identification loop against the live service", () => {
  it("the service is healthy and lists the synthetic corpus", async () => {
    const api = new ApiClient(info.base_url);
    const health = await api.health();
    expect(health.status).toBe("ready");
    expect(health.K).toBe(info.doc_ids.length);
    const docs = await api.documents();
    expect(docs.map((d) => d.doc_id)).toEqual(info.doc_ids);
  });

  it("a known class's template caption ranks that class first, and a "
     + "contradictory description changes the ranking", async () => {
    const known = Object.keys(info.template_captions);
    const target = known[0]!;
    const other = known[1]!;
    const { root } = mountApp(info.base_url);

    typeDescription(root, 0, info.template_captions[target]!);
    click(root, ".identify-button");
    await waitFor(() => root.querySelector(".result"));
    const firstRanking = rankedDocIds(root);
    expect(firstRanking[0]).toBe(target);
    const targetName = root.querySelector(".result .class-name")!.textContent;
    expect(targetName).toBe(info.class_names[target]);
    expect(root.querySelectorAll(".result .evidence mark").length).toBeGreaterThan(0);

    // Refine with a caption describing a different class: the ranking moves.
    click(root, ".add-description");
    typeDescription(root, 1, info.template_captions[other]!);
    click(root, ".identify-button");
    await waitFor(() =>
      JSON.stringify(rankedDocIds(root)) !== JSON.stringify(firstRanking)
        ? root
        : null,
    );
    const secondRanking = rankedDocIds(root);
    expect(secondRanking).not.toEqual(firstRanking);
    // both descriptions are still in the editor
    const inputs = root.querySelectorAll(".description-input") as NodeListOf<HTMLInputElement>;
    expect(inputs[0]!.value).toBe(info.template_captions[target]);
    expect(inputs[1]!.value).toBe(info.template_captions[other]);
  });

  it("clicking a candidate shows the expert document", async () => {
    const target = info.doc_ids[2]!;
    const { root } = mountApp(info.base_url);
    typeDescription(root, 0, info.signature_captions[target]!);
    click(root, ".identify-button");
    await waitFor(() => root.querySelector(".result"));
    click(root, ".result .class-name");
    await waitFor(() => root.querySelector(".document-sentences"));
    expect(root.querySelectorAll(".document-sentences li").length).toBe(12);
    click(root, ".back-button");
    expect(root.querySelector(".result")).not.toBeNull();
  });

  it("comparing modes renders two panels from the same input", async () => {
    const target = info.doc_ids[0]!;
    const { root } = mountApp(info.base_url);
    (root.querySelector(".compare-label input") as HTMLInputElement).click();
    typeDescription(root, 0, info.signature_captions[target]!);
    click(root, ".identify-button");
    await waitFor(() =>
      root.querySelectorAll(".panel .result").length >= 2 ? root : null,
    );
    const panels = root.querySelectorAll(".panel");
    expect(panels).toHaveLength(2);
    expect(panels[0]!.querySelector(".result .doc-id")).not.toBeNull();
    expect(panels[1]!.querySelector(".result .doc-id")).not.toBeNull();
  });

  it("a dead service shows an error banner and the text survives", async () => {
    const { root } = mountApp("http://127.0.0.1:1");
    typeDescription(root, 0, "text that must not be lost");
    click(root, ".identify-button");
    await waitFor(() => root.querySelector(".error-banner"));
    const input = root.querySelector(".description-input") as HTMLInputElement;
    expect(input.value).toBe("text that must not be lost");
  });
});
