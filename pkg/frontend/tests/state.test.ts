import { describe, expect, it } from "vitest";

import {
  addDescription,
  applyError,
  applyResponse,
  initialState,
  markPending,
  nonEmptyDescriptions,
  removeDescription,
  RequestSequencer,
  setDescription,
  setMode,
} from "../src/state.js";
import type { IdentifyResponse } from "../src/types.js";

const RESPONSE: IdentifyResponse = {
  results: [
    {
      doc_id: "sp01",
      class_name: "blue-crown bird 01",
      z: 0.4,
      probability: 0.3,
      evidence: [{ caption: "a blue crown", sentence: "Its crown is azure.", score: 0.9 }],
    },
  ],
  model_info: { mode: "fgsm", corpus_id: "abc", K: 6 },
};

describe("session state", () => {
  it("starts with one empty description and no response", () => {
    const state = initialState();
    expect(state.descriptions).toEqual([""]);
    expect(state.panels[0].response).toBeNull();
    expect(state.view.kind).toBe("results");
  });

  it("updates descriptions without mutating the previous state", () => {
    const before = initialState();
    const after = setDescription(before, 0, "a red bird");
    expect(before.descriptions).toEqual([""]);
    expect(after.descriptions).toEqual(["a red bird"]);
  });

  it("adds and removes description rows, keeping at least one", () => {
    let state = addDescription(initialState());
    expect(state.descriptions).toHaveLength(2);
    state = removeDescription(state, 0);
    expect(state.descriptions).toHaveLength(1);
    expect(removeDescription(state, 0).descriptions).toHaveLength(1);
  });

  it("sends exactly the non-empty trimmed descriptions", () => {
    let state = initialState();
    state = setDescription(state, 0, "  a red bird  ");
    state = addDescription(state);
    state = setDescription(state, 1, "   ");
    expect(nonEmptyDescriptions(state)).toEqual(["a red bird"]);
  });

  it("an error never touches the entered descriptions", () => {
    let state = setDescription(initialState(), 0, "typed text");
    state = markPending(state, 0);
    state = applyError(state, 0, "service unreachable");
    expect(state.descriptions).toEqual(["typed text"]);
    expect(state.panels[0].error).toBe("service unreachable");
    expect(state.panels[0].pending).toBe(false);
  });

  it("a response replaces the previous one and clears the error", () => {
    let state = applyError(initialState(), 0, "boom");
    state = applyResponse(state, 0, RESPONSE);
    expect(state.panels[0].response).toBe(RESPONSE);
    expect(state.panels[0].error).toBeNull();
  });

  it("mode changes keep descriptions and responses per panel", () => {
    let state = setDescription(initialState(), 0, "a red bird");
    state = applyResponse(state, 0, RESPONSE);
    state = setMode(state, 1, "bm25");
    expect(state.descriptions).toEqual(["a red bird"]);
    expect(state.panels[0].response).toBe(RESPONSE);
    expect(state.panels[1].mode).toBe("bm25");
  });
});

describe("request sequencer", () => {
  it("drops responses that resolve after a newer request", () => {
    const seq = new RequestSequencer();
    const first = seq.next();
    const second = seq.next();
    expect(seq.isCurrent(first)).toBe(false);
    expect(seq.isCurrent(second)).toBe(true);
  });

  it("invalidate discards the in-flight request", () => {
    const seq = new RequestSequencer();
    const token = seq.next();
    seq.invalidate();
    expect(seq.isCurrent(token)).toBe(false);
  });
});
