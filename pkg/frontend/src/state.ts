import type { DocumentDetail, IdentifyResponse, Mode } from "./types.js";

// All state transitions return fresh objects: rendering is a pure function
// of SessionState, so replaying a recorded session reproduces the views.

export interface PanelState {
  mode: Mode;
  response: IdentifyResponse | null;
  error: string | null;
  pending: boolean;
}

export type View =
  | { kind: "results" }
  | { kind: "document"; doc: DocumentDetail | null; error: string | null };

export interface SessionState {
  descriptions: string[];
  topK: number;
  compare: boolean;
  panels: [PanelState, PanelState];
  view: View;
}

function panel(mode: Mode): PanelState {
  return { mode, response: null, error: null, pending: false };
}

export function initialState(): SessionState {
  return {
    descriptions: [""],
    topK: 5,
    compare: false,
    panels: [panel("fgsm"), panel("tfidf")],
    view: { kind: "results" },
  };
}

export function setDescription(state: SessionState, index: number, text: string): SessionState {
  const descriptions = state.descriptions.slice();
  descriptions[index] = text;
  return { ...state, descriptions };
}

export function addDescription(state: SessionState): SessionState {
  return { ...state, descriptions: [...state.descriptions, ""] };
}

export function removeDescription(state: SessionState, index: number): SessionState {
  if (state.descriptions.length <= 1) return state;
  const descriptions = state.descriptions.filter((_, i) => i !== index);
  return { ...state, descriptions };
}

export function nonEmptyDescriptions(state: SessionState): string[] {
  return state.descriptions.map((d) => d.trim()).filter((d) => d.length > 0);
}

export function setTopK(state: SessionState, topK: number): SessionState {
  return { ...state, topK };
}

export function setCompare(state: SessionState, compare: boolean): SessionState {
  return { ...state, compare };
}

function withPanel(state: SessionState, index: 0 | 1, next: PanelState): SessionState {
  const panels: [PanelState, PanelState] = [state.panels[0], state.panels[1]];
  panels[index] = next;
  return { ...state, panels };
}

export function setMode(state: SessionState, index: 0 | 1, mode: Mode): SessionState {
  return withPanel(state, index, { ...state.panels[index], mode });
}

export function markPending(state: SessionState, index: 0 | 1): SessionState {
  return withPanel(state, index, { ...state.panels[index], pending: true, error: null });
}

export function applyResponse(
  state: SessionState,
  index: 0 | 1,
  response: IdentifyResponse,
): SessionState {
  return withPanel(state, index, {
    ...state.panels[index],
    response,
    error: null,
    pending: false,
  });
}

export function applyError(state: SessionState, index: 0 | 1, message: string): SessionState {
  // The entered descriptions are untouched: errors only mark the panel.
  return withPanel(state, index, { ...state.panels[index], error: message, pending: false });
}

export function showResults(state: SessionState): SessionState {
  return { ...state, view: { kind: "results" } };
}

export function showDocument(state: SessionState, doc: DocumentDetail): SessionState {
  return { ...state, view: { kind: "document", doc, error: null } };
}

export function showDocumentError(state: SessionState, message: string): SessionState {
  return { ...state, view: { kind: "document", doc: null, error: message } };
}

/**
 * Monotone token source matching responses to the request that produced
 * them; anything that resolves after a newer request was issued is dropped.
 */
export class RequestSequencer {
  private last = 0;

  next(): number {
    return ++this.last;
  }

  isCurrent(token: number): boolean {
    return token === this.last;
  }

  invalidate(): void {
    this.last++;
  }
}
