import type { PanelState, SessionState } from "./state.js";
import type { IdentifyResult, Mode } from "./types.js";
import { MODES } from "./types.js";

// Renderers build DOM purely from state; the app swaps the whole tree on
// every state change. Handlers are stable callbacks owned by the app.

export interface Handlers {
  onDescriptionInput(index: number, value: string): void;
  onAddDescription(): void;
  onRemoveDescription(index: number): void;
  onTopK(value: number): void;
  onCompareToggle(value: boolean): void;
  onMode(panel: 0 | 1, mode: Mode): void;
  onSubmit(): void;
  onViewDocument(docId: string): void;
  onBack(): void;
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

function modeSelect(current: Mode, onChange: (mode: Mode) => void): HTMLSelectElement {
  const select = el("select", "mode-select");
  for (const mode of MODES) {
    const option = el("option", undefined, mode);
    option.value = mode;
    option.selected = mode === current;
    select.appendChild(option);
  }
  select.addEventListener("change", () => onChange(select.value as Mode));
  return select;
}

function renderEditor(state: SessionState, handlers: Handlers): HTMLElement {
  const editor = el("section", "editor");
  editor.appendChild(el("h2", undefined, "Describe what you see"));
  const list = el("div", "description-list");
  state.descriptions.forEach((text, i) => {
    const row = el("div", "description-row");
    const input = el("input", "description-input");
    input.type = "text";
    input.placeholder = "e.g. a small bird with a red crown and a black throat";
    input.value = text;
    input.dataset.index = String(i);
    input.addEventListener("input", () => handlers.onDescriptionInput(i, input.value));
    row.appendChild(input);
    const remove = el("button", "remove-description", "×");
    remove.type = "button";
    remove.title = "remove this description";
    remove.disabled = state.descriptions.length <= 1;
    remove.addEventListener("click", () => handlers.onRemoveDescription(i));
    row.appendChild(remove);
    list.appendChild(row);
  });
  editor.appendChild(list);

  const controls = el("div", "controls");
  const add = el("button", "add-description", "+ add description");
  add.type = "button";
  add.addEventListener("click", handlers.onAddDescription);
  controls.appendChild(add);

  const topK = el("label", "topk-label", "show top ");
  const topKInput = el("input", "topk-input");
  topKInput.type = "number";
  topKInput.min = "1";
  topKInput.value = String(state.topK);
  topKInput.addEventListener("change", () => handlers.onTopK(Number(topKInput.value)));
  topK.appendChild(topKInput);
  controls.appendChild(topK);

  const compare = el("label", "compare-label");
  const compareBox = el("input");
  compareBox.type = "checkbox";
  compareBox.checked = state.compare;
  compareBox.addEventListener("change", () => handlers.onCompareToggle(compareBox.checked));
  compare.appendChild(compareBox);
  compare.appendChild(document.createTextNode(" compare modes side by side"));
  controls.appendChild(compare);

  // Submission is an explicit button: every identify call scores the whole
  // corpus, so nothing fires on keystrokes.
  const submit = el("button", "identify-button", "Identify");
  submit.type = "button";
  submit.addEventListener("click", handlers.onSubmit);
  controls.appendChild(submit);

  editor.appendChild(controls);
  return editor;
}

function renderResult(
  rank: number,
  result: IdentifyResult,
  handlers: Handlers,
): HTMLElement {
  const item = el("li", "result");
  const head = el("div", "result-head");
  head.appendChild(el("span", "rank", `${rank}.`));
  const name = el("a", "class-name", result.class_name);
  name.href = "#";
  name.addEventListener("click", (event) => {
    event.preventDefault();
    handlers.onViewDocument(result.doc_id);
  });
  head.appendChild(name);
  head.appendChild(el("span", "doc-id", result.doc_id));
  head.appendChild(el("span", "z-score", `score ${result.z.toFixed(4)}`));
  item.appendChild(head);

  const bar = el("div", "probability-bar");
  const fill = el("div", "probability-fill");
  fill.style.width = `${(100 * result.probability).toFixed(2)}%`;
  bar.appendChild(fill);
  bar.appendChild(
    el("span", "probability-label", `${(100 * result.probability).toFixed(1)}%`),
  );
  item.appendChild(bar);

  const evidence = el("ul", "evidence-list");
  for (const ev of result.evidence) {
    const line = el("li", "evidence");
    line.appendChild(el("span", "evidence-sentence", ev.sentence));
    const match = el("span", "evidence-match");
    match.appendChild(document.createTextNode(" ← matches "));
    const mark = document.createElement("mark");
    mark.textContent = ev.caption;
    match.appendChild(mark);
    match.appendChild(document.createTextNode(` (${ev.score.toFixed(3)})`));
    line.appendChild(match);
    evidence.appendChild(line);
  }
  item.appendChild(evidence);
  return item;
}

function renderPanel(panel: PanelState, index: 0 | 1, handlers: Handlers): HTMLElement {
  const section = el("section", `panel panel-${index}`);
  const header = el("div", "panel-header");
  header.appendChild(el("span", "panel-title", index === 0 ? "ranking" : "comparison"));
  header.appendChild(modeSelect(panel.mode, (mode) => handlers.onMode(index, mode)));
  if (panel.response) {
    header.appendChild(
      el("span", "panel-meta",
        `mode ${panel.response.model_info.mode}, ${panel.response.model_info.K} classes`),
    );
  }
  section.appendChild(header);

  if (panel.error) {
    section.appendChild(el("div", "error-banner", panel.error));
  }
  if (panel.pending) {
    section.appendChild(el("div", "pending", "scoring…"));
  }
  if (panel.response) {
    const list = el("ol", "result-list");
    panel.response.results.forEach((result, i) => {
      list.appendChild(renderResult(i + 1, result, handlers));
    });
    section.appendChild(list);
  } else if (!panel.error && !panel.pending) {
    section.appendChild(
      el("div", "placeholder", "enter one or more descriptions and press Identify"),
    );
  }
  return section;
}

function renderDocumentView(state: SessionState, handlers: Handlers): HTMLElement {
  const view = state.view;
  const section = el("section", "document-view");
  const back = el("button", "back-button", "← back to results");
  back.type = "button";
  back.addEventListener("click", handlers.onBack);
  section.appendChild(back);
  if (view.kind !== "document") return section;
  if (view.error) {
    section.appendChild(el("div", "error-banner", view.error));
    return section;
  }
  if (view.doc) {
    section.appendChild(el("h2", "document-title", view.doc.class_name));
    section.appendChild(el("div", "doc-id", view.doc.doc_id));
    const sentences = el("ul", "document-sentences");
    for (const sentence of view.doc.sentences) {
      sentences.appendChild(el("li", undefined, sentence));
    }
    section.appendChild(sentences);
  }
  return section;
}

export function renderApp(state: SessionState, handlers: Handlers): HTMLElement {
  const root = el("div", "app");
  root.appendChild(el("h1", "app-title", "fieldguide"));
  root.appendChild(renderEditor(state, handlers));
  if (state.view.kind === "document") {
    root.appendChild(renderDocumentView(state, handlers));
  } else {
    const panels = el("div", state.compare ? "panels compare" : "panels");
    panels.appendChild(renderPanel(state.panels[0], 0, handlers));
    if (state.compare) {
      panels.appendChild(renderPanel(state.panels[1], 1, handlers));
    }
    root.appendChild(panels);
  }
  return root;
}
