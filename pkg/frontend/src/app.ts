import { ApiClient, ApiError } from "./api.js";
import { renderApp, type Handlers } from "./render.js";
import {
  addDescription,
  applyError,
  applyResponse,
  initialState,
  markPending,
  nonEmptyDescriptions,
  removeDescription,
  RequestSequencer,
  setCompare,
  setDescription,
  setMode,
  setTopK,
  showDocument,
  showDocumentError,
  showResults,
  type SessionState,
} from "./state.js";
import type { Mode } from "./types.js";

export class App {
  state: SessionState = initialState();
  private readonly sequencers: [RequestSequencer, RequestSequencer] = [
    new RequestSequencer(),
    new RequestSequencer(),
  ];
  private readonly handlers: Handlers;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
  ) {
    this.handlers = {
      // Typing mutates state without a re-render so the input keeps focus;
      // every other transition re-renders from scratch.
      onDescriptionInput: (index, value) => {
        this.state = setDescription(this.state, index, value);
      },
      onAddDescription: () => this.update(addDescription(this.state)),
      onRemoveDescription: (index) => this.update(removeDescription(this.state, index)),
      onTopK: (value) => this.update(setTopK(this.state, Math.max(1, value))),
      onCompareToggle: (value) => this.update(setCompare(this.state, value)),
      onMode: (panel, mode) => this.onMode(panel, mode),
      onSubmit: () => void this.submit(),
      onViewDocument: (docId) => void this.openDocument(docId),
      onBack: () => this.update(showResults(this.state)),
    };
  }

  init(): void {
    this.render();
  }

  update(next: SessionState): void {
    this.state = next;
    this.render();
  }

  render(): void {
    this.root.replaceChildren(renderApp(this.state, this.handlers));
  }

  /** Mode changes keep the entered descriptions and refresh that panel. */
  private onMode(panel: 0 | 1, mode: Mode): void {
    this.update(setMode(this.state, panel, mode));
    if (this.state.panels[panel].response) {
      void this.submitPanel(panel);
    }
  }

  async submit(): Promise<void> {
    const jobs = [this.submitPanel(0)];
    if (this.state.compare) jobs.push(this.submitPanel(1));
    this.update(showResults(this.state));
    await Promise.all(jobs);
  }

  private async submitPanel(panel: 0 | 1): Promise<void> {
    const captions = nonEmptyDescriptions(this.state);
    if (captions.length === 0) {
      this.update(applyError(this.state, panel, "enter at least one description"));
      return;
    }
    const token = this.sequencers[panel].next();
    this.update(markPending(this.state, panel));
    try {
      const response = await this.api.identify({
        captions,
        top_k: this.state.topK,
        mode: this.state.panels[panel].mode,
      });
      if (!this.sequencers[panel].isCurrent(token)) return; // superseded
      this.update(applyResponse(this.state, panel, response));
    } catch (err) {
      if (!this.sequencers[panel].isCurrent(token)) return;
      const message = err instanceof ApiError ? err.message : String(err);
      this.update(applyError(this.state, panel, message));
    }
  }

  async openDocument(docId: string): Promise<void> {
    try {
      const doc = await this.api.document(docId);
      this.update(showDocument(this.state, doc));
    } catch (err) {
      const message = err instanceof ApiError ? err.message : String(err);
      this.update(showDocumentError(this.state, message));
    }
  }
}

export function mount(root: HTMLElement, baseUrl = ""): App {
  const app = new App(root, new ApiClient(baseUrl));
  app.init();
  return app;
}
