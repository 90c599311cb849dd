/**
 * Session Wizard
 *
 * A 5-step workbench that steers one design session end to end:
 *
 * Step 1: Sketch — upload a hand-drawn sketch plus a free-text note
 * Step 2: Description — generate the text description, review, edit inline
 * Step 3: Candidates — image grid with contains-text toggles, feedback box
 *         with prompt-revision lineage, select one image
 * Step 4: Meshes — one candidate per backend with its manufacturability
 *         report and a wireframe preview, select one
 * Step 5: Export — repair, final report, STL download
 *
 * The wizard computes nothing: every figure on screen arrives from the
 * service, and every state change round-trips through a documented
 * endpoint. While a job is in flight all controls are disabled; after a
 * job completes the session is refetched so the stage shown is never
 * stale.
 */

import { clear, el } from "./dom.js";
import { formatBbox, formatCount, formatScore, formatVolume } from "./format.js";
import { parseBinaryPly, parseBinaryStl, type ParsedMesh } from "./mesh.js";
import { renderWireframe } from "./preview.js";
import type {
  ApiError,
  Iteration,
  Job,
  ManufacturabilityReport,
  PromptRevision,
  SessionView,
} from "./types.js";

/** The surface of StudioClient the wizard drives (stubbed in tests). */
export interface WizardClient {
  createSession(sketch: Uint8Array, note: string): Promise<SessionView>;
  getSession(id: string): Promise<SessionView>;
  describe(id: string): Promise<Job>;
  editDescription(id: string, text: string): Promise<PromptRevision>;
  generateImages(id: string, count?: number): Promise<Job>;
  appendFeedback(id: string, text: string): Promise<Job>;
  selectImage(id: string, index: number, containsTextFlags: boolean[]): Promise<SessionView>;
  generateMeshes(id: string): Promise<Job>;
  selectMesh(id: string, index: number): Promise<SessionView>;
  postprocess(id: string): Promise<Job>;
  pollJob(id: string): Promise<Job>;
  exportUrl(id: string): string;
  blobUrl(hash: string): string;
  fetchBlob(hash: string): Promise<ArrayBuffer>;
}

interface StepInfo {
  number: number;
  title: string;
  description: string;
}

const REPORT_ROWS: Array<[keyof ManufacturabilityReport, string, (v: never) => string]> = [
  ["vertex_count", "vertices", formatCount],
  ["triangle_count", "triangles", formatCount],
  ["boundary_edge_count", "boundary edges", formatCount],
  ["nonmanifold_edge_count", "non-manifold edges", formatCount],
  ["inconsistent_orientation_edge_count", "flipped-winding edges", formatCount],
  ["component_count", "components", formatCount],
  ["degenerate_triangle_count", "degenerate triangles", formatCount],
  ["signed_volume", "signed volume", formatVolume],
  ["bbox", "bounding box", formatBbox],
];

function toApiError(err: unknown): ApiError {
  if (err && typeof err === "object" && "kind" in err && "detail" in err) {
    return { kind: String(err.kind), detail: String(err.detail) };
  }
  return { kind: "Error", detail: String(err) };
}

/** Read a File's bytes, via FileReader where Blob.arrayBuffer is missing. */
function readFileBytes(file: File): Promise<Uint8Array> {
  if (typeof file.arrayBuffer === "function") {
    return file.arrayBuffer().then((buffer) => new Uint8Array(buffer));
  }
  return new Promise((resolve, reject) => {
    const reader = new FileReader();
    reader.onload = () => resolve(new Uint8Array(reader.result as ArrayBuffer));
    reader.onerror = () => reject(reader.error ?? new Error("could not read file"));
    reader.readAsArrayBuffer(file);
  });
}

export class SessionWizard {
  private session: SessionView | null = null;
  private currentStep = 1;
  private busy = false;
  private jobNote = "";
  private error: ApiError | null = null;
  private selectError: string | null = null;
  private flags: boolean[] = [];

  readonly steps: StepInfo[] = [
    { number: 1, title: "Sketch", description: "Upload a sketch and note" },
    { number: 2, title: "Description", description: "Review and edit the prompt" },
    { number: 3, title: "Candidates", description: "Flag, iterate, select an image" },
    { number: 4, title: "Meshes", description: "Compare backends, select a mesh" },
    { number: 5, title: "Export", description: "Repair, inspect, download STL" },
  ];

  constructor(
    private readonly client: WizardClient,
    private readonly root: HTMLElement,
  ) {}

  get sessionId(): string | null {
    return this.session?.id ?? null;
  }

  get step(): number {
    return this.currentStep;
  }

  start(): void {
    this.render();
  }

  // --- state transitions -------------------------------------------------

  private async run(note: string, task: () => Promise<void>): Promise<void> {
    this.busy = true;
    this.jobNote = note;
    this.error = null;
    this.selectError = null;
    this.render();
    try {
      await task();
    } catch (err) {
      this.error = toApiError(err);
    } finally {
      this.busy = false;
      this.jobNote = "";
      this.render();
    }
  }

  /** Refetch the session after a job so the displayed stage is current. */
  private async refresh(): Promise<void> {
    if (!this.session) {
      return;
    }
    this.session = await this.client.getSession(this.session.id);
    const latest = this.latestIteration();
    this.flags = latest ? latest.images.map((img) => img.contains_text) : [];
  }

  private latestIteration(): Iteration | null {
    const iterations = this.session?.iterations ?? [];
    return iterations.length ? iterations[iterations.length - 1] : null;
  }

  private async createSession(file: File, note: string): Promise<void> {
    await this.run("creating session", async () => {
      const bytes = await readFileBytes(file);
      this.session = await this.client.createSession(bytes, note);
      this.currentStep = 2;
    });
  }

  private async generateDescription(): Promise<void> {
    const id = this.session!.id;
    await this.run("describing sketch", async () => {
      const job = await this.client.describe(id);
      await this.client.pollJob(job.id);
      await this.refresh();
    });
  }

  private async saveDescription(text: string): Promise<void> {
    const id = this.session!.id;
    await this.run("saving description", async () => {
      await this.client.editDescription(id, text);
      await this.refresh();
    });
  }

  private async generateImages(): Promise<void> {
    const id = this.session!.id;
    await this.run("generating images", async () => {
      const job = await this.client.generateImages(id);
      await this.client.pollJob(job.id);
      await this.refresh();
    });
  }

  private async appendFeedback(text: string): Promise<void> {
    const id = this.session!.id;
    await this.run("regenerating with feedback", async () => {
      const job = await this.client.appendFeedback(id, text);
      await this.client.pollJob(job.id);
      await this.refresh();
    });
  }

  /** Flagged images are blocked here, before any request is made. */
  private async selectImage(index: number): Promise<void> {
    if (this.flags[index]) {
      this.selectError =
        `Image ${index + 1} is flagged as containing text. ` +
        "Pick an unflagged candidate or clear the flag if it was a mistake.";
      this.render();
      return;
    }
    const id = this.session!.id;
    const flags = [...this.flags];
    await this.run("selecting image", async () => {
      this.session = await this.client.selectImage(id, index, flags);
      this.currentStep = 4;
    });
  }

  private async generateMeshes(): Promise<void> {
    const id = this.session!.id;
    await this.run("generating meshes", async () => {
      const job = await this.client.generateMeshes(id);
      await this.client.pollJob(job.id);
      await this.refresh();
    });
  }

  private async selectMesh(index: number): Promise<void> {
    const id = this.session!.id;
    await this.run("selecting mesh", async () => {
      this.session = await this.client.selectMesh(id, index);
      this.currentStep = 5;
    });
  }

  private async postprocess(): Promise<void> {
    const id = this.session!.id;
    await this.run("repairing and exporting", async () => {
      const job = await this.client.postprocess(id);
      await this.client.pollJob(job.id);
      await this.refresh();
    });
  }

  // --- rendering ----------------------------------------------------------

  private render(): void {
    clear(this.root);
    this.root.append(this.renderStepList(), this.renderBanner(), this.renderScreen());
  }

  private renderStepList(): HTMLElement {
    const list = el("ol", { class: "wizard-steps" });
    for (const step of this.steps) {
      const item = el(
        "li",
        { class: step.number === this.currentStep ? "step active" : "step" },
        el("span", { class: "step-title" }, `${step.number}. ${step.title}`),
        el("span", { class: "step-note" }, step.description),
      );
      if (step.number < this.currentStep) {
        item.classList.add("done");
        item.addEventListener("click", () => {
          if (!this.busy) {
            this.currentStep = step.number;
            this.render();
          }
        });
      }
      list.append(item);
    }
    return list;
  }

  private renderBanner(): HTMLElement {
    const banner = el("div", { class: "banner" });
    if (this.busy) {
      banner.append(el("div", { class: "job-status" }, `Working: ${this.jobNote}…`));
    }
    if (this.error) {
      const box = el(
        "div",
        { class: "error-banner", "data-kind": this.error.kind },
        el("strong", {}, this.error.kind),
        ` — ${this.error.detail}`,
      );
      if (this.error.kind === "SafetyRejected") {
        const fix = el("button", { class: "edit-prompt" }, "Edit your prompt");
        fix.addEventListener("click", () => {
          this.error = null;
          this.currentStep = this.session?.description ? 2 : 1;
          this.render();
          const editable = this.root.querySelector<HTMLTextAreaElement>(
            ".note-input, .description-editor",
          );
          editable?.focus();
        });
        box.append(" ", fix);
      }
      banner.append(box);
    }
    return banner;
  }

  private renderScreen(): HTMLElement {
    switch (this.currentStep) {
      case 1:
        return this.renderSketchScreen();
      case 2:
        return this.renderDescriptionScreen();
      case 3:
        return this.renderCandidatesScreen();
      case 4:
        return this.renderMeshScreen();
      default:
        return this.renderExportScreen();
    }
  }

  private button(label: string, cls: string, onClick: () => void): HTMLButtonElement {
    const attrs: Record<string, string> = { class: cls };
    if (this.busy) {
      attrs.disabled = "";
    }
    const node = el("button", attrs, label);
    node.addEventListener("click", onClick);
    return node;
  }

  private renderSketchScreen(): HTMLElement {
    const screen = el("section", { class: "screen screen-sketch" });
    if (this.session) {
      screen.append(
        el("img", {
          class: "sketch-thumb",
          src: this.client.blobUrl(this.session.sketch_blob),
          alt: "uploaded sketch",
        }),
        el("p", { class: "note-display" }, this.session.user_note || "(no note)"),
        this.button("Next: description", "next-step", () => {
          this.currentStep = 2;
          this.render();
        }),
      );
      return screen;
    }
    const fileInput = el("input", { class: "sketch-input", type: "file", accept: "image/png" });
    const noteInput = el("textarea", {
      class: "note-input",
      placeholder: "What is this object? Materials, style, purpose…",
    });
    const create = this.button("Create session", "create-session", () => {
      const file = fileInput.files?.[0];
      if (!file) {
        this.error = { kind: "Validation", detail: "choose a sketch image first" };
        this.render();
        return;
      }
      void this.createSession(file, noteInput.value);
    });
    screen.append(
      el("label", {}, "Sketch (PNG): ", fileInput),
      el("label", {}, "Note: ", noteInput),
      create,
    );
    return screen;
  }

  private renderDescriptionScreen(): HTMLElement {
    const screen = el("section", { class: "screen screen-description" });
    const session = this.session!;
    if (!session.description) {
      screen.append(
        el("p", {}, "No description yet."),
        this.button("Generate description", "generate-description", () => {
          void this.generateDescription();
        }),
      );
      return screen;
    }
    // The narrative description is what the system understood from the
    // sketch; the editable text is the current prompt revision, which is
    // what image generation will actually use.
    const prompt = this.latestIteration()?.prompt;
    const editor = el("textarea", { class: "description-editor" });
    editor.value = prompt?.text ?? session.description;
    const save = this.button("Save edit", "save-description", () => {
      void this.saveDescription(editor.value);
    });
    screen.append(
      el("h3", {}, "What the system understood"),
      el("p", { class: "description-display" }, session.description),
      el("h3", {}, "Image prompt (editable)"),
      editor,
      save,
      this.button("Next: candidates", "next-step", () => {
        this.currentStep = 3;
        this.render();
      }),
    );
    return screen;
  }

  private renderCandidatesScreen(): HTMLElement {
    const screen = el("section", { class: "screen screen-candidates" });
    const latest = this.latestIteration();
    if (!latest || latest.images.length === 0) {
      screen.append(
        this.button("Generate candidate images", "generate-images", () => {
          void this.generateImages();
        }),
      );
      return screen;
    }

    screen.append(this.renderLineage());

    const grid = el("div", { class: "candidate-grid" });
    latest.images.forEach((image, index) => {
      const toggle = el("input", { class: "flag-toggle", type: "checkbox" });
      toggle.checked = this.flags[index] ?? false;
      toggle.addEventListener("change", () => {
        this.flags[index] = toggle.checked;
        this.selectError = null;
        this.root.querySelector(".select-error")?.remove();
      });
      const card = el(
        "div",
        { class: "candidate", "data-index": String(index) },
        el("img", {
          class: "candidate-image",
          src: this.client.blobUrl(image.blob),
          alt: image.revised_prompt,
        }),
        el("label", { class: "flag-label" }, toggle, " contains text"),
        this.button("Select", "select-image", () => {
          void this.selectImage(index);
        }),
      );
      if (latest.selected_image === index) {
        card.classList.add("selected");
      }
      grid.append(card);
    });
    screen.append(grid);

    if (this.selectError) {
      screen.append(el("div", { class: "select-error" }, this.selectError));
    }

    if (latest.selected_image === null) {
      const feedback = el("textarea", {
        class: "feedback-input",
        placeholder: "Append a sentence, e.g. “made of wood and styled like an old saloon”",
      });
      screen.append(
        el(
          "div",
          { class: "feedback-box" },
          feedback,
          this.button("Regenerate with feedback", "append-feedback", () => {
            if (feedback.value.trim()) {
              void this.appendFeedback(feedback.value.trim());
            }
          }),
        ),
      );
    } else {
      screen.append(
        this.button("Next: meshes", "next-step", () => {
          this.currentStep = 4;
          this.render();
        }),
      );
    }
    return screen;
  }

  private renderLineage(): HTMLElement {
    const list = el("ol", { class: "lineage" });
    for (const iteration of this.session?.iterations ?? []) {
      const prompt = iteration.prompt;
      const origin =
        prompt.parent === null
          ? "initial prompt"
          : prompt.appended_feedback
            ? `from #${prompt.parent} + “${prompt.appended_feedback}”`
            : `edited from #${prompt.parent}`;
      list.append(
        el(
          "li",
          { class: "lineage-item", "data-revision": String(prompt.index) },
          el("span", { class: "lineage-origin" }, `#${prompt.index} (${origin}): `),
          el("span", { class: "lineage-text" }, prompt.text),
        ),
      );
    }
    return list;
  }

  private renderReportTable(report: ManufacturabilityReport): HTMLElement {
    const table = el("table", { class: "report-table" });
    for (const [field, label, format] of REPORT_ROWS) {
      table.append(
        el(
          "tr",
          { "data-field": field },
          el("td", {}, label),
          el("td", { class: "report-value" }, (format as (v: unknown) => string)(report[field])),
        ),
      );
    }
    const verdict = el(
      "tr",
      { "data-field": "printable" },
      el("td", {}, "printable"),
      el(
        "td",
        { class: `report-value printable-verdict ${report.printable ? "yes" : "no"}` },
        report.printable ? "yes" : "no",
      ),
    );
    table.append(verdict);
    return table;
  }

  private attachPreview(slot: HTMLElement, blob: string, parse: (data: ArrayBuffer) => ParsedMesh): void {
    this.client
      .fetchBlob(blob)
      .then((data) => {
        clear(slot);
        slot.append(renderWireframe(parse(data)));
      })
      .catch(() => {
        clear(slot);
        slot.append(el("span", { class: "preview-unavailable" }, "preview unavailable"));
      });
  }

  private renderMeshScreen(): HTMLElement {
    const screen = el("section", { class: "screen screen-meshes" });
    const latest = this.latestIteration();
    if (!latest || latest.mesh_candidates.length === 0) {
      screen.append(
        this.button("Generate mesh candidates", "generate-meshes", () => {
          void this.generateMeshes();
        }),
      );
      return screen;
    }
    const cards = el("div", { class: "mesh-cards" });
    latest.mesh_candidates.forEach((candidate, index) => {
      const preview = el("div", { class: "preview-slot" }, "loading preview…");
      this.attachPreview(preview, candidate.blob, parseBinaryPly);
      const card = el(
        "div",
        { class: "mesh-card", "data-backend": candidate.backend },
        el("h4", {}, candidate.backend),
        el(
          "p",
          { class: "similarity" },
          "similarity to image: ",
          el("span", { class: "similarity-value" }, formatScore(candidate.similarity_to_image)),
        ),
        preview,
        this.renderReportTable(candidate.report),
        this.button("Select", "select-mesh", () => {
          void this.selectMesh(index);
        }),
      );
      if (latest.selected_mesh === index) {
        card.classList.add("selected");
      }
      cards.append(card);
    });
    screen.append(cards);
    for (const failure of latest.backend_failures) {
      screen.append(
        el("div", { class: "backend-failure" }, `${failure.backend}: ${failure.kind} — ${failure.detail}`),
      );
    }
    return screen;
  }

  private renderExportScreen(): HTMLElement {
    const screen = el("section", { class: "screen screen-export" });
    const session = this.session!;
    const latest = this.latestIteration();
    if (!latest?.final_report || !latest.stl_blob) {
      screen.append(
        el("p", {}, "Run repair to produce the print-ready STL."),
        this.button("Repair and export", "run-postprocess", () => {
          void this.postprocess();
        }),
      );
      return screen;
    }
    const preview = el("div", { class: "preview-slot" }, "loading preview…");
    this.attachPreview(preview, latest.stl_blob, parseBinaryStl);
    const download = el(
      "a",
      {
        class: "download-stl",
        href: this.client.exportUrl(session.id),
        download: `${session.id}.stl`,
      },
      "Download STL",
    );
    screen.append(
      el("h3", {}, `Session ${session.id} — ${session.stage}`),
      el("div", { class: "final-report" }, this.renderReportTable(latest.final_report)),
      preview,
      download,
    );
    return screen;
  }
}
