/**
 * Scripted in-memory stand-in for the HTTP client, used by component
 * tests. It mutates one session object the way the real service would,
 * with deliberately odd numbers so tests can assert that what reaches
 * the DOM is the payload value verbatim (after display formatting only).
 */

import type { WizardClient } from "../src/wizard";
import type {
  DiversityReport,
  Job,
  ManufacturabilityReport,
  PromptRevision,
  SessionView,
} from "../src/types";

export const FIXTURE_REPORT: ManufacturabilityReport = {
  vertex_count: 1234,
  triangle_count: 2464,
  boundary_edge_count: 0,
  nonmanifold_edge_count: 0,
  inconsistent_orientation_edge_count: 0,
  component_count: 1,
  degenerate_triangle_count: 0,
  signed_volume: 123.456789,
  bbox: { min: [-1.25, -2.5, 0], max: [1.25, 2.5, 7.75] },
  printable: true,
};

export const FIXTURE_HOLEY_REPORT: ManufacturabilityReport = {
  ...FIXTURE_REPORT,
  boundary_edge_count: 17,
  signed_volume: 98.7654321,
  printable: false,
};

export const FIXTURE_DIVERSITY: DiversityReport = {
  sets: [
    { set_id: "a", score: 21.5 },
    { set_id: "b", score: 34.25 },
    { set_id: "c", score: 55.125 },
    { set_id: "d", score: 76.5 },
    { set_id: "e", score: 88.875 },
  ],
  exemplars: [
    { percentile: 5, set_id: "a", score: 21.5 },
    { percentile: 50, set_id: "c", score: 55.125 },
    { percentile: 95, set_id: "e", score: 88.875 },
  ],
  histogram: {
    bin_edges: [0, 25, 50, 75, 100],
    counts: [1, 2, 0, 2],
  },
};

function succeededJob(kind: string, sessionId: string): Job {
  return { id: `job-${kind}`, kind, session_id: sessionId, state: "succeeded", error: null, result: null };
}

export interface FixtureOptions {
  /** When set, describe jobs fail with this error kind. */
  failDescribeKind?: string;
  /** When set, feedback jobs fail with this kind and mutate nothing. */
  failFeedbackKind?: string;
}

export class FixtureClient implements WizardClient {
  session: SessionView | null = null;
  readonly calls: string[] = [];

  constructor(private readonly options: FixtureOptions = {}) {}

  private record(call: string): void {
    this.calls.push(call);
  }

  async createSession(_sketch: Uint8Array, note: string): Promise<SessionView> {
    this.record("createSession");
    this.session = {
      id: "fixture-session",
      created_at: "2026-01-01T00:00:00Z",
      sketch_blob: "sketchblob",
      user_note: note,
      description: null,
      stage: "Created",
      version: 1,
      iterations: [],
    };
    return structuredClone(this.session);
  }

  async getSession(_id: string): Promise<SessionView> {
    this.record("getSession");
    return structuredClone(this.session!);
  }

  private emptyIteration(index: number, prompt: PromptRevision) {
    return {
      index,
      prompt,
      images: [],
      selected_image: null,
      mesh_candidates: [],
      backend_failures: [],
      selected_mesh: null,
      final_report: null,
      stl_blob: null,
    };
  }

  private latest() {
    return this.session!.iterations[this.session!.iterations.length - 1];
  }

  private makeImages(revisionIndex: number) {
    return [0, 1, 2, 3].map((i) => ({
      blob: `img-${revisionIndex}-${i}`,
      contains_text: false,
      origin: "text_to_image",
      revised_prompt: `variant ${i + 1}`,
    }));
  }

  async describe(id: string): Promise<Job> {
    this.record("describe");
    if (!this.options.failDescribeKind) {
      this.session!.description = "A rounded mug with a looping handle.";
      this.session!.iterations.push(
        this.emptyIteration(1, {
          index: 1,
          text: "A studio photograph of a rounded mug",
          parent: null,
          appended_feedback: null,
        }),
      );
      this.session!.stage = "Described";
      this.session!.version += 1;
    }
    return succeededJob("describe", id);
  }

  async editDescription(_id: string, text: string): Promise<PromptRevision> {
    this.record(`editDescription:${text}`);
    const latest = this.latest();
    const revision: PromptRevision = {
      index: Math.max(...this.session!.iterations.map((it) => it.prompt.index)) + 1,
      text,
      parent: latest.prompt.index,
      appended_feedback: null,
    };
    if (latest.images.length) {
      this.session!.iterations.push(this.emptyIteration(latest.index + 1, revision));
    } else {
      latest.prompt = revision;
    }
    this.session!.version += 1;
    return structuredClone(revision);
  }

  async generateImages(id: string): Promise<Job> {
    this.record("generateImages");
    const latest = this.latest();
    latest.images = this.makeImages(latest.prompt.index);
    this.session!.stage = "ImagesGenerated";
    this.session!.version += 1;
    return succeededJob("images", id);
  }

  async appendFeedback(id: string, text: string): Promise<Job> {
    this.record(`appendFeedback:${text}`);
    if (this.options.failFeedbackKind) {
      return succeededJob("feedback", id);
    }
    const previous = this.latest();
    const revision: PromptRevision = {
      index: Math.max(...this.session!.iterations.map((it) => it.prompt.index)) + 1,
      text: `${previous.prompt.text} ${text}`,
      parent: previous.prompt.index,
      appended_feedback: text,
    };
    const iteration = this.emptyIteration(previous.index + 1, revision);
    iteration.images = this.makeImages(revision.index);
    this.session!.iterations.push(iteration);
    this.session!.stage = "ImagesGenerated";
    this.session!.version += 1;
    return succeededJob("feedback", id);
  }

  async selectImage(_id: string, index: number, flags: boolean[]): Promise<SessionView> {
    this.record(`selectImage:${index}:${flags.join(",")}`);
    const latest = this.latest();
    latest.images.forEach((img, i) => {
      img.contains_text = flags[i] ?? false;
    });
    latest.selected_image = index;
    this.session!.stage = "ImageSelected";
    this.session!.version += 1;
    return structuredClone(this.session!);
  }

  async generateMeshes(id: string): Promise<Job> {
    this.record("generateMeshes");
    const latest = this.session!.iterations[this.session!.iterations.length - 1];
    latest.mesh_candidates = [
      { backend: "prim-clean", blob: "mesh-clean", report: FIXTURE_REPORT, similarity_to_image: 7.7777 },
      { backend: "prim-holes", blob: "mesh-holes", report: FIXTURE_HOLEY_REPORT, similarity_to_image: 2.125 },
    ];
    latest.backend_failures = [
      { backend: "prim-downed", kind: "Unavailable", detail: "simulated outage" },
    ];
    this.session!.stage = "MeshGenerated";
    this.session!.version += 1;
    return succeededJob("mesh", id);
  }

  async selectMesh(_id: string, index: number): Promise<SessionView> {
    this.record(`selectMesh:${index}`);
    const latest = this.session!.iterations[this.session!.iterations.length - 1];
    latest.selected_mesh = index;
    this.session!.stage = "MeshSelected";
    this.session!.version += 1;
    return structuredClone(this.session!);
  }

  async postprocess(id: string): Promise<Job> {
    this.record("postprocess");
    const latest = this.session!.iterations[this.session!.iterations.length - 1];
    latest.final_report = FIXTURE_REPORT;
    latest.stl_blob = "stl-final";
    this.session!.stage = "Exported";
    this.session!.version += 1;
    return succeededJob("postprocess", id);
  }

  async pollJob(id: string): Promise<Job> {
    this.record("pollJob");
    if (this.options.failDescribeKind && id === "job-describe") {
      throw { kind: this.options.failDescribeKind, detail: "input rejected by content filter" };
    }
    if (this.options.failFeedbackKind && id === "job-feedback") {
      throw { kind: this.options.failFeedbackKind, detail: "feedback rejected by content filter" };
    }
    return succeededJob("poll", id);
  }

  exportUrl(id: string): string {
    return `fixture://export/${id}`;
  }

  blobUrl(hash: string): string {
    return `fixture://blobs/${hash}`;
  }

  async fetchBlob(_hash: string): Promise<ArrayBuffer> {
    this.record("fetchBlob");
    throw new Error("fixture client has no blob bytes");
  }
}
