/**
 * Typed mirrors of the JSON payloads served by the pipeline HTTP API.
 *
 * These interfaces describe wire shapes only; the client never derives
 * new numbers from them (thin-client rule: every figure on screen comes
 * from the service verbatim, formatting aside).
 */

export type Stage =
  | "Created"
  | "Described"
  | "ImagesGenerated"
  | "ImageSelected"
  | "MeshGenerated"
  | "MeshSelected"
  | "PostProcessed"
  | "Exported";

export type JobState = "queued" | "running" | "succeeded" | "failed";

export interface ApiError {
  kind: string;
  detail: string;
}

export interface Job {
  id: string;
  kind: string;
  session_id: string | null;
  state: JobState;
  error: ApiError | null;
  result: unknown;
}

export interface PromptRevision {
  index: number;
  text: string;
  parent: number | null;
  appended_feedback: string | null;
}

export interface CandidateImage {
  blob: string;
  contains_text: boolean;
  origin: string;
  revised_prompt: string;
}

export interface BoundingBox {
  min: [number, number, number];
  max: [number, number, number];
}

export interface ManufacturabilityReport {
  vertex_count: number;
  triangle_count: number;
  boundary_edge_count: number;
  nonmanifold_edge_count: number;
  inconsistent_orientation_edge_count: number;
  component_count: number;
  degenerate_triangle_count: number;
  signed_volume: number;
  bbox: BoundingBox | null;
  printable: boolean;
}

export interface MeshCandidate {
  backend: string;
  blob: string;
  report: ManufacturabilityReport;
  similarity_to_image: number;
}

export interface BackendFailure {
  backend: string;
  kind: string;
  detail: string;
}

export interface Iteration {
  index: number;
  prompt: PromptRevision;
  images: CandidateImage[];
  selected_image: number | null;
  mesh_candidates: MeshCandidate[];
  backend_failures: BackendFailure[];
  selected_mesh: number | null;
  final_report: ManufacturabilityReport | null;
  stl_blob: string | null;
}

export interface SessionView {
  id: string;
  created_at: string;
  sketch_blob: string;
  user_note: string;
  description: string | null;
  stage: Stage;
  version: number;
  iterations: Iteration[];
}

export interface AlignmentRow {
  record_id: string;
  sketch_text: number;
  image_text_mean: number;
  sketch_image_mean: number;
}

export interface AlignmentReport {
  rows: AlignmentRow[];
  corpus_means: {
    sketch_text: number;
    image_text: number;
    sketch_image: number;
  };
}

export interface DiversitySet {
  set_id: string;
  score: number;
}

export interface DiversityExemplar {
  percentile: number;
  set_id: string;
  score: number;
}

export interface DiversityReport {
  sets: DiversitySet[];
  exemplars: DiversityExemplar[];
  histogram: {
    bin_edges: number[];
    counts: number[];
  };
}

export interface DatasetRecord {
  index: number;
  sketch_path: string;
  sketch_sha256?: string;
  status: "complete" | "failed";
  description?: string;
  generation_prompt?: string;
  image_blobs?: string[];
  metrics?: Record<string, number | null>;
  error?: ApiError;
}

export interface DatasetManifest {
  fingerprint: string;
  seed: number;
  records: DatasetRecord[];
  totals: { sketch_count: number; image_count: number };
  images_per_sketch: number;
}
