// Wire types mirroring the loosekey HTTP API.

export interface JointInfo {
  name: string;
  parent: number;
  offset: [number, number, number];
}

export interface SkeletonDoc {
  joints: JointInfo[];
  contact_joints: number[];
}

export interface LayoutDoc {
  num_joints: number;
  shape_dims: number;
  contact_dims: number;
}

export interface SkeletonResponse {
  skeleton: SkeletonDoc;
  layout: LayoutDoc;
  fps: number;
  frames: number;
  max_shift: number;
  rest_positions: number[][];
}

export interface KeyframePayload {
  frame: number;
  pose: number[];
}

export interface GeneratePayload {
  keyframes: KeyframePayload[];
  F_total: number;
  num_samples: number;
  seed: number;
  mode?: string;
  imputation_C?: number | null;
}

export interface EditPayload {
  base_motion_id: string;
  keep_ranges: [number, number][];
  keyframes: KeyframePayload[];
  F_total?: number;
  num_samples: number;
  seed: number;
  imputation_C?: number | null;
}

export interface MotionDoc {
  version: number;
  fps: number;
  layout: LayoutDoc;
  frames: number[][];
}

export interface JobMetrics {
  kpe_per_motion?: number[];
}

export interface JobRecord {
  job_id: string;
  kind: string;
  status: "queued" | "running" | "done" | "failed";
  motion_ids: string[];
  error: string | null;
  result_uri: string | null;
  metrics?: JobMetrics | null;
}

export interface GenerateResponse {
  job_id: string;
  status: string;
  motion_ids?: string[];
  motions?: MotionDoc[];
  metrics?: JobMetrics | null;
}

export function layoutDim(layout: LayoutDoc): number {
  return 6 * layout.num_joints + 3 + layout.shape_dims + layout.contact_dims + 3 * layout.num_joints;
}
