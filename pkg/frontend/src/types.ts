/** Payload types of the label-service HTTP API (schemas/ in the repo root). */

export interface SessionConfig {
  neighbors: number;
  classes: number;
  sigma0: number;
  time: number;
  budget: number;
  seed?: number;
  purity_runs?: number;
  num_materials?: number | null;
  symmetrize?: "mutual-or" | "directed";
}

export interface SessionRequest {
  cube: string;
  labels?: string | null;
  scope?: "labeled-only" | "all";
  normalization?: "global-max" | "none";
  auto_oracle?: boolean;
  class_names?: string[] | null;
  config: SessionConfig;
}

export type SessionState = "preparing" | "awaiting-label" | "complete";

export interface SessionMeta {
  id: string;
  created: string;
  state: SessionState;
  budget: number;
  effective_budget: number;
  cursor: number;
  classes: number;
  class_names: string[];
  palette: string[];
  rows: number;
  cols: number;
  n_points: number;
  auto_oracle: boolean;
  config: SessionConfig;
}

export interface ContextTile {
  png_base64: string;
  row_offset: number;
  col_offset: number;
}

export interface LabelQuery {
  pixel: number;
  row: number;
  col: number;
  rank: number;
  budget: number;
  spectrum: number[];
  context_tile: ContextTile;
}

export interface QueryLogEntry {
  pixel: number;
  class: number;
}

export interface SegmentationState {
  state: SessionState;
  n_classes: number;
  labels: number[];
  provenance: number[];
  pixel_index: [number, number][];
  query_log: QueryLogEntry[];
  nmi: number | null;
}

/** Provenance codes, matching the segmentation payload. */
export const PROVENANCE_NAMES = [
  "unlabeled",
  "mode",
  "queried",
  "fallback",
  "propagated",
] as const;
