// Timeline state: keyframe chips, kept ranges (edit mode), seeds, playback
// cursor. Edits are local until Generate; undo/redo snapshots the chip state.

import type { EditPayload, GeneratePayload, KeyframePayload } from "./types.js";

export interface Chip {
  frame: number;
  pose: number[];
  label: string;
}

export type KeepRange = [number, number]; // [a, b)

export class TimelineError extends Error {}

export class TimelineState {
  totalFrames: number;
  fps: number;
  maxShift: number; // loose-timing tolerance band half-width (P)
  chips: Chip[] = [];
  keepRanges: KeepRange[] = [];
  seeds: number[] = [0];
  cursor = 0;
  baseMotionId: string | null = null;

  private undoStack: string[] = [];
  private redoStack: string[] = [];

  constructor(totalFrames: number, fps: number, maxShift = 5) {
    if (totalFrames < 2) throw new TimelineError("timeline needs at least 2 frames");
    this.totalFrames = totalFrames;
    this.fps = fps;
    this.maxShift = maxShift;
  }

  private snapshot(): string {
    return JSON.stringify({
      chips: this.chips,
      keepRanges: this.keepRanges,
      totalFrames: this.totalFrames,
    });
  }

  private restore(snap: string): void {
    const data = JSON.parse(snap);
    this.chips = data.chips;
    this.keepRanges = data.keepRanges;
    this.totalFrames = data.totalFrames;
  }

  private pushUndo(): void {
    this.undoStack.push(this.snapshot());
    this.redoStack = [];
  }

  undo(): boolean {
    const snap = this.undoStack.pop();
    if (snap === undefined) return false;
    this.redoStack.push(this.snapshot());
    this.restore(snap);
    return true;
  }

  redo(): boolean {
    const snap = this.redoStack.pop();
    if (snap === undefined) return false;
    this.undoStack.push(this.snapshot());
    this.restore(snap);
    return true;
  }

  /** Snap a fractional timeline position (e.g. from a drag) to a frame index. */
  snapToFrame(position: number): number {
    return Math.max(0, Math.min(this.totalFrames - 1, Math.round(position)));
  }

  chipAt(frame: number): Chip | undefined {
    return this.chips.find((c) => c.frame === frame);
  }

  addChip(frame: number, pose: number[], label = ""): void {
    frame = this.snapToFrame(frame);
    if (this.chipAt(frame)) throw new TimelineError(`keyframe already exists at frame ${frame}`);
    if (this.inKeepRange(frame)) throw new TimelineError(`frame ${frame} lies in a kept range`);
    this.pushUndo();
    this.chips.push({ frame, pose, label });
    this.chips.sort((a, b) => a.frame - b.frame);
  }

  moveChip(from: number, to: number): void {
    const chip = this.chipAt(from);
    if (!chip) throw new TimelineError(`no keyframe at frame ${from}`);
    to = this.snapToFrame(to);
    if (to === from) return;
    if (this.chipAt(to)) throw new TimelineError(`keyframe already exists at frame ${to}`);
    if (this.inKeepRange(to)) throw new TimelineError(`frame ${to} lies in a kept range`);
    this.pushUndo();
    chip.frame = to;
    this.chips.sort((a, b) => a.frame - b.frame);
  }

  deleteChip(frame: number): void {
    const idx = this.chips.findIndex((c) => c.frame === frame);
    if (idx < 0) throw new TimelineError(`no keyframe at frame ${frame}`);
    this.pushUndo();
    this.chips.splice(idx, 1);
  }

  /** Tolerance band [frame-P, frame+P] clipped to the timeline, for rendering. */
  toleranceBand(frame: number): [number, number] {
    return [Math.max(0, frame - this.maxShift), Math.min(this.totalFrames - 1, frame + this.maxShift)];
  }

  inKeepRange(frame: number): boolean {
    return this.keepRanges.some(([a, b]) => a <= frame && frame < b);
  }

  addKeepRange(a: number, b: number): void {
    if (!(0 <= a && a < b && b <= this.totalFrames))
      throw new TimelineError(`invalid range [${a}, ${b})`);
    for (const [x, y] of this.keepRanges)
      if (a < y && x < b) throw new TimelineError("kept ranges must be disjoint");
    for (const chip of this.chips)
      if (a <= chip.frame && chip.frame < b)
        throw new TimelineError(`range collides with keyframe at ${chip.frame}`);
    this.pushUndo();
    this.keepRanges.push([a, b]);
    this.keepRanges.sort((r, s) => r[0] - s[0]);
  }

  clearKeepRanges(): void {
    this.pushUndo();
    this.keepRanges = [];
  }

  get canGenerate(): boolean {
    return this.chips.length > 0 || this.keepRanges.length > 0;
  }

  private keyframePayloads(): KeyframePayload[] {
    return this.chips.map((c) => ({ frame: c.frame, pose: c.pose }));
  }

  /** KeyframeSet-style payload for POST /generate. */
  serializeGenerate(numSamples: number, seed: number, imputationC: number | null = null): GeneratePayload {
    if (this.chips.length === 0) throw new TimelineError("at least one keyframe is required");
    const payload: GeneratePayload = {
      keyframes: this.keyframePayloads(),
      F_total: this.totalFrames,
      num_samples: numSamples,
      seed,
    };
    if (imputationC !== null) payload.imputation_C = imputationC;
    return payload;
  }

  /** Payload for POST /edit: kept ranges of the base motion plus new keyposes. */
  serializeEdit(numSamples: number, seed: number, imputationC: number | null = null): EditPayload {
    if (this.baseMotionId === null) throw new TimelineError("no base motion selected");
    if (!this.canGenerate) throw new TimelineError("nothing kept and no keyframes added");
    const payload: EditPayload = {
      base_motion_id: this.baseMotionId,
      keep_ranges: this.keepRanges.map((r) => [...r] as KeepRange),
      keyframes: this.keyframePayloads(),
      F_total: this.totalFrames,
      num_samples: numSamples,
      seed,
    };
    if (imputationC !== null) payload.imputation_C = imputationC;
    return payload;
  }

  /** KeyframeSet JSON (the CLI/file format), for export. */
  toKeyframeSetJson(): { version: number; F: number; fps: number; keyframes: KeyframePayload[] } {
    return {
      version: 1,
      F: this.totalFrames,
      fps: this.fps,
      keyframes: this.keyframePayloads(),
    };
  }
}
