// 2D orthographic stick-figure rendering: front (x/y) and side (z/y) views,
// plus the timeline strip with chips, tolerance bands, kept ranges and scrubber.

import type { Vec3 } from "./fk.js";
import type { SkeletonDoc } from "./types.js";
import type { TimelineState } from "./timeline.js";

export interface ViewBox {
  x: number;
  y: number;
  w: number;
  h: number;
}

const SAMPLE_COLORS = ["#4dabf7", "#ffa94d", "#69db7c", "#e599f7", "#ff8787", "#ffd43b"];

export function sampleColor(index: number): string {
  return SAMPLE_COLORS[index % SAMPLE_COLORS.length];
}

function project(p: Vec3, plane: "front" | "side"): [number, number] {
  return plane === "front" ? [p[0], p[1]] : [p[2], p[1]];
}

export function drawSkeleton(
  ctx: CanvasRenderingContext2D,
  skeleton: SkeletonDoc,
  positions: Vec3[],
  box: ViewBox,
  plane: "front" | "side",
  color: string,
  alpha = 1.0,
  scale = 120,
): void {
  ctx.save();
  ctx.globalAlpha = alpha;
  ctx.strokeStyle = color;
  ctx.fillStyle = color;
  ctx.lineWidth = 2;
  const cx = box.x + box.w / 2;
  const baseY = box.y + box.h - 20;
  const toPx = (p: Vec3): [number, number] => {
    const [u, v] = project(p, plane);
    return [cx + u * scale, baseY - v * scale];
  };
  for (let j = 1; j < skeleton.joints.length; j++) {
    const parent = skeleton.joints[j].parent;
    const [x1, y1] = toPx(positions[parent]);
    const [x2, y2] = toPx(positions[j]);
    ctx.beginPath();
    ctx.moveTo(x1, y1);
    ctx.lineTo(x2, y2);
    ctx.stroke();
  }
  for (const p of positions) {
    const [x, y] = toPx(p);
    ctx.beginPath();
    ctx.arc(x, y, 3, 0, Math.PI * 2);
    ctx.fill();
  }
  ctx.restore();
}

export interface TimelineTheme {
  background: string;
  band: string;
  chip: string;
  chipSelected: string;
  keep: string;
  scrubber: string;
  tick: string;
}

export const DEFAULT_THEME: TimelineTheme = {
  background: "#1e1e24",
  band: "rgba(255, 204, 0, 0.18)",
  chip: "#ffcc00",
  chipSelected: "#ff6b6b",
  keep: "rgba(105, 219, 124, 0.25)",
  scrubber: "#ffffff",
  tick: "#555",
};

export function frameToX(frame: number, total: number, box: ViewBox): number {
  return box.x + (frame / Math.max(total - 1, 1)) * box.w;
}

export function xToFrame(x: number, total: number, box: ViewBox): number {
  return ((x - box.x) / box.w) * (total - 1);
}

export function drawTimeline(
  ctx: CanvasRenderingContext2D,
  state: TimelineState,
  cursor: number,
  box: ViewBox,
  selected: number | null = null,
  theme: TimelineTheme = DEFAULT_THEME,
): void {
  ctx.save();
  ctx.fillStyle = theme.background;
  ctx.fillRect(box.x, box.y, box.w, box.h);
  ctx.strokeStyle = theme.tick;
  const tickStep = Math.max(1, Math.round(state.totalFrames / 12));
  for (let f = 0; f < state.totalFrames; f += tickStep) {
    const x = frameToX(f, state.totalFrames, box);
    ctx.beginPath();
    ctx.moveTo(x, box.y + box.h - 8);
    ctx.lineTo(x, box.y + box.h);
    ctx.stroke();
  }
  for (const [a, b] of state.keepRanges) {
    const x1 = frameToX(a, state.totalFrames, box);
    const x2 = frameToX(b - 1, state.totalFrames, box);
    ctx.fillStyle = theme.keep;
    ctx.fillRect(x1, box.y + 4, Math.max(x2 - x1, 2), box.h - 8);
  }
  for (const chip of state.chips) {
    const [lo, hi] = state.toleranceBand(chip.frame);
    const x1 = frameToX(lo, state.totalFrames, box);
    const x2 = frameToX(hi, state.totalFrames, box);
    ctx.fillStyle = theme.band;
    ctx.fillRect(x1, box.y + 4, x2 - x1, box.h - 8);
  }
  for (const chip of state.chips) {
    const x = frameToX(chip.frame, state.totalFrames, box);
    ctx.fillStyle = chip.frame === selected ? theme.chipSelected : theme.chip;
    ctx.beginPath();
    ctx.moveTo(x, box.y + box.h / 2 - 8);
    ctx.lineTo(x + 6, box.y + box.h / 2);
    ctx.lineTo(x, box.y + box.h / 2 + 8);
    ctx.lineTo(x - 6, box.y + box.h / 2);
    ctx.closePath();
    ctx.fill();
  }
  const cursorX = frameToX(cursor, state.totalFrames, box);
  ctx.strokeStyle = theme.scrubber;
  ctx.beginPath();
  ctx.moveTo(cursorX, box.y);
  ctx.lineTo(cursorX, box.y + box.h);
  ctx.stroke();
  ctx.restore();
}
