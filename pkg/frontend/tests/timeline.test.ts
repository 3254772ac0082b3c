import { describe, expect, it } from "vitest";
import { readFileSync } from "node:fs";
import { join } from "node:path";

import { TimelineState, TimelineError } from "../src/timeline.js";
import type { SkeletonResponse } from "../src/types.js";

const skeleton: SkeletonResponse = JSON.parse(
  readFileSync(join(__dirname, "fixtures", "skeleton.json"), "utf-8"),
);
const generateFixture = JSON.parse(
  readFileSync(join(__dirname, "fixtures", "generate_roundtrip.json"), "utf-8"),
);
const editFixture = JSON.parse(
  readFileSync(join(__dirname, "fixtures", "edit_roundtrip.json"), "utf-8"),
);

function fresh(): TimelineState {
  return new TimelineState(skeleton.frames, skeleton.fps, skeleton.max_shift);
}

const pose = generateFixture.request.keyframes[0].pose as number[];

describe("timeline editing", () => {
  it("adds, moves and deletes chips with snapping", () => {
    const tl = fresh();
    tl.addChip(10.4, pose);
    expect(tl.chips[0].frame).toBe(10);
    tl.moveChip(10, 33.3);
    expect(tl.chips[0].frame).toBe(33);
    tl.deleteChip(33);
    expect(tl.chips.length).toBe(0);
  });

  it("rejects duplicate chips at one frame", () => {
    const tl = fresh();
    tl.addChip(10, pose);
    expect(() => tl.addChip(10, pose)).toThrow(TimelineError);
  });

  it("clamps snapped frames into the timeline", () => {
    const tl = fresh();
    expect(tl.snapToFrame(-5)).toBe(0);
    expect(tl.snapToFrame(1e9)).toBe(skeleton.frames - 1);
  });

  it("undo/redo restores chip state", () => {
    const tl = fresh();
    tl.addChip(10, pose);
    tl.addChip(30, pose);
    tl.moveChip(30, 33);
    expect(tl.chips.map((c) => c.frame)).toEqual([10, 33]);
    tl.undo();
    expect(tl.chips.map((c) => c.frame)).toEqual([10, 30]);
    tl.undo();
    expect(tl.chips.map((c) => c.frame)).toEqual([10]);
    tl.redo();
    expect(tl.chips.map((c) => c.frame)).toEqual([10, 30]);
  });

  it("tolerance band is +/- P clipped to the timeline", () => {
    const tl = fresh();
    expect(tl.toleranceBand(30)).toEqual([30 - skeleton.max_shift, 30 + skeleton.max_shift]);
    expect(tl.toleranceBand(1)).toEqual([0, 1 + skeleton.max_shift]);
    expect(tl.toleranceBand(skeleton.frames - 1)[1]).toBe(skeleton.frames - 1);
  });

  it("generate is disabled without constraints", () => {
    const tl = fresh();
    expect(tl.canGenerate).toBe(false);
    tl.addChip(5, pose);
    expect(tl.canGenerate).toBe(true);
    tl.deleteChip(5);
    expect(tl.canGenerate).toBe(false);
    expect(() => tl.serializeGenerate(1, 0)).toThrow(TimelineError);
  });

  it("kept ranges stay disjoint and reject chip collisions", () => {
    const tl = fresh();
    tl.addKeepRange(0, 20);
    expect(() => tl.addKeepRange(10, 25)).toThrow(TimelineError);
    expect(() => tl.addChip(5, pose)).toThrow(TimelineError);
    tl.addChip(40, pose);
    expect(() => tl.addKeepRange(35, 45)).toThrow(TimelineError);
  });
});

describe("payload round-trips against recorded fixtures", () => {
  it("serializes to the exact /generate payload the server accepted", () => {
    const tl = fresh();
    for (const kf of generateFixture.request.keyframes) tl.addChip(kf.frame, kf.pose);
    const payload = tl.serializeGenerate(
      generateFixture.request.num_samples,
      generateFixture.request.seed,
    );
    expect(payload).toEqual(generateFixture.request);
    expect(generateFixture.response.status_code).toBe(200);
    expect(generateFixture.response.num_motions).toBe(generateFixture.request.num_samples);
  });

  it("keyframe-set JSON matches the file format the CLI consumes", () => {
    const tl = fresh();
    tl.addChip(12, pose);
    const doc = tl.toKeyframeSetJson();
    expect(doc).toEqual({
      version: 1,
      F: skeleton.frames,
      fps: skeleton.fps,
      keyframes: [{ frame: 12, pose }],
    });
  });

  it("edit flow produces the documented /edit payload", () => {
    const tl = fresh();
    tl.baseMotionId = "BASE_MOTION_ID";
    for (const [a, b] of editFixture.request.keep_ranges) tl.addKeepRange(a, b);
    for (const kf of editFixture.request.keyframes) tl.addChip(kf.frame, kf.pose);
    const payload = tl.serializeEdit(
      editFixture.request.num_samples,
      editFixture.request.seed,
    );
    expect(payload).toEqual(editFixture.request);
    expect(editFixture.response.status_code).toBe(200);
  });

  it("edit without a base motion fails fast", () => {
    const tl = fresh();
    tl.addChip(4, pose);
    expect(() => tl.serializeEdit(1, 0)).toThrow(TimelineError);
  });
});
