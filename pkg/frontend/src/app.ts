// Studio wiring: skeleton fetch, pose editor, timeline editing, generation
// with multi-seed ghost overlays, playback, and the edit-by-keeping flow.
// One in-flight generation job per tab; all server access goes through StudioApi.

import { pollJob, StudioApi, ApiError } from "./api.js";
import { parsePoseLibrary, PoseDraft, poseVectorPositions } from "./pose.js";
import { Playback } from "./playback.js";
import {
  drawSkeleton,
  drawTimeline,
  frameToX,
  sampleColor,
  xToFrame,
  ViewBox,
} from "./render.js";
import { TimelineState, TimelineError } from "./timeline.js";
import type { MotionDoc, SkeletonResponse } from "./types.js";

interface LoadedSample {
  motionId: string;
  motion: MotionDoc;
  seed: number;
  kpe?: number;
}

export class StudioApp {
  api: StudioApi;
  info!: SkeletonResponse;
  timeline!: TimelineState;
  pose!: PoseDraft;
  playback!: Playback;
  samples: LoadedSample[] = [];
  selectedSample: number | null = null;
  selectedChip: number | null = null;
  busy = false;
  /** Pose used for new chips: a library pose if one is selected, else the draft. */
  activePose: number[] | null = null;

  private canvas: HTMLCanvasElement;
  private statusEl: HTMLElement;
  private legendEl: HTMLElement;
  private controls: HTMLElement;
  private timelineBox: ViewBox = { x: 20, y: 420, w: 860, h: 48 };
  private frontBox: ViewBox = { x: 20, y: 10, w: 420, h: 390 };
  private sideBox: ViewBox = { x: 460, y: 10, w: 420, h: 390 };
  private dragChip: number | null = null;

  constructor(root: HTMLElement, api: StudioApi) {
    this.api = api;
    this.canvas = document.createElement("canvas");
    this.canvas.width = 900;
    this.canvas.height = 480;
    this.canvas.style.background = "#13131a";
    this.statusEl = document.createElement("div");
    this.statusEl.className = "status";
    this.legendEl = document.createElement("div");
    this.legendEl.className = "legend";
    this.controls = document.createElement("div");
    this.controls.className = "controls";
    root.append(this.canvas, this.statusEl, this.legendEl, this.controls);
  }

  async start(): Promise<void> {
    this.info = await this.api.skeleton();
    this.timeline = new TimelineState(this.info.frames, this.info.fps, this.info.max_shift);
    this.pose = new PoseDraft(this.info.skeleton, this.info.layout);
    this.playback = new Playback(this.info.frames, this.info.fps);
    this.buildControls();
    this.bindCanvas();
    const loop = (now: number) => {
      this.playback.tick(now);
      this.draw();
      requestAnimationFrame(loop);
    };
    requestAnimationFrame(loop);
    this.setStatus("ready");
  }

  setStatus(text: string): void {
    this.statusEl.textContent = text;
  }

  private buildControls(): void {
    const addBtn = (label: string, onClick: () => void) => {
      const b = document.createElement("button");
      b.textContent = label;
      b.onclick = onClick;
      this.controls.appendChild(b);
      return b;
    };
    addBtn("add keyframe @ cursor", () => {
      try {
        this.timeline.addChip(this.playback.frame, this.activePose ?? this.pose.toPoseVector());
      } catch (e) {
        this.flashError(e);
      }
    });
    addBtn("delete selected", () => {
      if (this.selectedChip !== null) {
        this.timeline.deleteChip(this.selectedChip);
        this.selectedChip = null;
      }
    });
    addBtn("undo", () => this.timeline.undo());
    addBtn("redo", () => this.timeline.redo());
    addBtn("play/pause", () => this.playback.toggle());

    const seedsInput = document.createElement("input");
    seedsInput.value = "0,1";
    seedsInput.title = "comma-separated generation seeds";
    this.controls.appendChild(seedsInput);

    const generateBtn = addBtn("generate", () => {
      const seeds = seedsInput.value
        .split(",")
        .map((s) => parseInt(s.trim(), 10))
        .filter((n) => Number.isFinite(n));
      void this.generate(seeds);
    });
    addBtn("keep [0, cursor)", () => {
      try {
        this.timeline.addKeepRange(0, Math.max(1, this.playback.frame));
      } catch (e) {
        this.flashError(e);
      }
    });
    addBtn("edit (regenerate)", () => {
      const seeds = seedsInput.value
        .split(",")
        .map((s) => parseInt(s.trim(), 10))
        .filter((n) => Number.isFinite(n));
      void this.edit(seeds);
    });
    this.buildPoseLibrary();
    this.buildPoseSliders();
    // generate stays disabled without constraints
    setInterval(() => {
      generateBtn.disabled = !this.timeline.canGenerate || this.busy;
    }, 200);
  }

  private buildPoseLibrary(): void {
    const wrap = document.createElement("div");
    const input = document.createElement("input");
    input.type = "file";
    input.accept = ".json";
    const select = document.createElement("select");
    select.appendChild(new Option("drafted pose", ""));
    input.onchange = async () => {
      const file = input.files?.[0];
      if (!file) return;
      try {
        const doc = JSON.parse(await file.text());
        const poses = parsePoseLibrary(doc, this.pose.toPoseVector().length);
        select.innerHTML = "";
        select.appendChild(new Option("drafted pose", ""));
        poses.forEach((p, i) => select.appendChild(new Option(p.name, String(i))));
        select.onchange = () => {
          const idx = select.value === "" ? null : parseInt(select.value, 10);
          this.activePose = idx === null ? null : poses[idx].pose;
        };
        this.setStatus(`loaded ${poses.length} library pose(s)`);
      } catch (e) {
        this.flashError(e);
      }
    };
    wrap.append(input, select);
    this.controls.appendChild(wrap);
  }

  private renderLegend(): void {
    this.legendEl.innerHTML = "";
    this.samples.forEach((sample, i) => {
      const entry = document.createElement("button");
      entry.style.borderColor = sampleColor(i);
      const badge = sample.kpe !== undefined ? ` · KPE ${sample.kpe.toFixed(4)}` : "";
      entry.textContent = `seed ${sample.seed}${badge}`;
      entry.onclick = () => this.selectSample(i);
      this.legendEl.appendChild(entry);
    });
  }

  private buildPoseSliders(): void {
    const panel = document.createElement("div");
    panel.className = "pose-panel";
    this.info.skeleton.joints.forEach((joint, j) => {
      const row = document.createElement("div");
      const label = document.createElement("span");
      label.textContent = joint.name;
      row.appendChild(label);
      (["x", "y", "z"] as const).forEach((axis) => {
        const slider = document.createElement("input");
        slider.type = "range";
        slider.min = String(-Math.PI);
        slider.max = String(Math.PI);
        slider.step = "0.01";
        slider.value = "0";
        slider.oninput = () => this.pose.setAngle(j, axis, parseFloat(slider.value));
        row.appendChild(slider);
      });
      panel.appendChild(row);
    });
    this.controls.appendChild(panel);
  }

  private bindCanvas(): void {
    this.canvas.addEventListener("mousedown", (ev) => {
      const { x, y } = this.canvasPoint(ev);
      if (!this.inBox(x, y, this.timelineBox)) return;
      const frame = this.timeline.snapToFrame(
        xToFrame(x, this.timeline.totalFrames, this.timelineBox),
      );
      const chip = this.timeline.chips.find(
        (c) =>
          Math.abs(frameToX(c.frame, this.timeline.totalFrames, this.timelineBox) - x) < 8,
      );
      if (chip) {
        this.selectedChip = chip.frame;
        this.dragChip = chip.frame;
      } else {
        this.playback.scrub(frame);
      }
    });
    this.canvas.addEventListener("mousemove", (ev) => {
      if (this.dragChip === null) return;
      const { x } = this.canvasPoint(ev);
      const to = this.timeline.snapToFrame(
        xToFrame(x, this.timeline.totalFrames, this.timelineBox),
      );
      try {
        this.timeline.moveChip(this.dragChip, to);
        this.dragChip = to;
        this.selectedChip = to;
      } catch {
        // temporary collision while dragging: ignore, chip stays put
      }
    });
    window.addEventListener("mouseup", () => (this.dragChip = null));
  }

  private canvasPoint(ev: MouseEvent): { x: number; y: number } {
    const rect = this.canvas.getBoundingClientRect();
    return { x: ev.clientX - rect.left, y: ev.clientY - rect.top };
  }

  private inBox(x: number, y: number, box: ViewBox): boolean {
    return box.x <= x && x <= box.x + box.w && box.y <= y && y <= box.y + box.h;
  }

  private flashError(e: unknown): void {
    if (e instanceof TimelineError) this.setStatus(e.message);
    else if (e instanceof ApiError) this.setStatus(e.details.join("; "));
    else this.setStatus(String(e));
  }

  async generate(seeds: number[]): Promise<void> {
    if (this.busy || seeds.length === 0) return;
    this.busy = true;
    this.samples = [];
    try {
      for (const seed of seeds) {
        this.setStatus(`generating seed ${seed}…`);
        const resp = await this.api.generate(this.timeline.serializeGenerate(1, seed));
        const record =
          resp.status === "done" && resp.motion_ids
            ? resp
            : await pollJob(this.api, resp.job_id, { onStatus: (s) => this.setStatus(s) });
        const ids = record.motion_ids ?? [];
        const kpes = record.metrics?.kpe_per_motion ?? [];
        for (let i = 0; i < ids.length; i++) {
          const motion = await this.api.motion(ids[i]);
          this.samples.push({ motionId: ids[i], motion, seed, kpe: kpes[i] });
        }
      }
      this.playback = new Playback(
        this.samples[0]?.motion.frames.length ?? this.timeline.totalFrames,
        this.info.fps,
      );
      this.renderLegend();
      this.setStatus(`loaded ${this.samples.length} sample(s)`);
    } catch (e) {
      this.flashError(e);
    } finally {
      this.busy = false;
    }
  }

  async edit(seeds: number[]): Promise<void> {
    if (this.busy || this.timeline.baseMotionId === null) {
      this.setStatus("select a sample as the edit base first");
      return;
    }
    this.busy = true;
    try {
      const payload = this.timeline.serializeEdit(1, seeds[0] ?? 0);
      const resp = await this.api.edit(payload);
      const record =
        resp.status === "done" && resp.motion_ids
          ? resp
          : await pollJob(this.api, resp.job_id, { onStatus: (s) => this.setStatus(s) });
      this.samples = [];
      const kpes = record.metrics?.kpe_per_motion ?? [];
      const ids = record.motion_ids ?? [];
      for (let i = 0; i < ids.length; i++) {
        this.samples.push({
          motionId: ids[i],
          motion: await this.api.motion(ids[i]),
          seed: seeds[0] ?? 0,
          kpe: kpes[i],
        });
      }
      this.renderLegend();
      this.setStatus(`edit done: ${this.samples.length} sample(s)`);
    } catch (e) {
      this.flashError(e);
    } finally {
      this.busy = false;
    }
  }

  /** Clicking a sample legend entry loads it as the edit base. */
  selectSample(index: number): void {
    const sample = this.samples[index];
    if (!sample) return;
    this.selectedSample = index;
    this.timeline.baseMotionId = sample.motionId;
  }

  private draw(): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
    const frame = this.playback.frame;
    // ghost overlay of every sample; drafted pose on top
    this.samples.forEach((sample, i) => {
      const row = sample.motion.frames[Math.min(frame, sample.motion.frames.length - 1)];
      const positions = poseVectorPositions(this.info.skeleton, this.info.layout, row);
      const alpha = this.selectedSample === null || this.selectedSample === i ? 0.9 : 0.35;
      drawSkeleton(ctx, this.info.skeleton, positions, this.frontBox, "front", sampleColor(i), alpha);
      drawSkeleton(ctx, this.info.skeleton, positions, this.sideBox, "side", sampleColor(i), alpha);
    });
    const draft = this.pose.positions();
    drawSkeleton(ctx, this.info.skeleton, draft, this.frontBox, "front", "#ffffff", 0.8);
    drawSkeleton(ctx, this.info.skeleton, draft, this.sideBox, "side", "#ffffff", 0.8);
    drawTimeline(ctx, this.timeline, this.playback.cursor, this.timelineBox, this.selectedChip);
  }
}

export async function mountStudio(rootId = "studio", baseUrl = ""): Promise<StudioApp> {
  const root = document.getElementById(rootId);
  if (!root) throw new Error(`missing #${rootId} element`);
  const app = new StudioApp(root, new StudioApi(baseUrl || window.location.origin));
  await app.start();
  return app;
}
