// Playback cursor shared by all overlaid samples (one scrubber, many ghosts).

export class Playback {
  fps: number;
  totalFrames: number;
  playing = false;
  cursor = 0; // fractional frame
  private lastTick: number | null = null;

  constructor(totalFrames: number, fps: number) {
    this.totalFrames = totalFrames;
    this.fps = fps;
  }

  play(): void {
    this.playing = true;
    this.lastTick = null;
  }

  pause(): void {
    this.playing = false;
    this.lastTick = null;
  }

  toggle(): void {
    this.playing ? this.pause() : this.play();
  }

  scrub(frame: number): void {
    this.cursor = Math.max(0, Math.min(this.totalFrames - 1, frame));
  }

  /** Advance from a requestAnimationFrame timestamp (ms); loops at the end. */
  tick(nowMs: number): number {
    if (this.playing) {
      if (this.lastTick !== null) {
        this.cursor += ((nowMs - this.lastTick) / 1000) * this.fps;
        if (this.cursor >= this.totalFrames - 1) this.cursor = 0;
      }
      this.lastTick = nowMs;
    }
    return this.cursor;
  }

  get frame(): number {
    return Math.round(this.cursor);
  }
}
