/** Trajectory playback: scrub-bar state, frame lookup, and the
 * fingertip-inside-target predicate used to annotate the final frame. */

import { Trajectory, TrajectorySample, TrajectoryTarget } from "./types.js";

export function parseTrajectoryJsonl(text: string): Trajectory {
  const lines = text.split("\n").filter((l) => l.trim() !== "");
  if (lines.length < 2) throw new Error("trajectory needs a header and samples");
  const header = JSON.parse(lines[0]);
  const samples = lines.slice(1).map((l) => JSON.parse(l) as TrajectorySample);
  return { targets: header.targets, success: header.success, samples };
}

function dist(a: number[], b: number[]): number {
  return Math.hypot(a[0] - b[0], a[1] - b[1], a[2] - b[2]);
}

export function insideTarget(ee: number[], target: TrajectoryTarget): boolean {
  if (target.kind === "sphere") {
    return dist(ee, target.centre) <= (target.radius ?? 0);
  }
  // buttons count as "inside" when the fingertip is within the plate's
  // bounding sphere; replay only needs a visual containment cue
  const size = target.size ?? [0, 0, 0];
  return dist(ee, target.centre) <= Math.hypot(size[0], size[1], size[2]) / 2;
}

export class ReplayState {
  /** Current playback time, seconds from the first sample. */
  t: number;
  playing = false;
  speed = 1.0;

  constructor(public traj: Trajectory) {
    this.t = traj.samples[0]?.t ?? 0;
  }

  get tStart(): number {
    return this.traj.samples[0].t;
  }

  get tEnd(): number {
    return this.traj.samples[this.traj.samples.length - 1].t;
  }

  /** Advance playback by a wall-clock interval; timestamps advance at
   * `speed` times the wall rate. Stops at the final sample. */
  tick(wallDt: number): void {
    if (!this.playing) return;
    this.t = Math.min(this.t + wallDt * this.speed, this.tEnd);
    if (this.t >= this.tEnd) this.playing = false;
  }

  scrubTo(fraction: number): void {
    const f = Math.max(0, Math.min(1, fraction));
    this.t = this.tStart + f * (this.tEnd - this.tStart);
  }

  /** Latest sample at or before the playback time (first sample before it). */
  sampleAtCurrentTime(): TrajectorySample {
    const samples = this.traj.samples;
    let lo = 0;
    for (let i = 0; i < samples.length; i++) {
      if (samples[i].t <= this.t + 1e-12) lo = i;
      else break;
    }
    return samples[lo];
  }

  currentTarget(): TrajectoryTarget {
    const s = this.sampleAtCurrentTime();
    const k = Math.min(s.subtask, this.traj.targets.length - 1);
    return this.traj.targets[k];
  }

  fingertipInsideCurrentTarget(): boolean {
    return insideTarget(this.sampleAtCurrentTime().ee, this.currentTarget());
  }
}
