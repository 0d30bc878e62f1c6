/** Shapes of the JSON payloads served by the HTTP API. */

export interface MetricRecord {
  step: number;
  name: string;
  value: number;
  run_id: string;
  wall_time: number;
}

export interface PreviewPrimitive {
  type: "sphere" | "box";
  role: "target" | "sampling_range" | "button";
  index: number;
  centre: number[];
  radius?: number;
  size?: number[];
  orientation_deg?: number;
  colour: number[];
  alpha: number;
}

export interface SceneGeometry {
  primitives: PreviewPrimitive[];
  skeleton: number[][];
  reach: number;
  cameras: {
    lateral: { axis: string; up: number[] };
    frontal: { axis: string; up: number[] };
  };
}

export interface ScenarioInfo {
  name: string;
  n_subtasks: number;
  budget: number;
  mode: string;
  config_text: string;
}

export interface RunHandle {
  run_id: string;
  name: string;
  status: string;
  steps: number;
  budget: number;
  started_at: number | null;
  artifacts: {
    metrics: string;
    checkpoint: string;
    eval_latest: string;
    trajectories: string[];
  };
  error: string;
}

export interface TrajectorySample {
  t: number;
  ee: number[];
  qpos: number[];
  action: number[];
  subtask: number;
  in_target: boolean;
}

export interface TrajectoryTarget {
  kind: string;
  centre: number[];
  radius?: number;
  size?: number[];
  dwell?: number;
}

export interface Trajectory {
  targets: TrajectoryTarget[];
  success: boolean;
  samples: TrajectorySample[];
}
