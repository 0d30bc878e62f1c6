/** Page wiring: scenario browser, config editor with live preview,
 * run launcher with streamed charts, and trajectory replay. */

import * as api from "./api.js";
import { MetricStore, drawSeries, followMetrics } from "./charts.js";
import {
  ConfigDraft,
  OBSERVATION_COMPONENTS,
  SLIDER_BOUNDS,
  enabledComponents,
  parseConfig,
  rewardEquation,
  serializeConfig,
  setComponentEnabled,
} from "./config.js";
import { skeletonPositions } from "./fk.js";
import { DrawOp, View, previewDrawOps, projectPoint, renderOps, viewportFor } from "./projection.js";
import { ReplayState, parseTrajectoryJsonl } from "./replay.js";
import { RunHandle, ScenarioInfo, SceneGeometry } from "./types.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el as T;
};

interface AppState {
  scenarios: ScenarioInfo[];
  draft: ConfigDraft | null;
  scene: SceneGeometry | null;
  run: RunHandle | null;
  store: MetricStore;
  replay: ReplayState | null;
  advanced: boolean;
}

const state: AppState = {
  scenarios: [],
  draft: null,
  scene: null,
  run: null,
  store: new MetricStore(),
  replay: null,
  advanced: false,
};

// --- preview -----------------------------------------------------------

function drawPreview(): void {
  if (!state.scene) return;
  for (const view of ["lateral", "frontal"] as View[]) {
    const canvas = $<HTMLCanvasElement>(`preview-${view}`);
    const ctx = canvas.getContext("2d");
    if (!ctx) continue;
    const vp = viewportFor(state.scene, canvas.width, canvas.height);
    renderOps(ctx, previewDrawOps(state.scene, view, vp), vp);
  }
}

async function refreshPreview(): Promise<void> {
  if (!state.draft) return;
  try {
    state.scene = await api.previewConfig(serializeConfig(state.draft));
    $("validate-result").textContent = "";
    drawPreview();
  } catch (err) {
    $("validate-result").textContent = String(err);
  }
}

// --- config editor -----------------------------------------------------

function sliderRow(
  label: string,
  key: string,
  value: string,
  onChange: (v: string) => void,
): HTMLElement {
  const row = document.createElement("div");
  row.className = "slider-row";
  const bounds = SLIDER_BOUNDS[key] ?? { min: 0, max: 1, step: 0.01 };
  const input = document.createElement("input");
  input.type = "range";
  input.min = String(bounds.min);
  input.max = String(bounds.max);
  input.step = String(bounds.step);
  input.value = value;
  const text = document.createElement("span");
  text.textContent = `${label}: ${value}`;
  input.addEventListener("input", () => {
    text.textContent = `${label}: ${input.value}`;
    onChange(input.value);
  });
  row.append(input, text);
  return row;
}

function renderSimplePanel(): void {
  const panel = $("simple-panel");
  panel.innerHTML = "";
  const draft = state.draft;
  if (!draft) return;
  const weights = draft.sections.find((s) => s.name === "weights");
  if (weights) {
    for (const entry of weights.entries) {
      panel.appendChild(
        sliderRow(entry.key, entry.key, entry.values[0], (v) => {
          entry.values[0] = v;
          $("reward-equation").textContent = rewardEquation(draft);
          void refreshPreview();
        }),
      );
    }
  }
  draft.sections.forEach((section, i) => {
    if (section.name !== "sphere" && section.name !== "button") return;
    const head = document.createElement("h4");
    head.textContent = `${section.name} ${i}`;
    panel.appendChild(head);
    for (const entry of section.entries) {
      if (!(entry.key in SLIDER_BOUNDS)) continue;
      entry.values.forEach((v, vi) => {
        panel.appendChild(
          sliderRow(`${entry.key}[${vi}]`, entry.key, v, (nv) => {
            entry.values[vi] = nv;
            void refreshPreview();
          }),
        );
      });
    }
  });
  $("reward-equation").textContent = rewardEquation(draft);
}

function renderAdvancedPanel(): void {
  const panel = $("advanced-panel");
  panel.innerHTML = "";
  const draft = state.draft;
  if (!draft) return;
  const head = document.createElement("h4");
  head.textContent = "observation components";
  panel.appendChild(head);
  const enabled = enabledComponents(draft);
  for (const name of OBSERVATION_COMPONENTS) {
    const label = document.createElement("label");
    const box = document.createElement("input");
    box.type = "checkbox";
    box.checked = enabled.has(name);
    box.addEventListener("change", () => {
      setComponentEnabled(draft, name, box.checked);
      syncTextarea();
    });
    label.append(box, document.createTextNode(` ${name}`));
    panel.appendChild(label);
  }
  const area = document.createElement("textarea");
  area.id = "config-text";
  area.rows = 24;
  area.value = serializeConfig(draft);
  area.addEventListener("change", () => {
    try {
      state.draft = parseConfig(area.value);
      renderSimplePanel();
      void refreshPreview();
    } catch (err) {
      $("validate-result").textContent = String(err);
    }
  });
  panel.appendChild(area);
}

function syncTextarea(): void {
  const area = document.getElementById("config-text") as HTMLTextAreaElement | null;
  if (area && state.draft) area.value = serializeConfig(state.draft);
}

function selectScenario(info: ScenarioInfo): void {
  state.draft = parseConfig(info.config_text);
  renderSimplePanel();
  renderAdvancedPanel();
  void refreshPreview();
}

// --- runs --------------------------------------------------------------

function renderCharts(): void {
  const wrap = $("charts");
  for (const name of state.store.names()) {
    const id = `chart-${name}`;
    let canvas = document.getElementById(id) as HTMLCanvasElement | null;
    if (!canvas) {
      canvas = document.createElement("canvas");
      canvas.id = id;
      canvas.width = 420;
      canvas.height = 130;
      wrap.appendChild(canvas);
    }
    const ctx = canvas.getContext("2d");
    if (ctx) drawSeries(ctx, state.store.get(name), canvas.width, canvas.height, name);
  }
}

async function pollRun(): Promise<void> {
  if (!state.run) return;
  try {
    state.run = await api.runStatus(state.run.run_id);
    $("run-status").textContent =
      `${state.run.name}: ${state.run.status} — step ${state.run.steps}/${state.run.budget}`;
    if (["Completed", "Failed", "Stopped"].includes(state.run.status)) {
      await loadReplayList();
      return;
    }
  } catch (err) {
    $("run-status").textContent = String(err);
  }
  setTimeout(() => void pollRun(), 2000);
}

async function startRun(): Promise<void> {
  if (!state.draft) return;
  try {
    state.run = await api.startRun(serializeConfig(state.draft));
    state.store = new MetricStore();
    $("charts").innerHTML = "";
    void followMetrics(state.store, state.run.run_id, { onUpdate: renderCharts });
    void pollRun();
  } catch (err) {
    $("run-status").textContent = String(err);
  }
}

// --- replay ------------------------------------------------------------

async function loadReplayList(): Promise<void> {
  if (!state.run) return;
  const select = $<HTMLSelectElement>("replay-select");
  select.innerHTML = "";
  for (let i = 0; i < state.run.artifacts.trajectories.length; i++) {
    try {
      const text = await api.trajectory(state.run.run_id, i);
      const traj = parseTrajectoryJsonl(text);
      const opt = document.createElement("option");
      opt.value = String(i);
      opt.textContent = `episode ${i} — ${traj.success ? "Success" : "Failure"}`;
      select.appendChild(opt);
    } catch {
      break; // trajectories are numbered contiguously
    }
  }
  if (select.options.length) {
    select.selectedIndex = 0;
    await loadReplay(0);
  }
}

async function loadReplay(index: number): Promise<void> {
  if (!state.run) return;
  const text = await api.trajectory(state.run.run_id, index);
  state.replay = new ReplayState(parseTrajectoryJsonl(text));
  drawReplayFrame();
}

function drawReplayFrame(): void {
  const replay = state.replay;
  if (!replay || !state.scene) return;
  const canvas = $<HTMLCanvasElement>("replay-canvas");
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const vp = viewportFor(state.scene, canvas.width, canvas.height);
  const view: View = "lateral";
  const sample = replay.sampleAtCurrentTime();
  const ops: DrawOp[] = [];
  replay.traj.targets.forEach((t, i) => {
    const { x, y } = projectPoint(t.centre, view, vp);
    const s = Math.min(vp.width, vp.height) / (2 * vp.worldHalfExtent);
    ops.push({
      kind: t.kind === "sphere" ? "circle" : "rect",
      role: "target", index: i, x, y,
      radius: s * (t.radius ?? 0.02),
      halfW: (s * (t.size?.[1] ?? 0.02)) / 2,
      halfH: (s * (t.size?.[2] ?? 0.02)) / 2,
      colour: i === sample.subtask ? "rgb(220,80,40)" : "rgb(170,170,170)",
      alpha: i === sample.subtask ? 0.9 : 0.4,
    });
  });
  ops.push({
    kind: "polyline", role: "skeleton", index: -1, x: 0, y: 0,
    points: skeletonPositions(sample.qpos).map((p) => projectPoint(p, view, vp)),
    colour: "rgb(40,40,40)", alpha: 1.0,
  });
  const tip = projectPoint(sample.ee, view, vp);
  ops.push({
    kind: "circle", role: "fingertip", index: -1, x: tip.x, y: tip.y,
    radius: 5,
    colour: replay.fingertipInsideCurrentTarget() ? "rgb(40,180,60)" : "rgb(40,60,220)",
    alpha: 1.0,
  });
  renderOps(ctx, ops, vp);
  const frac = (replay.t - replay.tStart) / Math.max(1e-9, replay.tEnd - replay.tStart);
  $<HTMLInputElement>("replay-scrub").value = String(Math.round(1000 * frac));
  $("replay-time").textContent = `${replay.t.toFixed(2)} s`;
}

let lastFrame = 0;
function animate(now: number): void {
  if (state.replay?.playing) {
    state.replay.tick((now - lastFrame) / 1000);
    drawReplayFrame();
  }
  lastFrame = now;
  requestAnimationFrame(animate);
}

// --- boot --------------------------------------------------------------

async function boot(): Promise<void> {
  state.scenarios = await api.listScenarios();
  const list = $("scenario-list");
  for (const info of state.scenarios) {
    const btn = document.createElement("button");
    btn.textContent = `${info.name} (${info.n_subtasks} subtasks)`;
    btn.addEventListener("click", () => selectScenario(info));
    list.appendChild(btn);
  }
  $("mode-toggle").addEventListener("click", () => {
    state.advanced = !state.advanced;
    $("simple-panel").style.display = state.advanced ? "none" : "block";
    $("advanced-panel").style.display = state.advanced ? "block" : "none";
    $("mode-toggle").textContent = state.advanced ? "Simple mode" : "Advanced mode";
  });
  $("validate-btn").addEventListener("click", async () => {
    if (!state.draft) return;
    const res = await api.validateConfig(serializeConfig(state.draft));
    $("validate-result").textContent = res.ok ? "configuration valid" : res.violations.join("; ");
  });
  $("start-btn").addEventListener("click", () => void startRun());
  $("stop-btn").addEventListener("click", async () => {
    if (state.run) await api.stopRun(state.run.run_id);
  });
  $<HTMLSelectElement>("replay-select").addEventListener("change", (ev) => {
    void loadReplay(Number((ev.target as HTMLSelectElement).value));
  });
  $("replay-play").addEventListener("click", () => {
    if (state.replay) state.replay.playing = !state.replay.playing;
  });
  $<HTMLInputElement>("replay-scrub").addEventListener("input", (ev) => {
    if (!state.replay) return;
    state.replay.playing = false;
    state.replay.scrubTo(Number((ev.target as HTMLInputElement).value) / 1000);
    drawReplayFrame();
  });
  $<HTMLSelectElement>("replay-speed").addEventListener("change", (ev) => {
    if (state.replay) state.replay.speed = Number((ev.target as HTMLSelectElement).value);
  });
  if (state.scenarios.length) selectScenario(state.scenarios[0]);
  $("advanced-panel").style.display = "none";
  requestAnimationFrame(animate);
}

if (typeof document !== "undefined" && document.getElementById("scenario-list")) {
  void boot();
}
