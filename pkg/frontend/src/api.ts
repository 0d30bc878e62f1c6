/** Thin fetch wrappers over the run-service HTTP API. Config payloads
 * travel as text/plain in the line-oriented config format. */

import { RunHandle, ScenarioInfo, SceneGeometry } from "./types.js";

async function getJson<T>(path: string): Promise<T> {
  const resp = await fetch(path);
  if (!resp.ok) throw new Error(`${path}: HTTP ${resp.status}`);
  return (await resp.json()) as T;
}

async function postText<T>(path: string, body: string): Promise<T> {
  const resp = await fetch(path, {
    method: "POST",
    headers: { "Content-Type": "text/plain" },
    body,
  });
  if (!resp.ok) {
    let detail = `HTTP ${resp.status}`;
    try {
      const err = await resp.json();
      if (err.detail) detail = typeof err.detail === "string" ? err.detail : JSON.stringify(err.detail);
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new Error(detail);
  }
  return (await resp.json()) as T;
}

export const listScenarios = () => getJson<ScenarioInfo[]>("/api/scenarios");

export const scenarioPreview = (name: string) =>
  getJson<SceneGeometry>(`/api/preview?scenario=${encodeURIComponent(name)}`);

export const previewConfig = (configText: string) =>
  postText<SceneGeometry>("/api/preview", configText);

export const validateConfig = (configText: string) =>
  postText<{ ok: boolean; violations: string[] }>("/api/configs/validate", configText);

export const startRun = (configText: string) =>
  postText<RunHandle>("/api/runs", configText);

export const runStatus = (runId: string) => getJson<RunHandle>(`/api/runs/${runId}`);

export const stopRun = (runId: string) =>
  postText<RunHandle>(`/api/runs/${runId}/stop`, "");

export const evalLatest = (runId: string) =>
  getJson<Record<string, unknown>>(`/api/runs/${runId}/eval/latest`);

export async function trajectory(runId: string, index: number): Promise<string> {
  const resp = await fetch(`/api/runs/${runId}/trajectories/${index}`);
  if (!resp.ok) throw new Error(`trajectory ${index}: HTTP ${resp.status}`);
  return await resp.text();
}
