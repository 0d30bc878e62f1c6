/** Client-side model of the line-oriented config format: parse, edit a
 * field, serialize. Serialization reproduces the parsed text so every
 * editable field round-trips exactly. */

export interface ConfigEntry {
  key: string;
  values: string[];
}

export interface ConfigSection {
  name: string;
  entries: ConfigEntry[];
}

export interface ConfigDraft {
  top: ConfigEntry[];
  sections: ConfigSection[];
}

export function parseConfig(text: string): ConfigDraft {
  const draft: ConfigDraft = { top: [], sections: [] };
  let current: ConfigSection | null = null;
  for (const raw of text.split("\n")) {
    const line = raw.split("#")[0].trim();
    if (line === "") continue;
    if (line.startsWith("[")) {
      if (!line.endsWith("]")) throw new Error(`malformed section header: ${raw}`);
      current = { name: line.slice(1, -1), entries: [] };
      draft.sections.push(current);
    } else {
      const parts = line.split(/\s+/);
      const entry = { key: parts[0], values: parts.slice(1) };
      (current ? current.entries : draft.top).push(entry);
    }
  }
  return draft;
}

export function serializeConfig(draft: ConfigDraft): string {
  const lines: string[] = ["# reachsim run configuration"];
  for (const e of draft.top) lines.push(`${e.key} ${e.values.join(" ")}`);
  for (const s of draft.sections) {
    lines.push("", `[${s.name}]`);
    for (const e of s.entries) lines.push(`${e.key} ${e.values.join(" ")}`);
  }
  return lines.join("\n") + "\n";
}

/** Set one value of a key inside a section ("" = top level). The
 * sectionIndex disambiguates repeated [sphere]/[button] sections. */
export function setValue(
  draft: ConfigDraft,
  sectionName: string,
  sectionIndex: number,
  key: string,
  valueIndex: number,
  value: string,
): void {
  let entries: ConfigEntry[];
  if (sectionName === "") {
    entries = draft.top;
  } else {
    const matches = draft.sections.filter((s) => s.name === sectionName);
    if (sectionIndex >= matches.length) throw new Error(`no section ${sectionName}[${sectionIndex}]`);
    entries = matches[sectionIndex].entries;
  }
  const entry = entries.find((e) => e.key === key);
  if (!entry) throw new Error(`no key ${key} in ${sectionName || "top level"}`);
  if (valueIndex >= entry.values.length) throw new Error(`key ${key} has ${entry.values.length} values`);
  entry.values[valueIndex] = value;
}

export function getValues(draft: ConfigDraft, sectionName: string, key: string): string[] | null {
  const entries =
    sectionName === ""
      ? draft.top
      : draft.sections.find((s) => s.name === sectionName)?.entries;
  return entries?.find((e) => e.key === key)?.values ?? null;
}

/** Human-readable reward equation from the current [weights] section;
 * recomputed locally so slider edits update it before any API call. */
export function rewardEquation(draft: ConfigDraft): string {
  const w = (key: string) => getValues(draft, "weights", key)?.[0] ?? "?";
  return (
    `r = ${w("w_distance")}·(−distance) + ${w("w_subtask")}·subtask` +
    ` + ${w("w_completion")}·completion + ${w("w_effort")}·(−effort)`
  );
}

/** Slider bounds for the Simple-mode editors. */
export const SLIDER_BOUNDS: Record<string, { min: number; max: number; step: number }> = {
  w_distance: { min: 0, max: 10, step: 0.1 },
  w_subtask: { min: 0, max: 20, step: 0.5 },
  w_completion: { min: 0, max: 50, step: 0.5 },
  w_effort: { min: 0, max: 1, step: 0.005 },
  radius: { min: 0.01, max: 0.3, step: 0.005 },
  dwell: { min: 0, max: 2, step: 0.025 },
  min_touch_force: { min: 0, max: 10, step: 0.25 },
  orientation_deg: { min: -90, max: 90, step: 5 },
};

/** The nine observation component checkboxes shown in Advanced mode;
 * they toggle membership in the [layout] "enabled" list. */
export const OBSERVATION_COMPONENTS = [
  "qpos", "qvel", "qacc", "act", "ee_pos",
  "target_pos", "target_size", "phase", "dwell_fraction",
];

export function enabledComponents(draft: ConfigDraft): Set<string> {
  return new Set(getValues(draft, "layout", "enabled") ?? []);
}

export function setComponentEnabled(draft: ConfigDraft, name: string, on: boolean): void {
  const layout = draft.sections.find((s) => s.name === "layout");
  const entry = layout?.entries.find((e) => e.key === "enabled");
  if (!entry) throw new Error("no [layout] enabled entry");
  const current = new Set(entry.values);
  if (on) current.add(name);
  else current.delete(name);
  // keep the canonical component order
  entry.values = OBSERVATION_COMPONENTS.filter((c) => current.has(c));
}
