// Campaign launcher form. Client-side validation repeats the server's
// bounds (pulse voltage <= 500 V, width 15..960 ns, pitch > 0, rails in
// (0, 1.5] V) so obviously bad configs never leave the browser; the
// server remains the authority.

import { ApiClient, ApiError } from "./api.js";
import type { CampaignConfigDoc } from "./types.js";

export interface LauncherValues {
  mode: "scan" | "attack" | "sweep";
  payload: "counter_loop" | "sram_pattern" | "ark_verify";
  voltage: number;
  width_ns: number;
  probe_diameter: number;
  probe_winding: "CW" | "CCW";
  v_soc: number;
  v_core: number;
  seed: number;
  delay: number;
  window: number;
  grid_x0: number;
  grid_y0: number;
  grid_width: number;
  grid_height: number;
  grid_pitch: number;
  attempts_per_position: number;
  pos_x: number;
  pos_y: number;
  attempts: number;
  sweep_lo: number;
  sweep_hi: number;
  sweep_step: number;
  sweep_attempts: number;
}

export const MAX_VOLTAGE = 500;
export const WIDTH_RANGE: [number, number] = [15, 960];

export function validate(v: LauncherValues): string[] {
  const errors: string[] = [];
  if (!(v.voltage > 0 && v.voltage <= MAX_VOLTAGE)) {
    errors.push(`pulse voltage must be in (0, ${MAX_VOLTAGE}] V`);
  }
  if (!(v.width_ns >= WIDTH_RANGE[0] && v.width_ns <= WIDTH_RANGE[1])) {
    errors.push(`pulse width must be in [${WIDTH_RANGE[0]}, ${WIDTH_RANGE[1]}] ns`);
  }
  for (const [name, rail] of [["v_soc", v.v_soc], ["v_core", v.v_core]] as const) {
    if (!(rail > 0 && rail <= 1.5)) errors.push(`${name} must be in (0, 1.5] V`);
  }
  if (v.delay < 0) errors.push("delay must be >= 0");
  if (v.window < 0 || v.window > v.delay) errors.push("window must be in [0, delay]");
  if (v.mode === "scan") {
    if (!(v.grid_pitch > 0)) errors.push("pitch must be > 0");
    if (v.grid_width < 0 || v.grid_height < 0) errors.push("grid extent must be >= 0");
    if (!(v.attempts_per_position > 0)) errors.push("attempts per position must be > 0");
  }
  if (v.mode === "attack") {
    if (!(v.attempts > 0)) errors.push("attempts must be > 0");
    if (v.payload !== "ark_verify") errors.push("attack mode needs the ark_verify payload");
  }
  if (v.mode === "sweep") {
    if (v.sweep_lo < 0 || v.sweep_hi < v.sweep_lo) errors.push("sweep range must be 0 <= lo <= hi");
    if (!(v.sweep_step > 0)) errors.push("sweep step must be > 0");
    if (!(v.sweep_attempts > 0)) errors.push("attempts per delay must be > 0");
    if (v.payload !== "ark_verify") errors.push("sweep mode needs the ark_verify payload");
  }
  return errors;
}

export function buildConfig(v: LauncherValues): CampaignConfigDoc {
  const payload: CampaignConfigDoc["payload"] =
    v.payload === "counter_loop"
      ? { kind: "counter_loop", iterations: 1000 }
      : v.payload === "sram_pattern"
        ? { kind: "sram_pattern", word: 0xdeadbeef, count: 64 }
        : { kind: "ark_verify" };
  const doc: CampaignConfigDoc = {
    version: 1,
    mode: v.mode,
    payload,
    pulse: {
      voltage: v.voltage,
      width_ns: v.width_ns,
      probe: { diameter_mm: v.probe_diameter, winding: v.probe_winding },
    },
    supplies: { v_soc: v.v_soc, v_core: v.v_core },
    seed: v.seed,
  };
  if (v.mode !== "sweep") {
    doc.plan = { delay: v.delay, window: v.window };
  }
  if (v.mode === "scan") {
    doc.grid = {
      x0: v.grid_x0,
      y0: v.grid_y0,
      width: v.grid_width,
      height: v.grid_height,
      pitch: v.grid_pitch,
    };
    doc.attempts_per_position = v.attempts_per_position;
  } else {
    doc.position = [v.pos_x, v.pos_y];
  }
  if (v.mode === "attack") {
    doc.attempts = v.attempts;
  }
  if (v.mode === "sweep") {
    doc.sweep = {
      lo: v.sweep_lo,
      hi: v.sweep_hi,
      step: v.sweep_step,
      attempts_per_delay: v.sweep_attempts,
      group_threshold: 8,
    };
  }
  return doc;
}

const FIELD_DEFS: [keyof LauncherValues, string, number][] = [
  ["voltage", "pulse voltage (V)", 500],
  ["width_ns", "pulse width (ns)", 73],
  ["v_soc", "V_SoC (V)", 0.59],
  ["v_core", "V_Core (V)", 1.1],
  ["seed", "seed", 0],
  ["delay", "delay (cycles)", 2000],
  ["window", "window (cycles)", 0],
];

const GRID_DEFS: [keyof LauncherValues, string, number][] = [
  ["grid_x0", "grid x0 (mm)", 0],
  ["grid_y0", "grid y0 (mm)", 0],
  ["grid_width", "grid width (mm)", 22],
  ["grid_height", "grid height (mm)", 9],
  ["grid_pitch", "pitch (mm)", 1],
  ["attempts_per_position", "attempts/position", 100],
];

const POINT_DEFS: [keyof LauncherValues, string, number][] = [
  ["pos_x", "die x (mm)", 13.4],
  ["pos_y", "die y (mm)", 4.3],
];

const ATTACK_DEFS: [keyof LauncherValues, string, number][] = [["attempts", "attempts", 10000]];

const SWEEP_DEFS: [keyof LauncherValues, string, number][] = [
  ["sweep_lo", "sweep lo (cycles)", 0],
  ["sweep_hi", "sweep hi (cycles)", 3000],
  ["sweep_step", "sweep step", 1],
  ["sweep_attempts", "attempts/delay", 20],
];

export class CampaignLauncher {
  element: HTMLFormElement;
  modeSelect: HTMLSelectElement;
  payloadSelect: HTMLSelectElement;
  windingSelect: HTMLSelectElement;
  diameterSelect: HTMLSelectElement;
  gridFields: HTMLFieldSetElement;
  pointFields: HTMLFieldSetElement;
  attackFields: HTMLFieldSetElement;
  sweepFields: HTMLFieldSetElement;
  errorBox: HTMLElement;
  private inputs = new Map<keyof LauncherValues, HTMLInputElement>();
  onLaunched: (id: string) => void = () => {};

  constructor(
    private api: ApiClient,
    container: HTMLElement,
    private onToast: (message: string) => void = () => {},
  ) {
    this.element = document.createElement("form");
    this.element.className = "launcher";

    this.modeSelect = this.select("mode", ["scan", "attack", "sweep"]);
    this.payloadSelect = this.select("payload", ["counter_loop", "sram_pattern", "ark_verify"]);
    this.diameterSelect = this.select("tip diameter (mm)", ["4", "1"]);
    this.windingSelect = this.select("winding", ["CW", "CCW"]);

    const common = this.fieldset("pulse & timing", FIELD_DEFS);
    this.gridFields = this.fieldset("grid", GRID_DEFS);
    this.pointFields = this.fieldset("position", POINT_DEFS);
    this.attackFields = this.fieldset("attack", ATTACK_DEFS);
    this.sweepFields = this.fieldset("sweep", SWEEP_DEFS);

    this.errorBox = document.createElement("ul");
    this.errorBox.className = "launcher-errors";

    const submit = document.createElement("button");
    submit.type = "submit";
    submit.textContent = "launch campaign";

    this.element.append(
      common,
      this.gridFields,
      this.pointFields,
      this.attackFields,
      this.sweepFields,
      this.errorBox,
      submit,
    );
    this.element.addEventListener("submit", (e) => {
      e.preventDefault();
      void this.launch();
    });
    this.modeSelect.addEventListener("change", () => this.applyMode());
    container.append(this.element);
    this.applyMode();
  }

  private select(label: string, options: string[]): HTMLSelectElement {
    const wrap = document.createElement("label");
    wrap.textContent = label;
    const sel = document.createElement("select");
    for (const option of options) {
      const opt = document.createElement("option");
      opt.value = option;
      opt.textContent = option;
      sel.append(opt);
    }
    wrap.append(sel);
    this.element.append(wrap);
    return sel;
  }

  private fieldset(
    legend: string,
    defs: [keyof LauncherValues, string, number][],
  ): HTMLFieldSetElement {
    const fs = document.createElement("fieldset");
    const lg = document.createElement("legend");
    lg.textContent = legend;
    fs.append(lg);
    for (const [key, label, value] of defs) {
      const wrap = document.createElement("label");
      wrap.textContent = label;
      const input = document.createElement("input");
      input.type = "number";
      input.step = "any";
      input.value = String(value);
      input.name = key;
      wrap.append(input);
      fs.append(wrap);
      this.inputs.set(key, input);
    }
    return fs;
  }

  get mode(): LauncherValues["mode"] {
    return this.modeSelect.value as LauncherValues["mode"];
  }

  applyMode(): void {
    const mode = this.mode;
    this.gridFields.hidden = mode !== "scan";
    this.pointFields.hidden = mode === "scan";
    this.attackFields.hidden = mode !== "attack";
    this.sweepFields.hidden = mode !== "sweep";
    if (mode !== "scan" && this.payloadSelect.value !== "ark_verify") {
      this.payloadSelect.value = "ark_verify";
    }
  }

  values(): LauncherValues {
    const num = (key: keyof LauncherValues) => Number(this.inputs.get(key)!.value);
    return {
      mode: this.mode,
      payload: this.payloadSelect.value as LauncherValues["payload"],
      probe_diameter: Number(this.diameterSelect.value),
      probe_winding: this.windingSelect.value as "CW" | "CCW",
      voltage: num("voltage"),
      width_ns: num("width_ns"),
      v_soc: num("v_soc"),
      v_core: num("v_core"),
      seed: num("seed"),
      delay: num("delay"),
      window: num("window"),
      grid_x0: num("grid_x0"),
      grid_y0: num("grid_y0"),
      grid_width: num("grid_width"),
      grid_height: num("grid_height"),
      grid_pitch: num("grid_pitch"),
      attempts_per_position: num("attempts_per_position"),
      pos_x: num("pos_x"),
      pos_y: num("pos_y"),
      attempts: num("attempts"),
      sweep_lo: num("sweep_lo"),
      sweep_hi: num("sweep_hi"),
      sweep_step: num("sweep_step"),
      sweep_attempts: num("sweep_attempts"),
    };
  }

  showErrors(errors: string[]): void {
    this.errorBox.textContent = "";
    for (const err of errors) {
      const li = document.createElement("li");
      li.textContent = err;
      this.errorBox.append(li);
    }
  }

  async launch(): Promise<string | null> {
    const vals = this.values();
    const errors = validate(vals);
    this.showErrors(errors);
    if (errors.length > 0) {
      return null;
    }
    try {
      const { id } = await this.api.startCampaign(buildConfig(vals));
      this.onLaunched(id);
      return id;
    } catch (err) {
      this.onToast(err instanceof ApiError ? err.message : String(err));
      return null;
    }
  }
}
