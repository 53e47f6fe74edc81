// Shapes mirrored from the server's JSON bodies.

export interface Position {
  x: number;
  y: number;
  z: number;
}

export interface RigStatus {
  homed: boolean;
  position: Position;
  pulse_state: string;
  power: { ps_on: boolean; pwr_sw: boolean; on: boolean };
  supplies: { v_soc: number; v_core: number };
  probe: string;
  calibrated: boolean;
  busy: boolean;
  campaign: {
    id: string;
    mode: string;
    state: string;
    attempts_done: number;
    attempts_total: number;
  } | null;
}

export interface AttemptRecord {
  v: number;
  seq: number;
  ts: string;
  pos: Position;
  pulse: {
    voltage: number;
    width_ns: number;
    probe: { diameter_mm: number; winding: string };
  };
  supply: { v_soc: number; v_core: number };
  plan: { delay: number; window: number };
  eff_delay: number | null;
  payload: { kind: string; [key: string]: unknown };
  outcome: string;
  response: string;
  events: [string, number][];
}

export interface GridWindow {
  x0: number;
  y0: number;
  width: number;
  height: number;
  pitch: number;
}

export interface StartedEvent {
  phase: "started";
  campaign_id: string;
  mode: string;
  attempts_per_position: number;
  anchor: { x: number; y: number };
  offset: { dx: number; dy: number };
  grid: GridWindow | null;
}

export interface LifecycleEvent {
  phase: string;
  campaign_id: string;
  [key: string]: unknown;
}

export interface CampaignStatus {
  id: string;
  mode: string;
  state: "running" | "completed" | "cancelled" | "failed";
  error: string | null;
  attempts_done: number;
  attempts_total: number;
  stats: {
    successes: number;
    attempts: number;
    rate: number | null;
    ci95_low: number | null;
    ci95_high: number | null;
  } | null;
  argmax: number[] | null;
  groups: { median: number; lo: number; hi: number; delays: number[] }[] | null;
  directory: string;
}

export interface CampaignConfigDoc {
  version: number;
  mode: "scan" | "attack" | "sweep";
  payload: { kind: string; [key: string]: unknown };
  pulse: {
    voltage: number;
    width_ns: number;
    probe: { diameter_mm: number; winding: string };
  };
  supplies: { v_soc: number; v_core: number };
  seed: number;
  plan?: { delay: number; window: number } | null;
  grid?: GridWindow | null;
  attempts_per_position?: number;
  position?: number[] | null;
  attempts?: number;
  sweep?: {
    lo: number;
    hi: number;
    step: number;
    attempts_per_delay: number;
    group_threshold: number;
  } | null;
  idempotency_key?: string;
}

export interface ApiErrorBody {
  code: "validation" | "state" | "device" | "busy" | "not_found";
  message: string;
}
