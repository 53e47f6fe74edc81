// Device state panel, attempt log tail, success summary, calibration
// click-to-mark entry.

import { ApiClient, ApiError } from "./api.js";
import type { AttemptRecord, CampaignStatus, RigStatus } from "./types.js";

export class StatusPanel {
  element: HTMLElement;

  constructor(container: HTMLElement) {
    this.element = document.createElement("dl");
    this.element.className = "status-panel";
    container.append(this.element);
  }

  private row(term: string, detail: string): string {
    return `<div><dt>${term}</dt><dd>${detail}</dd></div>`;
  }

  apply(status: RigStatus): void {
    const campaign = status.campaign
      ? `${status.campaign.id} (${status.campaign.state},` +
        ` ${status.campaign.attempts_done}/${status.campaign.attempts_total})`
      : "none";
    this.element.innerHTML = [
      this.row("pulse", status.pulse_state),
      this.row("power", status.power.on ? "on" : "off"),
      this.row("V_SoC", `${status.supplies.v_soc.toFixed(2)} V`),
      this.row("V_Core", `${status.supplies.v_core.toFixed(2)} V`),
      this.row("probe", status.probe),
      this.row("calibrated", status.calibrated ? "yes" : "no"),
      this.row("campaign", campaign),
    ].join("");
  }
}

export class LogTail {
  element: HTMLElement;
  private lines: string[] = [];

  constructor(container: HTMLElement, private limit = 200) {
    this.element = document.createElement("pre");
    this.element.className = "log-tail";
    container.append(this.element);
  }

  push(record: AttemptRecord): void {
    const delay = record.eff_delay === null ? "-" : String(record.eff_delay);
    this.lines.push(
      `#${record.seq} (${record.pos.x.toFixed(2)}, ${record.pos.y.toFixed(2)})` +
        ` d=${delay} ${record.outcome} ${record.response}`,
    );
    if (this.lines.length > this.limit) {
      this.lines.splice(0, this.lines.length - this.limit);
    }
    this.element.textContent = this.lines.join("\n");
    this.element.scrollTop = this.element.scrollHeight;
  }

  clear(): void {
    this.lines = [];
    this.element.textContent = "";
  }
}

export class SummaryPanel {
  element: HTMLElement;

  constructor(container: HTMLElement) {
    this.element = document.createElement("table");
    this.element.className = "summary-panel";
    container.append(this.element);
    this.element.innerHTML =
      "<thead><tr><th>Delay/ΔDelay</th><th>Success/Attempts</th>" +
      "<th>Success Rate</th></tr></thead><tbody></tbody>";
  }

  apply(status: CampaignStatus, plan: { delay: number; window: number } | null): void {
    const tbody = this.element.querySelector("tbody")!;
    tbody.textContent = "";
    if (!status.stats) return;
    const row = document.createElement("tr");
    const planText = plan ? `${plan.delay}/${plan.window}` : "-";
    const rate =
      status.stats.rate === null ? "n/a" : `${(100 * status.stats.rate).toFixed(2)}%`;
    for (const text of [
      planText,
      `${status.stats.successes}/${status.stats.attempts}`,
      rate,
    ]) {
      const td = document.createElement("td");
      td.textContent = text;
      row.append(td);
    }
    tbody.append(row);
  }
}

// Calibration entry: the operator clicks the probe-tip center and the
// camera center on a still frame; pixel coordinates post to the server.
export class CalibrationPanel {
  element: HTMLElement;
  surface: HTMLElement;
  private marks: { u: number; v: number }[] = [];
  private info: HTMLElement;

  constructor(
    private api: ApiClient,
    container: HTMLElement,
    private onToast: (message: string) => void = () => {},
  ) {
    this.element = document.createElement("div");
    this.element.className = "calibration-panel";
    this.surface = document.createElement("div");
    this.surface.className = "calibration-surface";
    this.info = document.createElement("div");
    this.info.textContent = "click probe-tip center, then camera center";
    this.element.append(this.info, this.surface);
    this.surface.addEventListener("click", (e) => this.mark(e));
    container.append(this.element);
  }

  private async mark(e: MouseEvent): Promise<void> {
    const rect = this.surface.getBoundingClientRect();
    this.marks.push({ u: e.clientX - rect.left, v: e.clientY - rect.top });
    if (this.marks.length < 2) {
      this.info.textContent = "now click the camera center";
      return;
    }
    const [probe, camera] = this.marks;
    this.marks = [];
    try {
      const cal = await this.api.calibrate({
        probe_center: probe,
        camera_center: camera,
        pixel_scale_um: 10.0,
        probe: { diameter_mm: 4, winding: "CW" },
      });
      this.info.textContent = `offset (${cal.dx.toFixed(3)}, ${cal.dy.toFixed(3)}) mm stored`;
    } catch (err) {
      this.info.textContent = "calibration failed";
      this.onToast(err instanceof ApiError ? err.message : String(err));
    }
  }
}
