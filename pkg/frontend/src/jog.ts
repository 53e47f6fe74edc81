// Jog pad: manual stage moves with the interlock mirrored into the UI.
// Buttons are disabled whenever /status reports the pulse side armed or
// the rig busy; position display is optimistic and reconciled on the
// next status poll.

import { ApiClient, ApiError } from "./api.js";
import type { Position, RigStatus } from "./types.js";

const STEPS = [0.1, 0.5, 1.0, 5.0];

export class JogPanel {
  element: HTMLElement;
  buttons: HTMLButtonElement[] = [];
  private positionLabel: HTMLElement;
  private stepSelect: HTMLSelectElement;
  private onToast: (message: string) => void;

  constructor(
    private api: ApiClient,
    container: HTMLElement,
    onToast: (message: string) => void = () => {},
  ) {
    this.onToast = onToast;
    this.element = document.createElement("div");
    this.element.className = "jog-panel";

    this.positionLabel = document.createElement("div");
    this.positionLabel.className = "jog-position";
    this.positionLabel.textContent = "position: unhomed";

    this.stepSelect = document.createElement("select");
    for (const step of STEPS) {
      const opt = document.createElement("option");
      opt.value = String(step);
      opt.textContent = `${step} mm`;
      this.stepSelect.append(opt);
    }
    this.stepSelect.value = "1";

    const pad = document.createElement("div");
    pad.className = "jog-pad";
    const moves: [string, number, number, number][] = [
      ["+X", 1, 0, 0],
      ["−X", -1, 0, 0],
      ["+Y", 0, 1, 0],
      ["−Y", 0, -1, 0],
      ["+Z", 0, 0, 1],
      ["−Z", 0, 0, -1],
    ];
    for (const [label, dx, dy, dz] of moves) {
      const btn = document.createElement("button");
      btn.textContent = label;
      btn.dataset.axis = label;
      btn.addEventListener("click", () => this.jog(dx, dy, dz));
      this.buttons.push(btn);
      pad.append(btn);
    }
    const homeBtn = document.createElement("button");
    homeBtn.textContent = "home";
    homeBtn.dataset.axis = "home";
    homeBtn.addEventListener("click", () => this.home());
    this.buttons.push(homeBtn);

    this.element.append(this.positionLabel, this.stepSelect, pad, homeBtn);
    container.append(this.element);
  }

  get step(): number {
    return Number(this.stepSelect.value);
  }

  /** Mirror of the rig interlock: no jogging while armed or busy. */
  applyStatus(status: RigStatus): void {
    const locked = status.busy || status.pulse_state !== "Disarmed";
    for (const btn of this.buttons) {
      btn.disabled = locked;
    }
    this.showPosition(status.homed ? status.position : null);
  }

  showPosition(pos: Position | null): void {
    this.positionLabel.textContent = pos
      ? `position: X${pos.x.toFixed(3)} Y${pos.y.toFixed(3)} Z${pos.z.toFixed(3)}`
      : "position: unhomed";
  }

  private async jog(dx: number, dy: number, dz: number): Promise<void> {
    try {
      const res = await this.api.jog(dx * this.step, dy * this.step, dz * this.step);
      this.showPosition(res.position);
    } catch (err) {
      this.onToast(err instanceof ApiError ? err.message : String(err));
    }
  }

  private async home(): Promise<void> {
    try {
      const res = await this.api.home();
      this.showPosition(res.position);
    } catch (err) {
      this.onToast(err instanceof ApiError ? err.message : String(err));
    }
  }
}
