// Client-side heatmap accumulator and canvas renderer.
//
// Cell keys use the same canonicalization as the server's exporter (die
// coordinates rounded to 10 um), so a replayed event stream reproduces
// the server's heatmap CSV exactly.

import type { AttemptRecord, GridWindow, StartedEvent } from "./types.js";

export interface HeatmapCell {
  x: number;
  y: number;
  attempts: number;
  faults: number;
  crashes: number;
  bypasses: number;
}

function roundCoord(v: number): number {
  // 10 um grid; scan lattices sit on 0.05 mm multiples so no value ever
  // lands on a rounding boundary.
  const r = Math.round(v * 100) / 100;
  return Object.is(r, -0) ? 0 : r;
}

export const HEATMAP_HEADER = "x_mm,y_mm,attempts,faults,crashes,bypasses";

export class HeatmapModel {
  private cells = new Map<string, HeatmapCell>();
  private order: string[] = [];
  received = 0;

  constructor(
    public anchor: { x: number; y: number },
    public offset: { dx: number; dy: number },
    public grid: GridWindow | null = null,
  ) {}

  static fromStarted(event: StartedEvent): HeatmapModel {
    return new HeatmapModel(event.anchor, event.offset, event.grid);
  }

  ingest(record: AttemptRecord): HeatmapCell {
    const x = roundCoord(record.pos.x - this.anchor.x - this.offset.dx);
    const y = roundCoord(record.pos.y - this.anchor.y - this.offset.dy);
    const key = `${x.toFixed(2)},${y.toFixed(2)}`;
    let cell = this.cells.get(key);
    if (cell === undefined) {
      cell = { x, y, attempts: 0, faults: 0, crashes: 0, bypasses: 0 };
      this.cells.set(key, cell);
      this.order.push(key);
    }
    cell.attempts += 1;
    if (record.outcome === "PayloadFault") cell.faults += 1;
    else if (record.outcome === "Crash") cell.crashes += 1;
    else if (record.outcome === "BypassSuccess") cell.bypasses += 1;
    this.received += 1;
    return cell;
  }

  cellList(): HeatmapCell[] {
    return this.order.map((key) => this.cells.get(key)!);
  }

  cellAt(x: number, y: number): HeatmapCell | undefined {
    return this.cells.get(`${roundCoord(x).toFixed(2)},${roundCoord(y).toFixed(2)}`);
  }

  totalAttempts(): number {
    let total = 0;
    for (const cell of this.cells.values()) total += cell.attempts;
    return total;
  }

  /** Fault rate used for the color scale: injected faults per attempt. */
  rateOf(cell: HeatmapCell): number {
    return cell.attempts === 0 ? 0 : (cell.faults + cell.bypasses) / cell.attempts;
  }

  maxRate(): number {
    let max = 0;
    for (const cell of this.cells.values()) max = Math.max(max, this.rateOf(cell));
    return max;
  }

  /** Same format as the server's heatmap export, rows in scan order. */
  toCsv(): string {
    const lines = [HEATMAP_HEADER];
    for (const cell of this.cellList()) {
      lines.push(
        `${cell.x.toFixed(2)},${cell.y.toFixed(2)},${cell.attempts},` +
          `${cell.faults},${cell.crashes},${cell.bypasses}`,
      );
    }
    return lines.join("\n") + "\n";
  }
}

const CELL_PX = 34;

export class HeatmapView {
  canvas: HTMLCanvasElement;
  tooltip: HTMLDivElement;
  model: HeatmapModel | null = null;

  constructor(container: HTMLElement) {
    this.canvas = document.createElement("canvas");
    this.canvas.className = "heatmap-canvas";
    this.tooltip = document.createElement("div");
    this.tooltip.className = "heatmap-tooltip";
    this.tooltip.hidden = true;
    container.append(this.canvas, this.tooltip);
    this.canvas.addEventListener("mousemove", (e) => this.onHover(e));
    this.canvas.addEventListener("mouseleave", () => (this.tooltip.hidden = true));
  }

  reset(model: HeatmapModel): void {
    this.model = model;
    const grid = model.grid;
    const nx = grid ? Math.floor(grid.width / grid.pitch + 1e-9) + 1 : 1;
    const ny = grid ? Math.floor(grid.height / grid.pitch + 1e-9) + 1 : 1;
    this.canvas.width = nx * CELL_PX;
    this.canvas.height = ny * CELL_PX;
    this.render();
  }

  private cellIndex(cell: HeatmapCell): { i: number; j: number } | null {
    const grid = this.model?.grid;
    if (!grid) return null;
    return {
      i: Math.round((cell.x - grid.x0) / grid.pitch),
      j: Math.round((cell.y - grid.y0) / grid.pitch),
    };
  }

  render(): void {
    const model = this.model;
    if (!model) return;
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    ctx.fillStyle = "#1c1f26";
    ctx.fillRect(0, 0, this.canvas.width, this.canvas.height);
    const max = Math.max(model.maxRate(), 1e-9);
    for (const cell of model.cellList()) {
      const idx = this.cellIndex(cell);
      if (!idx) continue;
      const heat = model.rateOf(cell) / max;
      ctx.fillStyle = heatColor(heat, cell.crashes > 0);
      ctx.fillRect(idx.i * CELL_PX + 1, idx.j * CELL_PX + 1, CELL_PX - 2, CELL_PX - 2);
    }
  }

  private onHover(e: MouseEvent): void {
    const model = this.model;
    const grid = model?.grid;
    if (!model || !grid) return;
    const rect = this.canvas.getBoundingClientRect();
    const i = Math.floor((e.clientX - rect.left) / CELL_PX);
    const j = Math.floor((e.clientY - rect.top) / CELL_PX);
    const cell = model.cellAt(grid.x0 + i * grid.pitch, grid.y0 + j * grid.pitch);
    if (!cell) {
      this.tooltip.hidden = true;
      return;
    }
    this.tooltip.hidden = false;
    this.tooltip.style.left = `${e.clientX - rect.left + 12}px`;
    this.tooltip.style.top = `${e.clientY - rect.top + 12}px`;
    this.tooltip.textContent =
      `(${cell.x.toFixed(2)}, ${cell.y.toFixed(2)}) mm: ` +
      `${cell.faults} faults, ${cell.bypasses} bypasses, ` +
      `${cell.crashes} crashes / ${cell.attempts}`;
  }
}

function heatColor(t: number, crashed: boolean): string {
  if (t <= 0) return crashed ? "#3d2c4f" : "#2a2f3a";
  const hue = 60 - 60 * Math.min(t, 1); // yellow -> red
  return `hsl(${hue}, 85%, ${30 + 25 * Math.min(t, 1)}%)`;
}
