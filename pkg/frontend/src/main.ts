import { ApiClient } from "./api.js";
import { HeatmapModel, HeatmapView } from "./heatmap.js";
import { JogPanel } from "./jog.js";
import { CampaignLauncher } from "./launcher.js";
import { CalibrationPanel, LogTail, StatusPanel, SummaryPanel } from "./panels.js";
import type { StartedEvent } from "./types.js";

const api = new ApiClient("");

function toast(message: string): void {
  const box = document.getElementById("toasts")!;
  const node = document.createElement("div");
  node.className = "toast";
  node.textContent = message;
  box.append(node);
  setTimeout(() => node.remove(), 6000);
}

const statusPanel = new StatusPanel(document.getElementById("status")!);
const jog = new JogPanel(api, document.getElementById("jog")!, toast);
const launcher = new CampaignLauncher(api, document.getElementById("launcher")!, toast);
new CalibrationPanel(api, document.getElementById("calibration")!, toast);
const heatmapView = new HeatmapView(document.getElementById("heatmap")!);
const logTail = new LogTail(document.getElementById("logtail")!);
const summary = new SummaryPanel(document.getElementById("summary")!);

let heatmap: HeatmapModel | null = null;
let activePlan: { delay: number; window: number } | null = null;
let unsubscribe: (() => void) | null = null;
let renderQueued = false;

function follow(campaignId: string): void {
  unsubscribe?.();
  logTail.clear();
  unsubscribe = api.subscribeEvents(
    {
      onLifecycle: (event) => {
        if (event.phase === "started") {
          heatmap = HeatmapModel.fromStarted(event as unknown as StartedEvent);
          heatmapView.reset(heatmap);
        } else {
          toast(`campaign ${event.campaign_id}: ${event.phase}`);
          void refreshCampaign(campaignId);
        }
      },
      onAttempt: (record) => {
        logTail.push(record);
        if (heatmap) {
          heatmap.ingest(record);
          if (!renderQueued) {
            renderQueued = true;
            requestAnimationFrame(() => {
              renderQueued = false;
              heatmapView.render();
            });
          }
        }
      },
      onError: () => {},
    },
    campaignId,
  );
}

async function refreshCampaign(id: string): Promise<void> {
  try {
    summary.apply(await api.campaign(id), activePlan);
  } catch {
    // Campaign may be gone after a server restart; status poll recovers.
  }
}

launcher.onLaunched = (id) => {
  const vals = launcher.values();
  activePlan = launcher.mode === "sweep" ? null : { delay: vals.delay, window: vals.window };
  toast(`campaign ${id} started`);
  follow(id);
};

let knownCampaign: string | null = null;

async function pollStatus(): Promise<void> {
  try {
    const status = await api.status();
    statusPanel.apply(status);
    jog.applyStatus(status);
    if (status.campaign && status.campaign.id !== knownCampaign) {
      // Campaign started elsewhere (CLI, another tab): follow it live.
      knownCampaign = status.campaign.id;
      follow(status.campaign.id);
    }
    if (status.campaign) {
      void refreshCampaign(status.campaign.id);
    }
  } catch {
    // Server away; keep polling.
  }
}

void pollStatus();
setInterval(() => void pollStatus(), 1000);
