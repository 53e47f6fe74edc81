// Typed client for the control server. Every device command in the UI
// goes through these documented endpoints; there is no side channel.

import type {
  ApiErrorBody,
  AttemptRecord,
  CampaignConfigDoc,
  CampaignStatus,
  LifecycleEvent,
  Position,
  RigStatus,
} from "./types.js";

export class ApiError extends Error {
  constructor(public body: ApiErrorBody, public status: number) {
    super(`${body.code}: ${body.message}`);
  }
}

async function jsonOrThrow<T>(resp: Response): Promise<T> {
  if (resp.ok) {
    return (await resp.json()) as T;
  }
  let body: ApiErrorBody;
  try {
    body = (await resp.json()) as ApiErrorBody;
  } catch {
    body = { code: "device", message: `HTTP ${resp.status}` };
  }
  throw new ApiError(body, resp.status);
}

export interface EventHandlers {
  onAttempt?: (record: AttemptRecord, id: number) => void;
  onLifecycle?: (event: LifecycleEvent) => void;
  onError?: (err: unknown) => void;
}

export class ApiClient {
  constructor(public base: string = "") {}

  private url(path: string): string {
    return `${this.base}${path}`;
  }

  status(): Promise<RigStatus> {
    return fetch(this.url("/status")).then((r) => jsonOrThrow<RigStatus>(r));
  }

  home(): Promise<{ position: Position }> {
    return fetch(this.url("/home"), { method: "POST" }).then((r) =>
      jsonOrThrow<{ position: Position }>(r),
    );
  }

  jog(dx: number, dy: number, dz: number, feed = 10.0): Promise<{ position: Position }> {
    return fetch(this.url("/jog"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ dx, dy, dz, feed_mm_s: feed }),
    }).then((r) => jsonOrThrow<{ position: Position }>(r));
  }

  calibrate(body: {
    probe_center: { u: number; v: number };
    camera_center: { u: number; v: number };
    pixel_scale_um: number;
    probe: { diameter_mm: number; winding: string };
  }): Promise<{ dx: number; dy: number; probe_ident: string }> {
    return fetch(this.url("/calibration"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    }).then((r) => jsonOrThrow(r));
  }

  startCampaign(config: CampaignConfigDoc): Promise<{ id: string }> {
    return fetch(this.url("/campaigns"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(config),
    }).then((r) => jsonOrThrow<{ id: string }>(r));
  }

  campaign(id: string): Promise<CampaignStatus> {
    return fetch(this.url(`/campaigns/${id}`)).then((r) => jsonOrThrow<CampaignStatus>(r));
  }

  cancel(id: string): Promise<CampaignStatus> {
    return fetch(this.url(`/campaigns/${id}/cancel`), { method: "POST" }).then((r) =>
      jsonOrThrow<CampaignStatus>(r),
    );
  }

  /** Subscribe to the campaign event stream; pass lastId to resume
   * without double counting. Returns a disposer. */
  subscribeEvents(
    handlers: EventHandlers,
    campaignId?: string,
    lastId?: number,
  ): () => void {
    const params = new URLSearchParams();
    if (campaignId !== undefined) params.set("campaign_id", campaignId);
    if (lastId !== undefined) params.set("last_id", String(lastId));
    const qs = params.toString();
    const source = new EventSource(this.url(`/events${qs ? `?${qs}` : ""}`));
    source.addEventListener("attempt", (msg) => {
      try {
        handlers.onAttempt?.(
          JSON.parse((msg as MessageEvent).data) as AttemptRecord,
          Number((msg as MessageEvent).lastEventId),
        );
      } catch (err) {
        handlers.onError?.(err);
      }
    });
    source.addEventListener("lifecycle", (msg) => {
      try {
        const event = JSON.parse((msg as MessageEvent).data) as LifecycleEvent;
        handlers.onLifecycle?.(event);
        if (event.phase !== "started") {
          source.close();
        }
      } catch (err) {
        handlers.onError?.(err);
      }
    });
    source.onerror = (err) => handlers.onError?.(err);
    return () => source.close();
  }
}
