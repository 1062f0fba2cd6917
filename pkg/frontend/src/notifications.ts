/** Notifications panel: 30 s polling with backoff on failure, countdown
 * rendering for pre-relapse warnings, POI rendering with distance, and
 * dismiss tracking. */

import type { ApiClient } from "./api";
import { displayDistanceM, formatCountdown, formatDistance } from "./format";
import type { NotificationDto } from "./types";

export const POLL_INTERVAL_MS = 30_000;
export const MAX_BACKOFF_MS = 8 * 60_000;

export interface RenderedNotification {
  notifId: string;
  kind: NotificationDto["kind"];
  body: string;
  /** For pre-relapse warnings: live countdown to the warning moment, which
   * the server anchors 10 minutes before the predicted peak. */
  countdown: string | null;
  poiLine: string | null;
  dismissed: boolean;
}

export function renderNotification(
  n: NotificationDto,
  nowMs: number,
  devicePosition: { lat: number; lon: number } | null,
  dismissed: Set<string>,
): RenderedNotification {
  let countdown: string | null = null;
  if (n.kind === "pre-relapse-diversion") {
    countdown = formatCountdown(nowMs, n.scheduled_for);
  }
  let poiLine: string | null = null;
  if (n.recommendation) {
    poiLine = n.recommendation.name;
    if (devicePosition) {
      const d = displayDistanceM(devicePosition, n.recommendation.location);
      poiLine += ` (${formatDistance(d)})`;
    }
  }
  return {
    notifId: n.notif_id,
    kind: n.kind,
    body: n.body,
    countdown,
    poiLine,
    dismissed: dismissed.has(n.notif_id),
  };
}

type Listener = (items: RenderedNotification[]) => void;

export class NotificationsPanel {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private backoffMs = POLL_INTERVAL_MS;
  private dismissedIds = new Set<string>();
  private latest: NotificationDto[] = [];
  private listeners: Listener[] = [];
  public devicePosition: { lat: number; lon: number } | null = null;

  constructor(
    private api: ApiClient,
    private userId: string,
    private now: () => number = () => Date.now(),
  ) {}

  onChange(listener: Listener): void {
    this.listeners.push(listener);
  }

  get items(): RenderedNotification[] {
    return this.latest.map((n) =>
      renderNotification(n, this.now(), this.devicePosition, this.dismissedIds),
    );
  }

  dismiss(notifId: string): void {
    this.dismissedIds.add(notifId);
    this.emit();
  }

  private emit(): void {
    const items = this.items;
    for (const fn of this.listeners) fn(items);
  }

  /** One poll cycle; failures back off exponentially and never drop the
   * panel contents. */
  async pollOnce(): Promise<void> {
    try {
      this.latest = await this.api.notifications(this.userId);
      this.backoffMs = POLL_INTERVAL_MS;
    } catch {
      this.backoffMs = Math.min(this.backoffMs * 2, MAX_BACKOFF_MS);
    }
    this.emit();
  }

  start(): void {
    const loop = async () => {
      await this.pollOnce();
      this.timer = setTimeout(loop, this.backoffMs);
    };
    void loop();
  }

  stop(): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = null;
  }
}
