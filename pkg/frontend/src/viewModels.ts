/** View models: verbatim projections of API payloads into what the screens
 * bind to. No score, probability or fence math happens here. */

import type {
  DailySummaryDto,
  EventDto,
  FixResponseDto,
  MonthlySeriesDto,
  PredictionDto,
  WeeklyScoresDto,
} from "./types";

export interface DailyListEntry {
  eventId: string;
  substance: string;
  quantity: number;
  at: string;
  pending: boolean;
}

/** The day's logged events, newest first; optimistic entries are flagged
 * pending until the server confirms them. */
export class DailyList {
  private entries: DailyListEntry[] = [];

  get items(): DailyListEntry[] {
    return [...this.entries].sort((a, b) => b.at.localeCompare(a.at));
  }

  addPending(tempId: string, substance: string, quantity: number, at: string): void {
    this.entries.push({ eventId: tempId, substance, quantity, at, pending: true });
  }

  confirm(tempId: string, event: EventDto): void {
    const entry = this.entries.find((e) => e.eventId === tempId);
    if (entry) {
      entry.eventId = event.event_id;
      entry.pending = false;
    }
  }

  rollback(tempId: string): void {
    this.entries = this.entries.filter((e) => e.eventId !== tempId);
  }

  replaceFromServer(events: EventDto[]): void {
    this.entries = events.map((e) => ({
      eventId: e.event_id,
      substance: e.substance,
      quantity: e.quantity,
      at: e.at,
      pending: false,
    }));
  }
}

export interface DashboardViewModel {
  weekly: WeeklyScoresDto | null;
  monthly: MonthlySeriesDto | null;
  today: DailySummaryDto | null;
  sparkline: { hourStart: string; probability: number }[];
  peakHour: string | null;
  fenceStatus: { mode: string; fenceId: string | null };
}

export function buildDashboard(
  weekly: WeeklyScoresDto | null,
  monthly: MonthlySeriesDto | null,
  today: DailySummaryDto | null,
  prediction: PredictionDto | null,
  lastFix: FixResponseDto | null,
): DashboardViewModel {
  return {
    weekly,
    monthly,
    today,
    sparkline: (prediction?.hours ?? []).map((h) => ({
      hourStart: h.hour_start,
      probability: h.probability,
    })),
    peakHour: prediction?.peak.hour_start ?? null,
    fenceStatus: {
      mode: lastFix?.mode ?? "outside",
      fenceId: lastFix?.fence_id ?? null,
    },
  };
}
