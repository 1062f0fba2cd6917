/** Offline log queue: consumption entries made without connectivity are
 * persisted and flushed in timestamp order when the network returns. */

import type { ApiClient, EventInput } from "./api";
import { ApiError } from "./api";

export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

const KEY = "addictfree_pending_v1";

export interface PendingEntry {
  userId: string;
  input: EventInput;
}

export class OfflineQueue {
  constructor(private storage: StorageLike) {}

  private load(): PendingEntry[] {
    try {
      return JSON.parse(this.storage.getItem(KEY) ?? "[]");
    } catch {
      return [];
    }
  }

  private save(entries: PendingEntry[]): void {
    this.storage.setItem(KEY, JSON.stringify(entries));
  }

  get length(): number {
    return this.load().length;
  }

  peekAll(): PendingEntry[] {
    return this.load();
  }

  enqueue(entry: PendingEntry): void {
    const entries = this.load();
    entries.push(entry);
    this.save(entries);
  }

  /** Send pending entries oldest-first. A network failure stops the flush
   * (entries stay queued); a server rejection drops that entry and returns
   * its code so the UI can surface it. */
  async flush(api: ApiClient): Promise<{ sent: number; rejected: string[] }> {
    const entries = this.load().sort(
      (a, b) => new Date(a.input.at).getTime() - new Date(b.input.at).getTime(),
    );
    const rejected: string[] = [];
    let sent = 0;
    while (entries.length > 0) {
      const entry = entries[0];
      try {
        await api.createEvent(entry.userId, entry.input);
        entries.shift();
        sent += 1;
      } catch (err) {
        if (err instanceof ApiError) {
          rejected.push(err.code);
          entries.shift();
          continue;
        }
        break; // connectivity problem: keep the rest for the next flush
      }
    }
    this.save(entries);
    return { sent, rejected };
  }
}
