/** Session persistence: who is signed in and the offline queue that rides
 * along with them. */

import type { UserDto } from "./types";
import type { StorageLike } from "./offlineQueue";

const KEY = "addictfree_session_v1";

export interface SessionState {
  userId: string;
  token: string;
  profile: UserDto | null;
}

export function loadSession(storage: StorageLike): SessionState | null {
  try {
    const raw = storage.getItem(KEY);
    if (!raw) return null;
    const doc = JSON.parse(raw);
    if (typeof doc.userId !== "string" || typeof doc.token !== "string") return null;
    return doc as SessionState;
  } catch {
    return null;
  }
}

export function saveSession(storage: StorageLike, session: SessionState): void {
  storage.setItem(KEY, JSON.stringify(session));
}
