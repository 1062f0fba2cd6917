/** Presentation helpers: countdowns, distances, timestamps. Pure formatting
 * of server-provided values. */

export function formatCountdown(nowMs: number, targetIso: string): string {
  const remaining = Math.round((new Date(targetIso).getTime() - nowMs) / 1000);
  if (remaining <= 0) return "now";
  const m = Math.floor(remaining / 60);
  const s = remaining % 60;
  if (m >= 60) {
    const h = Math.floor(m / 60);
    return `in ${h}h ${m % 60}m`;
  }
  return s > 0 ? `in ${m}m ${s}s` : `in ${m}m`;
}

export function formatDistance(meters: number): string {
  if (meters < 1000) return `${Math.round(meters)} m`;
  return `${(meters / 1000).toFixed(1)} km`;
}

/** Display distance between two coordinates (POI proximity only; never used
 * for fence decisions, which are server-side). */
export function displayDistanceM(
  a: { lat: number; lon: number },
  b: { lat: number; lon: number },
): number {
  const R = 6371000;
  const rad = Math.PI / 180;
  const dPhi = (b.lat - a.lat) * rad;
  const dLam = (b.lon - a.lon) * rad;
  const s =
    Math.sin(dPhi / 2) ** 2 +
    Math.cos(a.lat * rad) * Math.cos(b.lat * rad) * Math.sin(dLam / 2) ** 2;
  return 2 * R * Math.asin(Math.min(1, Math.sqrt(s)));
}

export function formatLocalTime(iso: string): string {
  const d = new Date(iso);
  return d.toISOString().slice(11, 16) + " UTC";
}
