/** Client-side form validation. Mirrors the server's rules so obvious
 * mistakes never hit the network; the server remains the authority. */

export interface EventFormInput {
  substance: "alcohol" | "tobacco";
  quantity: number;
  at: string; // ISO timestamp
}

export function validateEventForm(input: EventFormInput, now: Date): string | null {
  if (!Number.isFinite(input.quantity)) return "Quantity must be a number.";
  if (input.quantity < 0) return "Quantity cannot be negative.";
  if (input.substance === "tobacco" && !Number.isInteger(input.quantity)) {
    return "Cigarettes must be a whole number.";
  }
  const at = new Date(input.at);
  if (Number.isNaN(at.getTime())) return "Time is not a valid timestamp.";
  if (at.getTime() > now.getTime()) return "Time cannot be in the future.";
  return null;
}

export interface FenceFormInput {
  lat: number;
  lon: number;
  radius_m: number;
  l_min_s?: number | null;
  l_max_s?: number | null;
}

export const STRICT_INEQUALITY_MESSAGE =
  "Minimum dwell must be strictly less than maximum dwell (l_min < l_max).";

export function validateFenceForm(input: FenceFormInput): string | null {
  if (!Number.isFinite(input.lat) || input.lat < -90 || input.lat > 90) {
    return "Latitude must be between -90 and 90.";
  }
  if (!Number.isFinite(input.lon) || input.lon < -180 || input.lon > 180) {
    return "Longitude must be between -180 and 180.";
  }
  if (!Number.isFinite(input.radius_m) || input.radius_m <= 0) {
    return "Radius must be positive.";
  }
  const hasMin = input.l_min_s !== undefined && input.l_min_s !== null;
  const hasMax = input.l_max_s !== undefined && input.l_max_s !== null;
  if (hasMin !== hasMax) return "Set both dwell bounds or neither.";
  if (hasMin && hasMax) {
    const lMin = input.l_min_s as number;
    const lMax = input.l_max_s as number;
    if (lMin < 0) return "Minimum dwell cannot be negative.";
    if (lMax <= 0) return "Maximum dwell must be positive.";
    if (!(lMin < lMax)) return STRICT_INEQUALITY_MESSAGE;
  }
  return null;
}
