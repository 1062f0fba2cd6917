/** Server payload shapes, mirrored verbatim. The client renders these
 * values and never recomputes scores, probabilities or fence decisions. */

export interface GeoPointDto {
  lat: number;
  lon: number;
}

export interface UserDto {
  user_id: string;
  display_name: string;
  addiction_kinds: string[];
  recovery_stage: string;
  interests: { theme: string; subcategory: string }[];
  home_region: GeoPointDto | null;
  created_at: string;
  utc_offset_minutes: number;
}

export interface EventDto {
  event_id: string;
  user_id: string;
  substance: "alcohol" | "tobacco";
  quantity: number;
  at: string;
  location: GeoPointDto | null;
  source: string;
}

export interface DailySummaryDto {
  date: string;
  alcohol_times: number;
  alcohol_oz: number;
  tobacco_times: number;
  cigarettes: number;
}

export interface DayScoresDto {
  date: string;
  alcohol_score: number;
  smoking_score: number;
  fitness_score: number;
}

export interface WeeklyScoresDto {
  week_start: string;
  days: DayScoresDto[];
}

export interface MonthlySeriesDto {
  month: string;
  days: DailySummaryDto[];
}

export interface PredictionHourDto {
  hour_start: string;
  probability: number;
}

export interface PredictionDto {
  hours: PredictionHourDto[];
  peak: PredictionHourDto;
}

export interface PoiDto {
  poi_id: string;
  name: string;
  location: GeoPointDto;
  theme: string;
  open: boolean;
}

export interface NotificationDto {
  notif_id: string;
  user_id: string;
  kind:
    | "fence-entry-diversion"
    | "pre-relapse-diversion"
    | "dwell-violation"
    | "motivational"
    | "feedback-request";
  body: string;
  scheduled_for: string;
  recommendation: PoiDto | null;
  delivered_at: string | null;
  reason: Record<string, unknown>;
}

export interface FenceDto {
  fence_id: string;
  center: GeoPointDto;
  radius_m: number;
  kind: string;
  owner_id: string | null;
  state_constraint: { l_min: number; l_max: number; applies_to: string } | null;
  label: string;
}

export interface FixResponseDto {
  mode: "outside" | "inside" | "transit";
  fence_id: string | null;
  events: { kind: string; at: string; fence_id: string | null }[];
}

export interface PostDto {
  post_id: string;
  author: string;
  title: string;
  body: string;
  created_at: string;
  comments: { comment_id: string; author: string; body: string; created_at: string }[];
}

export interface ConnectionDto {
  user_id: string;
  candidate_id: string;
  score: number;
  basis: string[];
}
