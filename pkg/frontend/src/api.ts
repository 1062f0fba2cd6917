/** Thin typed client for the service API. All mutations go through the
 * documented endpoints; the fetch implementation is injectable for tests. */

import type {
  ConnectionDto,
  DailySummaryDto,
  EventDto,
  FenceDto,
  FixResponseDto,
  MonthlySeriesDto,
  NotificationDto,
  PostDto,
  PredictionDto,
  UserDto,
  WeeklyScoresDto,
} from "./types";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, public code: string) {
    super(`${status}: ${code}`);
  }
}

export interface EventInput {
  substance: "alcohol" | "tobacco";
  quantity: number;
  at: string;
  location?: { lat: number; lon: number } | null;
}

export interface FenceInput {
  fence_id?: string;
  owner: string;
  lat: number;
  lon: number;
  radius_m: number;
  kind: string;
  label: string;
  l_min_s?: number;
  l_max_s?: number;
}

export class ApiClient {
  constructor(
    private baseUrl: string,
    private token: string,
    private fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const res = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers: {
        "content-type": "application/json",
        authorization: `Bearer ${this.token}`,
      },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!res.ok) {
      let code = `HTTP ${res.status}`;
      try {
        const doc = await res.json();
        if (typeof doc?.detail === "string") code = doc.detail;
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(res.status, code);
    }
    return (await res.json()) as T;
  }

  getUser(userId: string): Promise<UserDto> {
    return this.request("GET", `/v1/users/${userId}`);
  }

  createEvent(userId: string, input: EventInput): Promise<EventDto> {
    return this.request("POST", `/v1/users/${userId}/events`, input);
  }

  postFix(userId: string, lat: number, lon: number, at: string): Promise<FixResponseDto> {
    return this.request("POST", `/v1/users/${userId}/fixes`, { lat, lon, at });
  }

  postFeedback(userId: string, body: unknown): Promise<unknown> {
    return this.request("POST", `/v1/users/${userId}/feedback`, body);
  }

  dailySummary(userId: string, date: string): Promise<DailySummaryDto> {
    return this.request("GET", `/v1/users/${userId}/summary/daily?date=${date}`);
  }

  weeklyScores(userId: string, weekStart: string): Promise<WeeklyScoresDto> {
    return this.request("GET", `/v1/users/${userId}/summary/weekly?week_start=${weekStart}`);
  }

  monthlySeries(userId: string, month: string): Promise<MonthlySeriesDto> {
    return this.request("GET", `/v1/users/${userId}/summary/monthly?month=${month}`);
  }

  prediction(userId: string, horizon = 24): Promise<PredictionDto> {
    return this.request("GET", `/v1/users/${userId}/prediction?horizon=${horizon}`);
  }

  notifications(userId: string, since?: string): Promise<NotificationDto[]> {
    const q = since ? `?since=${encodeURIComponent(since)}` : "";
    return this.request("GET", `/v1/users/${userId}/notifications${q}`);
  }

  listFences(userId: string): Promise<FenceDto[]> {
    return this.request("GET", `/v1/users/${userId}/fences`);
  }

  createFence(input: FenceInput): Promise<FenceDto> {
    return this.request("POST", "/v1/fences", input);
  }

  deleteFence(fenceId: string): Promise<unknown> {
    return this.request("DELETE", `/v1/fences/${fenceId}`);
  }

  listPosts(): Promise<PostDto[]> {
    return this.request("GET", "/v1/posts");
  }

  createPost(title: string, body: string): Promise<PostDto> {
    return this.request("POST", "/v1/posts", { title, body });
  }

  addComment(postId: string, body: string): Promise<unknown> {
    return this.request("POST", `/v1/posts/${postId}/comments`, { body });
  }

  connections(userId: string, k = 5): Promise<ConnectionDto[]> {
    return this.request("GET", `/v1/users/${userId}/connections?k=${k}`);
  }
}
