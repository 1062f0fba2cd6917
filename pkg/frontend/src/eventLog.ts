/** Consumption logging: inline validation, optimistic append, rollback with
 * the server's reason code on rejection, offline queueing when unreachable. */

import { ApiClient, ApiError, EventInput } from "./api";
import { OfflineQueue } from "./offlineQueue";
import { validateEventForm } from "./validate";
import { DailyList } from "./viewModels";

export type SubmitResult =
  | { status: "accepted" }
  | { status: "blocked"; message: string }
  | { status: "rejected"; code: string }
  | { status: "queued-offline" };

export class EventLogController {
  private counter = 0;

  constructor(
    private api: ApiClient,
    private userId: string,
    readonly dailyList: DailyList,
    private queue: OfflineQueue,
    private now: () => Date = () => new Date(),
  ) {}

  async submit(input: EventInput): Promise<SubmitResult> {
    const problem = validateEventForm(
      { substance: input.substance, quantity: input.quantity, at: input.at },
      this.now(),
    );
    if (problem !== null) {
      return { status: "blocked", message: problem };
    }
    const tempId = `pending-${++this.counter}`;
    this.dailyList.addPending(tempId, input.substance, input.quantity, input.at);
    try {
      const event = await this.api.createEvent(this.userId, input);
      this.dailyList.confirm(tempId, event);
      return { status: "accepted" };
    } catch (err) {
      this.dailyList.rollback(tempId);
      if (err instanceof ApiError) {
        return { status: "rejected", code: err.code };
      }
      this.queue.enqueue({ userId: this.userId, input });
      return { status: "queued-offline" };
    }
  }

  /** Called on the browser "online" event. */
  async reconnect(): Promise<void> {
    await this.queue.flush(this.api);
  }
}
