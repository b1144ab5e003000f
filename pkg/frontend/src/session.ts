/** Annotation session state machine; all state authoritative on the service.
 *
 * The UI advances only on a submit acknowledgment, duplicate submits are
 * ignored while one is in flight, conflicts refresh to the next task with a
 * notice, and transport failures park the session in a retryable error state
 * without losing anything (the service owns all labels).
 */

import { ApiError, ArenaClient, ConflictError, NoMoreTasks } from "./api.js";
import type { FivePointLabel, TaskPayload } from "./types.js";

export type SessionState =
  | { kind: "loading" }
  | { kind: "task"; task: TaskPayload; submitting: boolean; notice: string | null }
  | { kind: "done"; completed: number }
  | { kind: "error"; message: string };

export type StateListener = (state: SessionState) => void;

export class AnnotationSession {
  private current: SessionState = { kind: "loading" };
  private completed = 0;

  constructor(
    private readonly client: ArenaClient,
    private readonly annotatorId: string,
    private readonly listener: StateListener,
  ) {}

  get state(): SessionState {
    return this.current;
  }

  get completedCount(): number {
    return this.completed;
  }

  private transition(state: SessionState): void {
    this.current = state;
    this.listener(state);
  }

  async start(): Promise<void> {
    await this.loadNext(null);
  }

  async loadNext(notice: string | null): Promise<void> {
    this.transition({ kind: "loading" });
    try {
      const task = await this.client.fetchNextTask(this.annotatorId);
      this.completed = task.progress.completed;
      this.transition({ kind: "task", task, submitting: false, notice });
    } catch (error) {
      if (error instanceof NoMoreTasks) {
        this.transition({ kind: "done", completed: this.completed });
      } else {
        this.transition({ kind: "error", message: describe(error) });
      }
    }
  }

  /** Submit the selected label for the current task. No-op unless a task is
   * shown and no submit is already in flight. */
  async submit(label: FivePointLabel): Promise<void> {
    if (this.current.kind !== "task" || this.current.submitting) {
      return;
    }
    const task = this.current.task;
    this.transition({ kind: "task", task, submitting: true, notice: null });
    try {
      await this.client.submitLabel(this.annotatorId, task.task_id, label);
    } catch (error) {
      if (error instanceof ConflictError) {
        await this.loadNext("That comparison was already recorded; here is the next one.");
        return;
      }
      // Stay on the same task so nothing is lost; the annotator can retry.
      this.transition({ kind: "error", message: describe(error) });
      return;
    }
    this.completed += 1;
    await this.loadNext(null);
  }

  async retry(): Promise<void> {
    await this.loadNext(null);
  }
}

function describe(error: unknown): string {
  if (error instanceof ApiError) {
    return `service error ${error.status}: ${error.message}`;
  }
  if (error instanceof Error) {
    return error.message;
  }
  return String(error);
}
