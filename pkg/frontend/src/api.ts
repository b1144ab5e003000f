/** Typed client for the annotation endpoints of the arena service. */

import type { FivePointLabel, SubmitAck, TaskPayload } from "./types.js";

/** The pool has no more tasks for this annotator. */
export class NoMoreTasks extends Error {
  constructor() {
    super("no more tasks for this annotator");
  }
}

/** The submission conflicts (duplicate label or task already closed). */
export class ConflictError extends Error {}

/** Any other non-success response. */
export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

async function detail(response: Response): Promise<string> {
  try {
    const body = (await response.json()) as { detail?: string };
    return body.detail ?? response.statusText;
  } catch {
    return response.statusText;
  }
}

export class ArenaClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  async fetchNextTask(annotatorId: string): Promise<TaskPayload> {
    const url = `${this.baseUrl}/annotation/next?annotator=${encodeURIComponent(annotatorId)}`;
    const response = await this.fetchFn(url);
    if (response.status === 204) {
      throw new NoMoreTasks();
    }
    if (!response.ok) {
      throw new ApiError(response.status, await detail(response));
    }
    return (await response.json()) as TaskPayload;
  }

  async submitLabel(
    annotatorId: string,
    taskId: string,
    label: FivePointLabel,
  ): Promise<SubmitAck> {
    const response = await this.fetchFn(`${this.baseUrl}/annotation/judgment`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ annotator_id: annotatorId, task_id: taskId, label }),
    });
    if (response.status === 409) {
      throw new ConflictError(await detail(response));
    }
    if (!response.ok) {
      throw new ApiError(response.status, await detail(response));
    }
    return (await response.json()) as SubmitAck;
  }
}
