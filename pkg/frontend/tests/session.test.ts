import { describe, expect, it } from "vitest";

import { ApiError, ArenaClient, ConflictError, NoMoreTasks } from "../src/api.js";
import { AnnotationSession, type SessionState } from "../src/session.js";
import type { FivePointLabel, SubmitAck, TaskPayload } from "../src/types.js";

function task(id: string, completed = 0): TaskPayload {
  return {
    task_id: id,
    query: "q?",
    answers: ["left answer", "right answer"],
    rubric: "rubric text",
    options: ["better", "slightly_better", "tie", "slightly_worse", "worse"],
    progress: { completed },
  };
}

type SubmitCall = { taskId: string; label: FivePointLabel };

/** Scriptable stand-in for ArenaClient. */
class FakeClient {
  submissions: SubmitCall[] = [];
  private taskQueue: (TaskPayload | Error)[] = [];
  private submitQueue: (SubmitAck | Error)[] = [];
  private pendingSubmit: ((ack: SubmitAck | Error) => void) | null = null;

  enqueueTask(item: TaskPayload | Error): void {
    this.taskQueue.push(item);
  }

  enqueueAck(item: SubmitAck | Error): void {
    this.submitQueue.push(item);
  }

  /** Next submit becomes manual: resolved only by releaseSubmit(). */
  holdNextSubmit(): void {
    this.submitQueue.push(null as unknown as SubmitAck);
  }

  releaseSubmit(item: SubmitAck | Error): void {
    const resolve = this.pendingSubmit;
    this.pendingSubmit = null;
    if (resolve) {
      resolve(item);
    }
  }

  async fetchNextTask(_annotator: string): Promise<TaskPayload> {
    const next = this.taskQueue.shift();
    if (next === undefined) {
      throw new NoMoreTasks();
    }
    if (next instanceof Error) {
      throw next;
    }
    return next;
  }

  async submitLabel(
    _annotator: string,
    taskId: string,
    label: FivePointLabel,
  ): Promise<SubmitAck> {
    this.submissions.push({ taskId, label });
    const next = this.submitQueue.shift();
    if (next === null) {
      const result = await new Promise<SubmitAck | Error>((resolve) => {
        this.pendingSubmit = resolve;
      });
      if (result instanceof Error) {
        throw result;
      }
      return result;
    }
    if (next === undefined) {
      return { task_id: taskId, labels_collected: 1, complete: false };
    }
    if (next instanceof Error) {
      throw next;
    }
    return next;
  }

  asClient(): ArenaClient {
    return this as unknown as ArenaClient;
  }
}

function makeSession(client: FakeClient): { session: AnnotationSession; states: SessionState[] } {
  const states: SessionState[] = [];
  const session = new AnnotationSession(client.asClient(), "a1", (state) => states.push(state));
  return { session, states };
}

describe("AnnotationSession", () => {
  it("starts by loading and rendering the first task", async () => {
    const client = new FakeClient();
    client.enqueueTask(task("t1", 3));
    const { session, states } = makeSession(client);
    await session.start();
    expect(states.map((s) => s.kind)).toEqual(["loading", "task"]);
    expect(session.completedCount).toBe(3);
  });

  it("shows the completion screen when the pool is drained", async () => {
    const client = new FakeClient();
    const { session, states } = makeSession(client);
    await session.start();
    expect(states.at(-1)).toEqual({ kind: "done", completed: 0 });
  });

  it("advances only after the acknowledgment", async () => {
    const client = new FakeClient();
    client.enqueueTask(task("t1"));
    client.enqueueTask(task("t2", 1));
    client.holdNextSubmit();
    const { session, states } = makeSession(client);
    await session.start();
    const submitPromise = session.submit("tie");
    expect(session.state).toEqual({
      kind: "task",
      task: task("t1"),
      submitting: true,
      notice: null,
    });
    client.releaseSubmit({ task_id: "t1", labels_collected: 1, complete: false });
    await submitPromise;
    const final = session.state;
    expect(final.kind).toBe("task");
    if (final.kind === "task") {
      expect(final.task.task_id).toBe("t2");
    }
    expect(states.some((s) => s.kind === "task" && s.submitting)).toBe(true);
  });

  it("ignores duplicate submits while one is in flight", async () => {
    const client = new FakeClient();
    client.enqueueTask(task("t1"));
    client.enqueueTask(task("t2", 1));
    client.holdNextSubmit();
    const { session } = makeSession(client);
    await session.start();
    const first = session.submit("better");
    await session.submit("worse"); // double-click: must be a no-op
    client.releaseSubmit({ task_id: "t1", labels_collected: 1, complete: false });
    await first;
    expect(client.submissions).toEqual([{ taskId: "t1", label: "better" }]);
  });

  it("refreshes to the next task with a notice on conflict", async () => {
    const client = new FakeClient();
    client.enqueueTask(task("t1"));
    client.enqueueTask(task("t2", 1));
    client.enqueueAck(new ConflictError("already recorded"));
    const { session } = makeSession(client);
    await session.start();
    await session.submit("tie");
    const state = session.state;
    expect(state.kind).toBe("task");
    if (state.kind === "task") {
      expect(state.task.task_id).toBe("t2");
      expect(state.notice).toMatch(/already recorded/);
    }
  });

  it("parks in a retryable error state on transport failure", async () => {
    const client = new FakeClient();
    client.enqueueTask(new TypeError("fetch failed"));
    const { session } = makeSession(client);
    await session.start();
    expect(session.state.kind).toBe("error");
    client.enqueueTask(task("t9", 5));
    await session.retry();
    expect(session.state.kind).toBe("task");
    expect(session.completedCount).toBe(5);
  });

  it("keeps the label safe on submit transport failure (no silent loss)", async () => {
    const client = new FakeClient();
    client.enqueueTask(task("t1"));
    client.enqueueAck(new ApiError(502, "bad gateway"));
    const { session } = makeSession(client);
    await session.start();
    await session.submit("better");
    expect(session.state.kind).toBe("error");
    // retry re-fetches; with least-annotated-first the same task returns
    client.enqueueTask(task("t1"));
    await session.retry();
    expect(session.state.kind).toBe("task");
  });

  it("counts only this annotator's completed tasks", async () => {
    const client = new FakeClient();
    client.enqueueTask(task("t1", 0));
    client.enqueueTask(task("t2", 1));
    const { session } = makeSession(client);
    await session.start();
    await session.submit("slightly_worse");
    expect(session.completedCount).toBe(1);
  });
});
