/** Shared types mirroring the annotation service wire format. */

export const FIVE_POINT_LABELS = [
  "better",
  "slightly_better",
  "tie",
  "slightly_worse",
  "worse",
] as const;

export type FivePointLabel = (typeof FIVE_POINT_LABELS)[number];

/** Captions shown on the rating buttons, in presentation order. */
export const LABEL_CAPTIONS: Record<FivePointLabel, string> = {
  better: "Better",
  slightly_better: "Slightly Better",
  tie: "Tie / Not sure",
  slightly_worse: "Slightly Worse",
  worse: "Worse",
};

export interface TaskPayload {
  task_id: string;
  query: string;
  /** Two blinded answers, in the exact order served; never reordered client-side. */
  answers: [string, string];
  rubric: string;
  options: string[];
  progress: { completed: number };
}

export interface SubmitAck {
  task_id: string;
  labels_collected: number;
  complete: boolean;
}
