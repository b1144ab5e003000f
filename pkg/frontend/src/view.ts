/** DOM rendering for the annotation session. Pure function of the state:
 * every paint rebuilds the root, so the view can never drift from the
 * service-owned truth. Answers render in served order; sources are unknown
 * to this code by construction.
 */

import type { SessionState } from "./session.js";
import { FIVE_POINT_LABELS, LABEL_CAPTIONS, type FivePointLabel } from "./types.js";

export interface ViewHandlers {
  onSelect(label: FivePointLabel): void;
  onRetry(): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  node.className = className;
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

export function render(root: HTMLElement, state: SessionState, handlers: ViewHandlers): void {
  const doc = root.ownerDocument;
  root.textContent = "";

  if (state.kind === "loading") {
    root.append(el(doc, "p", "status", "Loading the next comparison..."));
    return;
  }

  if (state.kind === "done") {
    const panel = el(doc, "div", "done-screen");
    panel.append(el(doc, "h2", "", "All done"));
    panel.append(
      el(doc, "p", "", `You have no comparisons left. Completed: ${state.completed}.`),
    );
    root.append(panel);
    return;
  }

  if (state.kind === "error") {
    const banner = el(doc, "div", "error-banner");
    banner.append(el(doc, "p", "", `Could not reach the service: ${state.message}`));
    const retry = el(doc, "button", "retry", "Retry");
    retry.addEventListener("click", () => handlers.onRetry());
    banner.append(retry);
    root.append(banner);
    return;
  }

  const { task, submitting, notice } = state;

  if (notice) {
    root.append(el(doc, "div", "notice", notice));
  }

  root.append(el(doc, "div", "progress", `Completed: ${task.progress.completed}`));

  const queryPanel = el(doc, "section", "query-panel");
  queryPanel.append(el(doc, "h2", "", "Question"));
  queryPanel.append(el(doc, "p", "query-text", task.query));
  root.append(queryPanel);

  const answers = el(doc, "section", "answer-panels");
  task.answers.forEach((text, index) => {
    const panel = el(doc, "article", "answer-panel");
    panel.append(el(doc, "h3", "", `Answer ${index + 1}`));
    panel.append(el(doc, "p", "answer-text", text));
    answers.append(panel);
  });
  root.append(answers);

  const controls = el(doc, "section", "controls");
  controls.append(
    el(doc, "p", "prompt", "Which answer is better? Answer 1 is rated against Answer 2."),
  );
  const buttons = el(doc, "div", "choices");
  FIVE_POINT_LABELS.forEach((label, index) => {
    const button = el(doc, "button", "choice", `${index + 1}. ${LABEL_CAPTIONS[label]}`);
    button.dataset.label = label;
    button.disabled = submitting;
    button.addEventListener("click", () => handlers.onSelect(label));
    buttons.append(button);
  });
  controls.append(buttons);
  if (submitting) {
    controls.append(el(doc, "p", "status", "Submitting..."));
  }
  root.append(controls);

  const rubric = el(doc, "aside", "rubric-panel");
  rubric.append(el(doc, "h3", "", "How to judge"));
  const rubricBody = el(doc, "pre", "rubric-text", task.rubric);
  rubric.append(rubricBody);
  root.append(rubric);
}

/** Keyboard shortcuts: digits 1-5 pick the five ratings in display order. */
export function labelForKey(key: string): FivePointLabel | null {
  const index = Number.parseInt(key, 10) - 1;
  if (Number.isInteger(index) && index >= 0 && index < FIVE_POINT_LABELS.length) {
    return FIVE_POINT_LABELS[index] ?? null;
  }
  return null;
}
