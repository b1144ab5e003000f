/** Entry point: wires the session to the view in a browser tab.
 *
 * URL parameters:
 *   ?annotator=ID   annotator identity (required; prompted if missing)
 *   ?service=URL    service base URL (defaults to same origin)
 */

import { ArenaClient } from "./api.js";
import { AnnotationSession } from "./session.js";
import { labelForKey, render } from "./view.js";

function annotatorId(): string {
  const params = new URLSearchParams(window.location.search);
  const fromUrl = params.get("annotator");
  if (fromUrl) {
    return fromUrl;
  }
  const entered = window.prompt("Annotator id:") ?? "";
  return entered.trim() || "anonymous";
}

function serviceBase(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get("service") ?? "";
}

export function bootstrap(root: HTMLElement): AnnotationSession {
  const client = new ArenaClient(serviceBase());
  const session = new AnnotationSession(client, annotatorId(), (state) => {
    render(root, state, {
      onSelect: (label) => void session.submit(label),
      onRetry: () => void session.retry(),
    });
  });
  window.addEventListener("keydown", (event) => {
    const label = labelForKey(event.key);
    if (label !== null) {
      void session.submit(label);
    }
  });
  void session.start();
  return session;
}

const rootElement = document.getElementById("app");
if (rootElement) {
  bootstrap(rootElement);
}
