/** Browser entry point.
 *
 * Mount with ?project=p1&doc=d-... ; without a doc id the next batch
 * document is loaded.  The service is expected on the same origin (use
 * a dev proxy or serve this bundle from the service host).
 */

import { ApiClient } from "./api.js";
import { AnnotationApp } from "./app.js";

export function mount(root: HTMLElement): AnnotationApp {
  const params = new URLSearchParams(window.location.search);
  const pid = params.get("project") ?? "p1";
  const docId = params.get("doc") ?? undefined;
  const app = new AnnotationApp(new ApiClient(""), pid, root);
  void app.start(docId).catch((err) => {
    root.textContent = `failed to load: ${err}`;
  });
  return app;
}

const rootEl = document.getElementById("app");
if (rootEl) mount(rootEl);
