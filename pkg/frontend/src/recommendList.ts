/** Model recommendations rendered below the text.
 *
 * Span suggestions show as underlined snippets with a confidence
 * tooltip and an accept button that pre-selects the span and circles
 * the recommended label; relation and class suggestions are display
 * rows feeding the recommended-label circle.
 */

import { clear, el } from "./dom.js";
import type { Recommendation } from "./types.js";

export class RecommendList {
  readonly element: HTMLElement;
  private readonly listNode: HTMLUListElement;
  private readonly onAccept: (rec: Recommendation) => void;

  constructor(onAccept: (rec: Recommendation) => void) {
    this.onAccept = onAccept;
    this.listNode = el("ul", { class: "rec-list" });
    this.element = el(
      "section",
      { class: "recommendations" },
      el("h3", {}, "Recommendations"),
      this.listNode,
    );
  }

  render(recs: Recommendation[], docText: string): void {
    clear(this.listNode);
    for (const rec of recs) {
      const tooltip = `confidence ${rec.confidence.toFixed(2)}`;
      const row = el("li", { class: "rec", title: tooltip });
      if (rec.kind === "span") {
        row.append(
          el("span", { class: "underline" }, rec.text),
          " ",
          el("span", { class: "rec-label" }, rec.label),
        );
        const accept = el(
          "button",
          { class: "rec-accept", type: "button" },
          "accept",
        );
        accept.addEventListener("click", () => this.onAccept(rec));
        row.append(" ", accept);
      } else if (rec.kind === "relation") {
        const subjText = docText.slice(rec.subj[0], rec.subj[1]);
        const objText = docText.slice(rec.obj[0], rec.obj[1]);
        row.append(
          el("span", { class: "rec-label" }, rec.label),
          `: ${subjText} / ${objText}`,
        );
      } else {
        row.append(el("span", { class: "rec-label" }, rec.label));
      }
      this.listNode.append(row);
    }
  }
}
