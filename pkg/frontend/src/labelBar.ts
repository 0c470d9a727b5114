/** Label buttons with shortcut keys.
 *
 * A button click and its shortcut key go through the same pick handler;
 * the recommended label can be circled so the annotator sees what the
 * model would choose.
 */

import { el } from "./dom.js";
import type { LabelInfo } from "./types.js";

export class LabelBar {
  readonly element: HTMLDivElement;
  private readonly labels: LabelInfo[];
  private readonly onPick: (label: string) => void;

  constructor(labels: LabelInfo[], onPick: (label: string) => void) {
    this.labels = labels;
    this.onPick = onPick;
    this.element = el("div", { class: "label-bar" });
    for (const label of labels) {
      const caption = label.shortcut_key
        ? `${label.name} (${label.shortcut_key})`
        : label.name;
      const button = el(
        "button",
        { class: "label-btn", "data-label": label.name, type: "button" },
        caption,
      );
      button.addEventListener("click", () => this.onPick(label.name));
      this.element.append(button);
    }
  }

  /** Apply the label bound to a shortcut key; false when unbound. */
  handleKey(key: string): boolean {
    const hit = this.labels.find(
      (l) => l.shortcut_key && l.shortcut_key === key,
    );
    if (!hit) return false;
    this.onPick(hit.name);
    return true;
  }

  setCircled(labelName: string | null): void {
    this.element.querySelectorAll(".label-btn").forEach((btn) => {
      btn.classList.toggle(
        "circled",
        labelName !== null && (btn as HTMLElement).dataset.label === labelName,
      );
    });
  }
}
