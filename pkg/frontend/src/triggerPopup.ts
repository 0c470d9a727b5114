/** Trigger-selection pop-up.
 *
 * After picking a label for a span, the annotator must mark at least
 * one trigger: the in-sentence cue that justifies the label.  Done
 * stays disabled (with an inline message) until a trigger is selected;
 * the x button discards the whole annotation.
 */

import { clear, el } from "./dom.js";
import { TokenStrip } from "./tokenStrip.js";
import type { CharSpan, DocDetail } from "./types.js";

export interface TriggerPopupHandlers {
  onDone: (triggers: CharSpan[]) => void;
  onCancel: () => void;
}

const NEED_TRIGGER_MSG = "select at least one trigger span before finishing";

export class TriggerPopup {
  readonly element: HTMLDivElement;
  private readonly docText: string;
  private readonly strip: TokenStrip;
  private readonly triggers: CharSpan[] = [];
  private readonly chips: HTMLUListElement;
  private readonly message: HTMLParagraphElement;
  private readonly doneBtn: HTMLButtonElement;

  constructor(
    doc: DocDetail,
    entity: CharSpan,
    label: string,
    handlers: TriggerPopupHandlers,
  ) {
    this.docText = doc.text;
    const entityText = doc.text.slice(entity.start, entity.end);
    this.strip = new TokenStrip(doc.tokens, (range) => {
      this.addTrigger(this.strip.charSpan(range));
      this.strip.clearSelection();
    });
    this.strip.markCharSpan("entity", entity);

    this.chips = el("ul", { class: "trigger-chips" });
    this.message = el("p", { class: "popup-msg" }, NEED_TRIGGER_MSG);
    this.doneBtn = el("button", { class: "done", type: "button" }, "Done");
    this.doneBtn.disabled = true;
    this.doneBtn.addEventListener("click", () => {
      if (this.triggers.length === 0) return; // blocked, message already shown
      handlers.onDone([...this.triggers]);
    });
    const cancelBtn = el(
      "button",
      { class: "cancel", type: "button", "aria-label": "cancel" },
      "×",
    );
    cancelBtn.addEventListener("click", () => handlers.onCancel());

    this.element = el(
      "div",
      { class: "popup trigger-popup", role: "dialog" },
      el(
        "header",
        {},
        el("span", { class: "popup-title" },
          `Which words made you label "${entityText}" as ${label}?`),
        cancelBtn,
      ),
      this.strip.element,
      this.chips,
      this.message,
      this.doneBtn,
    );
  }

  get triggerSpans(): readonly CharSpan[] {
    return this.triggers;
  }

  /** Show a submission failure without closing the pop-up. */
  showError(text: string): void {
    this.message.textContent = text;
    this.message.classList.add("error");
  }

  private addTrigger(span: CharSpan): void {
    const exists = this.triggers.some(
      (t) => t.start === span.start && t.end === span.end,
    );
    if (!exists) this.triggers.push(span);
    this.render();
  }

  private removeTrigger(index: number): void {
    this.triggers.splice(index, 1);
    this.render();
  }

  private render(): void {
    clear(this.chips);
    this.strip.clearMarks("trigger");
    this.triggers.forEach((span, i) => {
      this.strip.markCharSpan("trigger", span);
      const remove = el(
        "button",
        { class: "chip-remove", type: "button", "aria-label": "remove trigger" },
        "×",
      );
      remove.addEventListener("click", () => this.removeTrigger(i));
      this.chips.append(
        el("li", { class: "chip" },
          this.docText.slice(span.start, span.end), remove),
      );
    });
    const blocked = this.triggers.length === 0;
    this.doneBtn.disabled = blocked;
    this.message.textContent = blocked ? NEED_TRIGGER_MSG : "";
    this.message.classList.remove("error");
  }
}
