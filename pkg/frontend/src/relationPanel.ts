/** Relation capture: check two argument boxes, in order.
 *
 * The first checked box becomes the subject and the second the object;
 * a third check is rejected outright.  Once exactly two are checked the
 * header swaps from a hint to the relation label buttons (recommended
 * one circled), and picking a label opens the explanation box.
 */

import { clear, el } from "./dom.js";
import { LabelBar } from "./labelBar.js";
import { SuggestBox, type SuggestFetcher } from "./suggestBox.js";
import type { CharSpan, LabelInfo } from "./types.js";

export interface ArgumentRef {
  span: CharSpan;
  text: string;
}

export interface RelationSubmission {
  subj: CharSpan;
  obj: CharSpan;
  label: string;
  nlText: string;
}

const CHECK_TWO_HINT = "check two argument boxes to label a relation";
const THIRD_BOX_MSG = "exactly two arguments: uncheck one first";

export class RelationPanel {
  readonly element: HTMLDivElement;
  readonly suggestBox: SuggestBox;
  private readonly labels: LabelInfo[];
  private readonly onSubmit: (sub: RelationSubmission) => Promise<void>;
  private readonly argsList: HTMLUListElement;
  private readonly header: HTMLDivElement;
  private readonly orderLine: HTMLParagraphElement;
  private readonly message: HTMLParagraphElement;
  private readonly form: HTMLDivElement;
  private args: ArgumentRef[] = [];
  private checkedOrder: number[] = [];
  private pickedLabel: string | null = null;
  private recommended: string | null = null;

  constructor(
    labels: LabelInfo[],
    suggest: SuggestFetcher,
    onSubmit: (sub: RelationSubmission) => Promise<void>,
  ) {
    this.labels = labels;
    this.onSubmit = onSubmit;
    this.argsList = el("ul", { class: "args" });
    this.header = el("div", { class: "rel-header" });
    this.orderLine = el("p", { class: "order-line" });
    this.message = el("p", { class: "rel-msg" });
    this.suggestBox = new SuggestBox(
      suggest,
      "why does this relation hold?",
    );
    const submitBtn = el(
      "button",
      { class: "rel-submit", type: "button" },
      "Submit relation",
    );
    submitBtn.addEventListener("click", () => void this.submit());
    this.form = el(
      "div",
      { class: "rel-form" },
      this.suggestBox.element,
      submitBtn,
    );
    this.form.hidden = true;
    this.element = el(
      "div",
      { class: "relation-panel" },
      this.argsList,
      this.message,
      this.header,
      this.orderLine,
      this.form,
    );
    this.renderHeader();
  }

  /** Replace the candidate argument list; clears any checks. */
  setArguments(args: ArgumentRef[]): void {
    this.args = args;
    this.checkedOrder = [];
    this.pickedLabel = null;
    clear(this.argsList);
    args.forEach((arg, i) => {
      const box = el("input", {
        class: "arg-box",
        type: "checkbox",
        "data-idx": String(i),
      });
      box.addEventListener("change", () => this.onBoxChange(box, i));
      this.argsList.append(
        el("li", { class: "arg-row" }, box,
          el("span", { class: "arg-text" }, arg.text)),
      );
    });
    this.renderHeader();
  }

  setRecommended(label: string | null): void {
    this.recommended = label;
    this.renderHeader();
  }

  get subject(): ArgumentRef | null {
    return this.checkedOrder.length > 0 ? this.args[this.checkedOrder[0]] : null;
  }

  get object(): ArgumentRef | null {
    return this.checkedOrder.length > 1 ? this.args[this.checkedOrder[1]] : null;
  }

  private onBoxChange(box: HTMLInputElement, index: number): void {
    if (box.checked) {
      if (this.checkedOrder.length >= 2) {
        box.checked = false; // rejected: a relation takes exactly two arguments
        this.message.textContent = THIRD_BOX_MSG;
        return;
      }
      this.checkedOrder.push(index);
    } else {
      this.checkedOrder = this.checkedOrder.filter((i) => i !== index);
    }
    this.message.textContent = "";
    this.pickedLabel = null;
    this.renderHeader();
  }

  private renderHeader(): void {
    clear(this.header);
    this.form.hidden = this.pickedLabel === null;
    const subj = this.subject;
    const obj = this.object;
    if (subj && obj) {
      const bar = new LabelBar(this.labels, (label) => this.pickLabel(label));
      bar.setCircled(this.recommended);
      this.header.append(bar.element);
      this.orderLine.textContent =
        `subject: ${subj.text} / object: ${obj.text}`;
    } else {
      this.header.append(el("span", { class: "rel-hint" }, CHECK_TWO_HINT));
      this.orderLine.textContent = "";
    }
  }

  private pickLabel(label: string): void {
    this.pickedLabel = label;
    this.form.hidden = false;
  }

  private async submit(): Promise<void> {
    const subj = this.subject;
    const obj = this.object;
    if (!subj || !obj || !this.pickedLabel) return;
    try {
      await this.onSubmit({
        subj: subj.span,
        obj: obj.span,
        label: this.pickedLabel,
        nlText: this.suggestBox.value,
      });
    } catch (err) {
      const text = err instanceof Error ? err.message : String(err);
      this.suggestBox.showError(text);
      return;
    }
    this.suggestBox.value = "";
    this.suggestBox.clearError();
    this.setArguments(this.args); // keep candidates, drop checks for redo
    this.message.textContent = "relation saved";
  }
}
