/** The annotation screen: one document, its label bar, recommendations,
 * and the capture flow for the project's task.
 *
 * All durable state round-trips through the API: every confirmed
 * annotation is re-read from the server, so refreshing the page
 * reconstructs the same screen.
 */

import { ApiClient, ApiError } from "./api.js";
import { clear, el } from "./dom.js";
import { LabelBar } from "./labelBar.js";
import { RecommendList } from "./recommendList.js";
import { type ArgumentRef, RelationPanel } from "./relationPanel.js";
import { SuggestBox } from "./suggestBox.js";
import { TokenStrip } from "./tokenStrip.js";
import { TriggerPopup } from "./triggerPopup.js";
import { validateDraft } from "./validate.js";
import type {
  AnnotationDraft,
  AnnotationEcho,
  CharSpan,
  DocDetail,
  ProjectInfo,
  Recommendation,
} from "./types.js";

let annSeq = 0;

function freshId(): string {
  annSeq += 1;
  return `a-${Date.now().toString(36)}-${annSeq}`;
}

export class AnnotationApp {
  readonly root: HTMLElement;
  private readonly api: ApiClient;
  private readonly pid: string;

  project!: ProjectInfo;
  doc!: DocDetail;
  private recs: Recommendation[] = [];

  private strip!: TokenStrip;
  private labelBar!: LabelBar;
  private recommendList!: RecommendList;
  private relationPanel: RelationPanel | null = null;
  private classExplanation: SuggestBox | null = null;
  private popup: TriggerPopup | null = null;
  private pendingSpan: CharSpan | null = null;
  private relationArgs: ArgumentRef[] = [];
  private statusLine!: HTMLParagraphElement;
  private readonly keyListener: (ev: KeyboardEvent) => void;

  constructor(api: ApiClient, pid: string, root: HTMLElement) {
    this.api = api;
    this.pid = pid;
    this.root = root;
    this.keyListener = (ev) => this.onKeyDown(ev);
    document.addEventListener("keydown", this.keyListener);
  }

  destroy(): void {
    document.removeEventListener("keydown", this.keyListener);
  }

  async start(docId?: string): Promise<void> {
    this.project = await this.api.project(this.pid);
    let target = docId;
    if (!target) {
      const batch = await this.api.batch(this.pid, 1);
      target = batch.doc_ids[0];
      if (!target) throw new Error("no documents to annotate");
    }
    await this.loadDoc(target);
  }

  async loadDoc(docId: string): Promise<void> {
    this.doc = await this.api.document(this.pid, docId);
    this.recs = (await this.api.recommendations(this.pid, docId)).recommendations;
    this.relationArgs = [];
    this.render();
  }

  private async refresh(): Promise<void> {
    this.doc = await this.api.document(this.pid, this.doc.id);
    this.recs = (
      await this.api.recommendations(this.pid, this.doc.id)
    ).recommendations;
    this.render();
  }

  // -- rendering -------------------------------------------------------------

  private render(): void {
    clear(this.root);
    this.popup = null;
    this.pendingSpan = null;

    this.strip = new TokenStrip(this.doc.tokens, (range) => {
      this.pendingSpan = this.strip.charSpan(range);
    });
    for (const ann of this.humanAnnotations()) {
      if (ann.span) this.strip.markCharSpan("ann", ann.span);
    }

    this.labelBar = new LabelBar(this.project.labels, (label) =>
      this.onPickLabel(label),
    );
    const recommendedLabel = this.recs[0]?.label ?? null;

    this.recommendList = new RecommendList((rec) => this.acceptRec(rec));
    this.statusLine = el("p", { class: "status-line" });

    const annotating = el(
      "section",
      { class: "annotating" },
      el("h3", {}, "Annotating Section"),
      this.strip.element,
    );
    if (this.project.task !== "relation_extraction") {
      annotating.append(this.labelBar.element);
    }
    annotating.append(this.renderAnnotationList());

    this.root.append(annotating, this.statusLine);

    if (this.project.task === "relation_extraction") {
      this.root.append(this.renderRelationTools());
    } else if (this.project.task === "sentiment_analysis") {
      this.classExplanation = new SuggestBox(
        (prefix, cursor) => this.fetchSuggestions(prefix, cursor),
        "why this label? (optional)",
      );
      this.root.append(this.classExplanation.element);
    }

    this.recommendList.render(this.recs, this.doc.text);
    this.root.append(this.recommendList.element);
    if (this.project.task === "relation_extraction") {
      this.relationPanel?.setRecommended(recommendedLabel);
    }
  }

  private renderAnnotationList(): HTMLUListElement {
    const list = el("ul", { class: "confirmed" });
    for (const ann of this.humanAnnotations()) {
      const row = el("li", { class: "ann-row" });
      row.append(el("span", { class: "ann-label" }, ann.label), " ");
      if (ann.kind === "span" && ann.span) {
        row.append(ann.span.text);
      } else if (ann.kind === "relation" && ann.subj && ann.obj) {
        row.append(`${ann.subj.text} -> ${ann.obj.text}`);
      } else if (ann.kind === "class") {
        row.append(ann.aspect ? ann.aspect.text : "(document)");
      }
      if (ann.explanation?.variant === "trigger") {
        const cues = ann.explanation.trigger_spans
          .map((t) => `"${t.text}"`)
          .join(", ");
        row.append(el("span", { class: "ann-why" }, ` because ${cues}`));
      } else if (ann.explanation?.variant === "natural_language") {
        row.append(
          el("span", { class: "ann-why" }, ` because ${ann.explanation.nl_text}`),
        );
      }
      list.append(row);
    }
    return list;
  }

  private renderRelationTools(): HTMLElement {
    const markBtn = el(
      "button",
      { class: "mark-arg", type: "button" },
      "Mark argument",
    );
    markBtn.addEventListener("click", () => this.markArgument());
    this.relationPanel = new RelationPanel(
      this.project.labels,
      (prefix, cursor) => this.fetchSuggestions(prefix, cursor),
      (sub) =>
        this.submitDraft({
          id: freshId(),
          kind: "relation",
          label: sub.label,
          subj: sub.subj,
          obj: sub.obj,
          explanation: sub.nlText.trim()
            ? { variant: "natural_language", nl_text: sub.nlText }
            : undefined,
        }),
    );
    this.relationPanel.setArguments(this.relationArgs);
    return el(
      "section",
      { class: "relation-tools" },
      markBtn,
      this.relationPanel.element,
    );
  }

  private humanAnnotations(): AnnotationEcho[] {
    return this.doc.annotations.filter((a) => a.source === "human");
  }

  private async fetchSuggestions(
    prefix: string,
    cursor: number,
  ): Promise<string[]> {
    const resp = await this.api.suggest(this.pid, prefix, cursor);
    return resp.suggestions;
  }

  // -- interactions ----------------------------------------------------------

  private onKeyDown(ev: KeyboardEvent): void {
    if (this.popup) return; // the pop-up owns the interaction
    const target = ev.target;
    if (
      target instanceof HTMLInputElement ||
      target instanceof HTMLTextAreaElement
    ) {
      return; // typing, not labeling
    }
    this.labelBar.handleKey(ev.key);
  }

  private onPickLabel(label: string): void {
    if (this.project.task === "sequence_labeling") {
      if (!this.pendingSpan) {
        this.statusLine.textContent = "select a span first";
        return;
      }
      this.openTriggerPopup(this.pendingSpan, label);
    } else if (this.project.task === "sentiment_analysis") {
      void this.submitClass(label);
    }
    // relation labels live in the relation panel header, not here
  }

  private markArgument(): void {
    if (!this.pendingSpan || !this.relationPanel) return;
    const span = this.pendingSpan;
    const text = this.doc.text.slice(span.start, span.end);
    const exists = this.relationArgs.some(
      (a) => a.span.start === span.start && a.span.end === span.end,
    );
    if (!exists) {
      this.relationArgs.push({ span, text });
      this.relationPanel.setArguments(this.relationArgs);
    }
    this.strip.clearSelection();
    this.pendingSpan = null;
  }

  private acceptRec(rec: Recommendation): void {
    if (rec.kind !== "span") return;
    const span = { start: rec.char_start, end: rec.char_end };
    const range = this.strip.rangeForCharSpan(span);
    if (range) this.strip.setSelection(range);
    this.pendingSpan = span;
    this.labelBar.setCircled(rec.label);
  }

  private openTriggerPopup(entity: CharSpan, label: string): void {
    this.closePopup();
    this.popup = new TriggerPopup(this.doc, entity, label, {
      onDone: (triggers) =>
        void this.submitSpan(entity, label, triggers),
      onCancel: () => {
        this.closePopup();
        this.strip.clearSelection();
        this.pendingSpan = null;
      },
    });
    this.root.append(this.popup.element);
  }

  private closePopup(): void {
    this.popup?.element.remove();
    this.popup = null;
  }

  private async submitSpan(
    entity: CharSpan,
    label: string,
    triggers: CharSpan[],
  ): Promise<void> {
    const draft: AnnotationDraft = {
      id: freshId(),
      kind: "span",
      label,
      span: entity,
      explanation: { variant: "trigger", trigger_spans: triggers },
    };
    const violations = validateDraft(draft, this.doc, this.project);
    if (violations.length > 0) {
      this.popup?.showError(violations.join("; "));
      return;
    }
    try {
      await this.api.submit(this.pid, {
        doc_id: this.doc.id,
        request_id: draft.id,
        annotation: draft,
      });
    } catch (err) {
      const text = err instanceof Error ? err.message : String(err);
      this.popup?.showError(text);
      return;
    }
    this.closePopup();
    await this.refresh();
  }

  private async submitClass(label: string): Promise<void> {
    const nlText = this.classExplanation?.value.trim() ?? "";
    const draft: AnnotationDraft = {
      id: freshId(),
      kind: "class",
      label,
      aspect: this.pendingSpan ?? undefined,
      explanation: nlText
        ? { variant: "natural_language", nl_text: nlText }
        : undefined,
    };
    await this.submitDraft(draft);
  }

  /** Validate, submit, refresh.  Throws ApiError for the caller's
   * inline display when the server rejects (e.g. a parse failure). */
  private async submitDraft(draft: AnnotationDraft): Promise<void> {
    const violations = validateDraft(draft, this.doc, this.project);
    if (violations.length > 0) {
      throw new ApiError(0, violations);
    }
    await this.api.submit(this.pid, {
      doc_id: this.doc.id,
      request_id: draft.id,
      annotation: draft,
    });
    await this.refresh();
  }
}
