/** One document rendered as clickable tokens.
 *
 * Press on a token and release on another to select the covered range,
 * mirroring mouse drag selection; the selection always lands on token
 * boundaries, so the char offsets sent to the server are aligned by
 * construction.
 */

import { el } from "./dom.js";
import type { CharSpan, Token } from "./types.js";

export interface TokenRange {
  startTok: number;
  endTok: number; // exclusive
}

export class TokenStrip {
  readonly element: HTMLDivElement;
  private readonly tokens: Token[];
  private anchor: number | null = null;
  private selected: TokenRange | null = null;
  private readonly onSelect: (range: TokenRange) => void;

  constructor(tokens: Token[], onSelect: (range: TokenRange) => void = () => {}) {
    this.tokens = tokens;
    this.onSelect = onSelect;
    this.element = el("div", { class: "token-strip" });
    tokens.forEach((tok, i) => {
      const node = el("span", { class: "tok", "data-idx": String(i) }, tok.text);
      this.element.append(node, " ");
    });
    this.element.addEventListener("mousedown", (ev) => {
      const idx = this.tokenIndex(ev.target);
      if (idx !== null) this.anchor = idx;
    });
    this.element.addEventListener("mouseup", (ev) => {
      const idx = this.tokenIndex(ev.target);
      if (idx === null || this.anchor === null) return;
      const startTok = Math.min(this.anchor, idx);
      const endTok = Math.max(this.anchor, idx) + 1;
      this.anchor = null;
      this.setSelection({ startTok, endTok });
      this.onSelect({ startTok, endTok });
    });
  }

  private tokenIndex(target: EventTarget | null): number | null {
    if (!(target instanceof Element)) return null;
    const tok = target.closest(".tok");
    if (!tok) return null;
    return Number((tok as HTMLElement).dataset.idx);
  }

  get selection(): TokenRange | null {
    return this.selected;
  }

  setSelection(range: TokenRange | null): void {
    this.selected = range;
    this.clearMarks("sel");
    if (range) this.mark("sel", range.startTok, range.endTok);
  }

  clearSelection(): void {
    this.setSelection(null);
  }

  /** Char offsets of the current selection, aligned by construction. */
  selectionCharSpan(): CharSpan | null {
    if (!this.selected) return null;
    return this.charSpan(this.selected);
  }

  charSpan(range: TokenRange): CharSpan {
    return {
      start: this.tokens[range.startTok].start,
      end: this.tokens[range.endTok - 1].end,
    };
  }

  /** Token range covering a char span; null when not token-aligned. */
  rangeForCharSpan(span: CharSpan): TokenRange | null {
    const startTok = this.tokens.findIndex((t) => t.start === span.start);
    const endIdx = this.tokens.findIndex((t) => t.end === span.end);
    if (startTok < 0 || endIdx < 0) return null;
    return { startTok, endTok: endIdx + 1 };
  }

  mark(className: string, startTok: number, endTok: number): void {
    for (let i = startTok; i < endTok; i++) {
      this.element
        .querySelector(`.tok[data-idx="${i}"]`)
        ?.classList.add(className);
    }
  }

  markCharSpan(className: string, span: CharSpan): void {
    const range = this.rangeForCharSpan(span);
    if (range) this.mark(className, range.startTok, range.endTok);
  }

  clearMarks(className: string): void {
    this.element
      .querySelectorAll(`.tok.${className}`)
      .forEach((node) => node.classList.remove(className));
  }
}
