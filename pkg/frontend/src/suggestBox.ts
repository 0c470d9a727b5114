/** Explanation input with live grammatical autosuggest.
 *
 * Suggestions come exclusively from the server's suggest endpoint (the
 * UI holds no copy of the grammar); requests are debounced at 150 ms
 * and stale responses are dropped so fast typing never shows results
 * for an old prefix.
 */

import { debounce } from "./debounce.js";
import { clear, el } from "./dom.js";

export const SUGGEST_DEBOUNCE_MS = 150;

export type SuggestFetcher = (
  prefix: string,
  cursor: number,
) => Promise<string[]>;

export class SuggestBox {
  readonly element: HTMLDivElement;
  readonly input: HTMLInputElement;
  private readonly list: HTMLUListElement;
  private readonly errorLine: HTMLParagraphElement;
  private readonly fetchSuggest: SuggestFetcher;
  private requestSeq = 0;

  constructor(fetchSuggest: SuggestFetcher, placeholder = "why this label?") {
    this.fetchSuggest = fetchSuggest;
    this.input = el("input", {
      class: "nl-input",
      type: "text",
      placeholder,
      autocomplete: "off",
    });
    this.list = el("ul", { class: "suggestions" });
    this.errorLine = el("p", { class: "nl-error" });
    this.element = el(
      "div",
      { class: "suggest-box" },
      this.input,
      this.list,
      this.errorLine,
    );

    const refresh = debounce(() => void this.refresh(), SUGGEST_DEBOUNCE_MS);
    this.input.addEventListener("input", () => {
      this.clearError();
      refresh();
    });
  }

  get value(): string {
    return this.input.value;
  }

  set value(text: string) {
    this.input.value = text;
  }

  /** Inline parse failure from the server, next to the input. */
  showError(text: string): void {
    this.errorLine.textContent = text;
  }

  clearError(): void {
    this.errorLine.textContent = "";
  }

  private async refresh(): Promise<void> {
    const seq = ++this.requestSeq;
    const prefix = this.input.value;
    const cursor = this.input.selectionStart ?? prefix.length;
    let suggestions: string[];
    try {
      suggestions = await this.fetchSuggest(prefix, cursor);
    } catch {
      return; // suggest is advisory; a failed fetch just shows nothing
    }
    if (seq !== this.requestSeq) return; // a newer request superseded this one
    this.renderSuggestions(suggestions, cursor);
  }

  private renderSuggestions(suggestions: string[], cursor: number): void {
    clear(this.list);
    for (const continuation of suggestions) {
      const item = el("li", { class: "suggestion" }, continuation);
      item.addEventListener("click", () => {
        this.insertAt(cursor, continuation);
        clear(this.list);
      });
      this.list.append(item);
    }
  }

  private insertAt(cursor: number, continuation: string): void {
    const head = this.input.value.slice(0, cursor);
    const tail = this.input.value.slice(cursor);
    const joiner = head && !/\s$/.test(head) ? " " : "";
    this.input.value = head + joiner + continuation + tail;
    const pos = (head + joiner + continuation).length;
    this.input.setSelectionRange(pos, pos);
    this.input.dispatchEvent(new Event("change", { bubbles: true }));
  }
}
