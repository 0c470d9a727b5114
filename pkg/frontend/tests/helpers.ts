/** Shared DOM-poking helpers for the flow tests. */

export function drag(scope: Element, fromTok: number, toTok: number): void {
  const from = scope.querySelector(`.tok[data-idx="${fromTok}"]`);
  const to = scope.querySelector(`.tok[data-idx="${toTok}"]`);
  if (!from || !to) throw new Error(`missing token ${fromTok} or ${toTok}`);
  from.dispatchEvent(new MouseEvent("mousedown", { bubbles: true }));
  to.dispatchEvent(new MouseEvent("mouseup", { bubbles: true }));
}

export function click(scope: ParentNode, selector: string): void {
  const node = scope.querySelector(selector);
  if (!(node instanceof HTMLElement)) {
    throw new Error(`nothing to click for ${selector}`);
  }
  node.click();
}

export function text(scope: ParentNode, selector: string): string {
  return scope.querySelector(selector)?.textContent ?? "";
}

export function pressKey(key: string, target: EventTarget = document): void {
  target.dispatchEvent(
    new KeyboardEvent("keydown", { key, bubbles: true }),
  );
}

export function typeInto(input: HTMLInputElement, value: string): void {
  input.value = value;
  input.setSelectionRange(value.length, value.length);
  input.dispatchEvent(new Event("input", { bubbles: true }));
}

/** Let pending promise chains settle (a few macrotask turns). */
export async function flush(turns = 4): Promise<void> {
  for (let i = 0; i < turns; i++) {
    await new Promise((resolve) => setTimeout(resolve, 0));
  }
}
