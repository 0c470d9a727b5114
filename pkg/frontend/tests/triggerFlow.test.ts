/** Span labeling with trigger capture.
 *
 * Select a span, pick a label, and the trigger pop-up demands at least
 * one trigger before anything is sent; the x discards the annotation.
 */

import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";
import { ApiClient } from "../src/api.js";
import { AnnotationApp } from "../src/app.js";
import { click, drag, text } from "./helpers.js";
import {
  makeMockServer,
  SEQ_DOC,
  SEQ_PROJECT,
  SEQ_RECS,
  type MockState,
} from "./mockServer.js";

describe("trigger capture flow", () => {
  let app: AnnotationApp;
  let state: MockState;
  let root: HTMLElement;

  beforeEach(async () => {
    document.body.innerHTML = "";
    root = document.createElement("div");
    document.body.append(root);
    const mock = makeMockServer(SEQ_PROJECT, [SEQ_DOC], SEQ_RECS);
    state = mock.state;
    app = new AnnotationApp(new ApiClient("", mock.fetch), "p1", root);
    await app.start(SEQ_DOC.id);
  });

  afterEach(() => app.destroy());

  function mainStrip(): Element {
    return root.querySelector(".annotating .token-strip")!;
  }

  function openPopup(): HTMLElement {
    drag(mainStrip(), 6, 7); // Rumble Fish
    click(root, '.label-btn[data-label="Restaurant"]');
    const popup = root.querySelector(".trigger-popup");
    expect(popup).not.toBeNull();
    return popup as HTMLElement;
  }

  it("opens the pop-up for the selected span and label", () => {
    const popup = openPopup();
    const title = text(popup, ".popup-title");
    expect(title).toContain("Rumble Fish");
    expect(title).toContain("Restaurant");
  });

  it("blocks submission while no trigger is selected", () => {
    const popup = openPopup();
    const done = popup.querySelector(".done") as HTMLButtonElement;
    expect(done.disabled).toBe(true);
    expect(text(popup, ".popup-msg")).toContain(
      "select at least one trigger span",
    );
    done.click(); // disabled, so nothing may reach the wire
    expect(state.submissions).toHaveLength(0);
  });

  it("submits the span with its triggers once at least one is chosen", async () => {
    const popup = openPopup();
    const done = popup.querySelector(".done") as HTMLButtonElement;

    drag(popup, 1, 5); // "had a great lunch at"
    expect(done.disabled).toBe(false);
    expect(text(popup, ".trigger-chips")).toContain("had a great lunch at");
    expect(text(popup, ".popup-msg")).toBe("");

    drag(popup, 9, 11); // "where the food"
    done.click();

    await vi.waitFor(() => expect(state.submissions).toHaveLength(1));
    const body = state.submissions[0];
    expect(body.doc_id).toBe(SEQ_DOC.id);
    expect(body.annotation.kind).toBe("span");
    expect(body.annotation.label).toBe("Restaurant");
    expect(body.annotation.span).toEqual({ start: 24, end: 35 });
    expect(body.annotation.explanation).toEqual({
      variant: "trigger",
      trigger_spans: [
        { start: 3, end: 23 },
        { start: 38, end: 52 },
      ],
    });

    await vi.waitFor(() => {
      expect(root.querySelector(".trigger-popup")).toBeNull();
      expect(text(root, ".confirmed")).toContain("Rumble Fish");
    });
    // the confirmed span is highlighted in the annotating section
    expect(
      mainStrip().querySelector('.tok[data-idx="6"]')!.classList.contains("ann"),
    ).toBe(true);
  });

  it("re-blocks when the only trigger is removed", () => {
    const popup = openPopup();
    const done = popup.querySelector(".done") as HTMLButtonElement;
    drag(popup, 1, 5);
    expect(done.disabled).toBe(false);
    click(popup, ".chip-remove");
    expect(done.disabled).toBe(true);
    expect(text(popup, ".popup-msg")).toContain(
      "select at least one trigger span",
    );
    expect(state.submissions).toHaveLength(0);
  });

  it("cancel via the x discards the annotation entirely", async () => {
    const popup = openPopup();
    drag(popup, 1, 5); // even with a trigger chosen, x still discards
    click(popup, ".cancel");
    expect(root.querySelector(".trigger-popup")).toBeNull();
    expect(state.submissions).toHaveLength(0);
    expect(state.docs[SEQ_DOC.id].annotations).toHaveLength(0);
    expect(text(root, ".confirmed").trim()).toBe("");
  });

  it("accepting a recommendation pre-selects its span and circles the label", () => {
    expect(text(root, ".rec-list")).toContain("Rumble Fish");
    const rec = root.querySelector(".rec") as HTMLElement;
    expect(rec.title).toContain("confidence 0.93");

    click(root, ".rec-accept");
    const circled = root.querySelector(".label-btn.circled") as HTMLElement;
    expect(circled.dataset.label).toBe("Restaurant");
    expect(
      mainStrip().querySelector('.tok[data-idx="6"]')!.classList.contains("sel"),
    ).toBe(true);

    click(root, '.label-btn[data-label="Restaurant"]');
    expect(root.querySelector(".trigger-popup")).not.toBeNull();
  });
});
