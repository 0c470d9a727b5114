/** Client-side structural validation.
 *
 * Mirrors the server's checks on shape, label membership, token
 * alignment, argument arity, and trigger count, so a draft that fails
 * here is never sent.  A span that fails alignment also counts as
 * missing, exactly as the server resolves it.  Explanation grammar is
 * the one thing left to the server: this UI holds no copy of the
 * grammar, so parse failures come back on submission and are shown
 * inline.
 */

import type {
  AnnotationDraft,
  CharSpan,
  DocDetail,
  ProjectInfo,
} from "./types.js";

/** True when the span resolves to whole tokens; pushes the violation
 * otherwise.  Also rejects inverted/empty ranges as a local guard (the
 * token-based selection never produces them). */
function checkAligned(
  span: CharSpan | undefined,
  what: string,
  doc: DocDetail,
  violations: string[],
): boolean {
  if (span === undefined) return false;
  if (span.start >= span.end) {
    violations.push(`empty ${what} span (${span.start}, ${span.end})`);
    return false;
  }
  const startOk = doc.tokens.some((t) => t.start === span.start);
  const endOk = doc.tokens.some((t) => t.end === span.end);
  if (!startOk || !endOk) {
    violations.push(
      `${what}: char range (${span.start}, ${span.end}) does not align ` +
        `with token boundaries of document ${doc.id}`,
    );
    return false;
  }
  return true;
}

function spansOverlap(a: CharSpan, b: CharSpan): boolean {
  return a.start < b.end && b.start < a.end;
}

/** All structural problems with a draft; empty means safe to submit. */
export function validateDraft(
  draft: AnnotationDraft,
  doc: DocDetail,
  project: ProjectInfo,
): string[] {
  const violations: string[] = [];
  if (!draft.id) violations.push("annotation id is required");
  if (!draft.label) {
    violations.push("label is required");
  } else if (!project.labels.some((l) => l.name === draft.label)) {
    violations.push(`unknown label '${draft.label}'`);
  }

  if (draft.kind === "span") {
    if (!checkAligned(draft.span, "span", doc, violations)) {
      violations.push("span annotation requires a span");
    }
  } else if (draft.kind === "relation") {
    const subjOk = checkAligned(draft.subj, "subj", doc, violations);
    const objOk = checkAligned(draft.obj, "obj", doc, violations);
    if (!subjOk || !objOk) {
      violations.push("relation requires subj and obj (click order)");
    } else if (spansOverlap(draft.subj!, draft.obj!)) {
      violations.push("relation arguments overlap");
    }
  } else if (draft.kind === "class") {
    if (draft.aspect) checkAligned(draft.aspect, "aspect", doc, violations);
  }

  const exp = draft.explanation;
  if (exp) {
    if (exp.variant === "trigger") {
      const aligned = exp.trigger_spans.filter((sp, i) =>
        checkAligned(sp, `trigger_spans[${i}]`, doc, violations),
      );
      if (aligned.length === 0) {
        violations.push("trigger explanation needs at least one trigger span");
      }
    } else if (exp.variant === "natural_language") {
      if (!exp.nl_text.trim()) {
        violations.push("empty natural-language explanation");
      }
    }
  }
  return violations;
}
