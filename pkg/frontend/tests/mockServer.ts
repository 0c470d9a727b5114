/** In-memory stand-in for the annotation service.
 *
 * Fixtures (documents, tokens, suggestions, recommendations, error
 * messages) were captured verbatim from a running service, so what the
 * mock returns is exactly what the wire carries.  The POST handler
 * re-implements the server's structural validation: token alignment,
 * required spans, trigger count, label membership, and parse results
 * from a fixture table; a text with no parse fixture fails the test
 * rather than inventing parser behavior.
 */

import type {
  AnnotationDraft,
  AnnotationEcho,
  CharSpan,
  DocDetail,
  ProjectInfo,
  Recommendation,
  SubmitBody,
} from "../src/types.js";

export const SEQ_PROJECT: ProjectInfo = {
  project_id: "p1",
  name: "venues",
  task: "sequence_labeling",
  labels: [
    { name: "Restaurant", shortcut_key: "r", color: "" },
    { name: "Movie", shortcut_key: "m", color: "" },
  ],
};

export const SEQ_DOC: DocDetail = {
  id: "d-d9ea4152e7bd090c",
  text: "We had a great lunch at Rumble Fish , where the food is delicious .",
  tokens: [
    { text: "We", start: 0, end: 2 },
    { text: "had", start: 3, end: 6 },
    { text: "a", start: 7, end: 8 },
    { text: "great", start: 9, end: 14 },
    { text: "lunch", start: 15, end: 20 },
    { text: "at", start: 21, end: 23 },
    { text: "Rumble", start: 24, end: 30 },
    { text: "Fish", start: 31, end: 35 },
    { text: ",", start: 36, end: 37 },
    { text: "where", start: 38, end: 43 },
    { text: "the", start: 44, end: 47 },
    { text: "food", start: 48, end: 52 },
    { text: "is", start: 53, end: 55 },
    { text: "delicious", start: 56, end: 65 },
    { text: ".", start: 66, end: 67 },
  ],
  annotations: [],
};

export const SEQ_RECS: Recommendation[] = [
  {
    kind: "span",
    label: "Restaurant",
    char_start: 24,
    char_end: 35,
    text: "Rumble Fish",
    confidence: 0.93,
  },
];

export const REL_PROJECT: ProjectInfo = {
  project_id: "p2",
  name: "incidents",
  task: "relation_extraction",
  labels: [{ name: "cause-effect", shortcut_key: "", color: "" }],
};

export const REL_DOC: DocDetail = {
  id: "d-4e33332a6f793947",
  text: "The flood happened because of the broken dam .",
  tokens: [
    { text: "The", start: 0, end: 3 },
    { text: "flood", start: 4, end: 9 },
    { text: "happened", start: 10, end: 18 },
    { text: "because", start: 19, end: 26 },
    { text: "of", start: 27, end: 29 },
    { text: "the", start: 30, end: 33 },
    { text: "broken", start: 34, end: 40 },
    { text: "dam", start: 41, end: 44 },
    { text: ".", start: 45, end: 46 },
  ],
  annotations: [],
};

export const REL_RECS: Recommendation[] = [
  {
    kind: "relation",
    label: "cause-effect",
    confidence: 1.0,
    subj: [4, 18],
    obj: [34, 44],
  },
  {
    kind: "relation",
    label: "cause-effect",
    confidence: 1.0,
    subj: [34, 44],
    obj: [4, 18],
  },
];

/** Continuations the live service returns for these exact prefixes. */
export const SUGGEST_FIXTURES: Record<string, string[]> = {
  "the phrase 'caused by' occurs ": [
    "after", "after OBJ", "after SUBJ", "at least", "before", "before OBJ",
    "before SUBJ", "between", "between OBJ and SUBJ", "between SUBJ and OBJ",
    "in the sentence", "to the left of", "to the left of OBJ",
    "to the left of SUBJ", "to the right of", "to the right of OBJ",
    "to the right of SUBJ", "within",
  ],
};

/** Explanations the live parser accepts, and its message when it does not. */
const PARSE_OK = new Set([
  "the phrase 'because of' occurs between SUBJ and OBJ",
  "the phrase 'caused by' occurs between SUBJ and OBJ",
  "the sentence contains the word 'delicious'",
]);

const PARSE_FAIL: Record<string, string> = {
  "the moon is made of 'cheese'":
    "cannot parse explanation \"the moon is made of 'cheese'\": " +
    "no rule consumes 'moon' (token 1)",
};

export interface MockState {
  submissions: SubmitBody[];
  suggestCalls: { prefix: string; cursor: string | null }[];
  docs: Record<string, DocDetail>;
  seenRequests: Record<string, unknown>;
}

function json(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

function badRequest(violations: string[]): Response {
  return json({ detail: { violations } }, 400);
}

function alignedSpan(
  doc: DocDetail,
  payload: CharSpan | undefined,
  what: string,
  violations: string[],
): CharSpan | null {
  if (payload === undefined) return null;
  const { start, end } = payload;
  const startOk = doc.tokens.some((t) => t.start === start);
  const endOk = doc.tokens.some((t) => t.end === end);
  if (!startOk || !endOk) {
    violations.push(
      `${what}: char range (${start}, ${end}) does not align with ` +
        `token boundaries of document ${doc.id}`,
    );
    return null;
  }
  return { start, end };
}

function echoSpan(doc: DocDetail, span: CharSpan | null) {
  if (span === null) return null;
  return { ...span, text: doc.text.slice(span.start, span.end) };
}

function handleSubmit(
  state: MockState,
  project: ProjectInfo,
  body: SubmitBody,
): Response {
  state.submissions.push(body);
  const requestId = body.request_id;
  if (requestId && requestId in state.seenRequests) {
    return json(state.seenRequests[requestId]);
  }
  const doc = state.docs[body.doc_id];
  if (!doc) return json({ detail: `unknown document '${body.doc_id}'` }, 404);

  const draft: AnnotationDraft = body.annotation ?? ({} as AnnotationDraft);
  const violations: string[] = [];
  if (!draft.id) violations.push("annotation id is required");
  if (!["span", "relation", "class"].includes(draft.kind)) {
    violations.push(`unknown annotation kind '${draft.kind}'`);
    return badRequest(violations);
  }
  if (!draft.label) violations.push("label is required");
  else if (!project.labels.some((l) => l.name === draft.label)) {
    violations.push(`unknown label '${draft.label}'`);
  }

  const span = alignedSpan(doc, draft.span, "span", violations);
  const subj = alignedSpan(doc, draft.subj, "subj", violations);
  const obj = alignedSpan(doc, draft.obj, "obj", violations);
  const aspect = alignedSpan(doc, draft.aspect, "aspect", violations);
  if (draft.kind === "span" && span === null) {
    violations.push("span annotation requires a span");
  }
  if (draft.kind === "relation" && (subj === null || obj === null)) {
    violations.push("relation requires subj and obj (click order)");
  }

  let explanation: AnnotationEcho["explanation"] = null;
  const exp = draft.explanation;
  if (exp) {
    if (exp.variant === "trigger") {
      const spans = [];
      for (let i = 0; i < exp.trigger_spans.length; i++) {
        const got = alignedSpan(
          doc, exp.trigger_spans[i], `trigger_spans[${i}]`, violations);
        if (got) spans.push(echoSpan(doc, got)!);
      }
      if (spans.length === 0) {
        violations.push("trigger explanation needs at least one trigger span");
      } else {
        explanation = { variant: "trigger", trigger_spans: spans };
      }
    } else if (exp.variant === "natural_language") {
      if (PARSE_OK.has(exp.nl_text)) {
        explanation = { variant: "natural_language", nl_text: exp.nl_text };
      } else if (exp.nl_text in PARSE_FAIL) {
        violations.push(
          `explanation does not parse: ${PARSE_FAIL[exp.nl_text]}`);
      } else {
        throw new Error(
          `mock has no parse fixture for: ${JSON.stringify(exp.nl_text)}`);
      }
    }
  }
  if (violations.length > 0) return badRequest(violations);

  if (doc.annotations.some((a) => a.id === draft.id)) {
    return json({ detail: `annotation id '${draft.id}' already exists` }, 409);
  }
  const echo: AnnotationEcho = {
    id: draft.id,
    doc_id: doc.id,
    kind: draft.kind,
    label: draft.label,
    span: echoSpan(doc, span),
    subj: echoSpan(doc, subj),
    obj: echoSpan(doc, obj),
    aspect: echoSpan(doc, aspect),
    explanation,
    source: "human",
    provenance: {},
  };
  doc.annotations.push(echo);
  const response = { annotation: echo, training: null };
  if (requestId) state.seenRequests[requestId] = response;
  return json(response);
}

export function makeMockServer(project: ProjectInfo, docs: DocDetail[], recs: Recommendation[]) {
  const state: MockState = {
    submissions: [],
    suggestCalls: [],
    docs: Object.fromEntries(
      docs.map((d) => [
        d.id,
        { ...d, annotations: [...d.annotations] } as DocDetail,
      ]),
    ),
    seenRequests: {},
  };
  const pid = project.project_id;

  const fetchFn = (async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = new URL(String(input), "http://mock");
    const path = url.pathname;
    const method = init?.method ?? "GET";

    if (method === "POST" && path === `/projects/${pid}/annotations`) {
      const body = JSON.parse(String(init?.body)) as SubmitBody;
      return handleSubmit(state, project, body);
    }
    if (method !== "GET") return json({ detail: "not found" }, 404);

    if (path === `/projects/${pid}`) return json(project);
    if (path === `/projects/${pid}/batch`) {
      const ids = Object.keys(state.docs);
      return json({
        doc_ids: ids,
        documents: ids.map((i) => ({ id: i, text: state.docs[i].text })),
      });
    }
    if (path === `/projects/${pid}/suggest`) {
      const prefix = url.searchParams.get("prefix") ?? "";
      state.suggestCalls.push({
        prefix,
        cursor: url.searchParams.get("cursor"),
      });
      return json({ suggestions: SUGGEST_FIXTURES[prefix] ?? [] });
    }
    const recMatch = path.match(
      new RegExp(`^/projects/${pid}/documents/([^/]+)/recommendations$`),
    );
    if (recMatch) {
      if (!(recMatch[1] in state.docs)) {
        return json({ detail: `unknown document '${recMatch[1]}'` }, 404);
      }
      return json({ recommendations: recs, snapshot_version: 1 });
    }
    const docMatch = path.match(
      new RegExp(`^/projects/${pid}/documents/([^/]+)$`),
    );
    if (docMatch) {
      const doc = state.docs[docMatch[1]];
      if (!doc) return json({ detail: `unknown document '${docMatch[1]}'` }, 404);
      return json(doc);
    }
    return json({ detail: `unknown project '${pid}'` }, 404);
  }) as typeof fetch;

  return { fetch: fetchFn, state };
}
