/** End-to-end flow against an intercepted API.
 *
 * Mirrors the interactive loop: filter -> select meta-analysis -> children
 * subgroup only -> target group 2 -> logRR -> add the new study.  Every
 * number the UI displays must equal the corresponding field of the
 * intercepted API response (cells carry data-value with the raw field).
 */

import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { DEBOUNCE_MS, mountApp } from "../src/app.js";
import { parseState, serializeState } from "../src/state.js";
import type { AnalysisResponse } from "../src/types.js";
import analysisWithSingh from "./fixtures/analysis.json";
import analysisBase from "./fixtures/analysis_no_overlay.json";
import forestSvg from "./fixtures/forest.svg.json";
import metaAnalyses from "./fixtures/meta_analyses.json";
import reviews from "./fixtures/reviews.json";

interface Recorded {
  url: string;
  method: string;
  body: unknown;
}

declare global {
  interface Window {
    __TRIALBENCH_TEST__?: boolean;
  }
}

window.__TRIALBENCH_TEST__ = true;

let recorded: Recorded[] = [];
let deferAnalyze = false;
let pendingAnalyze: { resolve: () => void }[] = [];

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

function analyzeResponseFor(body: { selection: { overlay: unknown[]; scale: string } }): Response {
  const base = (body.selection.overlay.length > 0 ? analysisWithSingh : analysisBase) as AnalysisResponse;
  const clone = structuredClone(base);
  clone.scale = body.selection.scale;
  return jsonResponse(clone);
}

function installFetch(): void {
  recorded = [];
  pendingAnalyze = [];
  deferAnalyze = false;
  vi.stubGlobal(
    "fetch",
    vi.fn(async (input: RequestInfo | URL, init?: RequestInit): Promise<Response> => {
      const url = String(input);
      const method = init?.method ?? "GET";
      const body = init?.body ? JSON.parse(String(init.body)) : null;
      recorded.push({ url, method, body });
      if (url.startsWith("/api/reviews")) return jsonResponse(reviews);
      if (url.startsWith("/api/meta-analyses")) return jsonResponse(metaAnalyses);
      if (url.startsWith("/api/analyze")) {
        if (deferAnalyze) {
          return new Promise<Response>((resolve, reject) => {
            init?.signal?.addEventListener("abort", () =>
              reject(new DOMException("aborted", "AbortError"))
            );
            pendingAnalyze.push({ resolve: () => resolve(analyzeResponseFor(body)) });
          });
        }
        return analyzeResponseFor(body);
      }
      if (url.startsWith("/api/plots/forest")) {
        return new Response((forestSvg as { svg: string }).svg, {
          status: 200,
          headers: { "content-type": "image/svg+xml" },
        });
      }
      if (url.startsWith("/api/plots/density")) {
        return new Response('<svg xmlns="http://www.w3.org/2000/svg"></svg>', {
          status: 200,
          headers: { "content-type": "image/svg+xml" },
        });
      }
      throw new Error(`unexpected request: ${method} ${url}`);
    })
  );
}

async function settle(): Promise<void> {
  await vi.runAllTimersAsync();
}

function setInput(root: HTMLElement, selector: string, value: string): void {
  const input = root.querySelector(selector) as HTMLInputElement;
  input.value = value;
  input.dispatchEvent(new Event("input", { bubbles: true }));
}

function setSelect(root: HTMLElement, selector: string, value: string): void {
  const select = root.querySelector(selector) as HTMLSelectElement;
  select.value = value;
  select.dispatchEvent(new Event("change", { bubbles: true }));
}

function analyzeRequests(): Recorded[] {
  return recorded.filter((r) => r.url.startsWith("/api/analyze"));
}

function numericCells(root: HTMLElement, tableSelector: string): number[] {
  return Array.from(root.querySelectorAll(`${tableSelector} td.num`)).map((td) =>
    Number((td as HTMLElement).dataset.value)
  );
}

async function runPaperFlow(root: HTMLElement) {
  const app = mountApp(root, undefined, "");
  await settle();

  setInput(root, "#filter-query", "albendazole");
  await settle();
  expect(recorded.some((r) => r.url.includes("/api/reviews?mode=keywords&q=albendazole"))).toBe(true);
  expect(root.querySelectorAll("#review-list li")).toHaveLength(1);

  (root.querySelector(".review-box") as HTMLInputElement).click();
  await settle();
  const maBox = Array.from(root.querySelectorAll<HTMLInputElement>(".ma-box")).find(
    (b) => b.value === "r-neuro:ma1"
  )!;
  maBox.click();
  await settle();

  // ticking the meta-analysis reveals its two subgroup checkboxes, all on
  const subgroupBoxes = root.querySelectorAll<HTMLInputElement>(".subgroup-box");
  expect(subgroupBoxes).toHaveLength(2);
  expect(Array.from(subgroupBoxes).every((b) => b.checked)).toBe(true);

  const adults = Array.from(subgroupBoxes).find((b) => b.value === "r-neuro:ma1:adults")!;
  adults.click();
  const group2 = root.querySelector<HTMLInputElement>("input[name=target][value=group2]")!;
  group2.click();
  setSelect(root, "#scale-select", "logrr");
  await settle();
  return app;
}

describe("paper flow end to end", () => {
  beforeEach(() => {
    vi.useFakeTimers();
    installFetch();
    document.body.innerHTML = "";
    window.history.replaceState(null, "", "/");
  });

  afterEach(() => {
    vi.useRealTimers();
    vi.unstubAllGlobals();
  });

  it("criterion 9: selection, new study, accented forest, updated pooled table", async () => {
    const root = document.createElement("div");
    document.body.appendChild(root);
    await runPaperFlow(root);

    const phase1 = analyzeRequests().at(-1)!;
    expect(phase1.body).toEqual({
      selection: {
        items: [{ meta_analysis_id: "r-neuro:ma1", subgroup_ids: ["r-neuro:ma1:children"] }],
        target_group: "group2",
        pooled: false,
        scale: "logrr",
        overlay: [],
      },
      classical: { method: "fixed" },
    });
    expect(root.querySelectorAll(".estimate-row")).toHaveLength(4);
    const pooledBefore = numericCells(root, "table.coefficients")[0];
    expect(pooledBefore).toBe(analysisBase.study_sets[0].classical!.pooled.y);

    // add the new study
    (root.querySelector("#add-overlay") as HTMLButtonElement).click();
    setInput(root, '.overlay-row input[data-field="label"]', "Singh 2022");
    setInput(root, '.overlay-row input[data-field="e1"]', "1");
    setInput(root, '.overlay-row input[data-field="n1"]', "19");
    setInput(root, '.overlay-row input[data-field="e2"]', "1");
    setInput(root, '.overlay-row input[data-field="n2"]', "20");
    await settle();

    const phase2 = analyzeRequests().at(-1)!;
    expect((phase2.body as { selection: { overlay: unknown[] } }).selection.overlay).toEqual([
      { label: "Singh 2022", dich: { e1: 1, n1: 19, e2: 1, n2: 20 } },
    ]);

    // forest gains an accented 5th row
    const rows = root.querySelectorAll(".estimate-row");
    expect(rows).toHaveLength(5);
    const newRows = root.querySelectorAll(".estimate-row.new-study");
    expect(newRows).toHaveLength(1);
    expect(newRows[0].textContent).toContain("Singh 2022");

    // the pooled table updated to the new response's numbers
    const intercepted = analysisWithSingh.study_sets[0];
    const pooledAfter = numericCells(root, "table.coefficients");
    expect(pooledAfter[0]).toBe(intercepted.classical!.pooled.y);
    expect(pooledAfter[0]).not.toBe(pooledBefore);

    // every displayed number equals the intercepted API response field
    intercepted.estimates.forEach((est, i) => {
      const cells = numericCells(root, `.estimate-row:nth-of-type(${i + 1})`);
      expect(cells[0]).toBe(est.y);
      expect(cells[1]).toBe(est.ci_low);
      expect(cells[2]).toBe(est.ci_high);
      if (est.weight_pct !== null) expect(cells[3]).toBe(est.weight_pct);
    });
    const het = intercepted.classical!.heterogeneity;
    expect(numericCells(root, "table.heterogeneity")).toEqual([het.q, het.p_q, het.tau2, het.i2, het.h2]);
    const pooled = intercepted.classical!.pooled;
    expect(numericCells(root, "table.coefficients")).toEqual([
      pooled.y, pooled.se, pooled.ci_low, pooled.ci_high, pooled.z, pooled.p,
    ]);
    const tr = intercepted.classical!.transformed;
    expect(numericCells(root, "table.transformed")).toEqual([tr.estimate, tr.ci_low, tr.ci_high]);

    // the embedded forest SVG has 5 squares, exactly one accented
    const svgRects = Array.from(root.querySelectorAll("#plot rect")).filter((r) =>
      (r.getAttribute("class") ?? "").includes("study-marker")
    );
    expect(svgRects).toHaveLength(5);
    expect(svgRects.filter((r) => (r.getAttribute("class") ?? "").includes("new-study"))).toHaveLength(1);

    // exports are live and point at the same selection
    const csv = root.querySelector("#export-csv") as HTMLAnchorElement;
    expect(csv.getAttribute("aria-disabled")).toBeNull();
    expect(csv.getAttribute("href")).toContain("add=Singh+2022%3A1%2F19%2C1%2F20");
  });

  it("criterion 10: URL state round trip restores the identical analysis", async () => {
    const root = document.createElement("div");
    document.body.appendChild(root);
    await runPaperFlow(root);
    (root.querySelector("#add-overlay") as HTMLButtonElement).click();
    setInput(root, '.overlay-row input[data-field="label"]', "Singh 2022");
    setInput(root, '.overlay-row input[data-field="e1"]', "1");
    setInput(root, '.overlay-row input[data-field="n1"]', "19");
    setInput(root, '.overlay-row input[data-field="e2"]', "1");
    setInput(root, '.overlay-row input[data-field="n2"]', "20");
    await settle();
    const originalBody = analyzeRequests().at(-1)!.body;

    const query = window.location.search;
    expect(query.length).toBeGreaterThan(1);
    expect(serializeState(parseState(query))).toBe(query.slice(1));

    const restoredRoot = document.createElement("div");
    document.body.appendChild(restoredRoot);
    const before = analyzeRequests().length;
    mountApp(restoredRoot, undefined, query);
    await settle();

    const restoredRequests = analyzeRequests().slice(before);
    expect(restoredRequests.at(-1)!.body).toEqual(originalBody);
    expect(numericCells(restoredRoot, "table.coefficients")).toEqual(
      numericCells(root, "table.coefficients")
    );
  });

  it("criterion 10: client validation blocks 422-class inputs before any request", async () => {
    const root = document.createElement("div");
    document.body.appendChild(root);
    await runPaperFlow(root);
    const before = analyzeRequests().length;

    (root.querySelector("#add-overlay") as HTMLButtonElement).click();
    setInput(root, '.overlay-row input[data-field="label"]', "Bad");
    setInput(root, '.overlay-row input[data-field="e1"]', "25");
    setInput(root, '.overlay-row input[data-field="n1"]', "19");
    setInput(root, '.overlay-row input[data-field="e2"]', "1");
    setInput(root, '.overlay-row input[data-field="n2"]', "20");
    await settle();

    expect(analyzeRequests().length).toBe(before);
    const error = root.querySelector('.field-error[data-path="overlay[0].e1"]');
    expect(error?.textContent).toContain("events cannot exceed the total");
    expect((root.querySelector("#export-svg") as HTMLButtonElement).disabled).toBe(true);

    // fixing the row re-enables the pipeline
    setInput(root, '.overlay-row input[data-field="e1"]', "1");
    await settle();
    expect(analyzeRequests().length).toBe(before + 1);
    expect((root.querySelector("#export-svg") as HTMLButtonElement).disabled).toBe(false);
  });

  it("aborts superseded requests and never applies stale responses", async () => {
    const root = document.createElement("div");
    document.body.appendChild(root);
    const app = await runPaperFlow(root);

    deferAnalyze = true;
    setSelect(root, "#scale-select", "logor");
    await vi.advanceTimersByTimeAsync(DEBOUNCE_MS + 10);
    expect(pendingAnalyze).toHaveLength(1);

    setSelect(root, "#scale-select", "rd");
    await vi.advanceTimersByTimeAsync(DEBOUNCE_MS + 10);
    expect(pendingAnalyze).toHaveLength(2);

    pendingAnalyze[1].resolve();
    await settle();
    expect(app.lastResponse?.scale).toBe("rd");

    pendingAnalyze[0].resolve(); // stale; its fetch promise was already aborted
    await settle();
    expect(app.lastResponse?.scale).toBe("rd");
  });
});
