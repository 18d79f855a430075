/** DOM wiring for the workbench single-page app.
 *
 * State flows one way: control events mutate WorkbenchState, the state is
 * mirrored into the URL query (shareable sessions), and a 300 ms debounce
 * triggers POST /api/analyze.  Only one analysis request is in flight;
 * superseded requests are aborted and stale responses (revision mismatch)
 * are dropped.  All statistics come from the server; the UI only formats.
 */

import { ApiClient, ApiHttpError } from "./api.js";
import { PRIOR_PRESETS } from "./presets.js";
import { renderAnalysis } from "./render.js";
import {
  SCALES,
  WorkbenchState,
  buildRequest,
  emptyOverlayRow,
  exportUrl,
  parseState,
  serializeState,
} from "./state.js";
import { AnalysisResponse, MetaAnalysisRow, ReviewRow } from "./types.js";
import { FieldError, validateState } from "./validate.js";

export const DEBOUNCE_MS = 300;

const SCALE_LABELS: Record<string, string> = {
  logor: "log odds ratio (logOR)",
  peto: "log Peto odds ratio",
  logrr: "log risk ratio (logRR)",
  rd: "risk difference (RD)",
  md: "mean difference (MD)",
  g: "Hedges' g",
};

export class App {
  state: WorkbenchState;
  reviews: ReviewRow[] = [];
  metaAnalyses: MetaAnalysisRow[] = [];
  lastResponse: AnalysisResponse | null = null;
  errors: FieldError[] = [];
  private revision = 0;
  private filterTimer: ReturnType<typeof setTimeout> | null = null;
  private analysisTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private root: HTMLElement,
    private api: ApiClient = new ApiClient(),
    initial?: string
  ) {
    this.state = parseState(initial ?? window.location.search);
    this.mountSkeleton();
    this.renderControls();
    void this.bootstrap();
  }

  // ---- scaffolding ------------------------------------------------------

  private mountSkeleton(): void {
    this.root.innerHTML = `
      <div class="workbench">
        <aside class="panel side">
          <h1>trialbench</h1>
          <section class="database">
            <h2>Database</h2>
            <div class="filter-row">
              <select id="filter-mode" aria-label="filter mode">
                <option value="keywords">Keywords</option>
                <option value="topics">Topics</option>
                <option value="title">Search titles</option>
              </select>
              <input id="filter-query" type="search" placeholder="e.g. albendazole" aria-label="filter query">
            </div>
            <ul id="review-list" class="review-list"></ul>
            <div id="ma-list" class="ma-list"></div>
          </section>
          <section class="options">
            <h2>Analysis options</h2>
            <div id="target-row" class="control-row"></div>
            <div class="control-row">
              <label for="scale-select">Effect size scale</label>
              <select id="scale-select"></select>
            </div>
            <label class="control-row checkbox"><input type="checkbox" id="pooled-box"> Pool selected meta-analyses</label>
            <div class="control-row" id="method-row">
              <label for="method-select">Classical method</label>
              <select id="method-select">
                <option value="fixed">Fixed effect (inverse variance)</option>
                <option value="mh">Fixed effect (Mantel-Haenszel)</option>
                <option value="dl">Random effects (DerSimonian-Laird)</option>
                <option value="reml">Random effects (REML)</option>
              </select>
            </div>
          </section>
          <section class="add-estimates">
            <h2>Add estimates</h2>
            <div id="overlay-rows"></div>
            <button id="add-overlay" type="button">Add a study</button>
          </section>
          <section class="priors" id="prior-section">
            <h2>Priors</h2>
            <div class="control-row">
              <label for="preset-select">Preset</label>
              <select id="preset-select"></select>
            </div>
            <div class="control-row">
              <label for="prior-mu">Effect (mu)</label>
              <input id="prior-mu" spellcheck="false">
            </div>
            <div class="control-row">
              <label for="prior-tau">Heterogeneity (tau)</label>
              <input id="prior-tau" spellcheck="false">
            </div>
          </section>
        </aside>
        <main class="panel results">
          <nav class="tabs">
            <button id="tab-classical" type="button" data-tab="classical">Classical</button>
            <button id="tab-bayesian" type="button" data-tab="bayesian">Bayesian</button>
            <span class="spacer"></span>
            <a id="export-csv" class="button" download="studies.csv">Download CSV</a>
            <button id="export-svg" type="button">Download SVG</button>
          </nav>
          <div id="status" class="status" role="status"></div>
          <div id="tables"></div>
          <figure id="plot" class="plot"></figure>
        </main>
      </div>`;

    this.el("filter-mode").addEventListener("change", (e) => {
      this.state.filterMode = (e.target as HTMLSelectElement).value as WorkbenchState["filterMode"];
      this.syncUrl();
      this.scheduleFilter();
    });
    this.el("filter-query").addEventListener("input", (e) => {
      this.state.query = (e.target as HTMLInputElement).value;
      this.syncUrl();
      this.scheduleFilter();
    });
    this.el("scale-select").addEventListener("change", (e) => {
      this.state.scale = (e.target as HTMLSelectElement).value;
      this.onStateChanged();
    });
    this.el("pooled-box").addEventListener("change", (e) => {
      this.state.pooled = (e.target as HTMLInputElement).checked;
      this.onStateChanged();
    });
    this.el("method-select").addEventListener("change", (e) => {
      this.state.method = (e.target as HTMLSelectElement).value as WorkbenchState["method"];
      this.onStateChanged();
    });
    this.el("add-overlay").addEventListener("click", () => {
      this.state.overlay.push(emptyOverlayRow());
      this.renderOverlayRows();
      this.onStateChanged();
    });
    this.el("preset-select").addEventListener("change", (e) => {
      const preset = PRIOR_PRESETS.find((p) => p.id === (e.target as HTMLSelectElement).value);
      if (preset) {
        this.state.priorMu = preset.mu;
        this.state.priorTau = preset.tau;
        (this.el("prior-mu") as HTMLInputElement).value = preset.mu;
        (this.el("prior-tau") as HTMLInputElement).value = preset.tau;
        this.onStateChanged();
      }
    });
    this.el("prior-mu").addEventListener("input", (e) => {
      this.state.priorMu = (e.target as HTMLInputElement).value;
      this.onStateChanged();
    });
    this.el("prior-tau").addEventListener("input", (e) => {
      this.state.priorTau = (e.target as HTMLInputElement).value;
      this.onStateChanged();
    });
    for (const id of ["tab-classical", "tab-bayesian"]) {
      this.el(id).addEventListener("click", (e) => {
        this.state.tab = (e.target as HTMLElement).dataset.tab as WorkbenchState["tab"];
        this.renderControls();
        this.onStateChanged();
      });
    }
    this.el("export-svg").addEventListener("click", () => void this.downloadSvg());
  }

  private el(id: string): HTMLElement {
    const node = this.root.querySelector(`#${id}`);
    if (!node) throw new Error(`missing element #${id}`);
    return node as HTMLElement;
  }

  // ---- bootstrap from URL state ----------------------------------------

  private async bootstrap(): Promise<void> {
    if (this.state.query) {
      await this.fetchReviews();
    }
    for (const reviewId of this.state.reviewIds) {
      await this.loadMetaAnalyses(reviewId);
    }
    this.renderControls();
    this.scheduleAnalysis();
  }

  // ---- database browser -------------------------------------------------

  private scheduleFilter(): void {
    if (this.filterTimer !== null) clearTimeout(this.filterTimer);
    this.filterTimer = setTimeout(() => void this.fetchReviews(), DEBOUNCE_MS);
  }

  private async fetchReviews(): Promise<void> {
    try {
      this.reviews = await this.api.reviews(this.state.filterMode, this.state.query);
      this.renderReviewList();
    } catch (err) {
      this.showError(err, "could not load reviews");
    }
  }

  private renderReviewList(): void {
    const list = this.el("review-list");
    list.innerHTML = "";
    for (const review of this.reviews) {
      const li = document.createElement("li");
      const checked = this.state.reviewIds.includes(review.id);
      li.innerHTML = `<label><input type="checkbox" class="review-box" value="${review.id}" ${checked ? "checked" : ""}>
        ${review.title} <span class="year">(${review.year})</span></label>`;
      list.appendChild(li);
    }
    list.querySelectorAll<HTMLInputElement>(".review-box").forEach((box) => {
      box.addEventListener("change", () => void this.onReviewToggled(box.value, box.checked));
    });
  }

  private async onReviewToggled(reviewId: string, selected: boolean): Promise<void> {
    if (selected) {
      this.state.reviewIds = [...this.state.reviewIds, reviewId];
      await this.loadMetaAnalyses(reviewId);
    } else {
      this.state.reviewIds = this.state.reviewIds.filter((id) => id !== reviewId);
      const removed = this.metaAnalyses.filter((ma) => ma.review_id === reviewId).map((ma) => ma.id);
      this.metaAnalyses = this.metaAnalyses.filter((ma) => ma.review_id !== reviewId);
      this.state.maIds = this.state.maIds.filter((id) => !removed.includes(id));
      this.renderMaList();
    }
    this.onStateChanged();
  }

  private async loadMetaAnalyses(reviewId: string): Promise<void> {
    try {
      const rows = await this.api.metaAnalyses(reviewId);
      const known = new Set(this.metaAnalyses.map((ma) => ma.id));
      this.metaAnalyses = [...this.metaAnalyses, ...rows.filter((ma) => !known.has(ma.id))];
      this.renderMaList();
    } catch (err) {
      this.showError(err, `could not load meta-analyses for ${reviewId}`);
    }
  }

  private renderMaList(): void {
    const host = this.el("ma-list");
    host.innerHTML = this.metaAnalyses.length ? "<h3>Selected reviews / meta-analyses</h3>" : "";
    for (const ma of this.metaAnalyses) {
      const checked = this.state.maIds.includes(ma.id);
      const wrap = document.createElement("div");
      wrap.className = "ma-entry";
      const subgroupBoxes = checked
        ? ma.subgroups
            .map((sg) => {
              const on = this.state.subgroupIds.includes(sg.id);
              return `<label class="subgroup"><input type="checkbox" class="subgroup-box" value="${sg.id}" ${
                on ? "checked" : ""
              }> ${sg.name} <span class="count">(${sg.n_studies})</span></label>`;
            })
            .join("")
        : "";
      wrap.innerHTML = `
        <label><input type="checkbox" class="ma-box" value="${ma.id}" ${checked ? "checked" : ""}>
          [${ma.review_title}] ${ma.name}</label>
        <div class="subgroups">${subgroupBoxes}</div>`;
      host.appendChild(wrap);
    }
    host.querySelectorAll<HTMLInputElement>(".ma-box").forEach((box) => {
      box.addEventListener("change", () => this.onMaToggled(box.value, box.checked));
    });
    host.querySelectorAll<HTMLInputElement>(".subgroup-box").forEach((box) => {
      box.addEventListener("change", () => {
        this.state.subgroupIds = box.checked
          ? [...this.state.subgroupIds, box.value]
          : this.state.subgroupIds.filter((id) => id !== box.value);
        this.onStateChanged();
      });
    });
  }

  private onMaToggled(maId: string, selected: boolean): void {
    const ma = this.metaAnalyses.find((m) => m.id === maId);
    const own = ma ? ma.subgroups.map((sg) => sg.id) : [];
    if (selected) {
      this.state.maIds = [...this.state.maIds, maId];
      // selecting a meta-analysis reveals its subgroup checkboxes, all on
      this.state.subgroupIds = [...this.state.subgroupIds, ...own.filter((id) => !this.state.subgroupIds.includes(id))];
    } else {
      this.state.maIds = this.state.maIds.filter((id) => id !== maId);
      this.state.subgroupIds = this.state.subgroupIds.filter((id) => !own.includes(id));
    }
    this.renderMaList();
    this.renderControls();
    this.onStateChanged();
  }

  // ---- option controls ---------------------------------------------------

  private renderControls(): void {
    const scaleSelect = this.el("scale-select") as HTMLSelectElement;
    scaleSelect.innerHTML = SCALES.map(
      (s) => `<option value="${s}" ${s === this.state.scale ? "selected" : ""}>${SCALE_LABELS[s]}</option>`
    ).join("");
    (this.el("pooled-box") as HTMLInputElement).checked = this.state.pooled;
    (this.el("method-select") as HTMLSelectElement).value = this.state.method;
    (this.el("filter-mode") as HTMLSelectElement).value = this.state.filterMode;
    (this.el("filter-query") as HTMLInputElement).value = this.state.query;
    (this.el("prior-mu") as HTMLInputElement).value = this.state.priorMu;
    (this.el("prior-tau") as HTMLInputElement).value = this.state.priorTau;

    const presets = this.el("preset-select") as HTMLSelectElement;
    presets.innerHTML =
      `<option value="">choose a preset...</option>` +
      PRIOR_PRESETS.map((p) => `<option value="${p.id}">${p.label}</option>`).join("");

    const first = this.metaAnalyses.find((ma) => this.state.maIds.includes(ma.id));
    const target = this.el("target-row");
    if (first) {
      target.innerHTML = `
        <span>Target (first) group</span>
        <label><input type="radio" name="target" value="group1" ${
          this.state.targetGroup === "group1" ? "checked" : ""
        }> ${first.group1_label}</label>
        <label><input type="radio" name="target" value="group2" ${
          this.state.targetGroup === "group2" ? "checked" : ""
        }> ${first.group2_label}</label>`;
      target.querySelectorAll<HTMLInputElement>("input[name=target]").forEach((radio) => {
        radio.addEventListener("change", () => {
          this.state.targetGroup = radio.value as WorkbenchState["targetGroup"];
          this.onStateChanged();
        });
      });
    } else {
      target.innerHTML = `<span class="hint">Target group appears once a meta-analysis is selected.</span>`;
    }

    this.el("method-row").style.display = this.state.tab === "classical" ? "" : "none";
    this.el("prior-section").style.display = this.state.tab === "bayesian" ? "" : "none";
    this.el("tab-classical").classList.toggle("active", this.state.tab === "classical");
    this.el("tab-bayesian").classList.toggle("active", this.state.tab === "bayesian");
    this.renderOverlayRows();
  }

  private renderOverlayRows(): void {
    const host = this.el("overlay-rows");
    host.innerHTML = "";
    this.state.overlay.forEach((row, i) => {
      const div = document.createElement("div");
      div.className = "overlay-row";
      div.dataset.index = String(i);
      const countsFields = `
        <input data-field="e1" placeholder="x1" value="${row.e1}" size="3" aria-label="events group 1">
        <span>/</span>
        <input data-field="n1" placeholder="n1" value="${row.n1}" size="3" aria-label="total group 1">
        <span>vs</span>
        <input data-field="e2" placeholder="x2" value="${row.e2}" size="3" aria-label="events group 2">
        <span>/</span>
        <input data-field="n2" placeholder="n2" value="${row.n2}" size="3" aria-label="total group 2">`;
      const estimateFields = `
        <input data-field="y" placeholder="estimate" value="${row.y}" size="6" aria-label="estimate">
        <span>&plusmn;</span>
        <input data-field="se" placeholder="se" value="${row.se}" size="6" aria-label="standard error">`;
      div.innerHTML = `
        <input data-field="label" placeholder="Study label" value="${row.label}" aria-label="study label">
        <select data-field="kind" aria-label="study data kind">
          <option value="counts" ${row.kind === "counts" ? "selected" : ""}>counts</option>
          <option value="estimate" ${row.kind === "estimate" ? "selected" : ""}>estimate &plusmn; se</option>
        </select>
        ${row.kind === "counts" ? countsFields : estimateFields}
        <button type="button" class="remove" aria-label="remove study">&times;</button>
        <span class="row-error" data-row-error="${i}"></span>`;
      host.appendChild(div);
    });
    host.querySelectorAll<HTMLElement>(".overlay-row").forEach((rowEl) => {
      const index = Number(rowEl.dataset.index);
      rowEl.querySelectorAll<HTMLInputElement>("input[data-field]").forEach((input) => {
        input.addEventListener("input", () => {
          const field = input.dataset.field as "label" | "e1" | "n1" | "e2" | "n2" | "y" | "se";
          this.state.overlay[index][field] = input.value;
          this.onStateChanged();
        });
      });
      const kind = rowEl.querySelector<HTMLSelectElement>("select[data-field=kind]");
      kind?.addEventListener("change", () => {
        this.state.overlay[index].kind = kind.value as "counts" | "estimate";
        this.renderOverlayRows();
        this.onStateChanged();
      });
      rowEl.querySelector(".remove")?.addEventListener("click", () => {
        this.state.overlay.splice(index, 1);
        this.renderOverlayRows();
        this.onStateChanged();
      });
    });
  }

  // ---- analysis loop ------------------------------------------------------

  private onStateChanged(): void {
    this.syncUrl();
    this.scheduleAnalysis();
  }

  private syncUrl(): void {
    window.history.replaceState(null, "", `?${serializeState(this.state)}`);
  }

  private scheduleAnalysis(): void {
    if (this.analysisTimer !== null) clearTimeout(this.analysisTimer);
    this.analysisTimer = setTimeout(() => void this.recompute(), DEBOUNCE_MS);
  }

  maSubgroupMap(): Map<string, string[]> {
    return new Map(this.metaAnalyses.map((ma) => [ma.id, ma.subgroups.map((sg) => sg.id)]));
  }

  async recompute(): Promise<void> {
    this.errors = validateState(this.state, this.metaAnalyses);
    this.renderStatus();
    if (this.errors.length > 0 || this.state.maIds.length === 0) {
      this.setExportsEnabled(false);
      return;
    }
    const body = buildRequest(this.state, this.maSubgroupMap());
    const revision = ++this.revision;
    try {
      const { revision: got, response } = await this.api.analyze(body, revision);
      if (got !== this.revision) return; // superseded while in flight
      this.lastResponse = response;
      this.el("tables").innerHTML = renderAnalysis(response, this.state.tab);
      this.setExportsEnabled(true);
      this.renderStatus();
      const kind = this.state.tab === "classical" ? "forest" : "density";
      const svg = await this.api.plot(kind, body);
      if (revision === this.revision) {
        this.el("plot").innerHTML = svg;
      }
    } catch (err) {
      if ((err as Error).name === "AbortError") return;
      this.showError(err, "analysis failed");
      this.setExportsEnabled(false);
    }
  }

  private setExportsEnabled(enabled: boolean): void {
    const csv = this.el("export-csv") as HTMLAnchorElement;
    const svg = this.el("export-svg") as HTMLButtonElement;
    svg.disabled = !enabled;
    if (enabled) {
      csv.removeAttribute("aria-disabled");
      csv.href = exportUrl(this.state);
    } else {
      csv.setAttribute("aria-disabled", "true");
      csv.removeAttribute("href");
    }
  }

  private async downloadSvg(): Promise<void> {
    if (!this.lastResponse) return;
    const kind = this.state.tab === "classical" ? "forest" : "density";
    try {
      const svg = await this.api.plot(kind, buildRequest(this.state, this.maSubgroupMap()));
      const blob = new Blob([svg], { type: "image/svg+xml" });
      const url = URL.createObjectURL(blob);
      const a = document.createElement("a");
      a.href = url;
      a.download = `${kind}.svg`;
      a.click();
      URL.revokeObjectURL(url);
    } catch (err) {
      this.showError(err, "could not render the plot");
    }
  }

  // ---- status / errors ----------------------------------------------------

  private renderStatus(): void {
    const status = this.el("status");
    if (this.errors.length === 0) {
      status.innerHTML = "";
      status.className = "status";
      return;
    }
    status.className = "status invalid";
    status.innerHTML = this.errors
      .map((e) => `<p class="field-error" data-path="${e.path}">${e.message}</p>`)
      .join("");
  }

  private showError(err: unknown, fallback: string): void {
    const status = this.el("status");
    if (err instanceof ApiHttpError && err.status === 422) {
      const path = err.body?.error?.path;
      status.className = "status invalid";
      status.innerHTML = `<p class="field-error" data-path="${path ?? ""}">${err.message}</p>`;
    } else {
      status.className = "status failure";
      status.innerHTML = `<p class="toast">${fallback}: ${(err as Error).message ?? err}</p>
        <button type="button" id="retry">Retry</button>`;
      this.el("retry").addEventListener("click", () => {
        status.innerHTML = "";
        this.scheduleAnalysis();
        void this.fetchReviews();
      });
    }
  }
}

export function mountApp(root: HTMLElement, api?: ApiClient, initial?: string): App {
  return new App(root, api, initial);
}

declare global {
  interface Window {
    __TRIALBENCH_TEST__?: boolean;
  }
}

if (typeof document !== "undefined" && !window.__TRIALBENCH_TEST__) {
  const root = document.getElementById("app");
  if (root) mountApp(root);
}
