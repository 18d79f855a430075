/** Workbench state and its URL-query serialization.
 *
 * The whole analysis configuration round-trips through the query string so
 * sessions are shareable links; parseState(serializeState(s)) restores an
 * identical state.
 */

export type FilterMode = "keywords" | "topics" | "title";
export type TargetGroup = "group1" | "group2";
export type MethodTab = "classical" | "bayesian";
export type ClassicalMethod = "fixed" | "mh" | "dl" | "reml";

export interface OverlayRow {
  label: string;
  kind: "counts" | "estimate";
  e1: string;
  n1: string;
  e2: string;
  n2: string;
  y: string;
  se: string;
}

export interface WorkbenchState {
  filterMode: FilterMode;
  query: string;
  reviewIds: string[];
  maIds: string[];
  subgroupIds: string[];
  targetGroup: TargetGroup;
  scale: string;
  pooled: boolean;
  tab: MethodTab;
  method: ClassicalMethod;
  priorMu: string;
  priorTau: string;
  overlay: OverlayRow[];
}

export const SCALES = ["logor", "peto", "logrr", "rd", "md", "g"] as const;
export const DICH_SCALES = new Set(["logor", "peto", "logrr", "rd"]);

export function emptyOverlayRow(): OverlayRow {
  return { label: "", kind: "counts", e1: "", n1: "", e2: "", n2: "", y: "", se: "" };
}

export function initialState(): WorkbenchState {
  return {
    filterMode: "keywords",
    query: "",
    reviewIds: [],
    maIds: [],
    subgroupIds: [],
    targetGroup: "group1",
    scale: "logor",
    pooled: false,
    tab: "classical",
    method: "fixed",
    priorMu: "normal(0,1)",
    priorTau: "invgamma(1,0.15)",
    overlay: [],
  };
}

function encodeOverlay(row: OverlayRow): string {
  if (row.kind === "counts") {
    return `${row.label}:${row.e1}/${row.n1},${row.e2}/${row.n2}`;
  }
  return `${row.label}:${row.y}±${row.se}`;
}

export function decodeOverlay(token: string): OverlayRow | null {
  const sep = token.lastIndexOf(":");
  if (sep <= 0 || sep === token.length - 1) return null;
  const label = token.slice(0, sep);
  const body = token.slice(sep + 1);
  const counts = body.match(/^(\d*)\/(\d*),(\d*)\/(\d*)$/);
  if (counts) {
    return { label, kind: "counts", e1: counts[1], n1: counts[2], e2: counts[3], n2: counts[4], y: "", se: "" };
  }
  const est = body.match(/^(.*?)(?:±|\+-)(.*)$/);
  if (est) {
    return { label, kind: "estimate", e1: "", n1: "", e2: "", n2: "", y: est[1], se: est[2] };
  }
  return null;
}

export function serializeState(state: WorkbenchState): string {
  const params = new URLSearchParams();
  params.set("mode", state.filterMode);
  if (state.query) params.set("q", state.query);
  for (const id of state.reviewIds) params.append("review", id);
  for (const id of state.maIds) params.append("ma", id);
  for (const id of state.subgroupIds) params.append("sg", id);
  params.set("target", state.targetGroup);
  params.set("scale", state.scale);
  if (state.pooled) params.set("pooled", "1");
  params.set("tab", state.tab);
  params.set("method", state.method);
  params.set("mu", state.priorMu);
  params.set("tau", state.priorTau);
  for (const row of state.overlay) params.append("add", encodeOverlay(row));
  return params.toString();
}

export function parseState(query: string): WorkbenchState {
  const params = new URLSearchParams(query);
  const state = initialState();
  const mode = params.get("mode");
  if (mode === "keywords" || mode === "topics" || mode === "title") state.filterMode = mode;
  state.query = params.get("q") ?? "";
  state.reviewIds = params.getAll("review");
  state.maIds = params.getAll("ma");
  state.subgroupIds = params.getAll("sg");
  const target = params.get("target");
  if (target === "group1" || target === "group2") state.targetGroup = target;
  const scale = params.get("scale");
  if (scale && (SCALES as readonly string[]).includes(scale)) state.scale = scale;
  state.pooled = params.get("pooled") === "1";
  const tab = params.get("tab");
  if (tab === "classical" || tab === "bayesian") state.tab = tab;
  const method = params.get("method");
  if (method === "fixed" || method === "mh" || method === "dl" || method === "reml") state.method = method;
  state.priorMu = params.get("mu") ?? state.priorMu;
  state.priorTau = params.get("tau") ?? state.priorTau;
  state.overlay = params
    .getAll("add")
    .map(decodeOverlay)
    .filter((row): row is OverlayRow => row !== null);
  return state;
}

/** Build the POST /api/analyze body for the current state.
 *
 * maSubgroups maps each meta-analysis id to its subgroup ids so checked
 * subgroups can be attributed to their owner.
 */
export function buildRequest(state: WorkbenchState, maSubgroups: Map<string, string[]>): unknown {
  const items = state.maIds.map((maId) => {
    const subgroups = maSubgroups.get(maId) ?? [];
    const chosen = state.subgroupIds.filter((sg) => subgroups.includes(sg));
    return {
      meta_analysis_id: maId,
      subgroup_ids: chosen.length > 0 ? chosen : null,
    };
  });
  const overlay = state.overlay.map((row) => {
    if (row.kind === "counts") {
      return {
        label: row.label,
        dich: { e1: Number(row.e1), n1: Number(row.n1), e2: Number(row.e2), n2: Number(row.n2) },
      };
    }
    return { label: row.label, est: { y: Number(row.y), se: Number(row.se), scale: state.scale } };
  });
  const selection = {
    items,
    target_group: state.targetGroup,
    pooled: state.pooled,
    scale: state.scale,
    overlay,
  };
  if (state.tab === "classical") {
    return { selection, classical: { method: state.method } };
  }
  return {
    selection,
    bayesian: { priors: { effect: state.priorMu, heterogeneity: state.priorTau } },
  };
}

/** Query string for GET /api/export.csv on the current selection. */
export function exportUrl(state: WorkbenchState): string {
  const params = new URLSearchParams();
  for (const id of state.maIds) params.append("ma", id);
  for (const id of state.subgroupIds) params.append("subgroup", id);
  params.set("target", state.targetGroup);
  params.set("scale", state.scale);
  if (state.pooled) params.set("pooled", "true");
  for (const row of state.overlay) params.append("add", encodeOverlay(row));
  return `/api/export.csv?${params.toString()}`;
}
