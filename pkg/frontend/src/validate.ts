/** Client-side validation with parity to the API's 422 responses.
 *
 * Anything these checks reject, the server would reject; forms refuse to
 * submit instead of surfacing a round-trip error.
 */

import { DICH_SCALES, OverlayRow, WorkbenchState } from "./state.js";
import { MetaAnalysisRow } from "./types.js";

export interface FieldError {
  path: string;
  message: string;
}

const PRIOR_ARITY: Record<string, number> = {
  normal: 2,
  t: 3,
  cauchy: 2,
  invgamma: 2,
  halfnormal: 1,
  halfcauchy: 1,
};

const EFFECT_FAMILIES = new Set(["normal", "t", "cauchy"]);
const TAU_FAMILIES = new Set(["invgamma", "halfnormal", "halfcauchy"]);

export function parsePriorToken(text: string): { family: string; args: number[] } | null {
  const m = text.trim().match(/^([a-zA-Z]+)\(([^)]*)\)$/);
  if (!m) return null;
  const family = m[1].toLowerCase();
  if (!(family in PRIOR_ARITY)) return null;
  const parts = m[2].split(",").map((p) => Number(p.trim()));
  if (parts.length !== PRIOR_ARITY[family] || parts.some((v) => !Number.isFinite(v))) return null;
  // every scale-like parameter (all but a location) must be positive
  const scaleArgs =
    family === "normal" || family === "cauchy" || family === "t" ? parts.slice(1) : parts;
  if (scaleArgs.some((v) => v <= 0)) return null;
  return { family, args: parts };
}

function isNonNegInt(text: string): boolean {
  return /^\d+$/.test(text.trim());
}

export function validateOverlayRow(row: OverlayRow, index: number): FieldError[] {
  const errors: FieldError[] = [];
  const at = (field: string) => `overlay[${index}].${field}`;
  if (!row.label.trim()) errors.push({ path: at("label"), message: "study label is required" });
  if (row.kind === "counts") {
    for (const field of ["e1", "n1", "e2", "n2"] as const) {
      if (!isNonNegInt(row[field])) {
        errors.push({ path: at(field), message: "whole number required" });
      }
    }
    if (errors.length === 0) {
      const [e1, n1, e2, n2] = [row.e1, row.n1, row.e2, row.n2].map(Number);
      if (n1 < 1) errors.push({ path: at("n1"), message: "total must be at least 1" });
      if (n2 < 1) errors.push({ path: at("n2"), message: "total must be at least 1" });
      if (e1 > n1) errors.push({ path: at("e1"), message: "events cannot exceed the total" });
      if (e2 > n2) errors.push({ path: at("e2"), message: "events cannot exceed the total" });
    }
  } else {
    const y = Number(row.y);
    const se = Number(row.se);
    if (row.y.trim() === "" || !Number.isFinite(y)) {
      errors.push({ path: at("y"), message: "estimate must be a finite number" });
    }
    if (row.se.trim() === "" || !Number.isFinite(se) || se <= 0) {
      errors.push({ path: at("se"), message: "standard error must be positive" });
    }
  }
  return errors;
}

export function validateState(state: WorkbenchState, mas: MetaAnalysisRow[]): FieldError[] {
  const errors: FieldError[] = [];
  const byId = new Map(mas.map((ma) => [ma.id, ma]));
  if (state.maIds.length === 0) {
    errors.push({ path: "selection", message: "select at least one meta-analysis" });
  }
  const kinds = new Set<string>();
  for (const maId of state.maIds) {
    const ma = byId.get(maId);
    if (!ma) continue; // still loading; recompute is deferred until known
    kinds.add(ma.outcome_kind);
    const own = ma.subgroups.map((sg) => sg.id);
    if (!state.subgroupIds.some((sg) => own.includes(sg))) {
      errors.push({ path: `ma.${maId}`, message: `select at least one subgroup of '${ma.name}'` });
    }
  }
  const wantDich = DICH_SCALES.has(state.scale);
  for (const kind of kinds) {
    if (kind === "dich" && !wantDich) {
      errors.push({ path: "scale", message: `scale '${state.scale}' does not apply to dichotomous outcomes` });
    }
    if (kind === "cont" && wantDich) {
      errors.push({ path: "scale", message: `scale '${state.scale}' does not apply to continuous outcomes` });
    }
  }
  if (state.pooled && kinds.size > 1) {
    errors.push({ path: "pooled", message: "cannot pool meta-analyses with mixed outcome kinds" });
  }
  state.overlay.forEach((row, i) => errors.push(...validateOverlayRow(row, i)));
  if (state.tab === "classical" && state.method === "mh") {
    if (state.overlay.some((row) => row.kind === "estimate")) {
      errors.push({ path: "method", message: "Mantel-Haenszel needs raw counts for every study" });
    }
    if (!["logor", "logrr", "rd"].includes(state.scale)) {
      errors.push({ path: "method", message: "Mantel-Haenszel applies to logOR, logRR, or RD" });
    }
  }
  if (state.tab === "bayesian") {
    const mu = parsePriorToken(state.priorMu);
    if (!mu || !EFFECT_FAMILIES.has(mu.family)) {
      errors.push({ path: "priorMu", message: "effect prior must be normal(m,sd), t(loc,scale,df), or cauchy(loc,scale)" });
    }
    const tau = parsePriorToken(state.priorTau);
    if (!tau || !TAU_FAMILIES.has(tau.family)) {
      errors.push({
        path: "priorTau",
        message: "heterogeneity prior must be invgamma(shape,scale), halfnormal(sd), or halfcauchy(scale)",
      });
    }
  }
  return errors;
}
