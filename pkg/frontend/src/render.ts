/** Pure HTML builders for analysis results.
 *
 * The UI computes no statistics: every numeric cell is stamped with
 * data-value holding the raw API response field, and the visible text is
 * only a formatted view of that same value.
 */

import { AnalysisResponse, BayesianBlock, ClassicalBlock, StudySetBlock } from "./types.js";

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;").replace(/"/g, "&quot;");
}

export function num(value: number | null | undefined, digits = 3): string {
  if (value === null || value === undefined) return "<td>-</td>";
  const shown = Number(value).toFixed(digits);
  return `<td class="num" data-value="${String(value)}">${shown}</td>`;
}

function pCell(p: number): string {
  const shown = p < 0.001 ? "&lt; 0.001" : p.toFixed(3);
  return `<td class="num" data-value="${String(p)}">${shown}</td>`;
}

export function renderEstimatesTable(block: StudySetBlock): string {
  const rows = block.estimates
    .map(
      (e) => `
    <tr class="estimate-row${e.is_new ? " new-study" : ""}" data-label="${esc(e.label)}">
      <td>${esc(e.label)}${e.is_new ? ' <span class="badge">new</span>' : ""}</td>
      ${num(e.y)}${num(e.ci_low)}${num(e.ci_high)}
      ${e.weight_pct === null ? "<td>-</td>" : num(e.weight_pct, 1)}
    </tr>`
    )
    .join("");
  const exclusions = block.exclusions
    .map((x) => `<p class="exclusion">excluded: ${esc(x.label)} (${esc(x.reason)})</p>`)
    .join("");
  return `
  <table class="estimates">
    <caption>${esc(block.name)} (${esc(block.group1_label)} vs ${esc(block.group2_label)}, k = ${block.k})</caption>
    <thead><tr><th>study</th><th>estimate</th><th>95% low</th><th>95% high</th><th>weight %</th></tr></thead>
    <tbody>${rows}</tbody>
  </table>${exclusions}`;
}

export function renderClassicalTables(cb: ClassicalBlock): string {
  const het = cb.heterogeneity;
  const pooled = cb.pooled;
  const t = cb.transformed;
  const egger = cb.egger
    ? `
  <table class="egger">
    <caption>Funnel asymmetry (Egger)</caption>
    <thead><tr><th>intercept</th><th>se</th><th>t</th><th>p</th><th>df</th></tr></thead>
    <tbody><tr>${num(cb.egger.intercept)}${num(cb.egger.se)}${num(cb.egger.t)}${pCell(cb.egger.p)}<td>${cb.egger.df}</td></tr></tbody>
  </table>`
    : "";
  return `
  <table class="heterogeneity">
    <caption>Fixed and random effects</caption>
    <thead><tr><th>Q</th><th>df</th><th>p</th><th>tau&sup2;</th><th>I&sup2; %</th><th>H&sup2;</th></tr></thead>
    <tbody><tr>${num(het.q)}<td>${het.df}</td>${pCell(het.p_q)}${num(het.tau2)}${num(het.i2, 1)}${num(het.h2)}</tr></tbody>
  </table>
  <table class="coefficients">
    <caption>Coefficients (${esc(cb.method)})</caption>
    <thead><tr><th>estimate</th><th>se</th><th>95% low</th><th>95% high</th><th>z</th><th>p</th></tr></thead>
    <tbody><tr>${num(pooled.y)}${num(pooled.se)}${num(pooled.ci_low)}${num(pooled.ci_high)}${num(pooled.z)}${pCell(pooled.p)}</tr></tbody>
  </table>
  ${
    t.transformed
      ? `<table class="transformed">
    <caption>Transformed coefficients (${esc(t.label)})</caption>
    <thead><tr><th>estimate</th><th>95% low</th><th>95% high</th></tr></thead>
    <tbody><tr>${num(t.estimate)}${num(t.ci_low)}${num(t.ci_high)}</tr></tbody>
  </table>`
      : ""
  }
  ${egger}`;
}

export function renderBayesianTables(bb: BayesianBlock): string {
  const bf = bb.bf;
  const muRows = (
    [
      ["Fixed effects (mu)", bb.mu.fixed_alt],
      ["Random effects (mu)", bb.mu.random_alt],
      ["Averaged (mu)", bb.mu.averaged],
      ["Heterogeneity (tau)", bb.tau],
    ] as const
  )
    .map(
      ([label, s]) =>
        `<tr><td>${label}</td>${num(s.mean)}${num(s.median)}${num(s.ci_low)}${num(s.ci_high)}</tr>`
    )
    .join("");
  const trAvg = bb.mu_transformed["averaged"];
  const transformed = trAvg.transformed
    ? `
  <table class="bayes-transformed">
    <caption>Transformed posterior (${esc(trAvg.label)}, averaged)</caption>
    <thead><tr><th>mean</th><th>median</th><th>95% low</th><th>95% high</th></tr></thead>
    <tbody><tr>${num(trAvg.mean)}${num(trAvg.median)}${num(trAvg.ci_low)}${num(trAvg.ci_high)}</tr></tbody>
  </table>`
    : "";
  return `
  <p class="priors-line">Priors: mu ~ ${esc(bb.priors.effect_label)}; tau ~ ${esc(bb.priors.heterogeneity_label)}</p>
  <table class="bayes-factors">
    <caption>Model comparison</caption>
    <thead><tr><th>BF&#8321;&#8320; fixed</th><th>BF&#8321;&#8320; random</th><th>BF rf</th><th>BF inclusion</th></tr></thead>
    <tbody><tr>${num(bf.bf10_fixed)}${num(bf.bf10_random)}${num(bf.bf_rf)}${num(bf.bf_inclusion)}</tr></tbody>
  </table>
  <table class="posterior-estimates">
    <caption>Posterior estimates per model</caption>
    <thead><tr><th>parameter</th><th>mean</th><th>median</th><th>95% low</th><th>95% high</th></tr></thead>
    <tbody>${muRows}</tbody>
  </table>
  ${transformed}`;
}

export function renderStudySet(block: StudySetBlock, tab: "classical" | "bayesian"): string {
  const body =
    tab === "classical" && block.classical
      ? renderClassicalTables(block.classical)
      : tab === "bayesian" && block.bayesian
        ? renderBayesianTables(block.bayesian)
        : "";
  return `<section class="study-set">${renderEstimatesTable(block)}${body}</section>`;
}

export function renderAnalysis(response: AnalysisResponse, tab: "classical" | "bayesian"): string {
  return response.study_sets.map((block) => renderStudySet(block, tab)).join("\n");
}
