import { describe, expect, it } from "vitest";

import { emptyOverlayRow, initialState } from "../src/state.js";
import { MetaAnalysisRow } from "../src/types.js";
import { parsePriorToken, validateOverlayRow, validateState } from "../src/validate.js";
import metaAnalyses from "./fixtures/meta_analyses.json";

const MAS = metaAnalyses as MetaAnalysisRow[];

function validSelection() {
  const state = initialState();
  state.maIds = ["r-neuro:ma1"];
  state.subgroupIds = ["r-neuro:ma1:children"];
  state.scale = "logrr";
  return state;
}

describe("overlay row validation (422 parity)", () => {
  it("accepts the paper's new-study row", () => {
    const row = { ...emptyOverlayRow(), label: "Singh 2022", e1: "1", n1: "19", e2: "1", n2: "20" };
    expect(validateOverlayRow(row, 0)).toEqual([]);
  });

  it("blocks events above totals", () => {
    const row = { ...emptyOverlayRow(), label: "X", e1: "25", n1: "19", e2: "1", n2: "20" };
    const errors = validateOverlayRow(row, 0);
    expect(errors.some((e) => e.path === "overlay[0].e1")).toBe(true);
  });

  it("blocks non-integer counts and empty labels", () => {
    const row = { ...emptyOverlayRow(), label: " ", e1: "1.5", n1: "19", e2: "1", n2: "20" };
    const paths = validateOverlayRow(row, 2).map((e) => e.path);
    expect(paths).toContain("overlay[2].label");
    expect(paths).toContain("overlay[2].e1");
  });

  it("blocks non-positive standard errors", () => {
    const row = { ...emptyOverlayRow(), label: "P", kind: "estimate" as const, y: "0.1", se: "0" };
    expect(validateOverlayRow(row, 0).some((e) => e.path === "overlay[0].se")).toBe(true);
    const neg = { ...row, se: "-1" };
    expect(validateOverlayRow(neg, 0).length).toBeGreaterThan(0);
  });
});

describe("state validation (422 parity)", () => {
  it("accepts the paper flow", () => {
    expect(validateState(validSelection(), MAS)).toEqual([]);
  });

  it("requires a selection", () => {
    const errors = validateState(initialState(), MAS);
    expect(errors.some((e) => e.path === "selection")).toBe(true);
  });

  it("flags a selected meta-analysis with every subgroup deselected", () => {
    const state = validSelection();
    state.subgroupIds = [];
    const errors = validateState(state, MAS);
    expect(errors.some((e) => e.path === "ma.r-neuro:ma1")).toBe(true);
  });

  it("blocks continuous scales on dichotomous outcomes", () => {
    const state = validSelection();
    state.scale = "md";
    expect(validateState(state, MAS).some((e) => e.path === "scale")).toBe(true);
  });

  it("blocks Mantel-Haenszel with precomputed overlay rows", () => {
    const state = validSelection();
    state.method = "mh";
    state.overlay = [
      { ...emptyOverlayRow(), label: "P", kind: "estimate", y: "0.1", se: "0.5" },
    ];
    expect(validateState(state, MAS).some((e) => e.path === "method")).toBe(true);
  });

  it("blocks Mantel-Haenszel on the Peto scale", () => {
    const state = validSelection();
    state.method = "mh";
    state.scale = "peto";
    expect(validateState(state, MAS).some((e) => e.path === "method")).toBe(true);
  });

  it("blocks malformed priors on the bayesian tab", () => {
    const state = validSelection();
    state.tab = "bayesian";
    state.priorMu = "beta(1,1)";
    state.priorTau = "invgamma(1.74)";
    const paths = validateState(state, MAS).map((e) => e.path);
    expect(paths).toContain("priorMu");
    expect(paths).toContain("priorTau");
  });

  it("accepts the epilepsy preset priors", () => {
    const state = validSelection();
    state.tab = "bayesian";
    state.priorMu = "t(0,0.58,5)";
    state.priorTau = "invgamma(1.74,0.27)";
    expect(validateState(state, MAS)).toEqual([]);
  });
});

describe("prior grammar", () => {
  it("parses every family with arity and positivity checks", () => {
    expect(parsePriorToken("t(0,0.58,5)")).toEqual({ family: "t", args: [0, 0.58, 5] });
    expect(parsePriorToken("normal(0, 1)")).toEqual({ family: "normal", args: [0, 1] });
    expect(parsePriorToken("halfcauchy(0.3)")).not.toBeNull();
    expect(parsePriorToken("t(0,0.58)")).toBeNull();
    expect(parsePriorToken("t(0,-1,5)")).toBeNull();
    expect(parsePriorToken("normal(0,0)")).toBeNull();
    expect(parsePriorToken("nonsense")).toBeNull();
  });
});
