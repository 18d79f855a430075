/** Wire types mirroring the workbench JSON API. */

export interface ReviewRow {
  id: string;
  title: string;
  year: number;
}

export interface SubgroupRow {
  id: string;
  name: string;
  n_studies: number;
}

export interface MetaAnalysisRow {
  review_id: string;
  review_title: string;
  review_year: number;
  id: string;
  name: string;
  outcome_kind: "dich" | "cont";
  group1_label: string;
  group2_label: string;
  subgroups: SubgroupRow[];
}

export interface EstimateRow {
  label: string;
  y: number;
  se: number;
  ci_low: number;
  ci_high: number;
  weight_pct: number | null;
  is_new: boolean;
}

export interface HeterogeneityBlock {
  q: number;
  df: number;
  p_q: number;
  tau2: number;
  i2: number;
  h2: number;
}

export interface PooledBlock {
  method: string;
  y: number;
  se: number;
  ci_low: number;
  ci_high: number;
  z: number;
  p: number;
  k: number;
}

export interface TransformedBlock {
  estimate: number;
  ci_low: number;
  ci_high: number;
  transformed: boolean;
  label: string;
}

export interface ClassicalBlock {
  method: string;
  heterogeneity: HeterogeneityBlock;
  tau2_used: number;
  pooled: PooledBlock;
  transformed: TransformedBlock;
  egger: { intercept: number; se: number; t: number; p: number; df: number } | null;
}

export interface SummaryBlock {
  mean: number;
  median: number;
  ci_low: number;
  ci_high: number;
}

export interface TransformedPosteriorBlock extends Omit<SummaryBlock, "mean"> {
  mean: number;
  exp_of_mean: number;
  transformed: boolean;
  label: string;
}

export interface BayesianBlock {
  priors: {
    effect: Record<string, unknown>;
    heterogeneity: Record<string, unknown>;
    effect_label: string;
    heterogeneity_label: string;
  };
  prior_model_probs: number[];
  log_marginals: Record<string, number>;
  bf: { bf10_fixed: number; bf10_random: number; bf_rf: number; bf_inclusion: number };
  posterior_model_probs: Record<string, number>;
  mu: {
    fixed_alt: SummaryBlock;
    random_alt: SummaryBlock;
    averaged: SummaryBlock;
    averaged_all: SummaryBlock;
  };
  tau: SummaryBlock;
  mu_transformed: Record<string, TransformedPosteriorBlock>;
  densities: Record<string, { grid: number[]; density: number[] }>;
}

export interface StudySetBlock {
  name: string;
  outcome_kind: "dich" | "cont";
  group1_label: string;
  group2_label: string;
  k: number;
  exclusions: { label: string; reason: string }[];
  estimates: EstimateRow[];
  classical?: ClassicalBlock;
  bayesian?: BayesianBlock;
}

export interface AnalysisResponse {
  scale: string;
  target_group: "group1" | "group2";
  pooled: boolean;
  study_sets: StudySetBlock[];
  plots: Record<string, string>;
}

export interface ApiError {
  error: { code: string; message: string; path?: string };
}
