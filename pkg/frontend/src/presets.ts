/** Prior presets offered in the Bayesian tab.
 *
 * Presets carry their provenance in the label; the free-form inputs accept
 * any prior the grammar allows.
 */

export interface PriorPreset {
  id: string;
  label: string;
  mu: string;
  tau: string;
}

export const PRIOR_PRESETS: PriorPreset[] = [
  {
    id: "default",
    label: "Tool default (wide)",
    mu: "normal(0,1)",
    tau: "invgamma(1,0.15)",
  },
  {
    id: "epilepsy-logrr",
    label: "Epilepsy logRR (empirical, Cochrane-derived)",
    mu: "t(0,0.58,5)",
    tau: "invgamma(1.74,0.27)",
  },
  {
    id: "skeptical",
    label: "Skeptical (tight around no effect)",
    mu: "normal(0,0.25)",
    tau: "halfnormal(0.2)",
  },
];
