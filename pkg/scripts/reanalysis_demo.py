#!/usr/bin/env python3
"""End-to-end walkthrough on the demo corpus.

Mirrors the interactive loop: filter reviews by keyword, pick the children
subgroup of the seizure-recurrence meta-analysis, flip the target group,
pool on the logRR scale, extend the study set with a newly reported trial,
then rerun the same selection through the Bayesian model-averaged pipeline
with informed priors.  Writes forest/funnel/density SVGs next to the
output prefix.
"""

import argparse
import json
from pathlib import Path

from trialbench import plots, service
from trialbench.demo import demo_snapshot
from trialbench.search import build_index, filter_reviews


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="demo-out", help="output directory for SVGs and JSON")
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    snapshot = demo_snapshot()
    index = build_index(snapshot)
    hits = filter_reviews(index, "keywords", ["albendazole"])
    print(f"keyword 'albendazole' -> {hits}")

    selection = {
        "items": [{"meta_analysis_id": "r-neuro:ma1", "subgroup_ids": ["r-neuro:ma1:children"]}],
        "target_group": "group2",
        "scale": "logrr",
        "overlay": [{"label": "Singh 2022", "dich": {"e1": 1, "n1": 19, "e2": 1, "n2": 20}}],
    }

    classical = service.run_analysis(
        snapshot,
        service.AnalyzeRequest.model_validate({"selection": selection, "classical": {"method": "fixed"}}),
    )
    block = classical["study_sets"][0]
    pooled = block["classical"]["pooled"]
    trans = block["classical"]["transformed"]
    print(f"\n{block['name']} (k = {block['k']}, {block['group1_label']} vs {block['group2_label']})")
    for row in block["estimates"]:
        flag = "  <- new" if row["is_new"] else ""
        print(f"  {row['label']:<14} {row['y']:+.3f} [{row['ci_low']:+.3f}, {row['ci_high']:+.3f}]{flag}")
    print(f"  pooled logRR = {pooled['y']:.3f} [{pooled['ci_low']:.3f}, {pooled['ci_high']:.3f}], "
          f"z = {pooled['z']:.3f}, p = {pooled['p']:.2g}")
    print(f"  RR = {trans['estimate']:.3f} [{trans['ci_low']:.3f}, {trans['ci_high']:.3f}]")

    bayes = service.run_analysis(
        snapshot,
        service.AnalyzeRequest.model_validate(
            {
                "selection": selection,
                "bayesian": {"priors": {"effect": "t(0,0.58,5)", "heterogeneity": "invgamma(1.74,0.27)"}},
            }
        ),
    )
    bb = bayes["study_sets"][0]["bayesian"]
    bf = bb["bf"]
    avg = bb["mu"]["averaged"]
    tr = bb["mu_transformed"]["averaged"]
    print(f"\nBayesian model averaging (priors: {bb['priors']['effect_label']}, {bb['priors']['heterogeneity_label']})")
    print(f"  BF10 fixed = {bf['bf10_fixed']:.2f}, BF10 random = {bf['bf10_random']:.2f}, "
          f"BF_rf = {bf['bf_rf']:.3f}, inclusion BF = {bf['bf_inclusion']:.2f}")
    print(f"  averaged logRR = {avg['mean']:.3f} [{avg['ci_low']:.3f}, {avg['ci_high']:.3f}]")
    print(f"  averaged RR median = {tr['median']:.3f} [{tr['ci_low']:.3f}, {tr['ci_high']:.3f}]")

    (out / "forest.svg").write_text(plots.render_forest(service.forest_spec_from_analysis(classical)))
    (out / "funnel.svg").write_text(service.render_funnel_from_analysis(classical))
    (out / "density.svg").write_text(plots.render_density(service.density_spec_from_analysis(bayes)))
    (out / "classical.json").write_text(json.dumps(classical, indent=2))
    (out / "bayes.json").write_text(json.dumps(bayes, indent=2))
    print(f"\nwrote forest.svg, funnel.svg, density.svg, classical.json, bayes.json to {out}/")


if __name__ == "__main__":
    main()
