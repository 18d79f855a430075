"""Command-line access to the workbench: ingest, search, show, analyze,
bayes, serve.

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 numerical
failure.  `--json` emits exactly the structure the HTTP API returns for the
same request.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from pydantic import ValidationError

from . import plots, service
from .dataset import (
    DatabaseSnapshot,
    DichotomousCounts,
    ContinuousSummaries,
    EffectScale,
    PrecomputedEstimate,
    Review,
    Selection,
    SelectionItem,
    export_csv,
    load_database,
    parse_rm5_subset,
    parse_study_token,
    resolve_selection,
    save_database,
    selection_items_for,
    serialize_database,
    study_to_obj,
)
from .errors import DataError, NumericalError, WorkbenchError
from .search import build_index, filter_reviews, list_meta_analyses


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _fmt(v: float) -> str:
    return f"{v:.3f}"


def _fmt_p(p: float) -> str:
    return "< 0.001" if p < 0.001 else f"= {p:.3f}"


def _db_path(args) -> str:
    path = args.db or os.environ.get("WORKBENCH_DB")
    if not path:
        raise DataError("no database given: pass --db PATH or set WORKBENCH_DB")
    return path


def _add_db_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument("--db", help="corpus JSONL file (default: $WORKBENCH_DB)")


def build_parser() -> _Parser:
    p = _Parser(prog="trialbench", description="Clinical-trial meta-analysis workbench")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    ing = sub.add_parser("ingest", help="convert rm5-subset XML files into a corpus JSONL")
    ing.add_argument("xml", nargs="+", help="rm5-subset XML file(s)")
    ing.add_argument("-o", "--output", required=True, help="output JSONL path")
    ing.set_defaults(func=cmd_ingest)

    se = sub.add_parser("search", help="filter reviews by keywords, topics, or title text")
    _add_db_arg(se)
    mode = se.add_mutually_exclusive_group(required=True)
    mode.add_argument("--keywords", nargs="+", help="match any of these keyword labels")
    mode.add_argument("--topics", nargs="+", help="match any of these topic labels")
    mode.add_argument("--title", help="case-insensitive title substring")
    se.add_argument("--json", action="store_true")
    se.set_defaults(func=cmd_search)

    sh = sub.add_parser("show", help="list a review's meta-analyses or one meta-analysis in detail")
    _add_db_arg(sh)
    which = sh.add_mutually_exclusive_group(required=True)
    which.add_argument("--review", help="review id to list")
    which.add_argument("--ma", help="meta-analysis id to show in detail")
    sh.add_argument("--json", action="store_true")
    sh.set_defaults(func=cmd_show)

    def selection_args(sp):
        _add_db_arg(sp)
        sp.add_argument("--ma", action="append", required=True, help="meta-analysis id (repeatable)")
        sp.add_argument("--subgroup", action="append", default=None, help="subgroup id to include (repeatable)")
        sp.add_argument("--target", choices=["group1", "group2"], default="group1", help="which group is the treatment/first group")
        sp.add_argument("--scale", default="logor", help="effect scale: logor|peto|logrr|rd|md|g")
        sp.add_argument("--pooled", action="store_true", help="pool all selected meta-analyses into one study set")
        sp.add_argument(
            "--add",
            action="append",
            default=[],
            metavar="STUDY",
            help="add a study: 'LABEL:e1/n1,e2/n2' (counts) or 'LABEL:y±se' (estimate on the analysis scale)",
        )
        sp.add_argument("--csv", metavar="FILE", help="export the selected studies as CSV")
        sp.add_argument("--json", action="store_true", help="emit the service JSON instead of tables")

    an = sub.add_parser("analyze", help="classical meta-analysis of a selection")
    selection_args(an)
    an.add_argument("--method", choices=["fixed", "mh", "dl", "reml"], default="fixed")
    an.add_argument("--forest", metavar="FILE", help="write a forest plot SVG")
    an.add_argument("--funnel", metavar="FILE", help="write a funnel plot SVG")
    an.set_defaults(func=cmd_analyze)

    ba = sub.add_parser("bayes", help="Bayesian model-averaged meta-analysis of a selection")
    selection_args(ba)
    ba.add_argument("--prior-mu", default=None, help="effect prior, e.g. 't(0,0.58,5)' or 'normal(0,1)'")
    ba.add_argument("--prior-tau", default=None, help="heterogeneity prior, e.g. 'invgamma(1.74,0.27)'")
    ba.add_argument("--model-probs", nargs=4, type=float, default=None, metavar="P",
                    help="prior probabilities for fixed-null fixed-alt random-null random-alt")
    ba.add_argument("--density", metavar="FILE", help="write the prior/posterior density SVG")
    ba.set_defaults(func=cmd_bayes)

    sv = sub.add_parser("serve", help="run the HTTP API server")
    _add_db_arg(sv)
    sv.add_argument("--port", type=int, default=8080)
    sv.add_argument("--static", help="directory with the web UI bundle to serve at /")
    sv.set_defaults(func=cmd_serve)

    return p


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_ingest(args) -> int:
    reviews: list[Review] = []
    for path in args.xml:
        text = Path(path).read_text(encoding="utf-8")
        try:
            reviews.append(parse_rm5_subset(text))
        except DataError as e:
            raise DataError(f"{path}: {e}") from None
    snapshot = DatabaseSnapshot(tuple(reviews))
    Path(args.output).write_text(serialize_database(snapshot), encoding="utf-8")
    r, m, s = snapshot.counts
    print(f"wrote {args.output}: {r} review(s), {m} meta-analyses, {s} studies")
    return 0


def cmd_search(args) -> int:
    snapshot = load_database(_db_path(args))
    index = build_index(snapshot)
    if args.keywords is not None:
        ids = filter_reviews(index, "keywords", args.keywords)
    elif args.topics is not None:
        ids = filter_reviews(index, "topics", args.topics)
    else:
        ids = filter_reviews(index, "title", args.title)
    rows = [{"id": r.id, "title": r.title, "year": r.year} for r in (snapshot.review(i) for i in ids)]
    if args.json:
        print(json.dumps(rows, indent=2))
    else:
        for r in rows:
            print(f"{r['id']}\t{r['year']}\t{r['title']}")
        print(f"({len(rows)} review(s))")
    return 0


def cmd_show(args) -> int:
    snapshot = load_database(_db_path(args))
    if args.review:
        rows = list_meta_analyses(snapshot, [args.review])
        if args.json:
            print(json.dumps([r.__dict__ for r in rows], indent=2, default=list))
            return 0
        for r in rows:
            subs = "; ".join(f"{name} ({k})" for _, name, k in r.subgroups)
            print(f"{r.meta_analysis_id}\t{r.name} [{r.outcome_kind}] — {r.group1_label} vs {r.group2_label}")
            print(f"  subgroups: {subs}")
        return 0
    ma = snapshot.meta_analysis(args.ma)
    if args.json:
        from .dataset import _review_to_obj  # canonical object form

        review = snapshot.review(ma.review_id)
        obj = next(m for m in _review_to_obj(review)["meta_analyses"] if m["id"] == ma.id)
        print(json.dumps(obj, indent=2))
        return 0
    print(f"{ma.id}: {ma.name} [{ma.outcome_kind}]")
    print(f"groups: {ma.group1_label} vs {ma.group2_label}")
    for sg in ma.subgroups:
        print(f"  {sg.id}: {sg.name}")
        for st in sg.studies:
            d = st.data
            if isinstance(d, DichotomousCounts):
                print(f"    {st.label}: {d.events1}/{d.total1} vs {d.events2}/{d.total2}")
            elif isinstance(d, ContinuousSummaries):
                print(f"    {st.label}: {d.mean1}±{d.sd1} (n={d.n1}) vs {d.mean2}±{d.sd2} (n={d.n2})")
            else:
                print(f"    {st.label}: y={d.y} se={d.se} [{d.scale.value}]")
    return 0


def _selection_payload(args, snapshot: DatabaseSnapshot) -> dict:
    scale = EffectScale.from_token(args.scale)
    items = [
        {"meta_analysis_id": it.meta_analysis_id,
         "subgroup_ids": list(it.subgroup_ids) if it.subgroup_ids is not None else None}
        for it in selection_items_for(snapshot, args.ma, args.subgroup)
    ]
    overlay = [study_to_obj(parse_study_token(t, scale)) for t in args.add]
    return {
        "items": items,
        "target_group": args.target,
        "pooled": bool(args.pooled),
        "scale": scale.value,
        "overlay": overlay,
    }


def _maybe_export(args, snapshot: DatabaseSnapshot, payload: dict) -> None:
    if not args.csv:
        return
    req = service.SelectionPayload.model_validate(payload)
    selection = service.selection_from_payload(req)
    Path(args.csv).write_text(export_csv(resolve_selection(snapshot, selection)), encoding="utf-8")
    print(f"wrote {args.csv}")


def _print_estimate_table(block: dict) -> None:
    width = max((len(r["label"]) for r in block["estimates"]), default=10) + 2
    print(f"  {'study':<{width}}{'y':>9}  {'95% CI':<20}{'weight':>8}")
    for r in block["estimates"]:
        ci = f"[{_fmt(r['ci_low'])}, {_fmt(r['ci_high'])}]"
        w = f"{r['weight_pct']:.1f}%" if r.get("weight_pct") is not None else "-"
        marker = " *new*" if r["is_new"] else ""
        print(f"  {r['label']:<{width}}{_fmt(r['y']):>9}  {ci:<20}{w:>8}{marker}")
    for x in block["exclusions"]:
        print(f"  excluded: {x['label']} ({x['reason']})")


def _print_classical(block: dict) -> None:
    print(f"\n{block['name']}  (k = {block['k']}, {block['group1_label']} vs {block['group2_label']})")
    _print_estimate_table(block)
    cb = block["classical"]
    het = cb["heterogeneity"]
    print(
        f"  Heterogeneity: Q = {_fmt(het['q'])} (df = {het['df']}), p {_fmt_p(het['p_q'])}, "
        f"tau^2 = {_fmt(het['tau2'])}, I^2 = {het['i2']:.1f}%, H^2 = {_fmt(het['h2'])}"
    )
    p = cb["pooled"]
    print(
        f"  Pooled ({p['method']}): {_fmt(p['y'])} [{_fmt(p['ci_low'])}, {_fmt(p['ci_high'])}], "
        f"z = {_fmt(p['z'])}, p {_fmt_p(p['p'])}"
    )
    t = cb["transformed"]
    if t["transformed"]:
        print(f"  Transformed ({t['label']}): {_fmt(t['estimate'])} [{_fmt(t['ci_low'])}, {_fmt(t['ci_high'])}]")
    if cb["egger"]:
        eg = cb["egger"]
        print(f"  Egger intercept = {_fmt(eg['intercept'])} (se {_fmt(eg['se'])}), t = {_fmt(eg['t'])}, p {_fmt_p(eg['p'])}")


def cmd_analyze(args) -> int:
    snapshot = load_database(_db_path(args))
    payload = _selection_payload(args, snapshot)
    request = service.AnalyzeRequest.model_validate(
        {"selection": payload, "classical": {"method": args.method}}
    )
    analysis = service.run_analysis(snapshot, request)
    _maybe_export(args, snapshot, payload)
    if args.forest:
        Path(args.forest).write_text(plots.render_forest(service.forest_spec_from_analysis(analysis)), encoding="utf-8")
        print(f"wrote {args.forest}")
    if args.funnel:
        Path(args.funnel).write_text(service.render_funnel_from_analysis(analysis), encoding="utf-8")
        print(f"wrote {args.funnel}")
    if args.json:
        print(json.dumps(analysis, indent=2))
        return 0
    for block in analysis["study_sets"]:
        _print_classical(block)
    return 0


def _print_bayes(block: dict) -> None:
    print(f"\n{block['name']}  (k = {block['k']}, {block['group1_label']} vs {block['group2_label']})")
    _print_estimate_table(block)
    bb = block["bayesian"]
    print(f"  Priors: mu ~ {bb['priors']['effect_label']}, tau ~ {bb['priors']['heterogeneity_label']}")
    print(f"  {'model':<14}{'log marginal':>14}{'post prob':>11}")
    for name in ("fixed_null", "fixed_alt", "random_null", "random_alt"):
        print(f"  {name:<14}{bb['log_marginals'][name]:>14.4f}{bb['posterior_model_probs'][name]:>11.3f}")
    bf = bb["bf"]
    print(
        f"  BF10 fixed = {bf['bf10_fixed']:.2f}, BF10 random = {bf['bf10_random']:.2f}, "
        f"BF_rf (random vs fixed) = {bf['bf_rf']:.3f}, BF inclusion = {bf['bf_inclusion']:.2f}"
    )
    print(f"  {'posterior':<14}{'mean':>8}{'median':>9}  95% CI")
    for key, label in (("fixed_alt", "mu | fixed"), ("random_alt", "mu | random"), ("averaged", "mu averaged")):
        s = bb["mu"][key]
        print(f"  {label:<14}{_fmt(s['mean']):>8}{_fmt(s['median']):>9}  [{_fmt(s['ci_low'])}, {_fmt(s['ci_high'])}]")
    s = bb["tau"]
    print(f"  {'tau | random':<14}{_fmt(s['mean']):>8}{_fmt(s['median']):>9}  [{_fmt(s['ci_low'])}, {_fmt(s['ci_high'])}]")
    tr = bb["mu_transformed"]["averaged"]
    if tr["transformed"]:
        print(
            f"  Transformed averaged ({tr['label']}): median {_fmt(tr['median'])} "
            f"[{_fmt(tr['ci_low'])}, {_fmt(tr['ci_high'])}], mean {_fmt(tr['mean'])}"
        )


def cmd_bayes(args) -> int:
    snapshot = load_database(_db_path(args))
    payload = _selection_payload(args, snapshot)
    bayes_block: dict = {}
    priors: dict = {}
    if args.prior_mu:
        priors["effect"] = args.prior_mu
    if args.prior_tau:
        priors["heterogeneity"] = args.prior_tau
    if priors:
        bayes_block["priors"] = priors
    if args.model_probs:
        bayes_block["prior_model_probs"] = args.model_probs
    request = service.AnalyzeRequest.model_validate({"selection": payload, "bayesian": bayes_block})
    analysis = service.run_analysis(snapshot, request)
    _maybe_export(args, snapshot, payload)
    if args.density:
        Path(args.density).write_text(
            plots.render_density(service.density_spec_from_analysis(analysis)), encoding="utf-8"
        )
        print(f"wrote {args.density}")
    if args.json:
        print(json.dumps(analysis, indent=2))
        return 0
    for block in analysis["study_sets"]:
        _print_bayes(block)
    return 0


def cmd_serve(args) -> int:
    service.serve(_db_path(args), port=args.port, static_dir=args.static)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except ValidationError as e:
        first = e.errors()[0] if e.errors() else {}
        print(f"trialbench: validation error: {first.get('msg', e)}", file=sys.stderr)
        return 2
    except NumericalError as e:
        print(f"trialbench: numerical failure: {e}", file=sys.stderr)
        return 3
    except WorkbenchError as e:
        print(f"trialbench: error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"trialbench: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
