"""JSON HTTP API over the corpus and both analysis pipelines.

The server is stateless: overlay studies travel inside each request and
analysis responses are pure functions of (snapshot, request), so identical
requests produce byte-identical JSON.  `run_analysis` is also called
directly by the CLI, which guarantees CLI --json output and API responses
are structurally identical.
"""

from __future__ import annotations

from typing import Literal, Optional, Union

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel, ConfigDict, Field, model_validator
from starlette.exceptions import HTTPException as StarletteHTTPException

from . import bayes, classical, plots
from .dataset import (
    DatabaseSnapshot,
    DichotomousCounts,
    EffectScale,
    Selection,
    SelectionItem,
    StudySet,
    export_csv,
    load_database,
    parse_study_token,
    resolve_selection,
    selection_items_for,
    study_from_obj,
)
from .effectsize import EffectEstimate, compute_effects
from .errors import DataError, NumericalError
from .search import FILTER_MODES, build_index, filter_reviews, list_meta_analyses

PLOT_KINDS = ("forest", "funnel", "density")


# ---------------------------------------------------------------------------
# Request payloads
# ---------------------------------------------------------------------------


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class StudyPayload(_Strict):
    label: str
    dich: Optional[dict] = None
    cont: Optional[dict] = None
    est: Optional[dict] = None


class SelectionItemPayload(_Strict):
    meta_analysis_id: str
    subgroup_ids: Optional[list[str]] = None


class SelectionPayload(_Strict):
    items: list[SelectionItemPayload] = Field(min_length=1)
    target_group: Literal["group1", "group2"] = "group1"
    pooled: bool = False
    scale: str = "logor"
    overlay: list[StudyPayload] = Field(default_factory=list)


class ClassicalPayload(_Strict):
    method: Literal["fixed", "mh", "dl", "reml"] = "fixed"


class PriorsPayload(_Strict):
    effect: Union[str, dict, None] = None
    heterogeneity: Union[str, dict, None] = None


class BayesPayload(_Strict):
    priors: Optional[PriorsPayload] = None
    prior_model_probs: Optional[list[float]] = None


class AnalyzeRequest(_Strict):
    selection: SelectionPayload
    classical: Optional[ClassicalPayload] = None
    bayesian: Optional[BayesPayload] = None

    @model_validator(mode="after")
    def _exactly_one_method(self):
        if (self.classical is None) == (self.bayesian is None):
            raise ValueError("exactly one of 'classical' or 'bayesian' must be given")
        return self


def selection_from_payload(payload: SelectionPayload) -> Selection:
    scale = EffectScale.from_token(payload.scale)
    overlay = tuple(
        study_from_obj(s.model_dump(exclude_none=True), f"overlay[{i}]") for i, s in enumerate(payload.overlay)
    )
    items = tuple(
        SelectionItem(it.meta_analysis_id, tuple(it.subgroup_ids) if it.subgroup_ids is not None else None)
        for it in payload.items
    )
    return Selection(items, payload.target_group, payload.pooled, scale, overlay)


def priors_from_payload(payload: Optional[BayesPayload]) -> bayes.PriorSpec:
    default = bayes.PriorSpec()
    if payload is None or payload.priors is None:
        return default
    eff = bayes.prior_from_obj(payload.priors.effect) if payload.priors.effect is not None else default.effect
    het = (
        bayes.prior_from_obj(payload.priors.heterogeneity)
        if payload.priors.heterogeneity is not None
        else default.heterogeneity
    )
    if not isinstance(eff, (bayes.NormalPrior, bayes.StudentTPrior, bayes.CauchyPrior)):
        raise DataError("effect prior must be normal, student-t, or cauchy")
    if isinstance(het, (bayes.NormalPrior, bayes.StudentTPrior, bayes.CauchyPrior)):
        raise DataError("heterogeneity prior must have support on (0, inf)")
    return bayes.PriorSpec(eff, het)


# ---------------------------------------------------------------------------
# Response assembly (pure functions of snapshot + request)
# ---------------------------------------------------------------------------


def _summary_obj(s: bayes.PosteriorSummary) -> dict:
    return {"mean": s.mean, "median": s.median, "ci_low": s.ci_low, "ci_high": s.ci_high}


def _density_obj(d: bayes.PosteriorDensity) -> dict:
    return {"grid": [float(v) for v in d.grid], "density": [float(v) for v in d.density]}


def _estimate_rows(study_set: StudySet, estimates: list[EffectEstimate], weights: dict[str, float]) -> list[dict]:
    by_label = {}
    for idx, study in enumerate(study_set.studies):
        by_label[study.label] = study_set.is_new(idx)
    rows = []
    for e in estimates:
        ci = classical.Z_95 * e.se
        rows.append(
            {
                "label": e.label,
                "y": e.y,
                "se": e.se,
                "ci_low": e.y - ci,
                "ci_high": e.y + ci,
                "weight_pct": weights.get(e.label),
                "is_new": by_label.get(e.label, False),
            }
        )
    return rows


def _classical_block(study_set: StudySet, scale: EffectScale, method: str, estimates) -> tuple[dict, dict]:
    het = classical.heterogeneity(estimates)
    if method == "mh":
        mh_scale = {"logor": "OR", "logrr": "RR", "rd": "RD"}.get(scale.value)
        if mh_scale is None:
            raise DataError(f"Mantel-Haenszel pooling is not defined on scale {scale.value!r}")
        labels = {e.label for e in estimates}
        tables, table_labels = [], []
        for s in study_set.studies:
            if s.label not in labels:
                continue
            if not isinstance(s.data, DichotomousCounts):
                raise DataError(f"method 'mh' needs raw dichotomous counts; study {s.label!r} has none")
            tables.append(s.data)
            table_labels.append(s.label)
        pooled, _ = classical.mantel_haenszel(tables, mh_scale)
        weight_labels = table_labels
        tau2_used = 0.0
    else:
        if method == "fixed":
            pooled = classical.fixed_effect_iv(estimates)
            tau2_used = 0.0
        elif method == "dl":
            tau2_used = het.tau2
            pooled = classical.random_effects(estimates, tau2_used, classical.PoolingMethod.RANDOM_DL)
        else:
            tau2_used = classical.reml_tau2(estimates) if len(estimates) > 1 else 0.0
            pooled = classical.random_effects(estimates, tau2_used, classical.PoolingMethod.RANDOM_REML)
        weight_labels = [e.label for e in estimates]
    weights = dict(zip(weight_labels, pooled.weights_pct))
    transformed = classical.transform(pooled, scale)
    egger = None
    if len(estimates) >= 3:
        eg = classical.egger_test(estimates)
        egger = {"intercept": eg.intercept, "se": eg.se_intercept, "t": eg.t, "p": eg.p, "df": eg.df}
    block = {
        "method": method,
        "heterogeneity": {
            "q": het.q, "df": het.df, "p_q": het.p_q, "tau2": het.tau2, "i2": het.i2, "h2": het.h2,
        },
        "tau2_used": tau2_used,
        "pooled": {
            "method": pooled.method.value,
            "y": pooled.y,
            "se": pooled.se,
            "ci_low": pooled.ci_low,
            "ci_high": pooled.ci_high,
            "z": pooled.z,
            "p": pooled.p,
            "k": pooled.k,
        },
        "transformed": {
            "estimate": transformed.estimate,
            "ci_low": transformed.ci_low,
            "ci_high": transformed.ci_high,
            "transformed": transformed.transformed,
            "label": scale.natural_label,
        },
        "egger": egger,
    }
    return block, weights


def _bayes_block(scale: EffectScale, estimates, payload: Optional[BayesPayload]) -> dict:
    priors = priors_from_payload(payload)
    probs = tuple(payload.prior_model_probs) if payload and payload.prior_model_probs else (0.25,) * 4
    result = bayes.bma(estimates, priors, probs)
    tr = {
        "fixed_alt": bayes.transform_posterior(result.mu_density_fixed, scale),
        "random_alt": bayes.transform_posterior(result.mu_density_random, scale),
        "averaged": bayes.transform_posterior(result.mu_density_averaged, scale),
    }
    return {
        "priors": {
            "effect": bayes.prior_to_obj(priors.effect),
            "heterogeneity": bayes.prior_to_obj(priors.heterogeneity),
            "effect_label": priors.effect.describe(),
            "heterogeneity_label": priors.heterogeneity.describe(),
        },
        "prior_model_probs": list(result.marginals.prior_model_probs),
        "log_marginals": dict(zip(bayes.MODEL_ORDER, result.marginals.log_values)),
        "bf": {
            "bf10_fixed": result.bf10_fixed,
            "bf10_random": result.bf10_random,
            "bf_rf": result.bf_rf,
            "bf_inclusion": result.bf_inclusion,
        },
        "posterior_model_probs": dict(zip(bayes.MODEL_ORDER, result.posterior_model_probs)),
        "mu": {
            "fixed_alt": _summary_obj(result.mu_fixed),
            "random_alt": _summary_obj(result.mu_random),
            "averaged": _summary_obj(result.mu_averaged),
            "averaged_all": _summary_obj(result.mu_averaged_all),
        },
        "tau": _summary_obj(result.tau_random),
        "mu_transformed": {
            name: {
                "mean": t.mean,
                "exp_of_mean": t.exp_of_mean,
                "median": t.median,
                "ci_low": t.ci_low,
                "ci_high": t.ci_high,
                "transformed": t.transformed,
                "label": scale.natural_label,
            }
            for name, t in tr.items()
        },
        "densities": {
            "mu_prior": _density_obj(result.mu_density_prior),
            "mu_averaged": _density_obj(result.mu_density_averaged),
            "tau_prior": _density_obj(result.tau_density_prior),
            "tau": _density_obj(result.tau_density),
        },
    }


def run_analysis(snapshot: DatabaseSnapshot, request: AnalyzeRequest) -> dict:
    """Resolve the selection, compute effects, and pool per study set."""
    selection = selection_from_payload(request.selection)
    study_sets = resolve_selection(snapshot, selection)
    blocks = []
    for ss in study_sets:
        estimates, exclusions = compute_effects(ss, selection.scale)
        if not estimates:
            raise DataError(f"no estimable studies in study set {ss.name!r}")
        weights: dict[str, float] = {}
        block = {
            "name": ss.name,
            "outcome_kind": ss.outcome_kind,
            "group1_label": ss.group1_label,
            "group2_label": ss.group2_label,
            "k": len(estimates),
            "exclusions": [{"label": x.label, "reason": x.reason} for x in exclusions],
        }
        if request.classical is not None:
            block["classical"], weights = _classical_block(ss, selection.scale, request.classical.method, estimates)
        if request.bayesian is not None:
            block["bayesian"] = _bayes_block(selection.scale, estimates, request.bayesian)
        block["estimates"] = _estimate_rows(ss, estimates, weights)
        blocks.append(block)
    plot_urls = (
        {"forest": "/api/plots/forest", "funnel": "/api/plots/funnel"}
        if request.classical is not None
        else {"density": "/api/plots/density"}
    )
    return {
        "scale": selection.scale.value,
        "target_group": selection.target_group,
        "pooled": selection.pooled,
        "study_sets": blocks,
        "plots": plot_urls,
    }


# ---------------------------------------------------------------------------
# Plot specs from analysis responses
# ---------------------------------------------------------------------------


def forest_spec_from_analysis(response: dict) -> plots.ForestPlotSpec:
    block = response["study_sets"][0]
    cb = block.get("classical")
    if cb is None:
        raise DataError("forest plot needs a classical analysis block")
    rows = tuple(
        plots.ForestRow(
            r["label"], r["y"], r["ci_low"], r["ci_high"], r.get("weight_pct") or 0.0, r["is_new"]
        )
        for r in block["estimates"]
    )
    p = cb["pooled"]
    method_label = {"fixed": "Fixed (IV)", "mh": "Fixed (MH)", "dl": "Random (DL)", "reml": "Random (REML)"}[
        cb["method"]
    ]
    pooled = plots.PooledLine(p["y"], p["ci_low"], p["ci_high"], method_label)
    scale = EffectScale.from_token(response["scale"])
    return plots.ForestPlotSpec(rows, pooled, scale)


def render_funnel_from_analysis(response: dict) -> str:
    block = response["study_sets"][0]
    cb = block.get("classical")
    if cb is None:
        raise DataError("funnel plot needs a classical analysis block")
    ys = [r["y"] for r in block["estimates"]]
    ses = [r["se"] for r in block["estimates"]]
    scale = EffectScale.from_token(response["scale"])
    return plots.render_funnel(ys, ses, cb["pooled"]["y"], scale.axis_label)


def density_spec_from_analysis(response: dict) -> plots.DensityPlotSpec:
    block = response["study_sets"][0]
    bb = block.get("bayesian")
    if bb is None:
        raise DataError("density plot needs a bayesian analysis block")
    post = bb["densities"]["mu_averaged"]
    prior = bb["densities"]["mu_prior"]
    avg = bb["mu"]["averaged"]
    scale = EffectScale.from_token(response["scale"])
    return plots.DensityPlotSpec(
        tuple(prior["grid"]),
        tuple(prior["density"]),
        tuple(post["grid"]),
        tuple(post["density"]),
        avg["ci_low"],
        avg["ci_high"],
        scale.axis_label,
    )


# ---------------------------------------------------------------------------
# FastAPI application
# ---------------------------------------------------------------------------


def _error_body(code: str, message: str, path: str | None = None) -> dict:
    err: dict = {"code": code, "message": message}
    if path is not None:
        err["path"] = path
    return {"error": err}


def create_app(
    db: DatabaseSnapshot | str,
    static_dir: str | None = None,
    cors_origins: list[str] | None = None,
) -> FastAPI:
    """Build the API app around a snapshot (or a database path to load)."""
    app = FastAPI(title="trialbench", docs_url=None, redoc_url=None)
    if isinstance(db, DatabaseSnapshot):
        snapshot, db_path = db, None
    else:
        snapshot, db_path = load_database(db), db
    app.state.snapshot = snapshot
    app.state.db_path = db_path
    app.state.index = build_index(snapshot)

    app.add_middleware(
        CORSMiddleware,
        allow_origins=cors_origins or ["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(DataError)
    async def _data_error(request: Request, exc: DataError):
        return JSONResponse(status_code=422, content=_error_body("validation", str(exc)))

    @app.exception_handler(NumericalError)
    async def _numerical_error(request: Request, exc: NumericalError):
        return JSONResponse(status_code=500, content=_error_body("numerical", str(exc)))

    @app.exception_handler(RequestValidationError)
    async def _request_error(request: Request, exc: RequestValidationError):
        first = exc.errors()[0] if exc.errors() else {}
        path = ".".join(str(p) for p in first.get("loc", ())) or None
        return JSONResponse(status_code=422, content=_error_body("validation", first.get("msg", "invalid request"), path))

    @app.exception_handler(StarletteHTTPException)
    async def _http_error(request: Request, exc: StarletteHTTPException):
        return JSONResponse(status_code=exc.status_code, content=_error_body(f"http_{exc.status_code}", str(exc.detail)))

    @app.get("/api/reviews")
    def reviews(mode: str = "title", q: str = ""):
        if mode not in FILTER_MODES:
            return JSONResponse(
                status_code=400,
                content=_error_body("bad_mode", f"unknown mode {mode!r} (expected one of: {', '.join(FILTER_MODES)})"),
            )
        query = [s for s in (t.strip() for t in q.split(",")) if s] if mode in ("topics", "keywords") else q
        ids = filter_reviews(app.state.index, mode, query)
        snap: DatabaseSnapshot = app.state.snapshot
        return [{"id": r.id, "title": r.title, "year": r.year} for r in (snap.review(i) for i in ids)]

    @app.get("/api/meta-analyses")
    def meta_analyses(review_id: str = ""):
        if not review_id:
            return JSONResponse(status_code=400, content=_error_body("bad_request", "review_id is required"))
        snap: DatabaseSnapshot = app.state.snapshot
        try:
            rows = list_meta_analyses(snap, [review_id])
        except DataError as e:
            return JSONResponse(status_code=404, content=_error_body("not_found", str(e)))
        return [
            {
                "review_id": r.review_id,
                "review_title": r.review_title,
                "review_year": r.review_year,
                "id": r.meta_analysis_id,
                "name": r.name,
                "outcome_kind": r.outcome_kind,
                "group1_label": r.group1_label,
                "group2_label": r.group2_label,
                "subgroups": [{"id": i, "name": n, "n_studies": k} for i, n, k in r.subgroups],
            }
            for r in rows
        ]

    @app.post("/api/analyze")
    def analyze(request: AnalyzeRequest):
        return run_analysis(app.state.snapshot, request)

    @app.post("/api/plots/{kind}")
    async def plot(kind: str, request: Request):
        if kind not in PLOT_KINDS:
            return JSONResponse(status_code=404, content=_error_body("not_found", f"unknown plot kind {kind!r}"))
        try:
            body = await request.json()
        except Exception:
            raise DataError("request body must be JSON") from None
        if not isinstance(body, dict):
            raise DataError("request body must be a JSON object")
        if "selection" in body:
            analysis = run_analysis(app.state.snapshot, AnalyzeRequest.model_validate(body))
            if kind == "forest":
                svg = plots.render_forest(forest_spec_from_analysis(analysis))
            elif kind == "funnel":
                svg = render_funnel_from_analysis(analysis)
            else:
                svg = plots.render_density(density_spec_from_analysis(analysis))
        else:
            svg = _render_plot_spec(kind, body)
        return Response(svg, media_type="image/svg+xml")

    @app.get("/api/export.csv")
    def export(request: Request):
        params = request.query_params
        ma_ids = params.getlist("ma")
        if not ma_ids:
            raise DataError("at least one 'ma' parameter is required")
        sel_items = selection_items_for(app.state.snapshot, ma_ids, params.getlist("subgroup"))
        target = params.get("target", "group1")
        if target not in ("group1", "group2"):
            raise DataError(f"target must be 'group1' or 'group2', got {target!r}")
        pooled = params.get("pooled", "false").lower() in ("1", "true", "yes")
        scale = EffectScale.from_token(params.get("scale", "logor"))
        overlay = tuple(parse_study_token(t, scale) for t in params.getlist("add"))
        selection = Selection(tuple(sel_items), target, pooled, scale, overlay)
        text = export_csv(resolve_selection(app.state.snapshot, selection))
        return Response(
            text,
            media_type="text/csv; charset=utf-8",
            headers={"Content-Disposition": 'attachment; filename="studies.csv"'},
        )

    @app.post("/api/admin/reload")
    def reload_snapshot():
        if app.state.db_path is None:
            raise DataError("server was started from an in-memory snapshot; nothing to reload")
        snapshot = load_database(app.state.db_path)
        index = build_index(snapshot)
        app.state.snapshot = snapshot  # atomic swap; in-flight requests keep the old one
        app.state.index = index
        r, m, s = snapshot.counts
        return {"reviews": r, "meta_analyses": m, "studies": s}

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app


def _render_plot_spec(kind: str, body: dict) -> str:
    try:
        if kind == "forest":
            rows = tuple(
                plots.ForestRow(
                    str(r["label"]), float(r["y"]), float(r["ci_low"]), float(r["ci_high"]),
                    float(r.get("weight_pct", 0.0)), bool(r.get("is_new", False)),
                )
                for r in body["rows"]
            )
            pooled = plots.PooledLine(
                float(body["pooled"]["y"]),
                float(body["pooled"]["ci_low"]),
                float(body["pooled"]["ci_high"]),
                str(body["pooled"].get("method_label", "Pooled")),
            )
            scale = EffectScale.from_token(body.get("scale", "logor"))
            return plots.render_forest(plots.ForestPlotSpec(rows, pooled, scale, body.get("axis_label", "")))
        if kind == "funnel":
            return plots.render_funnel(
                [float(v) for v in body["ys"]],
                [float(v) for v in body["ses"]],
                float(body["pooled_y"]),
                str(body.get("axis_label", "")),
            )
        return plots.render_density(
            plots.DensityPlotSpec(
                tuple(float(v) for v in body["prior_grid"]),
                tuple(float(v) for v in body["prior_density"]),
                tuple(float(v) for v in body["posterior_grid"]),
                tuple(float(v) for v in body["posterior_density"]),
                float(body["ci_low"]),
                float(body["ci_high"]),
                str(body.get("axis_label", "")),
            )
        )
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"malformed {kind} plot spec: {e!r}") from None


def serve(db_path: str, port: int = 8080, static_dir: str | None = None) -> None:
    """Run the API server (blocking)."""
    import uvicorn

    app = create_app(db_path, static_dir=static_dir)
    uvicorn.run(app, host="0.0.0.0", port=port, log_level="info")
