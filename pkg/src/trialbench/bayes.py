"""Bayesian meta-analysis: informed priors, marginal likelihoods by
deterministic quadrature, Bayes factors, and model-averaged posteriors.

Model ensemble (in fixed order): fixed-null, fixed-alt, random-null,
random-alt.  Given study estimates (y_i, se_i) the fixed model has
y_i ~ Normal(mu, se_i^2), the random model y_i ~ Normal(mu, se_i^2 + tau^2)
after marginalizing study effects, and null models pin mu = 0.
Heterogeneity integrals run in u = ln(tau) space so heavy prior tails stay
tractable.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Union

import numpy as np
from scipy import stats
from scipy.special import gammaln, logsumexp

from .dataset import EffectScale
from .effectsize import EffectEstimate
from .errors import DataError
from .quadrature import log_integrate, log_integrate_2d, merge_segments, panel_rule

_LOG_2PI = math.log(2.0 * math.pi)
_trapz = getattr(np, "trapezoid", None) or np.trapz  # numpy 2.x renamed trapz

MODEL_ORDER = ("fixed_null", "fixed_alt", "random_null", "random_alt")


class Model(Enum):
    FIXED_NULL = "fixed_null"
    FIXED_ALT = "fixed_alt"
    RANDOM_NULL = "random_null"
    RANDOM_ALT = "random_alt"


# ---------------------------------------------------------------------------
# Priors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NormalPrior:
    mean: float
    sd: float

    def __post_init__(self):
        if not self.sd > 0:
            raise DataError("normal prior sd must be positive")

    def logpdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mean) / self.sd
        return -0.5 * (_LOG_2PI + z * z) - math.log(self.sd)

    def ppf(self, q):
        return float(stats.norm.ppf(q, self.mean, self.sd))

    def domain(self) -> tuple[float, float]:
        return (self.mean - 10.0 * self.sd, self.mean + 10.0 * self.sd)

    def describe(self) -> str:
        return f"Normal(mean = {self.mean:g}, sd = {self.sd:g})"


@dataclass(frozen=True)
class StudentTPrior:
    location: float
    scale: float
    df: float

    def __post_init__(self):
        if not (self.scale > 0 and self.df > 0):
            raise DataError("Student-t prior needs scale > 0 and df > 0")

    def logpdf(self, x):
        v = self.df
        z = (np.asarray(x, dtype=float) - self.location) / self.scale
        const = gammaln((v + 1) / 2) - gammaln(v / 2) - 0.5 * math.log(v * math.pi) - math.log(self.scale)
        return const - (v + 1) / 2 * np.log1p(z * z / v)

    def ppf(self, q):
        return float(stats.t.ppf(q, self.df, self.location, self.scale))

    def domain(self) -> tuple[float, float]:
        return (self.location - 12.0 * self.scale, self.location + 12.0 * self.scale)

    def describe(self) -> str:
        return f"Student-t(location = {self.location:g}, scale = {self.scale:g}, df = {self.df:g})"


@dataclass(frozen=True)
class CauchyPrior:
    location: float
    scale: float

    def __post_init__(self):
        if not self.scale > 0:
            raise DataError("Cauchy prior scale must be positive")

    def logpdf(self, x):
        z = (np.asarray(x, dtype=float) - self.location) / self.scale
        return -math.log(math.pi * self.scale) - np.log1p(z * z)

    def ppf(self, q):
        return float(stats.cauchy.ppf(q, self.location, self.scale))

    def domain(self) -> tuple[float, float]:
        # Quantile-based: a fixed multiple of the scale would truncate the
        # heavy tails noticeably.
        return (self.ppf(1e-6), self.ppf(1.0 - 1e-6))

    def describe(self) -> str:
        return f"Cauchy(location = {self.location:g}, scale = {self.scale:g})"


@dataclass(frozen=True)
class InvGammaPrior:
    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise DataError("inverse-gamma prior needs shape > 0 and scale > 0")

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        a, b = self.shape, self.scale
        const = a * math.log(b) - gammaln(a)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = const - (a + 1) * np.log(x) - b / x
        return np.where(x > 0, out, -np.inf)

    def ppf(self, q):
        return float(stats.invgamma.ppf(q, self.shape, scale=self.scale))

    def describe(self) -> str:
        return f"Inv-Gamma(shape = {self.shape:g}, scale = {self.scale:g})"


@dataclass(frozen=True)
class HalfNormalPrior:
    sd: float

    def __post_init__(self):
        if not self.sd > 0:
            raise DataError("half-normal prior sd must be positive")

    def logpdf(self, x):
        z = np.asarray(x, dtype=float) / self.sd
        out = 0.5 * math.log(2.0 / math.pi) - math.log(self.sd) - 0.5 * z * z
        return np.where(z >= 0, out, -np.inf)

    def ppf(self, q):
        return float(stats.halfnorm.ppf(q, scale=self.sd))

    def describe(self) -> str:
        return f"Half-Normal(sd = {self.sd:g})"


@dataclass(frozen=True)
class HalfCauchyPrior:
    scale: float

    def __post_init__(self):
        if not self.scale > 0:
            raise DataError("half-Cauchy prior scale must be positive")

    def logpdf(self, x):
        z = np.asarray(x, dtype=float) / self.scale
        out = math.log(2.0 / (math.pi * self.scale)) - np.log1p(z * z)
        return np.where(z >= 0, out, -np.inf)

    def ppf(self, q):
        return float(stats.halfcauchy.ppf(q, scale=self.scale))

    def describe(self) -> str:
        return f"Half-Cauchy(scale = {self.scale:g})"


EffectPrior = Union[NormalPrior, StudentTPrior, CauchyPrior]
HeterogeneityPrior = Union[InvGammaPrior, HalfNormalPrior, HalfCauchyPrior]


@dataclass(frozen=True)
class PriorSpec:
    """Priors for the effect (mu) and heterogeneity (tau > 0) parameters.

    The defaults are tool defaults, deliberately wide; analyses meant to
    encode domain knowledge should pass informed priors explicitly.
    """

    effect: EffectPrior = NormalPrior(0.0, 1.0)
    heterogeneity: HeterogeneityPrior = InvGammaPrior(1.0, 0.15)


def prior_density(prior, x):
    """Normalized prior density; zero outside the support."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.exp(prior.logpdf(x))
    return np.where(np.isfinite(out), out, 0.0) if out.ndim else (float(out) if np.isfinite(out) else 0.0)


_PRIOR_GRAMMAR = {
    "t": (StudentTPrior, 3),
    "normal": (NormalPrior, 2),
    "cauchy": (CauchyPrior, 2),
    "invgamma": (InvGammaPrior, 2),
    "halfnormal": (HalfNormalPrior, 1),
    "halfcauchy": (HalfCauchyPrior, 1),
}


def parse_prior(text: str):
    """Parse 't(0,0.58,5)', 'normal(0,1)', 'invgamma(1.74,0.27)', etc."""
    m = re.fullmatch(r"\s*([a-zA-Z]+)\s*\(([^)]*)\)\s*", text)
    if not m:
        raise DataError(f"cannot parse prior {text!r}; expected e.g. 't(0,0.58,5)' or 'invgamma(1.74,0.27)'")
    name = m.group(1).lower()
    if name not in _PRIOR_GRAMMAR:
        raise DataError(f"unknown prior family {name!r} (expected one of: {', '.join(_PRIOR_GRAMMAR)})")
    cls, arity = _PRIOR_GRAMMAR[name]
    try:
        args = [float(p) for p in m.group(2).split(",")] if m.group(2).strip() else []
    except ValueError:
        raise DataError(f"non-numeric prior parameter in {text!r}") from None
    if len(args) != arity:
        raise DataError(f"prior {name!r} takes {arity} parameter(s), got {len(args)}")
    return cls(*args)


_PRIOR_KINDS = {
    "normal": (NormalPrior, ("mean", "sd")),
    "student_t": (StudentTPrior, ("location", "scale", "df")),
    "t": (StudentTPrior, ("location", "scale", "df")),
    "cauchy": (CauchyPrior, ("location", "scale")),
    "inv_gamma": (InvGammaPrior, ("shape", "scale")),
    "invgamma": (InvGammaPrior, ("shape", "scale")),
    "half_normal": (HalfNormalPrior, ("sd",)),
    "halfnormal": (HalfNormalPrior, ("sd",)),
    "half_cauchy": (HalfCauchyPrior, ("scale",)),
    "halfcauchy": (HalfCauchyPrior, ("scale",)),
}


def prior_from_obj(obj):
    """Build a prior from its JSON form {'kind': ..., <params>} or a grammar string."""
    if isinstance(obj, str):
        return parse_prior(obj)
    if not isinstance(obj, dict) or "kind" not in obj:
        raise DataError("prior object must carry a 'kind' field or be a grammar string")
    kind = str(obj["kind"]).lower()
    if kind not in _PRIOR_KINDS:
        raise DataError(f"unknown prior kind {kind!r}")
    cls, fields = _PRIOR_KINDS[kind]
    try:
        return cls(*[float(obj[f]) for f in fields])
    except KeyError as e:
        raise DataError(f"prior kind {kind!r} requires field {e.args[0]!r}") from None


def prior_to_obj(prior) -> dict:
    if isinstance(prior, NormalPrior):
        return {"kind": "normal", "mean": prior.mean, "sd": prior.sd}
    if isinstance(prior, StudentTPrior):
        return {"kind": "student_t", "location": prior.location, "scale": prior.scale, "df": prior.df}
    if isinstance(prior, CauchyPrior):
        return {"kind": "cauchy", "location": prior.location, "scale": prior.scale}
    if isinstance(prior, InvGammaPrior):
        return {"kind": "inv_gamma", "shape": prior.shape, "scale": prior.scale}
    if isinstance(prior, HalfNormalPrior):
        return {"kind": "half_normal", "sd": prior.sd}
    if isinstance(prior, HalfCauchyPrior):
        return {"kind": "half_cauchy", "scale": prior.scale}
    raise DataError(f"not a prior: {prior!r}")


# ---------------------------------------------------------------------------
# Likelihood pieces and integration domains
# ---------------------------------------------------------------------------


def _data_arrays(estimates: Sequence[EffectEstimate]) -> tuple[np.ndarray, np.ndarray]:
    if not estimates:
        raise DataError("need at least one estimate")
    y = np.array([e.y for e in estimates], dtype=float)
    v = np.array([e.se * e.se for e in estimates], dtype=float)
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(v)) and np.all(v > 0)):
        raise DataError("estimates must be finite with positive standard errors")
    return y, v


def _log_normal_pdf(x, mean, var):
    return -0.5 * (_LOG_2PI + np.log(var) + (x - mean) ** 2 / var)


def _loglik_fixed(mu: np.ndarray, y: np.ndarray, v: np.ndarray) -> np.ndarray:
    return _log_normal_pdf(y[:, None], mu[None, :], v[:, None]).sum(axis=0)


def _loglik_random(mu: np.ndarray, tau: np.ndarray, y: np.ndarray, v: np.ndarray) -> np.ndarray:
    var = v[:, None] + tau[None, :] ** 2
    return _log_normal_pdf(y[:, None], mu[None, :], var).sum(axis=0)


def _mu_segments(effect: EffectPrior, y: np.ndarray, v: np.ndarray) -> list[tuple[float, float]]:
    """Integration segments for mu: prior bulk extended by the likelihood
    window, with breakpoints so a likelihood peak much narrower than the
    prior is still resolved early in refinement."""
    p_lo, p_hi = effect.domain()
    w = 1.0 / v
    mu_hat = float(np.sum(w * y) / np.sum(w))
    sigma_hat = float(1.0 / math.sqrt(np.sum(w)))
    l_lo, l_hi = mu_hat - 10.0 * sigma_hat, mu_hat + 10.0 * sigma_hat
    lo, hi = min(p_lo, l_lo), max(p_hi, l_hi)
    center = effect.mean if isinstance(effect, NormalPrior) else effect.location
    inner = [p for p in (l_lo, l_hi, center) if lo < p < hi]
    return merge_segments([lo, hi, *inner])


def _tau_u_segment(heterogeneity: HeterogeneityPrior) -> list[tuple[float, float]]:
    """Heterogeneity integration runs in u = ln(tau); bounds are prior
    quantiles 1e-6 and 1 - 1e-6."""
    lo = heterogeneity.ppf(1e-6)
    hi = heterogeneity.ppf(1.0 - 1e-6)
    return [(math.log(lo), math.log(hi))]


def log_marginal(
    model: Model | str,
    estimates: Sequence[EffectEstimate],
    priors: PriorSpec,
    rel_tol_1d: float = 1e-9,
    rel_tol_2d: float = 1e-5,
) -> float:
    """Log marginal likelihood of one ensemble member.

    fixed-null is closed form; fixed-alt and random-null are 1D quadratures;
    random-alt is a 2D quadrature over (mu, ln tau).
    """
    model = Model(model) if not isinstance(model, Model) else model
    y, v = _data_arrays(estimates)
    eff, het = priors.effect, priors.heterogeneity

    if model is Model.FIXED_NULL:
        return float(_log_normal_pdf(y, 0.0, v).sum())

    if model is Model.FIXED_ALT:
        def log_f(mu):
            return _loglik_fixed(mu, y, v) + eff.logpdf(mu)

        return log_integrate(log_f, _mu_segments(eff, y, v), rel_tol=rel_tol_1d)

    if model is Model.RANDOM_NULL:
        def log_f(u):
            tau = np.exp(u)
            return _loglik_random(np.zeros(1), tau, y, v) + het.logpdf(tau) + u

        return log_integrate(log_f, _tau_u_segment(het), rel_tol=rel_tol_1d)

    def log_f(mu, u):
        tau = np.exp(u)
        var = v[:, None] + (tau**2)[None, :]
        ll = _log_normal_pdf(y[:, None], mu[None, :], var).sum(axis=0)
        return ll + eff.logpdf(mu) + het.logpdf(tau) + u

    return log_integrate_2d(
        log_f,
        _mu_segments(eff, y, v),
        _tau_u_segment(het),
        rel_tol=rel_tol_2d,
        initial_panels=(4, 8),
    )


# ---------------------------------------------------------------------------
# Posterior densities and summaries
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PosteriorDensity:
    grid: np.ndarray
    density: np.ndarray
    normalization: float  # trapezoid integral after normalization (== 1)

    def __post_init__(self):
        if not np.all(np.diff(self.grid) > 0):
            raise DataError("density grid must be strictly increasing")


@dataclass(frozen=True)
class PosteriorSummary:
    mean: float
    median: float
    ci_low: float
    ci_high: float


GRID_POINTS = 512
_GRID_Q = 5e-5  # grid spans the central 0.9999 prior mass region


def _normalize_log_density(grid: np.ndarray, log_f: np.ndarray) -> PosteriorDensity:
    shift = float(np.max(log_f))
    f = np.exp(log_f - shift)
    area = float(_trapz(f, grid))
    if not area > 0:
        raise DataError("posterior density vanished on the whole grid")
    f = f / area
    return PosteriorDensity(grid, f, float(_trapz(f, grid)))


def _cdf(d: PosteriorDensity) -> np.ndarray:
    steps = 0.5 * (d.density[1:] + d.density[:-1]) * np.diff(d.grid)
    cdf = np.concatenate([[0.0], np.cumsum(steps)])
    return cdf / cdf[-1]


def summarize_density(d: PosteriorDensity) -> PosteriorSummary:
    cdf = _cdf(d)
    lo, med, hi = np.interp([0.025, 0.5, 0.975], cdf, d.grid)
    mean = float(_trapz(d.grid * d.density, d.grid))
    return PosteriorSummary(mean, float(med), float(lo), float(hi))


def _mu_grid(eff: EffectPrior) -> np.ndarray:
    return np.linspace(eff.ppf(_GRID_Q), eff.ppf(1.0 - _GRID_Q), GRID_POINTS)


def _tau_grid(het: HeterogeneityPrior) -> np.ndarray:
    # Geometric spacing: inverse-gamma-style right tails stretch orders of
    # magnitude past the bulk, which a uniform 512-point grid cannot resolve.
    return np.geomspace(het.ppf(_GRID_Q), het.ppf(1.0 - _GRID_Q), GRID_POINTS)


def _refined_inner_lse(outer_eval, segments, tol=1e-7, initial_panels=8, max_doublings=8):
    """Per-grid-point log integrals with shared refinement of the inner rule.

    outer_eval(nodes, logw) must return the vector of log integrals, one per
    outer grid point, for the given inner quadrature rule.
    """
    prev = None
    panels = initial_panels
    for _ in range(max_doublings + 1):
        nodes, logw = panel_rule(segments, panels)
        cur = outer_eval(nodes, logw)
        if prev is not None and float(np.max(np.abs(cur - prev))) <= tol:
            return cur
        prev = cur
        panels *= 2
    return prev  # refinement cap reached; last iterate is the best available


def _log_mu_posterior(model: Model, grid: np.ndarray, y, v, priors: PriorSpec) -> np.ndarray:
    eff, het = priors.effect, priors.heterogeneity
    if model is Model.FIXED_ALT:
        return _loglik_fixed(grid, y, v) + eff.logpdf(grid)
    if model is Model.RANDOM_ALT:
        def outer(nodes, logw):
            tau = np.exp(nodes)
            var = v[:, None] + (tau**2)[None, :]  # (k, U)
            ll = _log_normal_pdf(y[:, None, None], grid[None, :, None], var[:, None, :]).sum(axis=0)
            return logsumexp(ll + (het.logpdf(tau) + nodes + logw)[None, :], axis=1)

        return _refined_inner_lse(outer, _tau_u_segment(het)) + eff.logpdf(grid)
    raise DataError(f"mu has no posterior under model {model.value}")


def _log_tau_posterior(model: Model, grid: np.ndarray, y, v, priors: PriorSpec) -> np.ndarray:
    eff, het = priors.effect, priors.heterogeneity
    if model is Model.RANDOM_NULL:
        return _loglik_random(np.zeros(1), grid, y, v) + het.logpdf(grid)
    if model is Model.RANDOM_ALT:
        def outer(nodes, logw):
            var = v[:, None, None] + (grid**2)[None, :, None]
            ll = _log_normal_pdf(y[:, None, None], nodes[None, None, :], var).sum(axis=0)
            return logsumexp(ll + (eff.logpdf(nodes) + logw)[None, :], axis=1)

        return _refined_inner_lse(outer, _mu_segments(eff, y, v)) + het.logpdf(grid)
    raise DataError(f"tau has no posterior under model {model.value}")


def posterior_density(
    parameter: str,
    model: Model | str,
    estimates: Sequence[EffectEstimate],
    priors: PriorSpec,
) -> PosteriorDensity:
    """Posterior density on a 512-point grid over the central 0.9999 prior
    mass region, trapezoid-normalized.

    parameter 'mu' admits models fixed_alt, random_alt and averaged_alt
    (posterior-probability mixture of the two); 'tau' admits random_null
    and random_alt.
    """
    y, v = _data_arrays(estimates)
    if parameter == "mu":
        if model == "averaged_alt":
            grid = _mu_grid(priors.effect)
            lf = _normalize_log_density(grid, _log_mu_posterior(Model.FIXED_ALT, grid, y, v, priors))
            lr = _normalize_log_density(grid, _log_mu_posterior(Model.RANDOM_ALT, grid, y, v, priors))
            m_f = log_marginal(Model.FIXED_ALT, estimates, priors)
            m_r = log_marginal(Model.RANDOM_ALT, estimates, priors)
            w = float(np.exp(m_f - logsumexp([m_f, m_r])))
            mix = w * lf.density + (1.0 - w) * lr.density
            mix = mix / float(_trapz(mix, grid))
            return PosteriorDensity(grid, mix, float(_trapz(mix, grid)))
        model = Model(model) if not isinstance(model, Model) else model
        grid = _mu_grid(priors.effect)
        return _normalize_log_density(grid, _log_mu_posterior(model, grid, y, v, priors))
    if parameter == "tau":
        model = Model(model) if not isinstance(model, Model) else model
        grid = _tau_grid(priors.heterogeneity)
        return _normalize_log_density(grid, _log_tau_posterior(model, grid, y, v, priors))
    raise DataError(f"unknown parameter {parameter!r} (expected 'mu' or 'tau')")


def prior_density_curve(prior, grid: np.ndarray) -> PosteriorDensity:
    """Prior evaluated on a grid, renormalized over it (for plotting)."""
    f = np.asarray(prior_density(prior, grid), dtype=float)
    area = float(_trapz(f, grid))
    f = f / area
    return PosteriorDensity(grid, f, float(_trapz(f, grid)))


# ---------------------------------------------------------------------------
# Model averaging
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelMarginals:
    """Log marginal likelihoods of the ensemble plus its prior weights,
    ordered (fixed_null, fixed_alt, random_null, random_alt)."""

    log_m_fixed_null: float
    log_m_fixed_alt: float
    log_m_random_null: float
    log_m_random_alt: float
    prior_model_probs: tuple[float, float, float, float]

    @property
    def log_values(self) -> tuple[float, float, float, float]:
        return (
            self.log_m_fixed_null,
            self.log_m_fixed_alt,
            self.log_m_random_null,
            self.log_m_random_alt,
        )


@dataclass(frozen=True)
class TransformedPosterior:
    """Posterior summary on the natural scale.

    mean integrates exp(mu) against the posterior density; exp_of_mean is
    exp applied to the log-scale posterior mean (reported for comparison,
    always <= mean by Jensen); median and CI endpoints transform directly.
    """

    mean: float
    exp_of_mean: float
    median: float
    ci_low: float
    ci_high: float
    transformed: bool


@dataclass(frozen=True)
class BMAResult:
    marginals: ModelMarginals
    bf10_fixed: float
    bf10_random: float
    bf_rf: float  # random-alt over fixed-alt marginal ratio
    bf_inclusion: float  # effect presence vs absence, model-averaged
    posterior_model_probs: tuple[float, float, float, float]
    mu_fixed: PosteriorSummary
    mu_random: PosteriorSummary
    mu_averaged: PosteriorSummary  # conditional on the alternative models
    mu_averaged_all: PosteriorSummary  # averaging over all four models (nulls at 0)
    tau_random: PosteriorSummary  # mixture over the random models
    mu_density_fixed: PosteriorDensity
    mu_density_random: PosteriorDensity
    mu_density_averaged: PosteriorDensity
    mu_density_prior: PosteriorDensity
    tau_density: PosteriorDensity
    tau_density_prior: PosteriorDensity


def _mixture(grid: np.ndarray, parts: Sequence[tuple[float, PosteriorDensity]]) -> PosteriorDensity:
    mix = np.zeros_like(grid)
    for w, d in parts:
        mix = mix + w * d.density
    mix = mix / float(_trapz(mix, grid))
    return PosteriorDensity(grid, mix, float(_trapz(mix, grid)))


def _summary_with_point_mass(
    grid: np.ndarray, parts: Sequence[tuple[float, PosteriorDensity]], w_atom: float, atom: float = 0.0
) -> PosteriorSummary:
    """Summary of a mixture of grid densities plus a point mass at `atom`."""
    mean = w_atom * atom + sum(w * summarize_density(d).mean for w, d in parts)
    cont = np.zeros_like(grid)
    for w, d in parts:
        cont = cont + w * _cdf(d)
    c_atom = float(np.interp(atom, grid, cont))

    def quantile(q: float) -> float:
        if c_atom < q <= c_atom + w_atom:
            return atom
        qc = q if q <= c_atom else q - w_atom
        qc = min(max(qc, 0.0), float(cont[-1]))
        return float(np.interp(qc, cont, grid))

    return PosteriorSummary(float(mean), quantile(0.5), quantile(0.025), quantile(0.975))


def bma(
    estimates: Sequence[EffectEstimate],
    priors: PriorSpec = PriorSpec(),
    prior_model_probs: Sequence[float] = (0.25, 0.25, 0.25, 0.25),
) -> BMAResult:
    """Bayesian model-averaged meta-analysis over the four-model ensemble.

    Posterior model probabilities weight prior probability by marginal
    likelihood; the inclusion Bayes factor compares posterior to prior odds
    of the alternative models against the null models.  All arithmetic is
    in log space.
    """
    probs = tuple(float(p) for p in prior_model_probs)
    if len(probs) != 4 or any(p < 0 for p in probs):
        raise DataError("prior_model_probs must be four non-negative numbers")
    if abs(sum(probs) - 1.0) > 1e-9:
        raise DataError(f"prior_model_probs must sum to 1, got {sum(probs)}")
    p_null = probs[0] + probs[2]
    p_alt = probs[1] + probs[3]
    if p_null == 0.0 or p_alt == 0.0:
        raise DataError(
            "prior model probabilities must put nonzero mass on both the null and alternative sides"
        )

    log_m = [float(log_marginal(m, estimates, priors)) for m in Model]
    marginals = ModelMarginals(log_m[0], log_m[1], log_m[2], log_m[3], probs)

    with np.errstate(divide="ignore"):
        log_prior = np.log(np.array(probs))
    log_post_un = log_prior + np.array(log_m)
    log_norm = logsumexp(log_post_un)
    post = tuple(float(p) for p in np.exp(log_post_un - log_norm))

    bf10_fixed = float(np.exp(log_m[1] - log_m[0]))
    bf10_random = float(np.exp(log_m[3] - log_m[2]))
    bf_rf = float(np.exp(log_m[3] - log_m[1]))
    log_posterior_odds = logsumexp([log_post_un[1], log_post_un[3]]) - logsumexp(
        [log_post_un[0], log_post_un[2]]
    )
    bf_inclusion = float(np.exp(log_posterior_odds - (math.log(p_alt) - math.log(p_null))))

    d_mu_fixed = posterior_density("mu", Model.FIXED_ALT, estimates, priors)
    d_mu_random = posterior_density("mu", Model.RANDOM_ALT, estimates, priors)
    grid = d_mu_fixed.grid
    w_fixed = post[1] / (post[1] + post[3])
    d_mu_avg = _mixture(grid, [(w_fixed, d_mu_fixed), (1.0 - w_fixed, d_mu_random)])

    d_tau_null = posterior_density("tau", Model.RANDOM_NULL, estimates, priors)
    d_tau_alt = posterior_density("tau", Model.RANDOM_ALT, estimates, priors)
    w_rnull = post[2] / (post[2] + post[3])
    d_tau = _mixture(d_tau_null.grid, [(w_rnull, d_tau_null), (1.0 - w_rnull, d_tau_alt)])

    w_null_all = post[0] + post[2]
    mu_all = _summary_with_point_mass(grid, [(post[1], d_mu_fixed), (post[3], d_mu_random)], w_null_all)

    return BMAResult(
        marginals=marginals,
        bf10_fixed=bf10_fixed,
        bf10_random=bf10_random,
        bf_rf=bf_rf,
        bf_inclusion=bf_inclusion,
        posterior_model_probs=post,
        mu_fixed=summarize_density(d_mu_fixed),
        mu_random=summarize_density(d_mu_random),
        mu_averaged=summarize_density(d_mu_avg),
        mu_averaged_all=mu_all,
        tau_random=summarize_density(d_tau),
        mu_density_fixed=d_mu_fixed,
        mu_density_random=d_mu_random,
        mu_density_averaged=d_mu_avg,
        mu_density_prior=prior_density_curve(priors.effect, grid),
        tau_density=d_tau,
        tau_density_prior=prior_density_curve(priors.heterogeneity, d_tau.grid),
    )


def transform_posterior(density: PosteriorDensity, scale: EffectScale) -> TransformedPosterior:
    """Posterior summary on the natural scale.

    For log scales the mean integrates exp(mu) against the density (not exp
    of the mean); median and credible endpoints exponentiate directly.
    Additive scales pass through unchanged.
    """
    s = summarize_density(density)
    if not scale.is_log:
        return TransformedPosterior(s.mean, s.mean, s.median, s.ci_low, s.ci_high, False)
    mean_exp = float(_trapz(np.exp(density.grid) * density.density, density.grid))
    return TransformedPosterior(
        mean_exp, math.exp(s.mean), math.exp(s.median), math.exp(s.ci_low), math.exp(s.ci_high), True
    )
