"""Deterministic log-space numerical integration.

Composite Gauss-Legendre panels over explicit segment lists, refined by
doubling the panel count until successive log-integral values agree.
Integrands are supplied on the log scale and combined with log-sum-exp, so
marginal likelihoods far below double range stay representable.  For a
fixed refinement schedule the node set and summation order are fixed,
which makes results bitwise reproducible.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import QuadratureError

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(15)
_LOG_GL_WEIGHTS = np.log(_GL_WEIGHTS)

# Cap on integrand points evaluated in one vectorized call (memory bound).
_CHUNK = 1 << 20


def panel_rule(segments: Sequence[tuple[float, float]], panels: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and log-weights of a composite 15-point Gauss-Legendre rule
    with `panels` equal panels per segment."""
    nodes_parts = []
    logw_parts = []
    for a, b in segments:
        if not b > a:
            raise QuadratureError(f"degenerate integration segment [{a}, {b}]")
        edges = np.linspace(a, b, panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[:-1] + edges[1:])
        nodes_parts.append((mid[:, None] + half[:, None] * _GL_NODES).ravel())
        logw_parts.append((np.log(half)[:, None] + _LOG_GL_WEIGHTS).ravel())
    return np.concatenate(nodes_parts), np.concatenate(logw_parts)


def _lse_chunked(log_f: Callable[[np.ndarray], np.ndarray], nodes: np.ndarray, logw: np.ndarray) -> float:
    parts = []
    for start in range(0, nodes.size, _CHUNK):
        sl = slice(start, start + _CHUNK)
        parts.append(logsumexp(log_f(nodes[sl]) + logw[sl]))
    return float(logsumexp(parts))


def log_integrate(
    log_f: Callable[[np.ndarray], np.ndarray],
    segments: Sequence[tuple[float, float]],
    rel_tol: float = 1e-9,
    initial_panels: int = 4,
    max_doublings: int = 11,
) -> float:
    """log of the integral of exp(log_f) over the union of segments.

    Convergence is declared when doubling the panel count moves the log
    integral by less than rel_tol (a relative criterion on the integral).
    """
    prev = None
    panels = initial_panels
    for _ in range(max_doublings + 1):
        nodes, logw = panel_rule(segments, panels)
        cur = _lse_chunked(log_f, nodes, logw)
        if prev is not None and abs(cur - prev) <= rel_tol:
            return cur
        prev = cur
        panels *= 2
    raise QuadratureError(
        f"1D quadrature did not reach rel_tol={rel_tol} after {max_doublings} refinements",
        error_estimate=abs(cur - prev) if prev is not None else None,
    )


def log_integrate_2d(
    log_f: Callable[[np.ndarray, np.ndarray], np.ndarray],
    x_segments: Sequence[tuple[float, float]],
    y_segments: Sequence[tuple[float, float]],
    rel_tol: float = 1e-5,
    initial_panels: tuple[int, int] = (4, 4),
    max_doublings: int = 6,
) -> float:
    """log of the double integral of exp(log_f) over a tensor-product domain.

    log_f takes flat (x, y) arrays of equal length.  Both directions are
    refined jointly; evaluation is chunked along y to bound memory.
    """
    prev = None
    px, py = initial_panels
    for _ in range(max_doublings + 1):
        xn, xlw = panel_rule(x_segments, px)
        yn, ylw = panel_rule(y_segments, py)
        row_chunk = max(1, _CHUNK // xn.size)
        parts = []
        for start in range(0, yn.size, row_chunk):
            sl = slice(start, start + row_chunk)
            X = np.repeat(xn[None, :], yn[sl].size, axis=0).ravel()
            Y = np.repeat(yn[sl], xn.size)
            vals = log_f(X, Y).reshape(yn[sl].size, xn.size)
            parts.append(logsumexp(vals + xlw[None, :] + ylw[sl][:, None]))
        cur = float(logsumexp(parts))
        if prev is not None and abs(cur - prev) <= rel_tol:
            return cur
        prev = cur
        px *= 2
        py *= 2
    raise QuadratureError(
        f"2D quadrature did not reach rel_tol={rel_tol} after {max_doublings} refinements",
        error_estimate=abs(cur - prev) if prev is not None else None,
    )


def merge_segments(points: Sequence[float]) -> list[tuple[float, float]]:
    """Sorted, de-duplicated breakpoints -> list of adjacent segments."""
    uniq = sorted(set(float(p) for p in points))
    if len(uniq) < 2:
        raise QuadratureError("need at least two distinct breakpoints")
    return [(uniq[i], uniq[i + 1]) for i in range(len(uniq) - 1)]
