"""Weighted wedge integrals and panel quadrature with endpoint singularities.

Spatial integrals use the midpoint grids from :mod:`wedgeheat.geometry`;
time integrals use Gauss-Legendre panels that refine geometrically toward
the singular endpoint, which handles the ``1/(t-s)``-type factors the heat
kernel produces once the spatial integral has tamed them to an integrable
power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable

import numpy as np

from .errors import NonFiniteError
from .geometry import AngularDomain, GridSpec, PolarGrid, PolarPoint, graded_polar_grid

__all__ = [
    "TimeQuadSpec",
    "gauss_legendre",
    "panel_gauss_nodes",
    "time_singular_nodes",
    "integrate_time_singular",
    "integrate_polar_weighted",
    "integrate_polar_values",
    "aitken_extrapolate",
]


@lru_cache(maxsize=64)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def panel_gauss_nodes(
    edges: Iterable[float], points_per_panel: int
) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights on consecutive panels [e_i, e_{i+1}]."""
    e = np.asarray(list(edges), dtype=float)
    if e.size < 2 or np.any(np.diff(e) <= 0.0):
        raise ValueError("panel edges must be strictly increasing")
    x, w = gauss_legendre(points_per_panel)
    mid = 0.5 * (e[1:] + e[:-1])
    half = 0.5 * np.diff(e)
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


@dataclass(frozen=True)
class TimeQuadSpec:
    """Dyadic-panel Gauss rule accumulating at the singular endpoint.

    Panel lengths shrink by ``refinement_ratio`` toward the endpoint, so an
    integrable power singularity ``(t_end - s)**a`` (a > -1) is resolved by
    self-similar panels; only the innermost panel sees the raw singularity.
    """

    n_panels: int = 40
    points_per_panel: int = 8
    refinement_ratio: float = 0.5

    def __post_init__(self) -> None:
        if self.n_panels < 2:
            raise ValueError("n_panels must be >= 2")
        if self.points_per_panel < 2:
            raise ValueError("points_per_panel must be >= 2")
        if not (0.0 < self.refinement_ratio < 1.0):
            raise ValueError("refinement_ratio must lie in (0, 1)")


def time_singular_nodes(
    spec: TimeQuadSpec,
    t_end: float,
    t_start: float = 0.0,
    extra_edges: Iterable[float] = (),
) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature nodes on [t_start, t_end], refined toward ``t_end``.

    ``extra_edges`` (e.g. switching times of a piecewise schedule) are merged
    into the panel edge set so piecewise-smooth integrands stay panelwise
    smooth.
    """
    if not t_end > t_start:
        raise ValueError("require t_end > t_start")
    length = t_end - t_start
    ratios = spec.refinement_ratio ** np.arange(1, spec.n_panels)
    # keep panel nodes representable strictly inside (t_start, t_end)
    ratios = ratios[ratios * length > 64.0 * np.finfo(float).eps * max(abs(t_end), length)]
    edges = np.concatenate(([t_start], t_end - length * ratios, [t_end]))
    extra = [e for e in extra_edges if t_start < e < t_end]
    if extra:
        edges = np.concatenate((edges, np.asarray(extra, dtype=float)))
    # very deep refinement collides with float spacing near t_end
    edges = np.unique(edges)
    return panel_gauss_nodes(edges, spec.points_per_panel)


def _evaluate(f: Callable, nodes: np.ndarray) -> np.ndarray:
    try:
        vals = np.asarray(f(nodes), dtype=float)
        if vals.shape != nodes.shape:
            raise TypeError
    except (TypeError, ValueError):
        vals = np.array([float(f(s)) for s in nodes])
    return vals


def integrate_time_singular(spec: TimeQuadSpec, t_end: float, h: Callable) -> float:
    """Integral of ``h`` over (0, t_end) with at worst an integrable
    singularity at ``s = t_end``."""
    nodes, weights = time_singular_nodes(spec, t_end)
    vals = _evaluate(h, nodes)
    if not np.all(np.isfinite(vals)):
        raise NonFiniteError("integrand evaluated to a non-finite value")
    return float(np.dot(vals, weights))


def _as_grid(domain: AngularDomain, grid) -> PolarGrid:
    if isinstance(grid, PolarGrid):
        return grid
    if isinstance(grid, GridSpec):
        return graded_polar_grid(domain, grid)
    raise TypeError("grid must be a GridSpec or PolarGrid")


def integrate_polar_values(
    grid: PolarGrid, values: np.ndarray, weight_exponent: float = 0.0
) -> float:
    """Midpoint sum of precomputed node values against |x|^weight_exponent."""
    r, _, w = grid.mesh()
    vals = np.asarray(values, dtype=float).ravel()
    if vals.shape != r.shape:
        raise ValueError("values must match the grid node count")
    if not np.all(np.isfinite(vals)):
        raise NonFiniteError("field evaluated to a non-finite value on the grid")
    if weight_exponent == 0.0:
        return float(np.sum(vals * w))
    return float(np.sum(vals * r**weight_exponent * w))


def integrate_polar_weighted(
    domain: AngularDomain,
    grid,
    f: Callable,
    weight_exponent: float = 0.0,
) -> float:
    """Integral of ``f(x) |x|^weight_exponent`` over the wedge.

    ``f`` may be vectorized over flat (r, theta) arrays, or accept a single
    :class:`PolarPoint`; the vectorized form is tried first.
    """
    g = _as_grid(domain, grid)
    r, th, _ = g.mesh()
    try:
        vals = np.asarray(f(r, th), dtype=float)
        if vals.shape != r.shape:
            raise TypeError
    except (TypeError, ValueError):
        vals = np.array([float(f(PolarPoint(ri, ti))) for ri, ti in zip(r, th)])
    return integrate_polar_values(g, vals, weight_exponent)


def aitken_extrapolate(values: Iterable[float]) -> float:
    """Aitken delta-squared estimate of the limit of a cutoff sequence.

    Used for reporting Richardson-style limits of inner-cutoff refinements
    alongside the raw values; falls back to the last value when the
    acceleration is ill-conditioned.
    """
    v = np.asarray(list(values), dtype=float)
    if v.size < 3:
        return float(v[-1])
    x0, x1, x2 = v[-3], v[-2], v[-1]
    denom = x2 - 2.0 * x1 + x0
    if denom == 0.0 or not np.isfinite(denom):
        return float(x2)
    return float(x2 - (x2 - x1) ** 2 / denom)
