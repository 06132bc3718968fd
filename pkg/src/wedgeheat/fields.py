"""Weighted L_p / first-order Sobolev norms and weight-parameter arithmetic.

The zeroth-order norm is ``(int_D |f|^p |x|^(theta-2) dx)^(1/p)``; the
first-order norm adds the gradient terms with one extra power of the vertex
distance, ``sum_i || r f_{x^i} ||``.  The component-sum gradient convention
is the default; a Euclidean-magnitude mode exists behind a flag.

Parameter arithmetic: for a wedge of angle kappa0 the admissible weight
window is ``p (1 - pi/kappa0) < theta < p (1 + pi/kappa0)``; the derived
exponent is ``mu = 1 + (theta - 2)/p`` with window ``2(1 - 1/p) -/+
pi/kappa0``, and dual parameters satisfy ``1/p + 1/p' = 1`` and
``theta/p + theta'/p' = 2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import AngularDomain, PolarGrid
from .quadrature import integrate_polar_values

__all__ = [
    "WeightParams",
    "DerivedParams",
    "theta_admissible_range",
    "mu_range",
    "grisvard_lower_bound",
    "weighted_lp_norm",
    "k1_norm",
    "polar_gradient",
    "cartesian_gradient_components",
]


@dataclass(frozen=True)
class WeightParams:
    """Integrability exponent p and vertex-weight parameter theta."""

    p: float
    theta: float

    def __post_init__(self) -> None:
        if self.p <= 1.0:
            raise ValueError(f"p must exceed 1, got {self.p}")

    def require_stochastic(self) -> None:
        if self.p < 2.0:
            raise ValueError("stochastic estimates require p >= 2")


@dataclass(frozen=True)
class DerivedParams:
    """mu = 1 + (theta-2)/p together with the dual pair (p', theta')."""

    mu: float
    p_dual: float
    theta_dual: float

    @classmethod
    def from_params(cls, params: WeightParams) -> "DerivedParams":
        p, theta = params.p, params.theta
        p_dual = p / (p - 1.0)
        theta_dual = p_dual * (2.0 - theta / p)
        return cls(mu=1.0 + (theta - 2.0) / p, p_dual=p_dual, theta_dual=theta_dual)

    def dual_params(self) -> WeightParams:
        return WeightParams(p=self.p_dual, theta=self.theta_dual)


def theta_admissible_range(p: float, domain: AngularDomain) -> tuple[float, float]:
    """Open interval (p(1 - pi/kappa0), p(1 + pi/kappa0))."""
    if p <= 1.0:
        raise ValueError(f"p must exceed 1, got {p}")
    c = domain.critical_exponent
    return (p * (1.0 - c), p * (1.0 + c))


def mu_range(p: float, domain: AngularDomain) -> tuple[float, float]:
    """Open interval 2(1 - 1/p) -/+ pi/kappa0 for the derived exponent mu.

    The affine map theta -> mu = 1 + (theta-2)/p carries
    ``theta_admissible_range`` onto this interval exactly.
    """
    if p <= 1.0:
        raise ValueError(f"p must exceed 1, got {p}")
    c = domain.critical_exponent
    mid = 2.0 * (1.0 - 1.0 / p)
    return (mid - c, mid + c)


def grisvard_lower_bound(p: float, domain: AngularDomain) -> float:
    """Lower weight bound p(1 - pi/kappa0) from the polygonal-regularity
    restriction ``1 + (2-theta)/p < 2/p + pi/kappa0``.

    The two inequality forms are equivalent; this is asserted by evaluation
    on probes around the bound before returning.
    """
    if p <= 1.0:
        raise ValueError(f"p must exceed 1, got {p}")
    c = domain.critical_exponent
    bound = p * (1.0 - c)
    for theta in (bound - 1.0, bound - 1e-9, bound + 1e-9, bound + 1.0):
        lhs_form = 1.0 + (2.0 - theta) / p < 2.0 / p + c
        rhs_form = theta > bound
        if lhs_form != rhs_form:  # pragma: no cover - algebraic identity
            raise AssertionError("inequality forms disagree; check arithmetic")
    return bound


def _values_on_grid(field, grid: PolarGrid) -> np.ndarray:
    if callable(field):
        r2, th2 = np.meshgrid(grid.r, grid.theta, indexing="ij")
        return np.asarray(field(r2, th2), dtype=float)
    vals = np.asarray(field, dtype=float)
    if vals.shape != (grid.n_radial, grid.n_angular):
        raise ValueError(
            f"field shape {vals.shape} does not match grid "
            f"({grid.n_radial}, {grid.n_angular})"
        )
    return vals


def weighted_lp_norm(field, params: WeightParams, grid: PolarGrid) -> float:
    """Norm of L_p with weight |x|^(theta-2): callable or (nr, nth) array."""
    vals = _values_on_grid(field, grid)
    integral = integrate_polar_values(
        grid, np.abs(vals) ** params.p, params.theta - 2.0
    )
    return float(integral ** (1.0 / params.p))


def _nonuniform_diff(values: np.ndarray, coords: np.ndarray, axis: int) -> np.ndarray:
    """Second-order finite differences on a nonuniform 1D grid."""
    v = np.moveaxis(values, axis, 0)
    x = coords
    out = np.empty_like(v)
    hm = x[1:-1] - x[:-2]
    hp = x[2:] - x[1:-1]
    # interior: standard 3-point nonuniform stencil
    out[1:-1] = (
        hm[:, None] ** 2 * v[2:]
        - hp[:, None] ** 2 * v[:-2]
        + (hp[:, None] ** 2 - hm[:, None] ** 2) * v[1:-1]
    ) / (hm[:, None] * hp[:, None] * (hm[:, None] + hp[:, None]))
    # one-sided second-order ends
    h0, h1 = x[1] - x[0], x[2] - x[1]
    out[0] = (
        -(2.0 * h0 + h1) / (h0 * (h0 + h1)) * v[0]
        + (h0 + h1) / (h0 * h1) * v[1]
        - h0 / (h1 * (h0 + h1)) * v[2]
    )
    hn, hn1 = x[-1] - x[-2], x[-2] - x[-3]
    out[-1] = (
        (2.0 * hn + hn1) / (hn * (hn + hn1)) * v[-1]
        - (hn + hn1) / (hn * hn1) * v[-2]
        + hn / (hn1 * (hn + hn1)) * v[-3]
    )
    return np.moveaxis(out, 0, axis)


def polar_gradient(values: np.ndarray, grid: PolarGrid) -> tuple[np.ndarray, np.ndarray]:
    """(df/dr, (1/r) df/dtheta) by centered finite differences on the grid."""
    vals = np.asarray(values, dtype=float)
    if vals.shape != (grid.n_radial, grid.n_angular):
        raise ValueError("values must be shaped (n_radial, n_angular)")
    df_dr = _nonuniform_diff(vals, grid.r, axis=0)
    df_dth = _nonuniform_diff(vals, grid.theta, axis=1)
    return df_dr, df_dth / grid.r[:, None]


def cartesian_gradient_components(
    values: np.ndarray, grid: PolarGrid
) -> tuple[np.ndarray, np.ndarray]:
    """Cartesian (f_x1, f_x2) from the polar finite-difference gradient."""
    df_dr, df_dth_r = polar_gradient(values, grid)
    cos_t = np.cos(grid.theta)[None, :]
    sin_t = np.sin(grid.theta)[None, :]
    return (cos_t * df_dr - sin_t * df_dth_r, sin_t * df_dr + cos_t * df_dth_r)


def k1_norm(
    field,
    params: WeightParams,
    grid: PolarGrid,
    gradient=None,
    euclidean: bool = False,
) -> float:
    """First-order weighted Sobolev norm.

    Default is the component-sum convention ``||f|| + ||r f_x1|| + ||r f_x2||``;
    with ``euclidean=True`` the gradient enters through its magnitude instead.
    ``gradient`` may supply analytic Cartesian components (pair of arrays or
    callables); otherwise centered finite differences on the grid are used.
    """
    vals = _values_on_grid(field, grid)
    if gradient is None:
        gx, gy = cartesian_gradient_components(vals, grid)
    else:
        gx, gy = (_values_on_grid(g, grid) for g in gradient)
    r_col = grid.r[:, None]
    zeroth = weighted_lp_norm(vals, params, grid)
    if euclidean:
        return zeroth + weighted_lp_norm(
            r_col * np.hypot(gx, gy), params, grid
        )
    return (
        zeroth
        + weighted_lp_norm(r_col * gx, params, grid)
        + weighted_lp_norm(r_col * gy, params, grid)
    )
