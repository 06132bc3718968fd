"""Dirichlet heat kernel on the wedge via its eigenfunction series.

The kernel is evaluated as

    G(t, x, y) = (1/(kappa0 t)) * exp(-(r-rho)^2/(4t))
                 * sum_{k>=1} Itilde_{k pi/kappa0}(r rho / (2t))
                              * sin(k pi th/kappa0) * sin(k pi ph/kappa0),

the classical separation-of-variables expansion with Dirichlet angular
eigenfunctions; at kappa0 = pi it resums to the two-image Gaussian formula
through the Bessel generating function, which is what the image oracles in
this module check.  The exponential prefactor is carried against the scaled
Bessel values so the pairing never overflows: the combined exponent is
``-(r-rho)^2/(4t)``.

For very large series arguments ``z = r rho/(2t)`` the number of terms
needed grows like ``sqrt(z)``; past the configured cap the evaluator raises
:class:`NonConvergentError` rather than silently approximating.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NonConvergentError
from .geometry import AngularDomain, GridSpec, PolarGrid, PolarPoint, graded_polar_grid
from .special import DEFAULT_BESSEL_ACCURACY, BesselAccuracy, bessel_i_scaled

__all__ = [
    "KernelConfig",
    "heat_kernel",
    "heat_kernel_array",
    "heat_kernel_grid",
    "image_kernel_oracle",
    "kernel_mass",
    "series_argument_cap",
]

_LOG_TINY = math.log(1e-300)


@dataclass(frozen=True)
class KernelConfig:
    """Series truncation and Bessel accuracy controls for one domain."""

    domain: AngularDomain
    series_rel_tol: float = 1e-10
    max_series_terms: int = 400
    bessel_acc: BesselAccuracy = field(default_factory=BesselAccuracy)

    def __post_init__(self) -> None:
        if not (1e-14 <= self.series_rel_tol <= 1e-6):
            raise ValueError("series_rel_tol must lie in [1e-14, 1e-6]")
        if self.max_series_terms < 20:
            raise ValueError("max_series_terms must be >= 20")


def series_argument_cap(acc: BesselAccuracy = DEFAULT_BESSEL_ACCURACY) -> float:
    """Largest Bessel argument evaluable for every order the series needs.

    The worst order at argument z is nu ~ sqrt(2 z), which sits exactly on
    the asymptotic-validity boundary and must go through the power series;
    the cap is the largest z whose power series at that order still fits in
    ``acc.max_terms`` terms.  Beyond the cap the kernel refuses instead of
    silently approximating.
    """
    from .special import _series_terms_needed

    lo, hi = 10.0, 4.0 * acc.max_terms
    if _series_terms_needed(math.sqrt(2.0 * hi), hi) <= acc.max_terms:
        return hi
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if _series_terms_needed(math.sqrt(2.0 * mid), mid) <= acc.max_terms:
            lo = mid
        else:
            hi = mid
    return lo


def _validate_angles(domain: AngularDomain, theta: np.ndarray, name: str) -> None:
    if np.any(theta < -1e-15) or np.any(theta > domain.kappa0 + 1e-15):
        raise ValueError(f"{name} angle outside the closed wedge [0, kappa0]")


def heat_kernel_array(
    cfg: KernelConfig,
    t,
    x_r,
    x_theta,
    y_r,
    y_theta,
    return_log: bool = False,
):
    """Vectorized kernel over broadcastable (t, x, y) arrays.

    With ``return_log=True`` returns ``log G`` (``-inf`` where G vanishes),
    which is what sup-ratio fits use to avoid underflow noise.
    """
    t_arr, xr, xth, yr, yth = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (t, x_r, x_theta, y_r, y_theta))
    )
    if np.any(t_arr <= 0.0):
        raise ValueError("time must be positive")
    if np.any(xr < 0.0) or np.any(yr < 0.0):
        raise ValueError("radii must be nonnegative")
    kappa0 = cfg.domain.kappa0
    _validate_angles(cfg.domain, xth, "source")
    _validate_angles(cfg.domain, yth, "target")

    shape = t_arr.shape
    t_flat = t_arr.ravel()
    xr_f, xth_f = xr.ravel(), xth.ravel()
    yr_f, yth_f = yr.ravel(), yth.ravel()

    # Dirichlet rays and the vertex produce exact zeros.
    on_boundary = (
        (xth_f <= 0.0)
        | (xth_f >= kappa0)
        | (yth_f <= 0.0)
        | (yth_f >= kappa0)
        | (xr_f == 0.0)
        | (yr_f == 0.0)
    )
    active = ~on_boundary

    series = np.zeros(t_flat.shape)
    if np.any(active):
        z = xr_f[active] * yr_f[active] / (2.0 * t_flat[active])
        z_cap = series_argument_cap(cfg.bessel_acc)
        z_max = float(np.max(z))
        if z_max > z_cap:
            raise NonConvergentError(
                f"series argument r*rho/(2t) = {z_max:.3g} exceeds the "
                f"evaluable cap {z_cap:.3g}; decrease radii or increase time"
            )
        beta = cfg.domain.critical_exponent
        ax = xth_f[active] * beta
        ay = yth_f[active] * beta
        s = np.zeros_like(z)
        peak = np.zeros_like(z)
        run = np.zeros(z.shape, dtype=np.int64)
        converged = False
        for k in range(1, cfg.max_series_terms + 1):
            nu = k * beta
            bess = bessel_i_scaled(nu, z, cfg.bessel_acc)
            # the sine product is grouped first so swapping x and y gives a
            # bitwise-identical term (float multiplication is commutative
            # but not associative); symmetry then holds exactly
            s += bess * (np.sin(k * ax) * np.sin(k * ay))
            np.maximum(peak, bess, out=peak)
            # |term| <= Itilde, so three consecutive small Bessel factors
            # certify truncation regardless of the sine signs; terms 1e-16
            # below the peak term sit under the roundoff floor of the sum
            # already (angular cancellation cannot be resolved past that)
            floor = np.maximum(
                cfg.series_rel_tol * np.abs(s), np.maximum(1e-16 * peak, 1e-300)
            )
            run = np.where(bess <= floor, run + 1, 0)
            if bool(np.all(run >= 3)):
                converged = True
                break
            # analytic tail bound (z e / (2 nu))^nu once nu exceeds z
            if nu > z_max:
                log_bound = nu * (math.log(z_max * math.e / 2.0) - math.log(nu))
                if log_bound < math.log(float(np.min(floor))):
                    converged = True
                    break
        if not converged:
            raise NonConvergentError(
                f"kernel series did not converge within {cfg.max_series_terms} terms "
                f"(max argument {z_max:.3g})"
            )
        series[active] = s

    log_pref = np.full(t_flat.shape, -np.inf)
    log_pref[active] = -((xr_f[active] - yr_f[active]) ** 2) / (
        4.0 * t_flat[active]
    ) - np.log(kappa0 * t_flat[active])

    if return_log:
        out = np.full(t_flat.shape, -np.inf)
        pos = series > 0.0
        out[pos] = np.log(series[pos]) + log_pref[pos]
        return out.reshape(shape)

    out = np.where(np.isfinite(log_pref), np.exp(log_pref) * series, 0.0)
    return out.reshape(shape)


def heat_kernel(cfg: KernelConfig, t: float, x: PolarPoint, y: PolarPoint) -> float:
    """G(t, x, y) for a single evaluation point; see module docstring."""
    val = heat_kernel_array(cfg, t, x.r, x.theta, y.r, y.theta)
    return float(val)


def heat_kernel_grid(
    cfg: KernelConfig, t: float, x: PolarPoint, grid: PolarGrid, return_log=False
):
    """Kernel values y -> G(t, x, y) over all nodes of a polar grid (flat)."""
    r, th, _ = grid.mesh()
    return heat_kernel_array(cfg, t, x.r, x.theta, r, th, return_log=return_log)


def _free_kernel(t: float, dx: float, dy: float) -> float:
    return math.exp(-(dx * dx + dy * dy) / (4.0 * t)) / (4.0 * math.pi * t)


def image_kernel_oracle(
    kappa0: float, t: float, x: PolarPoint, y: PolarPoint
) -> float:
    """Method-of-images kernel for the half-plane and the quadrant.

    Half-plane (kappa0 = pi): one reflection across the boundary line;
    quadrant (kappa0 = pi/2): alternating sum over the four reflections.
    The signed sums are evaluated in the exactly factored form

        half-plane:  K(t, x-y) * (1 - exp(-x2 y2 / t))
        quadrant:    K(t, x-y) * (1 - exp(-x1 y1 / t)) (1 - exp(-x2 y2 / t))

    via ``expm1`` so vertex-close pairs do not lose precision to the
    alternating cancellation.
    """
    if t <= 0.0:
        raise ValueError("time must be positive")
    x1, x2 = x.r * math.cos(x.theta), x.r * math.sin(x.theta)
    y1, y2 = y.r * math.cos(y.theta), y.r * math.sin(y.theta)
    free = _free_kernel(t, x1 - y1, x2 - y2)
    if math.isclose(kappa0, math.pi, rel_tol=1e-12):
        return free * (-math.expm1(-x2 * y2 / t))
    if math.isclose(kappa0, math.pi / 2.0, rel_tol=1e-12):
        return free * math.expm1(-x1 * y1 / t) * math.expm1(-x2 * y2 / t)
    raise ValueError("image oracle exists only for kappa0 in {pi, pi/2}")


def kernel_mass(
    cfg: KernelConfig, t: float, x: PolarPoint, quad: GridSpec
) -> float:
    """Survival mass integral of G(t, x, .) over the wedge.

    The grid must reach far enough that the Gaussian tail beyond ``r_max``
    is below ~1e-12, i.e. ``r_max >= x.r + 10.5 sqrt(t)``.
    """
    if quad.r_max < x.r + 10.5 * math.sqrt(t):
        raise ValueError(
            "quadrature grid too short for the Gaussian tail: need "
            f"r_max >= {x.r + 10.5 * math.sqrt(t):.4g}"
        )
    grid = graded_polar_grid(cfg.domain, quad)
    vals = heat_kernel_grid(cfg, t, x, grid)
    _, _, w = grid.mesh()
    return float(np.dot(vals, w))
