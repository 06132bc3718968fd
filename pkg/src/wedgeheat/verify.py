"""Property verifiers: kernel identities, the Green-function bound fit,
vertex decay, and the two factor integrals behind the main estimate.

The Green-function bound under test is

    |G(t,x,y)| <= (N/t) exp(-sigma |x-y|^2 / t) R_x^lambda R_y^lambda,
    R_x = |x| / (|x| + |y| + sqrt(t)),   R_y = |y| / (|x| + |y| + sqrt(t)),

valid for every 0 < lambda < pi/kappa0 with some sigma > 0.  Boundedness is
operationalized as decade stability of the per-decade sup-ratio profile:
a literal sup over the continuum is not computable, so the profile over
joint radius decades (binned by sqrt(|x| |y|)) must not grow toward the
vertex.  For lambda above the critical exponent the leading series term
G ~ (r rho)^(pi/kappa0) forces the profile to grow like
(r rho)^(pi/kappa0 - lambda), which the fit reports as divergence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import AngularDomain, GridSpec, PolarPoint, graded_polar_grid
from .kernel import (
    KernelConfig,
    heat_kernel,
    heat_kernel_array,
    heat_kernel_grid,
    series_argument_cap,
)
from .quadrature import gauss_legendre, panel_gauss_nodes

__all__ = [
    "CkResult",
    "GreenBoundFit",
    "ProofIntegralParams",
    "SupIntegralResult",
    "TimeTailResult",
    "VertexDecayResult",
    "check_chapman_kolmogorov",
    "check_dilation",
    "fit_green_bound",
    "green_bound_cloud",
    "sup_integral_b",
    "verify_sup_integral_b",
    "verify_time_tail_integral",
    "vertex_decay_exponent",
]

_UNDERFLOW_LOG = math.log(1e-250)


@dataclass(frozen=True)
class CkResult:
    """Relative Chapman-Kolmogorov residual, with an underflow marker for
    configurations where both sides sit below 1e-300."""

    residual: float
    underflow: bool


def check_chapman_kolmogorov(
    cfg: KernelConfig,
    t: float,
    s: float,
    x: PolarPoint,
    y: PolarPoint,
    quad: GridSpec,
) -> CkResult:
    """Residual of int_D G(t,x,z) G(s,z,y) dz = G(t+s,x,y)."""
    if t <= 0.0 or s <= 0.0:
        raise ValueError("both times must be positive")
    grid = graded_polar_grid(cfg.domain, quad)
    gx = heat_kernel_grid(cfg, t, x, grid)
    gy = heat_kernel_grid(cfg, s, y, grid)
    _, _, w = grid.mesh()
    lhs = float(np.dot(gx * gy, w))
    rhs = heat_kernel(cfg, t + s, x, y)
    if lhs < 1e-300 and rhs < 1e-300:
        return CkResult(residual=0.0, underflow=True)
    return CkResult(residual=abs(lhs - rhs) / rhs, underflow=False)


def check_dilation(
    cfg: KernelConfig, a: float, t: float, x: PolarPoint, y: PolarPoint
) -> float:
    """Residual of the exact cone scaling a^2 G(a^2 t, a x, a y) = G(t,x,y)."""
    if a <= 0.0:
        raise ValueError("a must be positive")
    base = heat_kernel(cfg, t, x, y)
    scaled = (
        a
        * a
        * heat_kernel(
            cfg,
            a * a * t,
            PolarPoint(a * x.r, x.theta),
            PolarPoint(a * y.r, y.theta),
        )
    )
    return abs(scaled - base) / base


def green_bound_cloud(
    domain: AngularDomain,
    radius_decades: tuple = (-6, 2),
    t_decades: tuple = (-4, 2),
    radii_per_decade: int = 2,
    n_t: int = 7,
    angle_fractions: tuple = (0.18, 0.5, 0.82),
    z_cap: float | None = None,
    cancel_cap: float = 25.0,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Sample cloud (t, x_r, x_th, y_r, y_th) for the bound fit.

    Covers radii log-spaced over ``radius_decades`` and times over
    ``t_decades``; pairs combine matched radii (both points in the same
    decade, the regime that exposes the vertex exponent) with mixed radii.
    Pairs whose series argument exceeds the evaluable cap, or whose angular
    cancellation ``z (1 - cos dth)`` exceeds ``cancel_cap`` (kernel value
    below the float64 cancellation floor; such ratios are exponentially
    suppressed for every sigma below the free Gaussian rate), are excluded.
    """
    lo, hi = radius_decades
    radii = np.logspace(lo, hi, (hi - lo) * radii_per_decade + 1)
    times = np.logspace(t_decades[0], t_decades[1], n_t)
    angles = np.array(angle_fractions) * domain.kappa0
    cap = z_cap if z_cap is not None else 0.75 * series_argument_cap()
    rows = []
    for t in times:
        for i, rx in enumerate(radii):
            for ry in radii[i:]:
                z = rx * ry / (2.0 * t)
                if z > cap:
                    continue
                for ax in angles:
                    for ay in (angles[0], angles[1]):
                        if z * (1.0 - math.cos(ax - ay)) > cancel_cap:
                            continue
                        rows.append((t, rx, ax, ry, ay))
    arr = np.asarray(rows, dtype=float)
    return arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], arr[:, 4]


@dataclass(frozen=True)
class GreenBoundFit:
    """Result of the sup-ratio fit at one lambda.

    ``profile`` lists (joint radius scale, max ratio) per decade at the
    selected sigma; ``growth_two_decades`` is the smallest-decade maximum
    over the maximum two decades up; ``profile_slope`` is the log-log slope
    of the profile over the vertex-side decades.
    """

    lam: float
    sigma: float
    sup_ratio: float
    sample_size: int
    profile: tuple
    verdict: str  # "bounded" or "unbounded"
    growth_two_decades: float
    profile_slope: float
    excluded_underflow: int

    def __post_init__(self) -> None:
        if not (0.0 < self.sigma <= 0.25):
            raise ValueError("sigma must lie in (0, 1/4]")


def _profile_from_logs(
    log_ratio: np.ndarray, scale: np.ndarray
) -> tuple[tuple, float, float]:
    decades = np.floor(np.log10(scale)).astype(int)
    profile = []
    for d in np.unique(decades):
        sel = decades == d
        profile.append((10.0 ** (d + 0.5), float(np.max(log_ratio[sel]))))
    profile.sort()
    logs = np.array([v for _, v in profile])
    growth = math.exp(logs[0] - logs[2]) if len(profile) >= 3 else 1.0
    n_fit = min(4, len(profile))
    xs = np.log10([s for s, _ in profile[:n_fit]])
    slope = float(np.polyfit(xs, logs[:n_fit] / math.log(10.0), 1)[0])
    return tuple((s, math.exp(v)) for s, v in profile), growth, slope


def fit_green_bound(
    cfg: KernelConfig,
    lam: float,
    sample_cloud=None,
    sigma_grid: tuple = (0.05, 0.10, 0.15, 0.20, 0.25),
) -> GreenBoundFit:
    """Fit the largest stable Gaussian rate sigma for the bound at ``lam``.

    A sigma is stable when the profile does not grow toward the vertex
    between the two smallest decades (factor < 2) and its sup does not jump
    by more than 25x over the previous sigma (which flags the free-rate
    boundary sigma = 1/4, where far pairs dominate spuriously).  If no
    sigma is stable the verdict is "unbounded" and the profile is reported
    at the smallest sigma.
    """
    if lam < 0.0:
        raise ValueError("lambda must be nonnegative")
    cloud = sample_cloud if sample_cloud is not None else green_bound_cloud(cfg.domain)
    t, xr, xth, yr, yth = cloud
    log_g = heat_kernel_array(cfg, t, xr, xth, yr, yth, return_log=True)

    x1, x2 = xr * np.cos(xth), xr * np.sin(xth)
    y1, y2 = yr * np.cos(yth), yr * np.sin(yth)
    dist2 = (x1 - y1) ** 2 + (x2 - y2) ** 2
    denom = xr + yr + np.sqrt(t)
    log_rx = np.log(xr) - np.log(denom)
    log_ry = np.log(yr) - np.log(denom)
    scale = np.sqrt(xr * yr)
    # the decade profile isolates the joint vertex approach: near-diagonal
    # pairs only, so the Gaussian-rate boost of very unequal pairs cannot
    # mask the vertex exponent (those pairs still enter the sup)
    diagonal = (np.abs(np.log10(xr) - np.log10(yr)) <= 0.51) & (xth == yth)

    chosen = None
    prev_sup = None
    profiles = {}
    for sigma in sigma_grid:
        log_ratio = log_g + np.log(t) + sigma * dist2 / t - lam * (log_rx + log_ry)
        keep = np.isfinite(log_ratio)
        # spec underflow policy: drop pairs where numerator and denominator
        # both sit under 1e-250
        log_num = log_g + np.log(t) + sigma * dist2 / t
        log_den = lam * (log_rx + log_ry)
        under = (log_num < _UNDERFLOW_LOG) & (log_den < _UNDERFLOW_LOG)
        keep &= ~under
        if not np.any(keep & diagonal):
            continue
        prof, growth, slope = _profile_from_logs(
            log_ratio[keep & diagonal], scale[keep & diagonal]
        )
        sup = float(np.exp(np.max(log_ratio[keep])))
        profiles[sigma] = (prof, growth, slope, sup, int(np.sum(under)), int(np.sum(keep)))
        jump = prev_sup is not None and sup > 25.0 * prev_sup
        vertex_growth = prof[0][1] / prof[1][1] if len(prof) >= 2 else 1.0
        if vertex_growth < 2.0 and not jump:
            chosen = sigma
        prev_sup = sup

    if chosen is not None:
        prof, growth, slope, sup, n_under, n_keep = profiles[chosen]
        return GreenBoundFit(
            lam=lam,
            sigma=chosen,
            sup_ratio=sup,
            sample_size=n_keep,
            profile=prof,
            verdict="bounded",
            growth_two_decades=growth,
            profile_slope=slope,
            excluded_underflow=n_under,
        )
    sigma0 = sigma_grid[0]
    prof, growth, slope, sup, n_under, n_keep = profiles[sigma0]
    return GreenBoundFit(
        lam=lam,
        sigma=sigma0,
        sup_ratio=sup,
        sample_size=n_keep,
        profile=prof,
        verdict="unbounded",
        growth_two_decades=growth,
        profile_slope=slope,
        excluded_underflow=n_under,
    )


@dataclass(frozen=True)
class VertexDecayResult:
    slope: float
    intercept: float
    underflow: bool


def vertex_decay_exponent(
    cfg: KernelConfig, t: float, y0: PolarPoint, r_samples
) -> VertexDecayResult:
    """Least-squares slope of log G(t, (r, kappa0/2), y0) against log r."""
    r = np.asarray(r_samples, dtype=float)
    if r.size < 3:
        raise ValueError("need at least three radii")
    th = 0.5 * cfg.domain.kappa0
    logs = heat_kernel_array(
        cfg, t, r, np.full_like(r, th), y0.r, y0.theta, return_log=True
    )
    underflow = bool(np.any(logs < math.log(1e-250)))
    slope, intercept = np.polyfit(np.log(r), logs, 1)
    return VertexDecayResult(float(slope), float(intercept), underflow)


@dataclass(frozen=True)
class ProofIntegralParams:
    """Holder-split parameters used by the two proof-integral factors.

    Constructed from (p, theta, lambda), the exponents satisfy
    ``0 < alpha < mu + lambda - 2/p'`` and ``0 < beta < -mu + lambda + 2/p'``
    with ``mu = 1 + (theta-2)/p``; the constructor proves both by
    evaluation.  The Gaussian sup-integral factor runs at ``b = alpha p -
    2`` and the time tail at exponent ``beta p + 2``.
    """

    b: float
    beta_prime: float | None
    alpha: float
    beta: float
    p: float

    def __post_init__(self) -> None:
        if self.b <= -2.0:
            raise ValueError("b must exceed -2")
        if self.beta_prime is not None and not (0.0 < self.beta_prime < 2.0):
            raise ValueError("beta_prime must lie in (0, 2)")
        if self.alpha <= 0.0 or self.beta <= 0.0:
            raise ValueError("alpha and beta must be positive")
        if self.p < 2.0:
            raise ValueError("p must be >= 2")

    @property
    def time_tail_exponent(self) -> float:
        return self.beta * self.p + 2.0

    @classmethod
    def from_weight(
        cls,
        p: float,
        theta: float,
        lam: float,
        alpha: float | None = None,
        beta: float | None = None,
    ) -> "ProofIntegralParams":
        mu = 1.0 + (theta - 2.0) / p
        two_over_pdual = 2.0 * (1.0 - 1.0 / p)
        alpha_hi = mu + lam - two_over_pdual
        beta_hi = -mu + lam + two_over_pdual
        if alpha_hi <= 0.0 or beta_hi <= 0.0:
            raise ValueError(
                "empty admissible window: require "
                "2(1-1/p) - lambda < mu < 2(1-1/p) + lambda"
            )
        a = 0.5 * alpha_hi if alpha is None else alpha
        bta = 0.5 * beta_hi if beta is None else beta
        if not (0.0 < a < alpha_hi) or not (0.0 < bta < beta_hi):
            raise ValueError("alpha/beta violate the admissible window")
        b = a * p - 2.0
        beta_prime = -b if -2.0 < b < 0.0 else None
        return cls(b=b, beta_prime=beta_prime, alpha=a, beta=bta, p=p)


@dataclass(frozen=True)
class SupIntegralResult:
    """Max of the Gaussian-weighted ratio integral over the sample set."""

    b: float
    max_value: float
    argmax: tuple
    values: tuple
    divergent: bool
    refinement: tuple


def _sup_integrand_value(
    b: float, c: float, x_norm: float, inner_cutoff: float, n_radial: int, n_angular: int
) -> float:
    """One value of int exp(-|z|^2) (|x - c z| / (|x| + |x - c z| + c))^b dz.

    Substituting w = x - c z turns the singular factor into |w|^b centered
    at the origin of a polar grid (rotation invariance in x is then exact,
    matching the rotation-invariance reduction of the target integral).
    For a far singularity (|x| > 6c) the Gaussian never sees it and a
    tensor Gauss rule around the Gaussian center is used instead.
    """
    if c <= 0.0:
        raise ValueError("c must be positive")
    if x_norm > 6.0 * c:
        # Gaussian-centered: integrand smooth within the e^{-36} shell
        xg, wg = gauss_legendre(48)
        u = 6.0 * xg
        h = 6.0 * wg
        U1, U2 = np.meshgrid(u, u, indexing="ij")
        W = np.outer(h, h) * np.exp(-(U1**2) - U2**2)
        w1 = x_norm - c * U1
        w2 = -c * U2
        wn = np.hypot(w1, w2)
        vals = (wn / (x_norm + wn + c)) ** b
        return float(np.sum(vals * W))
    # singularity-centered polar rule in w
    r_hi = x_norm + 9.0 * c
    n_seg = max(8, n_radial // 8)
    edges = np.concatenate(
        (np.geomspace(inner_cutoff, min(c, r_hi) * 0.5, n_seg),
         np.linspace(min(c, r_hi) * 0.5, r_hi, n_radial // 2)[1:])
    )
    r_nodes, r_w = panel_gauss_nodes(edges, 6)
    phi = (np.arange(n_angular) + 0.5) * (2.0 * math.pi / n_angular)
    dphi = 2.0 * math.pi / n_angular
    # angle measured from the direction of x
    w1 = r_nodes[:, None] * np.cos(phi)[None, :]
    w2 = r_nodes[:, None] * np.sin(phi)[None, :]
    z2 = ((x_norm - w1) ** 2 + w2**2) / (c * c)
    gauss = np.exp(-z2)
    frac = (r_nodes[:, None] / (x_norm + r_nodes[:, None] + c)) ** b
    vals = gauss * frac * r_nodes[:, None]
    return float(np.sum(vals * r_w[:, None]) * dphi / (c * c))


def sup_integral_b(
    b: float,
    c_samples,
    x_samples,
    n_radial: int = 96,
    n_angular: int = 128,
    inner_cutoffs: tuple = (1e-3, 1e-5, 1e-7),
) -> SupIntegralResult:
    """Max over (c, x) samples of the Gaussian ratio integral at exponent b.

    ``x_samples`` may be radii or 2-vectors (only |x| matters; the integral
    is rotation invariant).  Divergence for b <= -2 is detected by growth
    across the inner-cutoff refinement at the most singular sample.
    """
    xs = []
    for x in x_samples:
        arr = np.atleast_1d(np.asarray(x, dtype=float))
        xs.append(float(np.linalg.norm(arr)) if arr.size > 1 else float(arr[0]))
    values = []
    argmax, best = None, -math.inf
    for c in c_samples:
        for xn in xs:
            v = _sup_integrand_value(b, float(c), xn, inner_cutoffs[0], n_radial, n_angular)
            values.append(v)
            if v > best:
                best, argmax = v, (float(c), xn)
    # refinement at the argmax (most singular configuration reached)
    refine = tuple(
        _sup_integrand_value(b, argmax[0], argmax[1], w_min, n_radial, n_angular)
        for w_min in inner_cutoffs
    )
    divergent = b <= -2.0 and refine[-1] > 1.5 * refine[0]
    max_value = refine[-1] if refine[-1] > best else best
    return SupIntegralResult(
        b=b,
        max_value=float(max_value),
        argmax=argmax,
        values=tuple(values),
        divergent=bool(divergent),
        refinement=refine,
    )


def verify_sup_integral_b(
    params: ProofIntegralParams, c_samples, x_samples, **kwargs
) -> SupIntegralResult:
    """Sup-integral check at the exponent carried by ``params``."""
    return sup_integral_b(params.b, c_samples, x_samples, **kwargs)


@dataclass(frozen=True)
class TimeTailResult:
    exponent: float
    value: float
    closed_form: float


def verify_time_tail_integral(exponent: float) -> TimeTailResult:
    """Quadrature of int_0^inf (1 + sqrt(tau))^(-e) dtau against the closed
    form 2 / ((e-1)(e-2)), valid for e > 2.

    Substituting u = sqrt(tau), then w = 1/(1+u) gives
    ``2 int_0^1 (1-w) w^(e-3) dw``; for e < 3 the additional substitution
    ``w = s^(1/(e-2))`` absorbs the endpoint singularity exactly.
    """
    e = float(exponent)
    if e <= 2.0:
        raise ValueError("exponent must exceed 2 (the integral diverges)")
    edges = np.concatenate(([0.0], np.geomspace(2.0**-40, 1.0, 44)))
    nodes, weights = panel_gauss_nodes(edges, 10)
    if e >= 3.0:
        vals = 2.0 * (1.0 - nodes) * nodes ** (e - 3.0)
    else:
        # w = s^(1/(e-2)):  2/(e-2) * int_0^1 (1 - s^(1/(e-2))) ds
        vals = 2.0 / (e - 2.0) * (1.0 - nodes ** (1.0 / (e - 2.0)))
    value = float(np.dot(vals, weights))
    closed = 2.0 / ((e - 1.0) * (e - 2.0))
    return TimeTailResult(exponent=e, value=value, closed_form=closed)
