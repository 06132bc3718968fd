"""Heat convolutions on the wedge and their weighted moments.

Deterministic convolution: ``v(t,x) = int_0^t int_D G(t-s,x,y) f(s,y) dy ds``.
Stochastic convolution: ``w(t,x) = sum_k int_0^t int_D G(t-s,x,y) g^k(s,y)
dy dW^k_s``; for deterministic ``g`` it is Gaussian and Ito's isometry gives

    Var w(t,x) = sum_k int_0^t ( int_D G(t-s,x,y) g^k(s,y) dy )^2 ds,

so weighted p-th moments reduce to ``E|Z|^p Var^{p/2}`` analytically; the
Monte Carlo sampler exists purely as a cross-check.

All shipped source/noise fields are separable single angular modes
``a(t) c r^gamma sin(k pi th / kappa0) taper(r)``, for which applying the
heat semigroup collapses to a single radial integral against the order
``k pi/kappa0`` scaled Bessel factor; the substitution ``rho = r + 2
sqrt(tau) u`` keeps that integral accurate uniformly down to tau -> 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NonConvergentError
from .geometry import AngularDomain, PolarGrid, PolarPoint
from .kernel import KernelConfig, heat_kernel_array, series_argument_cap
from .quadrature import (
    TimeQuadSpec,
    gauss_legendre,
    panel_gauss_nodes,
    time_singular_nodes,
)
from .special import bessel_i_scaled, gaussian_abs_moment
from .fields import WeightParams

__all__ = [
    "RadialProfile",
    "SourceSpec",
    "NoiseMode",
    "NoiseSpec",
    "CounterexampleSpec",
    "VarianceField",
    "MCResult",
    "radial_semigroup",
    "det_convolve",
    "det_convolve_separable",
    "variance_field",
    "lhs_weighted_moment",
    "rhs_g_norm",
    "counterexample_integral",
    "mc_sample_w",
]


def _smoothstep_down(u: np.ndarray) -> np.ndarray:
    """C^2 descending smoothstep on [0, 1]."""
    u = np.clip(u, 0.0, 1.0)
    return 1.0 - u**3 * (10.0 - 15.0 * u + 6.0 * u * u)


def _smoothstep_down_deriv(u, width):
    inside = (u > 0.0) & (u < 1.0)
    return np.where(inside, -30.0 * u**2 * (1.0 - u) ** 2 / width, 0.0)


@dataclass(frozen=True)
class RadialProfile:
    """Radial factor ``c * r**gamma`` tapered smoothly to zero on
    [taper_start, taper_end]."""

    gamma: float
    taper_start: float
    taper_end: float
    c: float = 1.0

    def __post_init__(self) -> None:
        if not (0.0 < self.taper_start < self.taper_end):
            raise ValueError("need 0 < taper_start < taper_end")

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        u = (r - self.taper_start) / (self.taper_end - self.taper_start)
        with np.errstate(divide="ignore", invalid="ignore"):
            power = np.where(r > 0.0, r**self.gamma, 0.0 if self.gamma > 0 else 1.0)
        return self.c * power * _smoothstep_down(u)

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        u = (r - self.taper_start) / (self.taper_end - self.taper_start)
        taper = _smoothstep_down(u)
        dtaper = _smoothstep_down_deriv(u, self.taper_end - self.taper_start)
        with np.errstate(divide="ignore", invalid="ignore"):
            power = np.where(r > 0.0, r**self.gamma, 0.0 if self.gamma > 0 else 1.0)
            dpower = np.where(r > 0.0, self.gamma * r ** (self.gamma - 1.0), 0.0)
        return self.c * (dpower * taper + power * dtaper)


_TIME_TAGS = ("const", "linear")


@dataclass(frozen=True)
class SourceSpec:
    """Separable deterministic forcing ``a(t) * profile(r) * sin(k pi th/kappa0)``."""

    profile: RadialProfile
    mode_k: int = 1
    time_tag: str = "const"

    def __post_init__(self) -> None:
        if self.mode_k < 1:
            raise ValueError("mode_k must be >= 1")
        if self.time_tag not in _TIME_TAGS:
            raise ValueError(f"time_tag must be one of {_TIME_TAGS}")

    def time_amp(self, s):
        s = np.asarray(s, dtype=float)
        return np.ones_like(s) if self.time_tag == "const" else s

    def as_callable(self, domain: AngularDomain):
        beta = domain.critical_exponent

        def f(s, r, theta):
            return self.time_amp(s) * self.profile(r) * np.sin(
                self.mode_k * beta * np.asarray(theta)
            )

        return f


@dataclass(frozen=True)
class NoiseMode:
    """One l2 noise direction: spatial profile times a piecewise-constant
    deterministic amplitude with finitely many switch times."""

    profile: RadialProfile
    mode_k: int = 1
    switch_times: tuple = (0.0, math.inf)
    amplitudes: tuple = (1.0,)

    def __post_init__(self) -> None:
        st = tuple(self.switch_times)
        if len(st) != len(self.amplitudes) + 1:
            raise ValueError("need len(switch_times) == len(amplitudes) + 1")
        if any(b <= a for a, b in zip(st, st[1:])):
            raise ValueError("switch_times must be strictly increasing")
        if self.mode_k < 1:
            raise ValueError("mode_k must be >= 1")

    def amp(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        for (a, b), amp in zip(
            zip(self.switch_times, self.switch_times[1:]), self.amplitudes
        ):
            out = np.where((s > a) & (s <= b), amp, out)
        return out

    def interior_switches(self, t_end: float):
        return tuple(s for s in self.switch_times if 0.0 < s < t_end)


@dataclass(frozen=True)
class NoiseSpec:
    """Finitely many independent noise modes (an l2-valued g)."""

    modes: tuple

    def __post_init__(self) -> None:
        if len(self.modes) == 0:
            object.__setattr__(self, "modes", ())

    @classmethod
    def single(cls, profile: RadialProfile, mode_k: int = 1) -> "NoiseSpec":
        return cls(modes=(NoiseMode(profile=profile, mode_k=mode_k),))


@dataclass(frozen=True)
class CounterexampleSpec:
    """Parameters of the sharp-threshold profile ``r^(pi/kappa0)
    sin(pi th/kappa0) beta_t`` integrated over D cap B_eps."""

    domain: AngularDomain
    T: float
    p: float
    theta: float
    epsilon: float
    delta_sequence: tuple

    def __post_init__(self) -> None:
        if self.T <= 0.0:
            raise ValueError("T must be positive")
        if self.p < 2.0:
            raise ValueError("p must be >= 2")
        if not (0.0 < self.epsilon <= 1.0):
            raise ValueError("epsilon must lie in (0, 1]")
        ds = tuple(self.delta_sequence)
        if len(ds) < 2 or any(b >= a for a, b in zip(ds, ds[1:])) or ds[-1] <= 0.0:
            raise ValueError("delta_sequence must be strictly decreasing and positive")

    @property
    def radial_exponent(self) -> float:
        """q = (pi/kappa0 - 1) p + theta; the integrand is r**(q-1)."""
        return (self.domain.critical_exponent - 1.0) * self.p + self.theta


def radial_semigroup(
    cfg: KernelConfig,
    mode_k: int,
    radial_fn,
    tau: float,
    r,
    n_quad: int = 64,
) -> np.ndarray:
    """Radial heat-semigroup factor of a single angular mode.

    For ``f = R(rho) sin(k pi ph / kappa0)`` the semigroup gives
    ``(e^{tau Lap} f)(r, th) = sin(k pi th/kappa0) * H(tau, r)`` with

        H(tau, r) = (1/(2 tau)) int_0^inf e^{-(r-rho)^2/(4 tau)}
                     Itilde_{k pi/kappa0}(r rho/(2 tau)) R(rho) rho d rho.

    Evaluated through ``rho = r + 2 sqrt(tau) u`` so the Gaussian window is
    resolved for every ``tau > 0``; at ``tau = 0`` the exact limit ``R(r)``
    is returned.
    """
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    if tau < 0.0:
        raise ValueError("tau must be nonnegative")
    if tau == 0.0:
        return np.asarray(radial_fn(r_arr), dtype=float)
    nu = mode_k * cfg.domain.critical_exponent
    sq = math.sqrt(tau)
    u_hi = np.full_like(r_arr, 8.0)
    u_lo = np.maximum(-8.0, -r_arr / (2.0 * sq))
    # split panels at the taper knots (images of the profile's C^2 kinks)
    # so each panel sees an analytic integrand
    knots = []
    if isinstance(radial_fn, RadialProfile):
        knots = [radial_fn.taper_start, radial_fn.taper_end]
    edges = [u_lo]
    for kn in sorted(knots):
        edges.append(np.clip((kn - r_arr) / (2.0 * sq), u_lo, u_hi))
    edges.append(u_hi)
    # 32 points resolve the e^{-u^2} window to ~1e-14 even when knot
    # panels clip away and a single panel carries the whole range
    xg, wg = gauss_legendre(max(n_quad // (len(edges) - 1), 32))
    u_parts, w_parts = [], []
    for e0, e1 in zip(edges, edges[1:]):
        mid = 0.5 * (e0 + e1)
        half = 0.5 * (e1 - e0)
        u_parts.append(mid[:, None] + half[:, None] * xg[None, :])
        w_parts.append(half[:, None] * wg[None, :])
    u = np.concatenate(u_parts, axis=1)
    w = np.concatenate(w_parts, axis=1)
    rho = r_arr[:, None] + 2.0 * sq * u
    np.clip(rho, 0.0, None, out=rho)
    z = r_arr[:, None] * rho / (2.0 * tau)
    bess = bessel_i_scaled(nu, z.ravel(), cfg.bessel_acc).reshape(z.shape)
    vals = np.exp(-(u * u)) * bess * np.asarray(radial_fn(rho), dtype=float) * rho
    return np.sum(vals * w, axis=1) / sq


def _merged_tau_nodes(spec: TimeQuadSpec, t: float, switches: tuple = ()):
    """Nodes on [0, t] in the tau = t - s variable, refined toward tau = 0.

    ``switches`` are s-coordinates of schedule jumps; they become panel
    edges so piecewise-constant amplitudes stay panelwise smooth.
    """
    nodes, weights = time_singular_nodes(spec, t_end=t, extra_edges=switches)
    # reflect so the refinement accumulates at tau = 0
    return t - nodes, weights


def det_convolve_separable(
    cfg: KernelConfig,
    src: SourceSpec,
    t: float,
    r,
    time_spec: TimeQuadSpec | None = None,
    n_quad: int = 64,
) -> np.ndarray:
    """Radial factor ``V(t, r)`` of the deterministic convolution of a
    separable source: ``v(t, (r, th)) = sin(k pi th/kappa0) V(t, r)``."""
    time_spec = time_spec or TimeQuadSpec()
    taus, weights = _merged_tau_nodes(time_spec, t)
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    acc = np.zeros_like(r_arr)
    amps = src.time_amp(t - taus)
    for tau, wt, amp in zip(taus, weights, amps):
        if amp == 0.0:
            continue
        acc += wt * amp * radial_semigroup(cfg, src.mode_k, src.profile, tau, r_arr, n_quad)
    return acc


def _boundary_distance(domain: AngularDomain, x: PolarPoint) -> float:
    ang = min(x.theta, domain.kappa0 - x.theta, 0.5 * math.pi)
    return x.r * math.sin(ang)


def det_convolve(
    cfg: KernelConfig,
    src,
    t: float,
    x: PolarPoint,
    quad: PolarGrid,
    time_spec: TimeQuadSpec | None = None,
) -> float:
    """Deterministic convolution value v(t, x).

    ``src`` is either a :class:`SourceSpec` (fast separable path) or a
    vectorized callable ``f(s, r, theta)``.  The general path splits the
    time integral at ``tau0``: below it the kernel is within 1e-5 of the
    free Gaussian at interior points and a local Hermite-type rule is used;
    above it the wedge kernel is integrated over the supplied grid, whose
    cells near ``x`` must resolve ``sqrt(tau0)``.
    """
    if t <= 0.0:
        raise ValueError("t must be positive")
    if isinstance(src, SourceSpec):
        beta = cfg.domain.critical_exponent
        v_rad = det_convolve_separable(cfg, src, t, np.array([x.r]), time_spec)
        return float(v_rad[0] * math.sin(src.mode_k * beta * x.theta))

    time_spec = time_spec or TimeQuadSpec(n_panels=18, points_per_panel=6)
    d = _boundary_distance(cfg.domain, x)
    if d <= 0.0:
        return 0.0
    tau_free = (d / 7.0) ** 2
    r_nodes, th_nodes, w_nodes = quad.mesh()
    near = np.abs(r_nodes - x.r) < 0.2 * max(x.r, quad.r_edges[1])
    cell = float(np.max(quad.dr)) if not np.any(near) else float(
        np.max(np.repeat(quad.dr, quad.n_angular)[near])
    )
    tau_grid = (2.5 * cell) ** 2
    # keep the largest series argument under the evaluable cap
    z_cap = 0.9 * series_argument_cap(cfg.bessel_acc)
    tau_z = x.r * (x.r + 54.0 * math.sqrt(max(tau_grid, 1e-300))) / (2.0 * z_cap)
    tau0 = max(tau_grid, tau_z)
    for _ in range(4):
        tau0 = max(tau_grid, x.r * (x.r + 54.0 * math.sqrt(tau0)) / (2.0 * z_cap))
    tau0 = min(tau0, 0.5 * t)
    if tau0 > tau_free:
        raise ValueError(
            "grid too coarse near x for the wedge-kernel window: need "
            f"tau0 <= {tau_free:.3g} but resolvability forces {tau0:.3g}"
        )

    # near window: free-kernel local rule (boundary deficit < ~5e-6 rel)
    xg, wg = gauss_legendre(24)
    u1 = 6.0 * xg
    h1 = 6.0 * wg
    U1, U2 = np.meshgrid(u1, u1, indexing="ij")
    W2 = np.outer(h1, h1) * np.exp(-(U1**2) - U2**2) / math.pi
    x1, x2 = x.r * math.cos(x.theta), x.r * math.sin(x.theta)

    def f_near(tau: float) -> float:
        y1 = x1 + 2.0 * math.sqrt(tau) * U1
        y2 = x2 + 2.0 * math.sqrt(tau) * U2
        rr = np.hypot(y1, y2)
        th = np.arctan2(y2, y1) % (2.0 * math.pi)
        inside = (th >= 0.0) & (th <= cfg.domain.kappa0)
        vals = np.where(inside, src(t - tau, rr, np.clip(th, 0.0, cfg.domain.kappa0)), 0.0)
        return float(np.sum(vals * W2))

    near_nodes, near_w = panel_gauss_nodes(
        np.geomspace(tau0 * 1e-6, tau0, 12).tolist(), 6
    )
    near_nodes = np.concatenate(([tau0 * 0.5e-6], near_nodes))
    near_w = np.concatenate(([tau0 * 1e-6], near_w))
    v_near = sum(wt * f_near(tau) for tau, wt in zip(near_nodes, near_w))

    # far window: wedge kernel over the grid
    far_edges = np.geomspace(tau0, t, time_spec.n_panels + 1)
    far_nodes, far_w = panel_gauss_nodes(far_edges, time_spec.points_per_panel)
    v_far = 0.0
    for tau, wt in zip(far_nodes, far_w):
        g_vals = heat_kernel_array(cfg, tau, x.r, x.theta, r_nodes, th_nodes)
        f_vals = np.asarray(src(t - tau, r_nodes, th_nodes), dtype=float)
        v_far += wt * float(np.dot(g_vals * f_vals, w_nodes))
    return v_near + v_far


@dataclass(frozen=True)
class VarianceField:
    """Pointwise variance of the stochastic convolution on (times x grid)."""

    times: np.ndarray
    time_weights: np.ndarray
    grid: PolarGrid
    values: np.ndarray  # shape (n_times, n_radial, n_angular)
    noise: NoiseSpec

    def __post_init__(self) -> None:
        if np.any(self.values < -1e-14):
            raise ValueError("variance values must be nonnegative")


def _mode_variance_radial(
    cfg: KernelConfig,
    mode: NoiseMode,
    t: float,
    r: np.ndarray,
    time_spec: TimeQuadSpec,
    n_quad: int = 64,
) -> np.ndarray:
    """W(t, r) = int_0^t amp(s)^2 H(t-s, r)^2 ds for one mode."""
    taus, weights = _merged_tau_nodes(time_spec, t, mode.interior_switches(t))
    acc = np.zeros_like(r)
    amps = mode.amp(t - taus)
    for tau, wt, amp in zip(taus, weights, amps):
        if amp == 0.0:
            continue
        h = radial_semigroup(cfg, mode.mode_k, mode.profile, tau, r, n_quad)
        acc += wt * (amp * amp) * h * h
    return acc


def variance_field(
    cfg: KernelConfig,
    noise: NoiseSpec,
    times,
    grid: PolarGrid,
    time_spec: TimeQuadSpec | None = None,
    time_weights=None,
) -> VarianceField:
    """Ito-isometry variance of w over (times x grid), additive in modes."""
    time_spec = time_spec or TimeQuadSpec(n_panels=20, points_per_panel=6)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if time_weights is None:
        time_weights = np.zeros_like(times)
    beta = cfg.domain.critical_exponent
    vals = np.zeros((times.size, grid.n_radial, grid.n_angular))
    for mode in noise.modes:
        ang = np.sin(mode.mode_k * beta * grid.theta) ** 2
        for i, t in enumerate(times):
            if t <= 0.0:
                continue
            w_rad = _mode_variance_radial(cfg, mode, float(t), grid.r, time_spec)
            vals[i] += w_rad[:, None] * ang[None, :]
    return VarianceField(times, np.asarray(time_weights, dtype=float), grid, vals, noise)


def lhs_weighted_moment(
    var: VarianceField,
    params: WeightParams,
    grid: PolarGrid | None = None,
    time_weights=None,
    inner_cutoff: float | None = None,
) -> float:
    """E int_0^T int_D | |x|^{-1} w |^p |x|^{theta-2} dx dt via Gaussian
    moments of the variance field."""
    params.require_stochastic()
    g = grid if grid is not None else var.grid
    tw = np.asarray(time_weights if time_weights is not None else var.time_weights)
    if tw.shape != var.times.shape:
        raise ValueError("time_weights must match the variance-field times")
    r = g.r
    mask = np.ones_like(r, dtype=bool) if inner_cutoff is None else r >= inner_cutoff
    radial_w = (g.r * g.dr)[mask]
    weight = r[mask] ** (params.theta - 2.0 - params.p)
    moment = gaussian_abs_moment(params.p)
    total = 0.0
    for i in range(var.times.size):
        v = var.values[i][mask, :] ** (0.5 * params.p)
        spatial = float(np.sum((v * weight[:, None] * radial_w[:, None]).sum(axis=0)) * g.dtheta)
        total += float(tw[i]) * spatial
    return moment * total


def rhs_g_norm(
    noise: NoiseSpec,
    params: WeightParams,
    grid: PolarGrid,
    times,
    time_weights,
    domain: AngularDomain,
    inner_cutoff: float | None = None,
) -> float:
    """E int_0^T int_D |g|_{l2}^p |x|^{theta-2} dx dt for deterministic g."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    tw = np.asarray(time_weights, dtype=float)
    beta = domain.critical_exponent
    r = grid.r
    mask = np.ones_like(r, dtype=bool)
    if inner_cutoff is not None:
        mask = r >= inner_cutoff
    radial_w = (grid.r * grid.dr)[mask]
    weight = r[mask] ** (params.theta - 2.0)
    total = 0.0
    for i, t in enumerate(times):
        sq = np.zeros((mask.sum(), grid.n_angular))
        for mode in noise.modes:
            a = float(mode.amp(np.array([t]))[0])
            if a == 0.0:
                continue
            prof = np.asarray(mode.profile(r[mask]), dtype=float)
            ang = np.sin(mode.mode_k * beta * grid.theta)
            sq += (a * prof[:, None] * ang[None, :]) ** 2
        vals = sq ** (0.5 * params.p)
        spatial = float(np.sum(vals * (weight * radial_w)[:, None]) * grid.dtheta)
        total += float(tw[i]) * spatial
    return total


def counterexample_integral(spec: CounterexampleSpec, delta: float) -> float:
    """Weighted p-th moment of the threshold profile over delta < |x| < eps.

    Equals ``C(T, kappa0, p) * int_delta^eps r^(q-1) dr`` with
    ``q = (pi/kappa0 - 1) p + theta``; the Gaussian-moment, time, and
    angular factors are quadratures, the radial factor is closed form.
    """
    if not (0.0 < delta < spec.epsilon):
        raise ValueError("delta must lie in (0, epsilon)")
    p = spec.p
    moment = gaussian_abs_moment(p)
    # time factor int_0^T t^{p/2} dt
    t_nodes, t_w = panel_gauss_nodes(np.linspace(0.0, spec.T, 9).tolist(), 12)
    time_factor = float(np.dot(t_nodes ** (0.5 * p), t_w))
    # angular factor int_0^{kappa0} |sin(pi th / kappa0)|^p dth
    a_nodes, a_w = panel_gauss_nodes(
        np.linspace(0.0, spec.domain.kappa0, 9).tolist(), 12
    )
    ang = np.abs(np.sin(spec.domain.critical_exponent * a_nodes)) ** p
    angular_factor = float(np.dot(ang, a_w))
    q = spec.radial_exponent
    if q == 0.0:
        radial = math.log(spec.epsilon / delta)
    else:
        radial = (spec.epsilon**q - delta**q) / q
    return moment * time_factor * angular_factor * radial


@dataclass(frozen=True)
class MCResult:
    """Per-probe sample statistics of the simulated stochastic convolution."""

    probe_points: tuple
    n_paths: int
    seed: int
    p_moments: tuple
    abs_moments: np.ndarray  # shape (len(p_moments), n_probes)
    abs_moment_se: np.ndarray
    variance: np.ndarray
    variance_se: np.ndarray
    kurtosis: np.ndarray


def mc_sample_w(
    cfg: KernelConfig,
    noise: NoiseSpec,
    t: float,
    probe_points,
    n_paths: int,
    seed: int,
    p_moments=(2.0,),
    time_spec: TimeQuadSpec | None = None,
) -> MCResult:
    """Monte Carlo simulation of w(t, x) at probe points.

    The integrands ``h_k(s, x) = int_D G(t-s, x, y) g^k(s, y) dy`` are
    precomputed on the singular-refined time grid; every path then combines
    the same Gaussian loads ``h_k(s_j, x) sqrt(w_j) Z_{kj}`` with increments
    shared across probes, so joint laws across probes are honest.  Path i
    draws from a Philox stream keyed by ``(seed, i)``, which makes moments
    bit-identical across reruns and worker counts.
    """
    if n_paths < 100:
        raise ValueError("n_paths must be >= 100")
    time_spec = time_spec or TimeQuadSpec(n_panels=20, points_per_panel=6)
    probes = tuple(probe_points)
    beta = cfg.domain.critical_exponent
    r_probe = np.array([pt.r for pt in probes])
    th_probe = np.array([pt.theta for pt in probes])

    loads = []  # per mode: (n_nodes, n_probes) of h * sqrt(weight)
    for mode in noise.modes:
        taus, weights = _merged_tau_nodes(time_spec, t, mode.interior_switches(t))
        amps = mode.amp(t - taus)
        h = np.zeros((taus.size, len(probes)))
        for j, (tau, amp) in enumerate(zip(taus, amps)):
            if amp == 0.0:
                continue
            h_rad = radial_semigroup(cfg, mode.mode_k, mode.profile, float(tau), r_probe)
            h[j] = amp * h_rad * np.sin(mode.mode_k * beta * th_probe)
        loads.append(h * np.sqrt(weights)[:, None])

    samples = np.zeros((n_paths, len(probes)))
    for i in range(n_paths):
        rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(i,)))
        )
        w_vec = np.zeros(len(probes))
        for h_sqw in loads:
            zs = rng.standard_normal(h_sqw.shape[0])
            w_vec += zs @ h_sqw
        samples[i] = w_vec

    abs_m = np.empty((len(p_moments), len(probes)))
    abs_se = np.empty_like(abs_m)
    for j, p in enumerate(p_moments):
        vals = np.abs(samples) ** p
        abs_m[j] = vals.mean(axis=0)
        abs_se[j] = vals.std(axis=0, ddof=1) / math.sqrt(n_paths)
    var = samples.var(axis=0, ddof=1)
    var_se = var * math.sqrt(2.0 / (n_paths - 1))
    centered = samples - samples.mean(axis=0)
    m2 = (centered**2).mean(axis=0)
    m4 = (centered**4).mean(axis=0)
    kurt = np.where(m2 > 0, m4 / np.maximum(m2, 1e-300) ** 2, 0.0)
    return MCResult(
        probe_points=probes,
        n_paths=n_paths,
        seed=seed,
        p_moments=tuple(p_moments),
        abs_moments=abs_m,
        abs_moment_se=abs_se,
        variance=var,
        variance_se=var_se,
        kurtosis=kurt,
    )
