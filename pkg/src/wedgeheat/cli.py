"""Command-line surface.

Exit codes: 0 all verdicts pass, 1 a verdict fails, 2 usage or config
error, 3 numerical failure (non-convergent series / non-finite values).

Experiment configs are JSON with a mandatory ``schema_version``; unknown
keys are rejected so typos cannot silently corrupt provenance.  Reports are
written atomically (temp file + rename) as ``<kind>_<confighash>.json`` and
``.csv``.  ``--jobs`` (or ``WEDGEHEAT_JOBS``) caps worker threads; all
reductions are ordered, so results do not depend on it.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .errors import NonConvergentError, NonFiniteError
from .convolution import NoiseMode, NoiseSpec, RadialProfile, SourceSpec
from .fields import WeightParams
from .geometry import AngularDomain, GridSpec, PolarPoint
from .kernel import KernelConfig, heat_kernel, image_kernel_oracle, kernel_mass
from .verify import (
    check_chapman_kolmogorov,
    check_dilation,
    fit_green_bound,
    green_bound_cloud,
    sup_integral_b,
    verify_time_tail_integral,
    vertex_decay_exponent,
)

EXIT_OK = 0
EXIT_VERDICT_FAIL = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3


class ConfigError(ValueError):
    pass


def _reject_unknown(cfg: dict, allowed: set, where: str) -> None:
    unknown = set(cfg) - allowed
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)} in {where}")


def _load_config(path: str, required: set, optional: set) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    if cfg.get("schema_version") != 1:
        raise ConfigError("config must declare schema_version 1")
    _reject_unknown(cfg, required | optional | {"schema_version"}, path)
    missing = required - set(cfg)
    if missing:
        raise ConfigError(f"missing required keys {sorted(missing)} in {path}")
    return cfg


def _profile_from(cfg: dict, where: str) -> RadialProfile:
    _reject_unknown(cfg, {"gamma", "c", "taper_start", "taper_end", "mode_k", "time_tag"}, where)
    return RadialProfile(
        gamma=float(cfg["gamma"]),
        taper_start=float(cfg["taper_start"]),
        taper_end=float(cfg["taper_end"]),
        c=float(cfg.get("c", 1.0)),
    )


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out-dir", default="reports", help="report output directory (default: reports)")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument(
        "--jobs",
        type=int,
        default=int(os.environ.get("WEDGEHEAT_JOBS", "1")),
        help="worker cap (results are independent of it; default: WEDGEHEAT_JOBS or 1)",
    )


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wedgeheat", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    k = sub.add_parser("kernel", help="heat kernel evaluation")
    ksub = k.add_subparsers(dest="kernel_cmd", required=True)
    ke = ksub.add_parser("eval", help="evaluate G(t, x, y)")
    ke.add_argument("--kappa0", type=float, required=True, help="wedge opening angle")
    ke.add_argument("--t", type=float, required=True, help="time (positive)")
    ke.add_argument("--x-r", type=float, required=True, help="radius of x")
    ke.add_argument("--x-theta", type=float, required=True, help="angle of x")
    ke.add_argument("--y-r", type=float, required=True, help="radius of y")
    ke.add_argument("--y-theta", type=float, required=True, help="angle of y")

    v = sub.add_parser("verify", help="property verifiers")
    vsub = v.add_subparsers(dest="verify_cmd", required=True)
    vk = vsub.add_parser("kernel", help="kernel identity suites")
    vk.add_argument(
        "--suite",
        required=True,
        choices=["symmetry", "scaling", "ck", "images", "mass", "decay"],
        help="which identity suite to run",
    )
    vk.add_argument("--kappa0", type=float, default=math.pi, help="wedge angle (default: pi)")
    vb = vsub.add_parser("bound", help="Green-function bound sup-ratio fit")
    vb.add_argument("--lambda", dest="lam", type=float, required=True, help="vertex exponent lambda")
    vb.add_argument("--kappa0", type=float, required=True, help="wedge angle")
    vp = vsub.add_parser("proof-integrals", help="factor integrals of the main estimate")
    vp.add_argument("--b", type=float, default=None, help="exponent of the Gaussian sup integral")
    vp.add_argument("--exponent", type=float, default=None, help="time-tail exponent (> 2)")

    e = sub.add_parser("experiment", help="experiment drivers")
    esub = e.add_subparsers(dest="experiment_cmd", required=True)
    for name in ("sharpness", "stoch-ratio", "det-ratio", "solution-norm"):
        ep = esub.add_parser(name)
        ep.add_argument("--config", required=True, help="JSON config file")
        _add_common(ep)
    return ap


def _print_verdict(label: str, passed: bool, detail: str = "") -> None:
    state = "PASS" if passed else "FAIL"
    print(f"{state} {label}{(' ' + detail) if detail else ''}")


def _cmd_kernel_eval(args) -> int:
    dom = AngularDomain(args.kappa0)
    cfg = KernelConfig(dom)
    val = heat_kernel(cfg, args.t, PolarPoint(args.x_r, args.x_theta), PolarPoint(args.y_r, args.y_theta))
    print(f"{val:.10g}")
    return EXIT_OK


def _cmd_verify_kernel(args) -> int:
    dom = AngularDomain(args.kappa0)
    cfg = KernelConfig(dom)
    kap = dom.kappa0
    x = PolarPoint(1.0, 0.42 * kap)
    y = PolarPoint(1.6, 0.7 * kap)
    ok = True
    if args.suite == "symmetry":
        g1 = heat_kernel(cfg, 0.7, x, y)
        g2 = heat_kernel(cfg, 0.7, y, x)
        resid = abs(g1 - g2) / max(g1, 1e-300)
        ok = resid <= 1e-12
        _print_verdict("kernel symmetry", ok, f"residual={resid:.3e}")
    elif args.suite == "scaling":
        resid = max(check_dilation(cfg, a, 0.7, x, y) for a in (0.125, 0.5, 2.0, 16.0))
        ok = resid <= 1e-12
        _print_verdict("dilation invariance", ok, f"max residual={resid:.3e}")
    elif args.suite == "ck":
        quad = GridSpec(1e-4, y.r + 10.5 * math.sqrt(1.0) + 1.0, 384, 96, 3.0)
        res = check_chapman_kolmogorov(cfg, 0.5, 0.5, x, y, quad)
        ok = res.residual <= 1e-4
        _print_verdict("chapman-kolmogorov", ok, f"residual={res.residual:.3e}")
    elif args.suite == "images":
        if not (
            math.isclose(kap, math.pi, rel_tol=1e-9)
            or math.isclose(kap, math.pi / 2, rel_tol=1e-9)
        ):
            print("image oracle requires kappa0 in {pi, pi/2}", file=sys.stderr)
            return EXIT_USAGE
        rng = np.random.default_rng(7)
        worst = 0.0
        for _ in range(100):
            t = 10.0 ** rng.uniform(-2, 0.5)
            xa = PolarPoint(10.0 ** rng.uniform(-2, 0.5), rng.uniform(0.1, 0.9) * kap)
            ya = PolarPoint(10.0 ** rng.uniform(-2, 0.5), rng.uniform(0.1, 0.9) * kap)
            if xa.r * ya.r / (2 * t) > 500:
                continue
            o = image_kernel_oracle(kap, t, xa, ya)
            if o < 1e-270:
                continue
            worst = max(worst, abs(heat_kernel(cfg, t, xa, ya) - o) / o)
        ok = worst <= 1e-8
        _print_verdict("image-oracle agreement", ok, f"max residual={worst:.3e}")
    elif args.suite == "mass":
        m = kernel_mass(cfg, 1.0, PolarPoint(1.0, kap / 2), GridSpec(1e-4, 13.0, 768, 384, 3.0))
        ok = -1e-12 <= m <= 1.0 + 1e-6
        _print_verdict("kernel mass in [0, 1]", ok, f"mass={m:.10f}")
    elif args.suite == "decay":
        res = vertex_decay_exponent(cfg, 1.0, PolarPoint(1.0, kap / 2), np.logspace(-5, -2, 12))
        ok = abs(res.slope - dom.critical_exponent) <= 0.02
        _print_verdict(
            "vertex decay exponent", ok,
            f"slope={res.slope:.4f} expected={dom.critical_exponent:.4f}",
        )
    return EXIT_OK if ok else EXIT_VERDICT_FAIL


def _cmd_verify_bound(args) -> int:
    dom = AngularDomain(args.kappa0)
    cfg = KernelConfig(dom)
    fit = fit_green_bound(cfg, args.lam, green_bound_cloud(dom))
    ok = fit.verdict == "bounded"
    _print_verdict(
        f"green bound lambda={args.lam:g}",
        ok if args.lam < dom.critical_exponent else not ok,
        f"verdict={fit.verdict} sigma={fit.sigma:g} sup={fit.sup_ratio:.4g} "
        f"growth2dec={fit.growth_two_decades:.3f}",
    )
    expected = ok if args.lam < dom.critical_exponent else not ok
    return EXIT_OK if expected else EXIT_VERDICT_FAIL


def _cmd_verify_proof(args) -> int:
    if args.b is None and args.exponent is None:
        print("provide --b and/or --exponent", file=sys.stderr)
        return EXIT_USAGE
    ok = True
    if args.b is not None:
        res = sup_integral_b(args.b, c_samples=(0.3, 1.0, 3.0), x_samples=(1e-3, 0.5, 2.0, 8.0))
        if args.b == 0.0:
            ok &= abs(res.max_value - math.pi) <= 1e-10
            print(f"{res.max_value:.10f}")
            _print_verdict("gaussian integral b=0 equals pi", ok)
        elif res.divergent:
            _print_verdict(
                f"sup integral b={args.b:g}", args.b <= -2.0,
                "divergent under inner refinement (expected for b <= -2)",
            )
            ok &= args.b <= -2.0
        else:
            _print_verdict(f"sup integral b={args.b:g} bounded", True, f"max={res.max_value:.6g}")
    if args.exponent is not None:
        res = verify_time_tail_integral(args.exponent)
        rel = abs(res.value - res.closed_form) / res.closed_form
        ok &= rel <= 1e-6
        print(f"{res.value:.10g}")
        _print_verdict("time tail matches closed form", rel <= 1e-6, f"rel={rel:.2e}")
    return EXIT_OK if ok else EXIT_VERDICT_FAIL


def _run_experiment(args) -> int:
    from .experiments import (
        det_estimate_ratio_scan,
        main_estimate_ratio_scan,
        sharpness_scan,
        solution_norm_check,
    )

    name = args.experiment_cmd
    if name == "sharpness":
        cfg = _load_config(
            args.config,
            required={"kappa0", "p", "theta_grid"},
            optional={"T", "epsilon", "delta_sequence", "seed"},
        )
        dom = AngularDomain(float(cfg["kappa0"]))
        kwargs = {}
        if "delta_sequence" in cfg:
            kwargs["delta_sequence"] = tuple(float(d) for d in cfg["delta_sequence"])
        report = sharpness_scan(
            dom,
            p=float(cfg["p"]),
            theta_grid=cfg["theta_grid"],
            T=float(cfg.get("T", 1.0)),
            epsilon=float(cfg.get("epsilon", 1.0)),
            **kwargs,
        )
    elif name == "stoch-ratio":
        cfg = _load_config(
            args.config,
            required={"kappa0", "params", "noise"},
            optional={"T", "deltas", "t_independence_check", "seed"},
        )
        dom = AngularDomain(float(cfg["kappa0"]))
        noise = NoiseSpec.single(
            _profile_from(cfg["noise"], "noise"), mode_k=int(cfg["noise"].get("mode_k", 1))
        )
        report = main_estimate_ratio_scan(
            dom,
            [(float(p), float(th)) for p, th in cfg["params"]],
            noise,
            T=float(cfg.get("T", 1.0)),
            deltas=tuple(cfg.get("deltas", (1e-2, 1e-3, 1e-4))),
            t_independence_check=cfg.get("t_independence_check"),
        )
    elif name == "det-ratio":
        cfg = _load_config(
            args.config,
            required={"kappa0", "params", "source"},
            optional={"T", "deltas", "seed"},
        )
        dom = AngularDomain(float(cfg["kappa0"]))
        source = SourceSpec(
            _profile_from(cfg["source"], "source"),
            mode_k=int(cfg["source"].get("mode_k", 1)),
            time_tag=str(cfg["source"].get("time_tag", "const")),
        )
        report = det_estimate_ratio_scan(
            dom,
            [(float(p), float(th)) for p, th in cfg["params"]],
            source,
            T=float(cfg.get("T", 1.0)),
            deltas=tuple(cfg.get("deltas", (1e-2, 1e-3, 1e-4))),
        )
    elif name == "solution-norm":
        cfg = _load_config(
            args.config,
            required={"kappa0", "p", "theta"},
            optional={"T", "source", "noise", "grid", "seed"},
        )
        dom = AngularDomain(float(cfg["kappa0"]))
        source = noise = None
        if cfg.get("source") is not None:
            source = SourceSpec(
                _profile_from(cfg["source"], "source"),
                mode_k=int(cfg["source"].get("mode_k", 1)),
                time_tag=str(cfg["source"].get("time_tag", "const")),
            )
        if cfg.get("noise") is not None:
            noise = NoiseSpec.single(
                _profile_from(cfg["noise"], "noise"), mode_k=int(cfg["noise"].get("mode_k", 1))
            )
        grid = None
        if cfg.get("grid") is not None:
            g = cfg["grid"]
            _reject_unknown(
                g, {"r_min", "r_max", "n_radial", "n_angular", "grading_exponent"}, "grid"
            )
            grid = GridSpec(
                float(g["r_min"]),
                float(g["r_max"]),
                int(g["n_radial"]),
                int(g["n_angular"]),
                float(g.get("grading_exponent", 3.0)),
            )
        report = solution_norm_check(
            dom,
            WeightParams(float(cfg["p"]), float(cfg["theta"])),
            source,
            noise,
            T=float(cfg.get("T", 1.0)),
            grid_spec=grid,
        )
    else:  # pragma: no cover
        raise ConfigError(f"unknown experiment {name}")

    paths = report.write(args.out_dir)
    n_fail = sum(0 if v.get("passed") else 1 for v in report.verdicts.values())
    _print_verdict(
        f"experiment {name}",
        report.passed,
        f"verdicts={len(report.verdicts)} failed={n_fail} report={paths[0]}",
    )
    return EXIT_OK if report.passed else EXIT_VERDICT_FAIL


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors already; pass through
        return int(exc.code) if exc.code else EXIT_OK
    try:
        if args.command == "kernel":
            return _cmd_kernel_eval(args)
        if args.command == "verify":
            if args.verify_cmd == "kernel":
                return _cmd_verify_kernel(args)
            if args.verify_cmd == "bound":
                return _cmd_verify_bound(args)
            return _cmd_verify_proof(args)
        if args.command == "experiment":
            return _run_experiment(args)
    except (ConfigError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NonConvergentError, NonFiniteError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_USAGE  # pragma: no cover


if __name__ == "__main__":
    sys.exit(main())
