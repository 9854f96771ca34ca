"""Command-line front end for the offloading toolkit.

Subcommands:
  eval      evaluate one policy, print a JSON point
  frontier  sweep the policy families onto the age vs edge-use plane (CSV/JSON)
  verify    run the structural and cross-method agreement checks
  simulate  Monte Carlo one policy with a fixed seed
  rvi       solve for the optimal policy, print gain and thresholds

Exit codes: 0 success, 1 a verification check failed, 2 invalid flags,
3 output could not be written.  Flags override values from an optional
``--config`` JSON file, which overrides the built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass

import numpy as np

from .core import ModelParams
from . import heuristics
from .chain import (
    age_threshold_policy,
    evaluate_exact,
    local_only_policy,
    mec_only_policy,
    service_threshold_policy,
)
from .mdp import (
    default_a_max,
    discounted_vi,
    rvi_solve,
    sweep_lambdas,
    verify_structure,
)
from .sim import SimConfig, simulate

__all__ = ["FrontierPoint", "build_parser", "main", "lambda_grid"]

FAMILIES = ("local_only", "mec_only", "age_threshold", "service_threshold", "optimal")

_DEFAULT_METHOD = {
    "local_only": "closed_form",
    "mec_only": "closed_form",
    "age_threshold": "chain",
    "service_threshold": "closed_form",
    "optimal": "rvi",
}

_ALLOWED_METHODS = {
    "local_only": ("closed_form", "sim"),
    "mec_only": ("closed_form", "chain", "sim"),
    "age_threshold": ("chain", "sim"),
    "service_threshold": ("closed_form", "chain", "sim"),
    "optimal": ("rvi", "sim"),
}

_CONFIG_KEYS = {
    "mu": "mu",
    "lambda": "lam",
    "beta": "beta",
    "amax": "a_max",
    "seed": "seed",
    "horizon": "horizon",
    "warmup": "warmup",
    "batches": "batches",
    "out": "out",
    "format": "fmt",
}


@dataclass(frozen=True)
class FrontierPoint:
    """One sample on the age vs edge-use plane."""

    family: str
    param: float
    mu: float
    p_bar: float
    delta: float
    method: str


def _f12(x: float) -> str:
    return format(float(x), ".12g")


def lambda_grid(lo: float, hi: float, count: int) -> np.ndarray:
    """Log-spaced prices in (lo, hi]: the left endpoint is excluded."""
    return np.geomspace(lo, hi, count + 1)[1:]


def _resolve_a_max(args) -> int:
    return args.a_max if args.a_max is not None else default_a_max(args.mu)


def _emit(text: str, out: str | None) -> int:
    if out is None:
        sys.stdout.write(text)
        return 0
    try:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        print(f"error: cannot write {out}: {exc}", file=sys.stderr)
        return 3
    return 0


def _point_json(point: FrontierPoint) -> str:
    return json.dumps(asdict(point)) + "\n"


def _build_policy(family: str, args, parser, a_max: int):
    if family == "local_only":
        return local_only_policy(), 0.0
    if family == "mec_only":
        return mec_only_policy(), 0.0
    if family == "age_threshold":
        if args.astar is None:
            parser.error("age_threshold requires --astar")
        return age_threshold_policy(args.astar, a_max), float(args.astar)
    if family == "service_threshold":
        if args.zstar is None:
            parser.error("service_threshold requires --zstar >= 0")
        return service_threshold_policy(args.zstar), float(args.zstar)
    report = rvi_solve(ModelParams(mu=args.mu, lam=args.lam, a_max=a_max))
    return report.policy, float(args.lam)


def _cmd_eval(args, parser) -> int:
    family = args.family
    method = args.method or _DEFAULT_METHOD[family]
    if method not in _ALLOWED_METHODS[family]:
        parser.error(f"method {method!r} is not available for family {family!r}")
    a_max = _resolve_a_max(args)
    try:
        if method == "closed_form":
            if family == "local_only":
                res, param = heuristics.local_only(args.mu, args.lam), 0.0
            elif family == "mec_only":
                res, param = heuristics.mec_only(args.lam), 0.0
            else:
                if args.zstar is None:
                    parser.error("service_threshold requires --zstar >= 0")
                res = heuristics.service_threshold_eval(args.mu, args.zstar, args.lam)
                param = float(args.zstar)
            point = FrontierPoint(family, param, args.mu, res.p_bar, res.delta, method)
        elif method in ("chain", "rvi"):
            params = ModelParams(mu=args.mu, lam=args.lam, a_max=a_max)
            policy, param = _build_policy(family, args, parser, a_max)
            res = evaluate_exact(policy, params)
            point = FrontierPoint(family, param, args.mu, res.p_bar, res.delta, method)
        else:
            params = ModelParams(mu=args.mu, lam=args.lam, a_max=a_max)
            policy, param = _build_policy(family, args, parser, a_max)
            cfg = SimConfig(horizon=args.horizon, seed=args.seed, warmup=args.warmup,
                            batches=args.batches)
            sres = simulate(policy, params, cfg)
            point = FrontierPoint(family, param, args.mu, sres.p_bar_hat, sres.delta_hat, "sim")
    except ValueError as exc:
        parser.error(str(exc))
    return _emit(_point_json(point), args.out)


def frontier_points(
    mu: float,
    a_stars,
    z_stars,
    lambdas,
    a_max: int,
) -> list[FrontierPoint]:
    """All frontier rows for one service rate, sorted by (family, param)."""
    points: list[FrontierPoint] = []
    res = heuristics.local_only(mu)
    points.append(FrontierPoint("local_only", 0.0, mu, res.p_bar, res.delta, "closed_form"))
    res = heuristics.mec_only()
    points.append(FrontierPoint("mec_only", 0.0, mu, res.p_bar, res.delta, "closed_form"))
    for a_star in a_stars:
        params = ModelParams(mu=mu, a_max=a_max)
        res = evaluate_exact(age_threshold_policy(a_star, a_max), params)
        points.append(FrontierPoint("age_threshold", float(a_star), mu, res.p_bar, res.delta, "chain"))
    for z_star in z_stars:
        res = heuristics.service_threshold_eval(mu, z_star)
        points.append(FrontierPoint("service_threshold", float(z_star), mu, res.p_bar, res.delta, "closed_form"))
    for lam, report in sweep_lambdas(mu, lambdas, a_max):
        params = ModelParams(mu=mu, lam=lam, a_max=a_max)
        res = evaluate_exact(report.policy, params)
        points.append(FrontierPoint("optimal", lam, mu, res.p_bar, res.delta, "rvi"))
    points.sort(key=lambda p: (p.family, p.param))
    return points


def _render_csv(points: list[FrontierPoint]) -> str:
    lines = ["family,param,mu,p_bar,delta,method"]
    for p in points:
        lines.append(
            f"{p.family},{_f12(p.param)},{_f12(p.mu)},{_f12(p.p_bar)},{_f12(p.delta)},{p.method}"
        )
    return "\n".join(lines) + "\n"


def _cmd_frontier(args, parser) -> int:
    lo, hi = args.astar_range
    a_stars = range(lo, hi + 1)
    if len(a_stars) == 0:
        parser.error("empty --astar-range")
    lo, hi = args.zstar_range
    z_stars = range(lo, hi + 1)
    if len(z_stars) == 0:
        parser.error("empty --zstar-range")
    if args.lambda_count < 1 or args.lambda_min <= 0 or args.lambda_max <= args.lambda_min:
        parser.error("need 0 < lambda-min < lambda-max and lambda-count >= 1")
    a_max = _resolve_a_max(args)
    lambdas = lambda_grid(args.lambda_min, args.lambda_max, args.lambda_count)
    points = frontier_points(args.mu, a_stars, z_stars, lambdas, a_max)
    if args.fmt == "csv":
        text = _render_csv(points)
    else:
        text = json.dumps([asdict(p) for p in points], indent=2) + "\n"
    return _emit(text, args.out)


def _cmd_rvi(args, parser) -> int:
    a_max = _resolve_a_max(args)
    report = rvi_solve(ModelParams(mu=args.mu, lam=args.lam, a_max=a_max),
                       tol=args.tol, max_iters=args.max_iters)
    payload = {
        "mu": args.mu,
        "lambda": args.lam,
        "a_max": a_max,
        "g": report.g,
        "iterations": report.iterations,
        "span_residual": report.span_residual,
        "converged": report.converged,
        "threshold_exact": report.threshold_exact,
        "thresholds": {str(z): t for z, t in report.thresholds.items()},
    }
    code = _emit(json.dumps(payload, indent=2) + "\n", args.out)
    if code:
        return code
    return 0 if report.converged else 1


def _cmd_simulate(args, parser) -> int:
    a_max = _resolve_a_max(args)
    params = ModelParams(mu=args.mu, lam=args.lam, a_max=a_max)
    policy, param = _build_policy(args.family, args, parser, a_max)
    try:
        cfg = SimConfig(horizon=args.horizon, seed=args.seed, warmup=args.warmup,
                        batches=args.batches)
        res = simulate(policy, params, cfg)
    except ValueError as exc:
        parser.error(str(exc))
    payload = {
        "family": args.family,
        "param": param,
        "mu": args.mu,
        "seed": args.seed,
        "delta_hat": res.delta_hat,
        "p_bar_hat": res.p_bar_hat,
        "stderr_delta": res.stderr_delta,
        "stderr_p": res.stderr_p,
        "slots": res.slots,
    }
    return _emit(json.dumps(payload, indent=2) + "\n", args.out)


def _verify_checks(args) -> dict:
    a_max = _resolve_a_max(args)
    params = ModelParams(mu=args.mu, lam=args.lam, beta=args.beta, a_max=a_max)
    report = rvi_solve(params)
    iterates = discounted_vi(params, args.vi_iters)
    if args.inject_corruption:
        mid = a_max // 2
        iterates[-1].grid[mid, 0] = iterates[-1].grid[mid, 0] - 10.0 * (1 + abs(iterates[-1].grid).max())
    structure = verify_structure(iterates, report.policy)
    agreement = []

    exact = evaluate_exact(report.policy, params)
    agreement.append({
        "name": "rvi_gain_matches_exact_policy_cost",
        "passed": bool(abs(exact.g - report.g) <= 1e-6),
        "detail": f"rvi g={report.g!r}, chain g={exact.g!r}",
    })
    for z_star in range(0, 6):
        closed = heuristics.service_threshold_eval(args.mu, z_star)
        chain_res = evaluate_exact(service_threshold_policy(z_star), params)
        rel = max(
            abs(closed.delta - chain_res.delta) / closed.delta,
            abs(closed.p_bar - chain_res.p_bar) / max(closed.p_bar, 1e-15),
        )
        agreement.append({
            "name": f"closed_form_vs_chain_z{z_star}",
            "passed": bool(rel <= 1e-8),
            "detail": f"max relative difference {rel:.3e}",
        })
    for z_star in (0, 2, 5):
        closed = heuristics.service_threshold_eval(args.mu, z_star)
        cfg = SimConfig(horizon=args.horizon, seed=args.seed + z_star)
        sres = simulate(service_threshold_policy(z_star), params, cfg)
        ok = (abs(sres.delta_hat - closed.delta) <= max(3 * sres.stderr_delta, 1e-9)
              and abs(sres.p_bar_hat - closed.p_bar) <= max(3 * sres.stderr_p, 1e-9))
        agreement.append({
            "name": f"simulation_vs_closed_form_z{z_star}",
            "passed": bool(ok),
            "detail": f"delta_hat={sres.delta_hat!r} (se {sres.stderr_delta:.2e}), "
                      f"p_bar_hat={sres.p_bar_hat!r} (se {sres.stderr_p:.2e})",
        })
    passed = structure.passed and all(c["passed"] for c in agreement)
    return {
        "passed": passed,
        "mu": args.mu,
        "lambda": args.lam,
        "beta": args.beta,
        "a_max": a_max,
        "g": report.g,
        "thresholds": {str(z): t for z, t in report.thresholds.items()},
        "structure": structure.to_dict(),
        "agreement": agreement,
    }


def _cmd_verify(args, parser) -> int:
    payload = _verify_checks(args)
    code = _emit(json.dumps(payload, indent=2) + "\n", args.out)
    if code:
        return code
    return 0 if payload["passed"] else 1


def _add_model_flags(sub, mu_default=0.5):
    sub.add_argument("--mu", type=float, default=mu_default,
                     help="local per-slot completion probability")
    sub.add_argument("--lambda", dest="lam", type=float, default=0.0,
                     help="price per edge use")
    sub.add_argument("--beta", type=float, default=0.99, help="discount factor")
    sub.add_argument("--amax", dest="a_max", type=int, default=None,
                     help="age ceiling (default: 50, or 400 when mu < 0.1)")
    sub.add_argument("--config", type=str, default=None,
                     help="JSON file with flag defaults")
    sub.add_argument("--out", type=str, default=None, help="write output here instead of stdout")


def _add_sim_flags(sub):
    sub.add_argument("--seed", type=int, default=1, help="64-bit stream seed")
    sub.add_argument("--horizon", type=int, default=1_000_000, help="slots to simulate")
    sub.add_argument("--warmup", type=int, default=None,
                     help="slots discarded before averaging (default 1%% of horizon)")
    sub.add_argument("--batches", type=int, default=20, help="batches for standard errors")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aoi-offload",
        description="Age-of-information vs edge-offloading tradeoff toolkit",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p_eval = subs.add_parser("eval", help="evaluate one policy, print a JSON point")
    _add_model_flags(p_eval)
    _add_sim_flags(p_eval)
    p_eval.add_argument("--family", required=True, choices=FAMILIES)
    p_eval.add_argument("--astar", type=int, default=None, help="age threshold")
    p_eval.add_argument("--zstar", type=int, default=None, help="service threshold")
    p_eval.add_argument("--method", choices=("closed_form", "chain", "rvi", "sim"), default=None)
    p_eval.set_defaults(func=_cmd_eval)

    p_frontier = subs.add_parser("frontier", help="sweep the families onto the age/edge-use plane")
    _add_model_flags(p_frontier, mu_default=0.01)
    p_frontier.add_argument("--astar-range", type=int, nargs=2, default=(1, 15),
                            metavar=("LO", "HI"))
    p_frontier.add_argument("--zstar-range", type=int, nargs=2, default=(0, 9),
                            metavar=("LO", "HI"))
    p_frontier.add_argument("--lambda-min", type=float, default=0.01)
    p_frontier.add_argument("--lambda-max", type=float, default=50.0)
    p_frontier.add_argument("--lambda-count", type=int, default=25)
    p_frontier.add_argument("--format", dest="fmt", choices=("csv", "json"), default="csv")
    p_frontier.set_defaults(func=_cmd_frontier, out="frontier.csv")

    p_verify = subs.add_parser("verify", help="structural and agreement checks")
    _add_model_flags(p_verify)
    _add_sim_flags(p_verify)
    p_verify.set_defaults(lam=3.0, horizon=1_000_000, seed=123456)
    p_verify.add_argument("--vi-iters", type=int, default=300,
                          help="discounted iterates for the structure checks")
    p_verify.add_argument("--inject-corruption", action="store_true",
                          help="corrupt one value entry to prove the checks can fail")
    p_verify.set_defaults(func=_cmd_verify)

    p_sim = subs.add_parser("simulate", help="Monte Carlo one policy")
    _add_model_flags(p_sim)
    _add_sim_flags(p_sim)
    p_sim.add_argument("--family", required=True, choices=FAMILIES)
    p_sim.add_argument("--astar", type=int, default=None)
    p_sim.add_argument("--zstar", type=int, default=None)
    p_sim.set_defaults(func=_cmd_simulate)

    p_rvi = subs.add_parser("rvi", help="solve for the optimal policy")
    _add_model_flags(p_rvi)
    p_rvi.add_argument("--tol", type=float, default=1e-10, help="span stopping tolerance")
    p_rvi.add_argument("--max-iters", type=int, default=100_000)
    p_rvi.set_defaults(func=_cmd_rvi)

    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    if "--config" not in argv:
        return
    path = argv[argv.index("--config") + 1] if argv.index("--config") + 1 < len(argv) else None
    if path is None:
        parser.error("--config requires a path")
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        parser.error(f"cannot read config {path}: {exc}")
    defaults = {}
    for key, value in raw.items():
        if key not in _CONFIG_KEYS:
            parser.error(f"unknown config key {key!r}")
        defaults[_CONFIG_KEYS[key]] = value
    for action in parser._subparsers._group_actions:  # noqa: SLF001 - argparse keeps this stable
        for sub in action.choices.values():
            sub.set_defaults(**defaults)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    _apply_config(parser, argv)
    args = parser.parse_args(argv)
    return args.func(args, parser)


if __name__ == "__main__":
    raise SystemExit(main())
