"""Command-line harness: every analytic and simulation operation as CSV.

All numeric output is CSV with a header row and a leading provenance
comment recording the full configuration and master seed, so identical
configurations reproduce byte-identical files.  Exit codes: 0 success,
1 usage error, 2 infeasible target (the CSV still carries an explanatory
row).
"""

from __future__ import annotations

import argparse
import math
import sys
from typing import Optional

from .core import (MODELS, Exponents, QoETarget, Rates, classify_region,
                   fluid_exponent, interruption_exponent, region_boundaries)
from .errors import InfeasibleTarget, QStreamError
from .fluid import (FluidState, fluid_cost, fluid_design_threshold,
                    fluid_hjb_residual)
from .mc_fluid import estimate_fluid, manifold_invariance_check
from .mc_poisson import Cap, SimConfig, estimate
from .poisson_hjb import poisson_hjb_residual
from .policies import (AlwaysBoth, AlwaysFree, Offline, Risky, Safe,
                       design_offline, design_risky, design_safe,
                       risky_cost_bound, safe_cost_bounds)
from .rlnc import merge_experiment

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2

CONFIG_KEYS = """\
simulate/tradeoff config file: flat key=value lines, '#' comments.
  model      poisson | fluid                  (default poisson)
  r0, rc     arrival rates (r0 > 1, rc > 0)
  eps        interruption tolerance in (0,1)
  d          initial buffer (simulate)
  d_grid     comma list of buffers (tradeoff)
  policy     always_free|always_both|offline|safe|risky|threshold (simulate)
  policies   comma list of the above          (tradeoff, default offline,safe,risky)
  param      explicit policy parameter        (default: designed from d, eps)
  replicas   number of Monte Carlo replicas (>= 1)
  seed       64-bit master seed               (default 0)
  absorption analytic | cap                   (poisson, default analytic)
  q_max      cap buffer level                 (absorption=cap)
  horizon    cap time horizon                 (absorption=cap)
  dt         Euler step                       (fluid, default 1e-3)
  bridge     true | false                     (fluid, default true)
"""


class _Parser(argparse.ArgumentParser):
    """argparse variant that exits 1 on usage errors, per the CLI contract."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        print(CONFIG_KEYS, file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.12g}"
    if isinstance(x, bool):
        return str(x).lower()
    return str(x)


class _Csv:
    def __init__(self, out: Optional[str]):
        self._fh = open(out, "w") if out else sys.stdout
        self._close = out is not None

    def comment(self, text: str):
        self._fh.write(f"# {text}\n")

    def row(self, *cells):
        self._fh.write(",".join(_fmt(c) for c in cells) + "\n")

    def done(self):
        if self._close:
            self._fh.close()


def _provenance(writer: _Csv, command: str, params: dict):
    joined = " ".join(f"{k}={_fmt(v)}" for k, v in sorted(params.items()))
    writer.comment(f"qstream {command} {joined}")


def _read_config(path: str) -> dict:
    cfg = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"config line without '=': {line!r}")
            key, _, value = line.partition("=")
            cfg[key.strip()] = value.strip()
    return cfg


def _bool(s: str) -> bool:
    if s.lower() in ("1", "true", "yes", "on"):
        return True
    if s.lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _cmd_exponent(args) -> int:
    w = _Csv(args.out)
    _provenance(w, "exponent", {"rate": args.rate})
    w.row("rate", "alpha", "theta")
    w.row(args.rate, interruption_exponent(args.rate), fluid_exponent(args.rate))
    w.done()
    return EXIT_OK


def _cmd_regions(args) -> int:
    rates = Rates(args.r0, args.rc)
    w = _Csv(args.out)
    _provenance(w, "regions", {"r0": args.r0, "rc": args.rc, "eps": args.eps,
                               "model": args.model})
    d_min, d_max = region_boundaries(args.eps, rates, args.model)
    exps = Exponents.from_rates(rates)
    a0, a1 = exps.pair(args.model)
    w.row("model", "eps", "exponent_free", "exponent_both", "d_min", "d_max")
    w.row(args.model, args.eps, a0, a1, d_min, d_max)
    w.done()
    return EXIT_OK


def _cmd_design(args) -> int:
    rates = Rates(args.r0, args.rc)
    target = QoETarget(args.d, args.eps)
    w = _Csv(args.out)
    _provenance(w, "design", {"policy": args.policy, "d": args.d, "eps": args.eps,
                              "r0": args.r0, "rc": args.rc})
    w.row("policy", "d", "eps", "region", "param", "bound_lo", "bound_hi",
          "bound_lo_packets", "bound_hi_packets", "status")
    model = "fluid" if args.policy == "fluid" else "poisson"
    region = classify_region(target, rates, model)
    try:
        if args.policy == "offline":
            des = design_offline(target, rates)
            bound = des.t_s  # paid the whole deadline: the bound is exact
            w.row(args.policy, args.d, args.eps, region.value, des.t_s, bound,
                  bound, bound * rates.rc, bound * rates.rc, "ok")
        elif args.policy == "safe":
            s_star = design_safe(target, rates)
            ci = safe_cost_bounds(target, rates)
            w.row(args.policy, args.d, args.eps, region.value, s_star, ci.lo,
                  ci.hi, ci.lo * rates.rc, ci.hi * rates.rc, "ok")
        elif args.policy == "risky":
            des = design_risky(target, rates)
            bound = risky_cost_bound(target, rates, des)
            w.row(args.policy, args.d, args.eps, region.value, des.t_star,
                  0.0, bound, 0.0, bound * rates.rc, "ok")
        elif args.policy == "fluid":
            t_thr = fluid_design_threshold(target, rates)
            cost = fluid_cost(args.d, t_thr, rates)
            w.row(args.policy, args.d, args.eps, region.value, t_thr, cost,
                  cost, cost * rates.rc, cost * rates.rc, "ok")
        else:  # pragma: no cover - argparse enforces choices
            raise ValueError(args.policy)
    except InfeasibleTarget as exc:
        w.row(args.policy, args.d, args.eps, region.value, math.nan, math.nan,
              math.nan, math.nan, math.nan, f"infeasible: {exc}")
        w.done()
        return EXIT_INFEASIBLE
    w.done()
    return EXIT_OK


def _sim_config(cfg: dict) -> SimConfig:
    replicas = int(cfg.get("replicas", "0"))
    seed = int(cfg.get("seed", "0"))
    if cfg.get("absorption", "analytic") == "cap":
        absorption = Cap(q_max=float(cfg["q_max"]), horizon=float(cfg["horizon"]))
    else:
        absorption = "analytic"
    return SimConfig(replicas=replicas, master_seed=seed, absorption=absorption)


def _design_param(policy: str, target: QoETarget, rates: Rates) -> float:
    if policy == "offline":
        return design_offline(target, rates).t_s
    if policy == "safe":
        return design_safe(target, rates)
    if policy == "risky":
        return design_risky(target, rates).t_star
    if policy == "threshold":
        return fluid_design_threshold(target, rates)
    return 0.0


def _policy_obj(policy: str, param: float):
    return {"always_free": AlwaysFree(), "always_both": AlwaysBoth(),
            "offline": Offline(param), "safe": Safe(param),
            "risky": Risky(param)}[policy]


_SIM_HEADER = ("model", "policy", "d", "eps", "param", "p_hat", "p_hw",
               "cost_hat", "cost_hw", "cost_packets", "cost_packets_hw", "status")


def _simulate_rows(w: _Csv, cfg: dict) -> int:
    model = cfg.get("model", "poisson")
    rates = Rates(float(cfg["r0"]), float(cfg["rc"]))
    sim = _sim_config(cfg)
    eps = float(cfg.get("eps", "nan"))
    policies = [p.strip() for p in
                cfg.get("policies", cfg.get("policy", "")).split(",") if p.strip()]
    if not policies:
        policies = ["offline", "safe", "risky"] if model == "poisson" else ["threshold"]
    if "d_grid" in cfg:
        d_values = [float(x) for x in cfg["d_grid"].split(",")]
    else:
        d_values = [float(cfg["d"])]
    dt = float(cfg.get("dt", "1e-3"))
    bridge = _bool(cfg.get("bridge", "true"))
    worst = EXIT_OK
    for d in d_values:
        target = QoETarget(d, eps) if not math.isnan(eps) else None
        for policy in policies:
            try:
                if "param" in cfg:
                    param = float(cfg["param"])
                else:
                    if target is None:
                        raise ValueError("config needs eps (for design) or param")
                    param = _design_param(policy, target, rates)
                if model == "fluid":
                    if policy != "threshold":
                        raise ValueError(f"fluid model expects policy=threshold, got {policy}")
                    p_hat, cost_hat = estimate_fluid(param, d, rates, sim, dt, bridge)
                else:
                    p_hat, cost_hat = estimate(_policy_obj(policy, param), d, rates, sim)
                w.row(model, policy, d, eps, param, p_hat.mean, p_hat.half_width_95,
                      cost_hat.mean, cost_hat.half_width_95,
                      cost_hat.mean * rates.rc, cost_hat.half_width_95 * rates.rc, "ok")
            except InfeasibleTarget as exc:
                w.row(model, policy, d, eps, math.nan, math.nan, math.nan,
                      math.nan, math.nan, math.nan, math.nan, f"infeasible: {exc}")
                worst = EXIT_INFEASIBLE
    return worst


def _cmd_simulate(args) -> int:
    cfg = _read_config(args.config)
    w = _Csv(args.out)
    _provenance(w, "simulate", cfg)
    w.row(*_SIM_HEADER)
    code = _simulate_rows(w, cfg)
    w.done()
    return code


def _cmd_tradeoff(args) -> int:
    cfg = _read_config(args.config)
    model = cfg.get("model", "poisson")
    rates = Rates(float(cfg["r0"]), float(cfg["rc"]))
    eps = float(cfg["eps"])
    sim = _sim_config(cfg)
    d_values = [float(x) for x in cfg["d_grid"].split(",")]
    policies = [p.strip() for p in
                cfg.get("policies", "offline,safe,risky").split(",") if p.strip()]
    dt = float(cfg.get("dt", "1e-3"))
    bridge = _bool(cfg.get("bridge", "true"))
    w = _Csv(args.out)
    _provenance(w, "tradeoff", cfg)
    w.row("model", "policy", "d", "eps", "param", "bound_lo", "bound_hi",
          "p_hat", "p_hw", "cost_hat", "cost_hw", "cost_packets",
          "cost_packets_hw", "status")
    worst = EXIT_OK
    for d in d_values:
        target = QoETarget(d, eps)
        for policy in policies:
            try:
                if policy == "offline":
                    param = design_offline(target, rates).t_s
                    lo = hi = param
                elif policy == "safe":
                    param = design_safe(target, rates)
                    ci = safe_cost_bounds(target, rates)
                    lo, hi = ci.lo, ci.hi
                elif policy == "risky":
                    des = design_risky(target, rates)
                    param, lo, hi = des.t_star, 0.0, risky_cost_bound(target, rates, des)
                elif policy == "threshold":
                    param = fluid_design_threshold(target, rates)
                    lo = hi = fluid_cost(d, param, rates)
                else:
                    raise ValueError(f"unknown policy {policy!r} in tradeoff config")
                if model == "fluid" or policy == "threshold":
                    p_hat, cost_hat = estimate_fluid(param, d, rates, sim, dt, bridge)
                else:
                    p_hat, cost_hat = estimate(_policy_obj(policy, param), d, rates, sim)
                w.row(model, policy, d, eps, param, lo, hi, p_hat.mean,
                      p_hat.half_width_95, cost_hat.mean, cost_hat.half_width_95,
                      cost_hat.mean * rates.rc, cost_hat.half_width_95 * rates.rc, "ok")
            except InfeasibleTarget as exc:
                w.row(model, policy, d, eps, math.nan, math.nan, math.nan,
                      math.nan, math.nan, math.nan, math.nan, math.nan,
                      math.nan, f"infeasible: {exc}")
                worst = EXIT_INFEASIBLE
    w.done()
    return worst


def _hjb_grid_poisson(rates: Rates, n: int):
    exps = Exponents.from_rates(rates)
    pts = []
    side = max(2, int(math.isqrt(n)))
    for i in range(side):
        q = 5.0 + 60.0 * i / (side - 1)
        for j in range(side):
            s = 0.15 + 0.7 * j / (side - 1)
            p = math.exp(-(exps.alpha1 * (1.0 - s) + exps.alpha0 * s) * q)
            if 0.0 < p < 1.0:
                pts.append((q, p))
    return pts[:n] if n < len(pts) else pts


def _hjb_grid_fluid(rates: Rates, n: int):
    exps = Exponents.from_rates(rates)
    pts = []
    side = max(2, int(math.isqrt(n)))
    for i in range(side):
        q = 2.0 + 28.0 * i / (side - 1)
        for j in range(side):
            s = 0.15 + 0.7 * j / (side - 1)
            p = math.exp(-(exps.theta1 * (1.0 - s) + exps.theta0 * s) * q)
            if 0.0 < p < 1.0:
                pts.append((q, p))
    return pts[:n] if n < len(pts) else pts


def _cmd_hjb_check(args) -> int:
    rates = Rates(args.r0, args.rc)
    w = _Csv(args.out)
    _provenance(w, "hjb-check", {"model": args.model, "grid": args.grid,
                                 "h": args.h, "r0": args.r0, "rc": args.rc})
    if args.model == "poisson":
        w.row("q", "p", "zone", "residual", "lhs", "rhs", "u_star", "phi_star")
        for q, p in _hjb_grid_poisson(rates, args.grid):
            rep = poisson_hjb_residual(q, p, rates, h=args.h)
            w.row(q, p, rep.zone, rep.residual, rep.lhs, rep.rhs, rep.u_star,
                  rep.phi_star)
    else:
        w.row("q", "p", "subregion", "residual", "v")
        for q, p in _hjb_grid_fluid(rates, args.grid):
            try:
                rep = fluid_hjb_residual(FluidState(q, p), rates, h=args.h)
            except QStreamError:
                continue
            w.row(q, p, rep.subregion, rep.residual, rep.v)
    w.done()
    return EXIT_OK


def _cmd_manifold(args) -> int:
    rates = Rates(args.r0, args.rc)
    anchor = QoETarget(args.d, args.eps)
    w = _Csv(args.out)
    _provenance(w, "manifold", {"d": args.d, "eps": args.eps, "r0": args.r0,
                                "rc": args.rc, "dt": args.dt, "n": args.n,
                                "seed": args.seed, "refine": args.refine})
    try:
        rep = manifold_invariance_check(anchor, rates, args.dt, args.n,
                                        args.seed, refine=args.refine)
    except InfeasibleTarget as exc:
        w.row("status")
        w.row(f"infeasible: {exc}")
        w.done()
        return EXIT_INFEASIBLE
    w.row("dt", "median_max_dev", "mean_max_dev", "n_used", "n_absorbed",
          "n_exited", "median_ratio")
    for stats in (rep.coarse, rep.fine):
        w.row(stats.dt, stats.median_max_dev, stats.mean_max_dev, stats.n_used,
              stats.n_absorbed, stats.n_exited, rep.median_ratio)
    w.done()
    return EXIT_OK


def _cmd_rlnc(args) -> int:
    servers = [float(x) for x in args.servers.split(",") if x.strip()]
    w = _Csv(args.out)
    _provenance(w, "rlnc", {"q": args.q, "block": args.block,
                            "servers": args.servers, "horizon": args.horizon,
                            "seed": args.seed, "payload": args.payload})
    rep = merge_experiment(servers, args.horizon, args.block, args.q,
                           args.seed, payload_len=args.payload)
    w.row("q", "w", "servers", "horizon", "arrivals", "mean_count_expected",
          "blocks_decoded", "redundant", "redundant_per_block",
          "expected_redundant_per_block", "ks_statistic", "ks_critical_1pct",
          "ks_consistent", "decode_errors")
    w.row(rep.q, rep.w, "+".join(_fmt(r) for r in rep.rates), rep.horizon,
          rep.arrivals, rep.mean_count_expected, rep.blocks_decoded,
          rep.redundant, rep.redundant_per_block,
          rep.expected_redundant_per_block, rep.ks_statistic,
          rep.ks_critical_1pct, rep.ks_consistent, rep.decode_errors)
    w.done()
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="qstream", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exponent", help="interruption exponents of a rate")
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_exponent)

    p = sub.add_parser("regions", help="feasibility region boundaries")
    p.add_argument("--r0", type=float, required=True)
    p.add_argument("--rc", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--model", choices=MODELS, default="poisson")
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_regions)

    p = sub.add_parser("design", help="design a policy for a (D, eps) target")
    p.add_argument("--policy", choices=("offline", "safe", "risky", "fluid"),
                   required=True)
    p.add_argument("--d", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--r0", type=float, required=True)
    p.add_argument("--rc", type=float, required=True)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_design)

    p = sub.add_parser("simulate", help="Monte Carlo estimates from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("tradeoff", help="sweep a D grid: designs, bounds, MC estimates")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_tradeoff)

    p = sub.add_parser("hjb-check", help="finite-difference HJB residuals on a grid")
    p.add_argument("--model", choices=MODELS, required=True)
    p.add_argument("--grid", type=int, default=100)
    p.add_argument("--h", type=float, default=None)
    p.add_argument("--r0", type=float, default=1.05)
    p.add_argument("--rc", type=float, default=0.15)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_hjb_check)

    p = sub.add_parser("manifold", help="invariant-manifold tracking check")
    p.add_argument("--d", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--r0", type=float, default=1.05)
    p.add_argument("--rc", type=float, default=0.15)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--refine", type=float, default=2.0)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_manifold)

    p = sub.add_parser("rlnc", help="multi-server network-coding merge experiment")
    p.add_argument("--q", type=int, default=256)
    p.add_argument("--block", type=int, required=True)
    p.add_argument("--servers", required=True, help="comma list of rates")
    p.add_argument("--horizon", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--payload", type=int, default=32)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_rlnc)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "hjb-check" and args.h is None:
        args.h = 1e-4 if args.model == "poisson" else 1e-3
    try:
        return args.fn(args)
    except (QStreamError, ValueError, OSError, KeyError) as exc:
        print(f"qstream: error: {exc}", file=sys.stderr)
        print(CONFIG_KEYS, file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
