"""Command line front-end: every verification as a reproducible batch command.

Exit codes: 0 all checks passed, 1 a mathematical check failed, 2 bad configuration.
Each command prints one JSON report (``schema: 1``) on stdout; the conditions
command prints summary lines unless ``--format json`` is given.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from . import bellman as bm
from . import conditions as cc
from . import extrapolation as ex
from . import lab
from .dyadic import FiltrationTree
from .reporting import clean, dumps
from .smooth_space import KINDS, constant_relations, estimate_CH, estimate_Csm, make_space

WORKERS_ENV = "WBDG_WORKERS"
SUP_TOL = 1e-9
ESTIMATE_RTOL = 1e-9


class ConfigError(Exception):
    pass


def _default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}")
    if n < 1:
        raise ConfigError(f"{WORKERS_ENV} must be >= 1")
    return n


def _add_space(p: argparse.ArgumentParser, default_p=2.0):
    p.add_argument("--space", choices=KINDS, default="scalar")
    p.add_argument("--dim", type=int, help="dimension (required for euclidean and lq)")
    p.add_argument("--q", type=float, help="exponent of the lq space")
    p.add_argument("--p", type=float, default=default_p, help="smoothness exponent in (1, 2]")


def _space(parser, args):
    if args.space != "scalar" and args.dim is None:
        parser.error(f"--dim is required for --space {args.space}")
    if args.space == "lq" and args.q is None:
        parser.error("--q is required for --space lq")
    return make_space(args.space, p=args.p, q=args.q, dim=args.dim or 1)


def _positive(name, value):
    if value < 1:
        raise ConfigError(f"{name} must be >= 1")


def _workers(args):
    return args.workers if args.workers is not None else _default_workers()


def _emit(command, payload, out=None):
    text = dumps(command, payload)
    print(text)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")


# -- commands ----------------------------------------------------------------------

def cmd_smoothness(parser, args) -> int:
    sp = _space(parser, args)
    _positive("--samples", args.samples)
    csm = estimate_Csm(sp, args.samples, args.seed)
    ch = estimate_CH(sp, args.samples, args.seed)
    rel = constant_relations(sp)
    rel["C_sm_est<=C_sm"] = bool(csm <= sp.C_sm * (1 + ESTIMATE_RTOL))
    rel["C_H_est<=C_H"] = bool(ch <= sp.C_H * (1 + ESTIMATE_RTOL))
    ok = all(rel.values())
    _emit("smoothness", {"space": sp.to_record(), "samples": args.samples, "seed": args.seed,
                         "C_sm_est": csm, "C_H_est": ch, "relation_checks": rel, "ok": ok},
          args.output)
    return 0 if ok else 1


def cmd_concavity(parser, args) -> int:
    sp = _space(parser, args)
    _positive("--samples", args.samples)
    C_default, Ct_default = bm.PLAIN_CONSTANTS if args.variant == "plain" else bm.MAXIMAL_CONSTANTS
    k = bm.BellmanConstants(args.C if args.C is not None else C_default,
                            args.Ct if args.Ct is not None else Ct_default)
    rep = bm.concavity_scan(sp, args.variant, k, args.samples, args.seed,
                            workers=_workers(args), case=args.case)
    rec = rep.to_record()
    rec["ok"] = rep.violations == 0
    _emit("concavity", rec, args.output)
    return 0 if rep.violations == 0 else 1


def cmd_conditions(parser, args) -> int:
    curve = cc.sweep(args.variant, args.p_min, args.p_max, args.grid, args.Ct)
    if args.output:
        with open(args.output, "w", newline="") as fh:
            curve.write_csv(fh)
    limits = {"cond0_tC": args.Ct, "cond0_C": cc.C_PLAIN, "cond_C": cc.C_MAXIMAL}
    checks = {}
    for name, lim in limits.items():
        val, _ = curve.sup(name)
        checks[name] = bool(val <= lim + SUP_TOL)
    ok = all(checks.values())
    if args.format == "json":
        _emit("conditions", {"variant": args.variant, "C_tilde": args.Ct, "p_min": args.p_min,
                             "p_max": args.p_max, "grid": args.grid, "summary": curve.summary(),
                             "limits": limits, "checks": checks, "ok": ok})
    elif args.format == "csv" and not args.output:
        curve.write_csv(sys.stdout)
    else:
        for name in limits:
            val, at = curve.sup(name)
            print(f"sup_{name}={val:.6f} at p={at:.3f}")
        print("ok" if ok else "FAILED: " + ",".join(n for n, v in checks.items() if not v))
    return 0 if ok else 1


def cmd_simulate(parser, args) -> int:
    sp = _space(parser, args)
    _positive("--trials", args.trials)
    gens = tuple(args.generators) if args.generators else lab.GENERATORS
    res = lab.run_fleet([sp], args.depth, gens, args.trials, args.seed,
                        tuple(args.r_values), not args.no_telescoping,
                        workers=_workers(args))
    _emit("simulate", {"space": sp.to_record(), "depths": args.depth, "generators": list(gens),
                       "trials": args.trials, "seed": args.seed, **res}, args.output)
    return 0 if res["ok"] else 1


def cmd_search(parser, args) -> int:
    sp = _space(parser, args)
    _positive("--iters", args.iters)
    cfg = lab.InstanceConfig(sp, args.depth, "gaussian-terminal", args.seed)
    rep = lab.adversarial_search(cfg, args.iters, init=args.init)
    bound = 21 * sp.p_conj * sp.C_H
    ok = rep.best_ratio <= bound
    fixture = {"config": rep.config, "iterations": rep.iterations,
               "leaf_values": rep.terminal, "weights": rep.weights,
               "expected_ratio": rep.best_ratio}
    if args.fixture:
        with open(args.fixture, "w") as fh:
            fh.write(json.dumps(clean(fixture), indent=2) + "\n")
    _emit("search", {"config": rep.config, "iterations": rep.iterations,
                     "best_ratio": rep.best_ratio, "bound": bound,
                     "trajectory": rep.trajectory, "fixture": args.fixture, "ok": ok},
          args.output)
    return 0 if ok else 1


def _extrapolate_one(args, space, tree, seed):
    make = ex.pm1_field if args.field == "pm1" else ex.gaussian_field
    levels = make(tree, space.dim, seed)
    rep = ex.verify_vector_bdg(tree, levels, args.r, space)
    return {"seed": seed, "ratio": rep.ratio, "bound": rep.bound, "lhs": rep.lhs,
            "rhs": rep.rhs, "satisfied": rep.satisfied, "chain": rep.checks["chain"]}


def cmd_extrapolate(parser, args) -> int:
    space = ex.FunctionSpaceDescriptor(args.q, args.dim)
    if not args.r > 1:
        raise ConfigError("--r must be > 1")
    if not 0 <= args.depth <= lab.MAX_DEPTH:
        raise ConfigError(f"--depth must lie in [0, {lab.MAX_DEPTH}]")
    _positive("--trials", args.trials)
    tree = FiltrationTree(args.depth)
    runs = [_extrapolate_one(args, space, tree, args.seed + i) for i in range(args.trials)]
    ok = all(r["satisfied"] for r in runs)
    _emit("extrapolate", {"q": args.q, "dim": args.dim, "r": args.r, "depth": args.depth,
                          "field": args.field, "seed": args.seed,
                          "max_ratio": max(r["ratio"] for r in runs),
                          "instances": runs, "ok": ok}, args.output)
    return 0 if ok else 1


# -- parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="wbdg", description=__doc__.splitlines()[0])
    sub = top.add_subparsers(dest="command", required=True)

    def common(p, seed=0):
        p.add_argument("--seed", type=int, default=seed)
        p.add_argument("--output", help="also write the JSON report to this path")

    p = sub.add_parser("smoothness", help="estimate C_sm and C_H by sampling")
    _add_space(p)
    p.add_argument("--samples", type=int, default=100_000)
    common(p)

    p = sub.add_parser("concavity", help="sample the Bellman concavity inequality")
    _add_space(p)
    p.add_argument("--variant", choices=("plain", "maximal"), default="maximal")
    p.add_argument("--C", type=float)
    p.add_argument("--Ct", type=float)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--case", choices=bm.CASES_MAX)
    p.add_argument("--workers", type=int)
    common(p)

    p = sub.add_parser("conditions", help="sweep the constant conditions over p")
    p.add_argument("--variant", choices=("plain", "maximal"), default="maximal")
    p.add_argument("--p-min", type=float, default=1.01)
    p.add_argument("--p-max", type=float, default=2.0)
    p.add_argument("--grid", type=int, default=1000)
    p.add_argument("--Ct", type=float, default=cc.C_TILDE)
    p.add_argument("--format", choices=("text", "json", "csv"), default="text")
    p.add_argument("--output", help="write the sweep CSV to this path")

    p = sub.add_parser("simulate", help="run the inequality fleet")
    _add_space(p)
    p.add_argument("--depth", type=int, nargs="+", default=[4, 8, 12])
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--generators", nargs="+", choices=lab.GENERATORS)
    p.add_argument("--r-values", type=float, nargs="+", default=[2.0, 3.0, 4.0])
    p.add_argument("--no-telescoping", action="store_true")
    p.add_argument("--workers", type=int)
    common(p)

    p = sub.add_parser("search", help="adversarial search for the weighted ratio")
    _add_space(p)
    p.add_argument("--depth", type=int, default=6)
    p.add_argument("--iters", type=int, default=10_000)
    p.add_argument("--init", choices=("constant", "random"), default="constant")
    p.add_argument("--fixture", default="search-best.json",
                   help="path of the best-instance fixture ('' to skip)")
    common(p)

    p = sub.add_parser("extrapolate", help="extrapolation chain and vector-valued BDG")
    p.add_argument("--q", type=float, default=3.0)
    p.add_argument("--dim", type=int, default=4)
    p.add_argument("--r", type=float, default=2.0)
    p.add_argument("--depth", type=int, default=6)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--field", choices=("pm1", "gaussian"), default="pm1")
    common(p)
    return top


COMMANDS = {"smoothness": cmd_smoothness, "concavity": cmd_concavity,
            "conditions": cmd_conditions, "simulate": cmd_simulate,
            "search": cmd_search, "extrapolate": cmd_extrapolate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    sub = parser._subparsers._group_actions[0].choices[args.command]
    if getattr(args, "workers", None) is not None and args.workers < 1:
        sub.error("--workers must be >= 1")
    try:
        return COMMANDS[args.command](sub, args)
    except (ConfigError, ValueError) as err:
        print(f"wbdg {args.command}: configuration error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
