"""Exact checks of the weighted martingale inequalities on dyadic instances."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import bellman as bm
from .dyadic import (FiltrationTree, Martingale, conditional_square_function, lr_norm,
                     martingale_from_terminal, maximal_process, p_variation,
                     p_variation_process, running_max, weight_processes)
from .smooth_space import SpaceDescriptor, norm

MAX_DEPTH = 20
GENERATORS = ("gaussian-terminal", "sparse-weight", "adversarial-seeded")
RATIO_ATOL = 1e-12


@dataclass
class RatioReport:
    lhs: float
    rhs: float
    ratio: float
    bound: float
    satisfied: bool
    checks: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "ratio": self.ratio, "bound": self.bound,
                "satisfied": self.satisfied, "checks": self.checks}


def _holds(lhs, bound_rhs):
    return bool(lhs <= bound_rhs + RATIO_ATOL * (abs(lhs) + abs(bound_rhs)))


def _ratio(lhs, rhs):
    # rhs = 0 forces lhs = 0 (S_p f = 0 means f = 0)
    return lhs / rhs if rhs > 0 else 0.0


def _report(lhs, rhs, bounds: dict) -> RatioReport:
    checks = {name: {"bound": b, "satisfied": _holds(lhs, b * rhs)} for name, b in bounds.items()}
    return RatioReport(lhs=float(lhs), rhs=float(rhs), ratio=float(_ratio(lhs, rhs)),
                       bound=float(min(bounds.values())),
                       satisfied=all(c["satisfied"] for c in checks.values()), checks=checks)


def weighted_bounds(space: SpaceDescriptor) -> dict:
    pc = space.p_conj
    return {"w_BDG_CH": 21 * pc * space.C_H, "w_BDG": 84 * pc * space.C_sm}


def verify_maximal_weighted(tree, mart: Martingale, w, space: SpaceDescriptor) -> RatioReport:
    """E(f* w) against E(S_p f w*) with the constants 21 p' C_H and 84 p' C_sm."""
    _, fstar = maximal_process(mart)
    wt = weight_processes(tree, w)
    lhs = float(np.mean(fstar * wt.w))
    rhs = float(np.mean(p_variation(mart, space.p) * wt.w_star))
    return _report(lhs, rhs, weighted_bounds(space))


def verify_nonmaximal_weighted(tree, mart: Martingale, w, space: SpaceDescriptor) -> RatioReport:
    wt = weight_processes(tree, w)
    lhs = float(np.mean(norm(space, mart.terminal) * wt.w))
    rhs = float(np.mean(p_variation(mart, space.p) * wt.w_star))
    return _report(lhs, rhs, {"w_non_maximal": 9 * space.C_H})


@dataclass
class StepReport:
    variant: str
    expected_B: list
    node_gap_ok: bool
    conditional_ok: bool
    monotone_ok: bool
    initial_ok: bool
    final_chain_ok: bool
    first_failure: dict | None
    min_relative_gap: float
    final_lhs: float

    @property
    def ok(self) -> bool:
        return (self.node_gap_ok and self.conditional_ok and self.monotone_ok
                and self.initial_ok and self.final_chain_ok)

    def to_record(self) -> dict:
        d = dict(self.__dict__)
        d["ok"] = self.ok
        return d


def verify_telescoping(tree, mart: Martingale, w, space: SpaceDescriptor, variant: str,
                       k: bm.BellmanConstants, rtol: float = bm.VIOLATION_RTOL) -> StepReport:
    """Run the Bellman process B_n along the tree and check each telescoping step."""
    if variant not in ("plain", "maximal"):
        raise ValueError(f"unknown variant {variant!r}")
    p = space.p
    wt = weight_processes(tree, w)
    qs = p_variation_process(mart, p)
    fstar = running_max(tree, mart.norms())
    x = mart.levels

    def B(n):
        if variant == "plain":
            return bm._u_plain(space, x[n], qs[n], wt.w_n[n], wt.w_star_n[n], k)
        return bm._u_max(space, x[n], fstar[n], qs[n], wt.w_n[n], wt.w_star_n[n], k)

    Bs = [B(n) for n in range(tree.depth + 1)]
    EB = [float(np.mean(b)) for b in Bs]
    first = None
    node_ok = cond_ok = True
    min_rel = math.inf
    for n in range(tree.depth):
        rep = lambda a: np.repeat(a, 2, axis=0)
        d = x[n + 1] - rep(x[n])
        e = wt.w_n[n + 1] - rep(wt.w_n[n])
        if variant == "plain":
            gap, U0 = bm._gap_plain(space, rep(x[n]), rep(qs[n]), rep(wt.w_n[n]),
                                    rep(wt.w_star_n[n]), d, e, k)
        else:
            gap, U0 = bm._gap_max(space, rep(x[n]), rep(fstar[n]), rep(qs[n]), rep(wt.w_n[n]),
                                  rep(wt.w_star_n[n]), d, e, k)
        rel = gap / bm.gap_scale(U0)
        min_rel = min(min_rel, float(rel.min()))
        bad = np.flatnonzero(rel < -rtol)
        if bad.size and node_ok:
            node_ok = False
            first = first or {"check": "node_gap", "level": n, "child": int(bad[0]),
                              "relative_gap": float(rel[bad[0]])}
        cond = 0.5 * (Bs[n + 1][0::2] + Bs[n + 1][1::2]) - Bs[n]
        bad = np.flatnonzero(cond > rtol * bm.gap_scale(Bs[n]))
        if bad.size and cond_ok:
            cond_ok = False
            first = first or {"check": "conditional", "level": n, "node": int(bad[0]),
                              "excess": float(cond[bad[0]])}
    scale = 1.0 + max(abs(b) for b in EB)
    monotone = all(EB[i + 1] <= EB[i] + rtol * scale for i in range(tree.depth))
    initial = EB[0] <= rtol * scale
    qN = qs[-1] ** (1 / p)
    if variant == "plain":
        lead = np.mean(wt.w_n[-1] * norm(space, x[-1])) / space.C_H
    else:
        lead = np.mean(wt.w_n[-1] * fstar[-1]) / (space.p_conj * space.C_H)
    final_lhs = float(lead - k.C * np.mean(wt.w_star_n[-1] * qN))
    final = final_lhs <= EB[-1] + rtol * scale
    if first is None and not (monotone and initial and final):
        first = {"check": "monotone" if not monotone else ("initial" if not initial else "final")}
    return StepReport(variant=variant, expected_B=EB, node_gap_ok=node_ok, conditional_ok=cond_ok,
                      monotone_ok=monotone, initial_ok=initial, final_chain_ok=final,
                      first_failure=first, min_relative_gap=min_rel, final_lhs=final_lhs)


def verify_lr(tree, mart: Martingale, r: float, space: SpaceDescriptor) -> RatioReport:
    """||f*||_r <= K r ||S_p f||_r with K = 21 p' C_H, plus the Hoelder/Doob steps.

    The steps are checked with the extremal weight w = (f*)^(r-1), for which
    E(f* w) = ||f*||_r^r and ||w||_{r'} = ||f*||_r^(r-1).
    """
    if not r > 1:
        raise ValueError("r must be > 1")
    K = 21 * space.p_conj * space.C_H
    _, fstar = maximal_process(mart)
    Sp = p_variation(mart, space.p)
    lhs, rhs = lr_norm(tree, fstar, r), lr_norm(tree, Sp, r)
    rep = _report(lhs, rhs, {"BDG_Lr": K * r})
    rc = r / (r - 1)
    w = fstar ** (r - 1)
    wt = weight_processes(tree, w)
    Ew = float(np.mean(fstar * w))
    ESw = float(np.mean(Sp * wt.w_star))
    w_r, wstar_r = lr_norm(tree, w, rc), lr_norm(tree, wt.w_star, rc)
    rep.checks["dual_identity"] = {"satisfied": bool(abs(Ew - lhs ** r) <= 1e-10 * (Ew + 1e-300))
                                   or Ew == 0}
    rep.checks["holder"] = {"satisfied": _holds(ESw, rhs * wstar_r)}
    rep.checks["doob"] = {"bound": r, "satisfied": _holds(wstar_r, r * w_r)}
    rep.checks["weighted_step"] = {"bound": K, "satisfied": _holds(Ew, K * ESw)}
    rep.satisfied = all(c["satisfied"] for c in rep.checks.values())
    return rep


def triple_process(tree, g: Martingale, lam) -> Martingale:
    """f_n = lam_{n-1} f_{n-1} + (g_n - g_{n-1}), f_0 = 0; returned as node levels.

    The result is adapted but generally not a martingale.
    """
    if np.abs(g.levels[0]).max() > 0:
        raise ValueError("need g_0 = 0")
    lam = [np.asarray(a, dtype=float) for a in lam]
    if any(np.any(a < 0) or np.any(a > 1) for a in lam):
        raise ValueError("lambda must take values in [0, 1]")
    f = [np.zeros_like(g.levels[0])]
    for n, inc in enumerate(g.increments(), start=1):
        ftilde = lam[n - 1][:, None] * f[-1]
        f.append(np.repeat(ftilde, 2, axis=0) + inc)
    return Martingale(tree, f, g.space, check=False)


def verify_triple_process(tree, g: Martingale, lam, w, space: SpaceDescriptor,
                          r_values=(2.0, 3.0, 4.0)) -> RatioReport:
    f = triple_process(tree, g, lam)
    _, fstar = maximal_process(f)
    Spg = p_variation(g, space.p)
    wt = weight_processes(tree, w)
    lhs = float(np.mean(fstar * wt.w))
    rhs = float(np.mean(Spg * wt.w_star))
    const = 84 * space.p_conj * space.C_sm
    rep = _report(lhs, rhs, {"w_BDG_non_martingale": const})
    for r in r_values:
        a, b = lr_norm(tree, fstar, r), lr_norm(tree, Spg, r)
        rep.checks[f"BDG_Lr_non_martingale_r={r:g}"] = {
            "bound": const * r, "lhs": a, "rhs": b, "satisfied": _holds(a, const * r * b)}
    rep.satisfied = all(c["satisfied"] for c in rep.checks.values())
    return rep


def verify_sg_comparison(tree, g: Martingale, r: float) -> RatioReport:
    """||s g||_r <= (r/2)^(1/2) ||S_2 g||_r for r >= 2."""
    if r < 2:
        raise ValueError("the comparison is stated for r >= 2")
    lhs = lr_norm(tree, conditional_square_function(g), r)
    rhs = lr_norm(tree, p_variation(g, 2.0), r)
    return _report(lhs, rhs, {"sg_vs_S2": math.sqrt(r / 2)})


# -- instances ------------------------------------------------------------------

@dataclass
class InstanceConfig:
    space: SpaceDescriptor
    depth: int
    generator: str = "gaussian-terminal"
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.depth <= MAX_DEPTH:
            raise ValueError(f"depth must lie in [0, {MAX_DEPTH}]")
        if self.generator not in GENERATORS:
            raise ValueError(f"unknown generator {self.generator!r}")

    def to_record(self) -> dict:
        return {"space": self.space.to_record(), "depth": self.depth,
                "generator": self.generator, "seed": self.seed}


@dataclass
class Instance:
    tree: FiltrationTree
    mart: Martingale
    w: np.ndarray
    lam: list


def _lam(rng, depth):
    return [rng.uniform(0, 1, 2 ** n) for n in range(depth)]


def make_instance(config: InstanceConfig, search_iterations: int = 100) -> Instance:
    tree = FiltrationTree(config.depth)
    rng = np.random.default_rng(config.seed)
    sp = config.space
    n = tree.n_leaves
    if config.generator == "adversarial-seeded":
        rep = adversarial_search(InstanceConfig(sp, config.depth, "gaussian-terminal", config.seed),
                                 search_iterations)
        terminal, w = rep.terminal, rep.weights
    else:
        terminal = rng.standard_normal((n, sp.dim))
        if config.generator == "gaussian-terminal":
            w = rng.exponential(1.0, n)
        else:
            keep = rng.uniform(size=n) < 2.0 ** -rng.integers(0, config.depth + 1)
            keep[rng.integers(n)] = True
            w = keep * rng.uniform(0.5, 2.0) * 2.0 ** rng.integers(-3, 4)
    mart = martingale_from_terminal(tree, terminal, sp)
    return Instance(tree, mart, np.asarray(w, dtype=float), _lam(rng, config.depth))


def weighted_ratio(tree, terminal, w, space) -> float:
    mart = martingale_from_terminal(tree, terminal, space)
    rep = verify_maximal_weighted(tree, mart, w, space)
    return rep.ratio


@dataclass
class SearchReport:
    config: dict
    iterations: int
    best_ratio: float
    terminal: np.ndarray
    weights: np.ndarray
    trajectory: list

    def to_record(self) -> dict:
        return {"config": self.config, "iterations": self.iterations,
                "best_ratio": self.best_ratio, "leaf_values": self.terminal.tolist(),
                "weights": self.weights.tolist(), "trajectory": self.trajectory}


def adversarial_search(config: InstanceConfig, iterations: int,
                       step_schedule=(0.5, 0.9995, 1e-3), init: str = "constant") -> SearchReport:
    """Local search for large E(f* w) / E(S_p f w*).

    Each iteration perturbs one leaf value (one coordinate) or one leaf weight
    by step * N(0, 1), relative to the current scale, and keeps the move only
    if the ratio improves. step = max(step0 * decay^i, floor).
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    sp = config.space
    tree = FiltrationTree(config.depth)
    rng = np.random.default_rng(config.seed)
    n = tree.n_leaves
    if init == "constant":
        terminal = np.zeros((n, sp.dim))
        terminal[:, 0] = 1.0
        w = np.ones(n)
    else:
        terminal = rng.standard_normal((n, sp.dim))
        w = rng.exponential(1.0, n)
    best = weighted_ratio(tree, terminal, w, sp)
    traj = [[0, best]]
    step0, decay, floor = step_schedule
    for i in range(1, iterations + 1):
        step = max(step0 * decay ** i, floor)
        t2, w2 = terminal, w
        if rng.uniform() < 0.5:
            t2 = terminal.copy()
            j, c = rng.integers(n), rng.integers(sp.dim)
            t2[j, c] += step * rng.standard_normal() * (np.abs(terminal).max() + 1e-12)
        else:
            w2 = w.copy()
            j = rng.integers(n)
            w2[j] = max(0.0, w2[j] + step * rng.standard_normal() * (w.max() + 1e-12))
            if w2.max() <= 0:
                continue
        val = weighted_ratio(tree, t2, w2, sp)
        if val > best:
            best, terminal, w = val, t2, w2
            traj.append([i, best])
    bound = 21 * sp.p_conj * sp.C_H
    assert best <= bound * (1 + 1e-12), "search exceeded the proven bound"
    return SearchReport(config=config.to_record(), iterations=iterations, best_ratio=best,
                        terminal=terminal, weights=w, trajectory=traj)


# -- fleets ----------------------------------------------------------------------

def check_instance(inst: Instance, space: SpaceDescriptor, r_values=(2.0, 3.0, 4.0),
                   telescoping=True) -> dict:
    """Every inequality check on one instance; returns per-check results."""
    tree, mart, w = inst.tree, inst.mart, inst.w
    out = {}
    rep = verify_maximal_weighted(tree, mart, w, space)
    out["w_BDG"] = rep.checks["w_BDG"]["satisfied"]
    out["w_BDG_CH"] = rep.checks["w_BDG_CH"]["satisfied"]
    ratios = {"maximal": rep.ratio}
    nm = verify_nonmaximal_weighted(tree, mart, w, space)
    out["w_non_maximal"] = nm.satisfied
    ratios["non_maximal"] = nm.ratio
    g = Martingale(tree, [v - mart.levels[0] for v in mart.levels], space, check=False)
    tp = verify_triple_process(tree, g, inst.lam, w, space, r_values)
    out["w_BDG_non_martingale"] = tp.satisfied
    ratios["non_martingale"] = tp.ratio
    for r in r_values:
        out[f"BDG_Lr_r={r:g}"] = verify_lr(tree, mart, r, space).satisfied
        out[f"sg_vs_S2_r={r:g}"] = verify_sg_comparison(tree, g, r).satisfied
    if telescoping:
        for variant, consts in (("plain", bm.PLAIN_CONSTANTS), ("maximal", bm.MAXIMAL_CONSTANTS)):
            st = verify_telescoping(tree, mart, w, space, variant, bm.BellmanConstants(*consts))
            out[f"telescoping_{variant}"] = st.ok
    return {"checks": out, "ratios": ratios}


def _fleet_job(args):
    cfg, r_values, telescoping, search_iterations = args
    return check_instance(make_instance(cfg, search_iterations), cfg.space, r_values, telescoping)


def run_fleet(spaces, depths, generators=GENERATORS, trials: int = 100, seed: int = 0,
              r_values=(2.0, 3.0, 4.0), telescoping=True, search_iterations: int = 100,
              workers: int = 1) -> dict:
    """Check every instance of a seeded fleet; instance seeds are seed*10^6 + trial.

    Results are merged with max and sum only, so the worker count cannot
    change the report.
    """
    jobs = [(InstanceConfig(sp, depth, gen, seed * 1_000_000 + t), r_values, telescoping,
             search_iterations)
            for sp in spaces for depth in depths for gen in generators for t in range(trials)]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(workers) as ex:
            results = list(ex.map(_fleet_job, jobs, chunksize=8))
    else:
        results = [_fleet_job(j) for j in jobs]
    violations = {}
    max_ratio = {}
    for res in results:
        for name, okay in res["checks"].items():
            violations[name] = violations.get(name, 0) + (not okay)
        for name, val in res["ratios"].items():
            max_ratio[name] = max(max_ratio.get(name, 0.0), val)
    return {"instances": len(results), "violations": violations, "max_ratio": max_ratio,
            "ok": not any(violations.values())}
