"""Closed-form constant conditions behind the two concavity statements.

Each condition is a lower bound for one constant (C, one of its summands
C_1..C_6, or C_tilde) as a function of p; the aggregates combine them into
the requirement on C_tilde and C for the plain and maximal Bellman functions.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

LN2 = math.log(2)
SQRT2 = math.sqrt(2)
C_TILDE = 4 * SQRT2
C_PLAIN = 9.0
C_MAXIMAL = 21.0


def _terms(p):
    """Shared pieces; ip = 1/p' is written out so that p = 1 evaluates as a limit."""
    ip = 1 - 1 / p
    return {
        "ip": ip,
        "case1_6": 2 ** ip * (1 + 1 / p),
        "case1_5": 3 ** (1 + ip) / p,
        "case2": 3 ** ip * (1 + 2 ** (1 / p)),
        "c6": 2 * 1.5 ** (1 + ip) / p,
        "c7": 1 / p + (1 + (1 / p + 1 / p ** 2) ** p) ** (1 / p),
        "c8": 3 ** ip * (1 + (1 + ip ** p) ** (1 / p)),
        "c10": 3 * (p - 1) * p * 1.5 ** ip,
    }


def _table(p, Ct):
    t = _terms(p)
    ip = t["ip"]
    tl = Ct * LN2
    return {
        "cond1": t["case1_6"] + tl,
        "cond2": t["case1_5"],
        "cond2_tC": 2 ** (4 - 1 / p) * ip,
        "cond3": t["case2"] + tl,
        "cond4": 2 + tl + 0 * p,
        "cond4_tC": 2.0 + 0 * p,
        "cond5": 2 + tl + 0 * p,
        "cond6": t["c6"],
        "cond6_tC": 8 * ip,
        "cond7": t["c7"] + tl,
        "cond8": t["c8"] + tl,
        "cond9": 9.0 + 0 * p,
        "cond9_tC": C_TILDE + 0 * p,
        "cond10": t["c10"],
        "cond11": t["case2"] + tl,
        "cond0_tC": np.maximum(2.0, 2 ** (4 - 1 / p) * ip),
        "cond0_C": np.maximum.reduce([2.0 + 0 * p, t["case2"], t["case1_5"] + t["case1_6"]]) + tl,
        "cond_C": np.maximum.reduce([t["c6"] + 2, t["c7"], t["c8"], 9 + t["c10"], t["case2"]]) + tl,
    }


CONDITION_NAMES = tuple(_table(2.0, C_TILDE))
CSV_COLUMNS = ("cond0_tC", "cond0_C", "cond_C") + tuple(f"cond{i}" for i in range(1, 12))


def _check_p(p):
    p = np.asarray(p, dtype=float)
    if np.any(p <= 1) or np.any(p > 2):
        raise ValueError("p must lie in (1, 2]")
    return p


def cond_value(name: str, p, C_tilde: float = C_TILDE):
    """Right-hand side of the named lower-bound condition at p."""
    if name not in CONDITION_NAMES:
        raise ValueError(f"unknown condition {name!r}")
    out = _table(_check_p(p), C_tilde)[name]
    return float(out) if np.ndim(out) == 0 else out


def cond_limit_at_one(name: str, C_tilde: float = C_TILDE) -> float:
    """Value of the condition as p -> 1+ (terms with 1/p' vanish)."""
    if name not in CONDITION_NAMES:
        raise ValueError(f"unknown condition {name!r}")
    return float(_table(1.0, C_tilde)[name])


def minimal_admissible(variant: str, p, C_tilde: float = C_TILDE):
    """Smallest C that the case analysis certifies for the given variant."""
    if variant == "plain":
        return cond_value("cond0_C", p, C_tilde)
    if variant == "maximal":
        return cond_value("cond_C", p, C_tilde)
    raise ValueError(f"unknown variant {variant!r}")


def elementary_slack(a, b, p):
    """a^p + p a^(p-1) b + b^p - (a+b)^p, nonnegative for a, b >= 0 and p in [1, 2]."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return a ** p + p * a ** (p - 1) * b + b ** p - (a + b) ** p


@dataclass
class ConditionCurve:
    variant: str
    C_tilde: float
    p_grid: np.ndarray
    values: dict

    def sup(self, name: str):
        v = self.values[name]
        i = int(np.argmax(v))
        return float(v[i]), float(self.p_grid[i])

    def summary(self) -> dict:
        out = {}
        for name in ("cond0_tC", "cond0_C", "cond_C"):
            val, at = self.sup(name)
            out[f"sup_{name}"] = val
            out[f"argmax_p_{name}"] = at
        out["limit_p1"] = {n: cond_limit_at_one(n, self.C_tilde) for n in ("cond0_tC", "cond0_C", "cond_C")}
        return out

    def rows(self):
        for i, p in enumerate(self.p_grid):
            yield [p] + [self.values[c][i] for c in CSV_COLUMNS]

    def write_csv(self, fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("p",) + CSV_COLUMNS)
        for row in self.rows():
            w.writerow([f"{x:.15g}" for x in row])


def sweep(variant: str, p_min: float = 1.01, p_max: float = 2.0, grid_count: int = 1000,
          C_tilde: float = C_TILDE) -> ConditionCurve:
    if variant not in ("plain", "maximal"):
        raise ValueError(f"unknown variant {variant!r}")
    if not 1 < p_min <= p_max <= 2:
        raise ValueError("need 1 < p_min <= p_max <= 2")
    if grid_count < 2:
        raise ValueError("grid_count must be >= 2")
    grid = np.linspace(p_min, p_max, grid_count)
    table = _table(grid, C_tilde)
    values = {k: np.broadcast_to(np.asarray(v, dtype=float), grid.shape).copy()
              for k, v in table.items()}
    return ConditionCurve(variant=variant, C_tilde=C_tilde, p_grid=grid, values=values)
