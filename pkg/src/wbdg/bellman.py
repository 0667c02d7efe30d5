"""The two Bellman functions, their derivatives and the concavity gaps.

U(x, q, u, v)    = u (|x|^p/C_H^p + q)^(1/p) - C v q^(1/p) + Ct v q^(1/p) ln(1 + u/v)
U(x, m, q, u, v) = u (m^p/C_H^p + q)^(1/p) - (u/p)(m^p - |x|^p)/C_H^p / (m^p/C_H^p + q)^(1 - 1/p)
                   - C v q^(1/p) + Ct v q^(1/p) ln(1 + u/v)

All functions are vectorized: point fields may be arrays with a leading batch
axis (x and d then have shape (n, dim)).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .smooth_space import SpaceDescriptor, norm, phi, phi_gradient_coords, DualVector

PLAIN_CONSTANTS = (9.0, 4 * math.sqrt(2))
MAXIMAL_CONSTANTS = (21.0, 4 * math.sqrt(2))
VIOLATION_RTOL = 1e-9
FORM_RTOL = 1e-10


@dataclass(frozen=True)
class BellmanConstants:
    C: float
    C_tilde: float

    @property
    def meaningful(self) -> bool:
        # Below this the case analysis says nothing; negative controls live there.
        return self.C > self.C_tilde * math.log(2)


@dataclass
class PlainPoint:
    x: np.ndarray
    q: np.ndarray
    u: np.ndarray
    v: np.ndarray


@dataclass
class MaxPoint:
    x: np.ndarray
    m: np.ndarray
    q: np.ndarray
    u: np.ndarray
    v: np.ndarray


@dataclass
class Perturbation:
    d: np.ndarray
    e: np.ndarray


def _arr(a):
    return np.asarray(a, dtype=float)


def _check_uv(q, u, v):
    if np.any(q < 0) or np.any(u < 0):
        raise ValueError("q and u must be nonnegative")
    if np.any(u > v * (1 + 1e-12)):
        raise ValueError("need u <= v")


def _check_plain(space, pt):
    _check_uv(_arr(pt.q), _arr(pt.u), _arr(pt.v))


def _check_max(space, pt):
    _check_uv(_arr(pt.q), _arr(pt.u), _arr(pt.v))
    if np.any(norm(space, pt.x) > _arr(pt.m) * (1 + 1e-12)):
        raise ValueError("need |x| <= m")


def _check_pert(pt, pert):
    if np.any(_arr(pt.u) + _arr(pert.e) < -1e-12 * np.maximum(_arr(pt.v), 1.0)):
        raise ValueError("need u + e >= 0")


def _v_log(u, v):
    """v ln(1 + u/v), extended by 0 at u = v = 0."""
    safe = np.where(v > 0, v, 1.0)
    return np.where(v > 0, v * np.log1p(u / safe), 0.0)


def _inv_ratio(u, v):
    """1 / (1 + u/v), extended by 1 at u = v = 0."""
    safe = np.where(v > 0, v, 1.0)
    return np.where(v > 0, 1.0 / (1.0 + u / safe), 1.0)


def _pow_neg(M, e):
    """M^(-e) with the 0 -> 0 convention used for the singular stratum."""
    safe = np.where(M > 0, M, 1.0)
    return np.where(M > 0, safe ** (-e), 0.0)


def _weight_terms(space, q, u, v, k):
    qp = q ** (1 / space.p)
    return -k.C * v * qp + k.C_tilde * qp * _v_log(u, v)


# -- plain Bellman function --------------------------------------------------

def _u_plain(space, x, q, u, v, k):
    M = phi(space, x) / space.C_H ** space.p + q
    return u * M ** (1 / space.p) + _weight_terms(space, q, u, v, k)


def u_plain(space: SpaceDescriptor, pt: PlainPoint, k: BellmanConstants):
    _check_plain(space, pt)
    return _u_plain(space, pt.x, _arr(pt.q), _arr(pt.u), _arr(pt.v), k)


def _plain_derivs(space, x, q, u, v, k):
    p, CHp = space.p, space.C_H ** space.p
    M = phi(space, x) / CHp + q
    coeff = u * _pow_neg(M, 1 - 1 / p) / (p * CHp)
    Ux = phi_gradient_coords(space, x) * np.asarray(coeff)[..., None]
    Uu = M ** (1 / p) + k.C_tilde * q ** (1 / p) * _inv_ratio(u, v)
    return Ux, Uu


def u_plain_derivatives(space: SpaceDescriptor, pt: PlainPoint, k: BellmanConstants):
    """(U_x as a DualVector, U_u). U_x is the zero functional at x = 0, q = 0."""
    _check_plain(space, pt)
    Ux, Uu = _plain_derivs(space, _arr(pt.x), _arr(pt.q), _arr(pt.u), _arr(pt.v), k)
    return DualVector(Ux, space), Uu


# -- maximal Bellman function ------------------------------------------------

def _max_heads(space, x, m, q, u):
    """Both displayed forms of the u-linear part of the maximal function."""
    p, CHp = space.p, space.C_H ** space.p
    a = phi(space, x) / CHp
    Mm = (m ** p) / CHp + q
    inv = _pow_neg(Mm, 1 - 1 / p)
    first = u * Mm ** (1 / p) - (u / p) * ((m ** p) / CHp - a) * inv
    second = (u / space.p_conj) * Mm ** (1 / p) + (u / p) * (q + a) * inv
    return first, second


def _u_max(space, x, m, q, u, v, k, check_forms=True):
    first, second = _max_heads(space, x, m, q, u)
    if check_forms:
        scale = np.abs(first) + np.abs(second)
        bad = np.abs(first - second) > FORM_RTOL * scale
        if np.any(bad):
            raise RuntimeError("the two algebraic forms of the maximal Bellman function disagree")
    return first + _weight_terms(space, q, u, v, k)


def u_max(space: SpaceDescriptor, pt: MaxPoint, k: BellmanConstants, check_forms=True):
    _check_max(space, pt)
    return _u_max(space, _arr(pt.x), _arr(pt.m), _arr(pt.q), _arr(pt.u), _arr(pt.v), k,
                  check_forms)


def u_max_second_form(space: SpaceDescriptor, pt: MaxPoint, k: BellmanConstants):
    _, second = _max_heads(space, _arr(pt.x), _arr(pt.m), _arr(pt.q), _arr(pt.u))
    return second + _weight_terms(space, _arr(pt.q), _arr(pt.u), _arr(pt.v), k)


def _max_derivs(space, x, m, q, u, v, k):
    p, CHp = space.p, space.C_H ** space.p
    a = phi(space, x) / CHp
    Mm = (m ** p) / CHp + q
    inv = _pow_neg(Mm, 1 - 1 / p)
    Ux = phi_gradient_coords(space, x) * np.asarray(u * inv / (p * CHp))[..., None]
    Uu = (Mm ** (1 / p) / space.p_conj + (q + a) * inv / p
          + k.C_tilde * q ** (1 / p) * _inv_ratio(u, v))
    return Ux, Uu


def u_max_derivatives(space: SpaceDescriptor, pt: MaxPoint, k: BellmanConstants):
    _check_max(space, pt)
    Ux, Uu = _max_derivs(space, _arr(pt.x), _arr(pt.m), _arr(pt.q), _arr(pt.u), _arr(pt.v), k)
    return DualVector(Ux, space), Uu


# -- concavity gaps ----------------------------------------------------------

def _gap_plain(space, x, q, u, v, d, e, k):
    U0 = _u_plain(space, x, q, u, v, k)
    Ux, Uu = _plain_derivs(space, x, q, u, v, k)
    u1 = u + e
    U1 = _u_plain(space, x + d, q + phi(space, d), u1, np.maximum(u1, v), k)
    return U0 + np.sum(Ux * d, axis=-1) + Uu * e - U1, U0


def gap_plain(space: SpaceDescriptor, pt: PlainPoint, pert: Perturbation, k: BellmanConstants):
    """RHS - LHS of the concavity inequality for the plain function (>= 0 if it holds)."""
    _check_plain(space, pt)
    _check_pert(pt, pert)
    g, _ = _gap_plain(space, _arr(pt.x), _arr(pt.q), _arr(pt.u), _arr(pt.v),
                      _arr(pert.d), _arr(pert.e), k)
    return g


def _gap_max(space, x, m, q, u, v, d, e, k):
    U0 = _u_max(space, x, m, q, u, v, k, check_forms=False)
    Ux, Uu = _max_derivs(space, x, m, q, u, v, k)
    u1 = u + e
    x1 = x + d
    m1 = np.maximum(m, norm(space, x1))
    U1 = _u_max(space, x1, m1, q + phi(space, d), u1, np.maximum(u1, v), k, check_forms=False)
    return U0 + np.sum(Ux * d, axis=-1) + Uu * e - U1, U0


def gap_max(space: SpaceDescriptor, pt: MaxPoint, pert: Perturbation, k: BellmanConstants):
    """RHS - LHS of the concavity inequality for the maximal function."""
    _check_max(space, pt)
    _check_pert(pt, pert)
    g, _ = _gap_max(space, _arr(pt.x), _arr(pt.m), _arr(pt.q), _arr(pt.u), _arr(pt.v),
                    _arr(pert.d), _arr(pert.e), k)
    return g


def gap_scale(U0):
    return np.abs(U0) + 1.0


# -- proof-internal elementary inequalities ------------------------------------

def amgm_ed_slack(d_norm, e, q, v, p):
    """RHS - LHS of |e||d| <= (1/p) v|d|^p / q^(1-1/p) + (1/p') e^2 q^(1/p) / v.

    Valid when |e| <= v, which the case split guarantees.
    """
    pc = p / (p - 1)
    rhs = v * d_norm ** p / (p * q ** (1 - 1 / p)) + e ** 2 * q ** (1 / p) / (pc * v)
    return rhs - np.abs(e) * d_norm


def amgm_recovery_slack(space: SpaceDescriptor, x, m, q):
    """RHS - LHS of (|x|^p/C_H^p + q)^(1/p) <= second-form head at u = 1."""
    a = phi(space, x) / space.C_H ** space.p
    lhs = (a + q) ** (1 / space.p)
    _, rhs = _max_heads(space, _arr(x), _arr(m), _arr(q), 1.0)
    return rhs - lhs


# -- sampling harness -----------------------------------------------------------

STRATA_PLAIN = ("bulk", "d0", "e_neg_u", "q0", "x0", "u_eq_v", "u0", "shell_d", "shell_e")
STRATA_MAX = STRATA_PLAIN + ("m_eq_x",)
CASES_PLAIN = ("1", "2", "3")
CASES_MAX = ("1a", "1b", "1c", "2a", "2b")
FORCED_FRACTION = 0.2
_MAG = (1e-4, 1e4)
_TAU = (1e-4, 1e2)


def _loguniform(rng, lo, hi, n):
    return np.exp(rng.uniform(math.log(lo), math.log(hi), n))


def _directions(space, rng, n):
    g = rng.standard_normal((n, space.dim))
    nz = norm(space, g)
    return g / np.where(nz > 0, nz, 1.0)[:, None]


def _base_sample(space, rng, n, maximal, forced_fraction=FORCED_FRACTION):
    x = _directions(space, rng, n) * _loguniform(rng, *_MAG, n)[:, None]
    d = _directions(space, rng, n) * _loguniform(rng, *_MAG, n)[:, None]
    q = _loguniform(rng, *_MAG, n)
    v = _loguniform(rng, *_MAG, n)
    u = rng.uniform(0, 1, n) * v
    tau = np.where(rng.uniform(size=n) < 0.25, 0.0, _loguniform(rng, *_TAU, n))
    m_free = _loguniform(rng, *_MAG, n)
    strata = np.zeros(n, dtype=np.int64)
    names = STRATA_MAX if maximal else STRATA_PLAIN
    forced = rng.uniform(size=n) < forced_fraction
    strata[forced] = rng.integers(1, len(names), forced.sum())
    s = {name: strata == i for i, name in enumerate(names)}

    d[s["d0"]] = 0.0
    q[s["q0"]] = 0.0
    x[s["x0"]] = 0.0
    u[s["u_eq_v"]] = v[s["u_eq_v"]]
    u[s["u0"]] = 0.0
    sh = s["shell_d"]
    d[sh] *= ((q[sh] / 2) ** (1 / space.p) / np.maximum(norm(space, d[sh]), 1e-300))[:, None]
    # e depends on u, so it is redrawn after the u strata are applied
    e = rng.uniform(-u / v, 4.0) * v
    e[s["e_neg_u"]] = -u[s["e_neg_u"]]
    e[s["shell_e"]] = v[s["shell_e"]] - u[s["shell_e"]]
    xn = norm(space, x)
    m = xn * (1 + tau)
    if maximal:
        m[s["m_eq_x"]] = xn[s["m_eq_x"]]
        m[s["x0"]] = np.where(tau[s["x0"]] > 0, m_free[s["x0"]], 0.0)
    return x, m, q, u, v, d, e, strata


def _case_plain(space, q, u, v, d, e):
    dp = phi(space, d)
    third = u + e >= v
    small = dp <= q / 2
    return np.where(third, 2, np.where(small, 0, 1))


def _case_max(space, x, m, q, u, v, d, e):
    dp = phi(space, d)
    small = dp <= q / 2
    inside = norm(space, x + d) <= m
    c1 = np.where(small, np.where(u + e <= v, 0, 1), 2)
    c2 = np.where(small, 3, 4)
    return np.where(inside, c1, c2)


def sample_case(space: SpaceDescriptor, case: str, n: int, rng):
    """Points and perturbations restricted to one case of the maximal proof."""
    if case not in CASES_MAX:
        raise ValueError(f"unknown case {case!r}")
    x, m, q, u, v, d, e, _ = _base_sample(space, rng, n, maximal=True, forced_fraction=0.0)
    dn = norm(space, d)
    dn = np.where(dn > 0, dn, 1.0)
    if case in ("1a", "1b", "2a"):
        sigma = _loguniform(rng, 1e-6, 1.0, n)
    else:
        sigma = _loguniform(rng, 1.0, 1e6, n)
    d = d / dn[:, None] * ((sigma * q / 2) ** (1 / space.p))[:, None]
    if case == "1a":
        e = rng.uniform(-u / v, 1 - u / v) * v
    elif case == "1b":
        e = v - u + np.where(rng.uniform(size=n) < 0.2, 0.0, _loguniform(rng, 1e-4, 4.0, n)) * v
    xn = norm(space, x)
    tau = np.where(rng.uniform(size=n) < 0.25, 0.0, _loguniform(rng, *_TAU, n))
    if case.startswith("1"):
        m = np.maximum(xn, norm(space, x + d)) * (1 + tau)
    else:
        flip = norm(space, x + d) < xn
        d[flip] = -d[flip]
        top = norm(space, x + d)
        beta = rng.uniform(size=n)
        beta = np.where(rng.uniform(size=n) < 0.1, 0.0, beta)
        beta = np.where(rng.uniform(size=n) < 0.1, 1.0, beta)
        m = xn + beta * (top - xn)
    return MaxPoint(x, m, q, u, v), Perturbation(d, e)


@dataclass
class ScanReport:
    variant: str
    space: dict
    p: float
    C: float
    C_tilde: float
    samples: int
    seed: int
    min_gap: float
    min_relative_gap: float
    argmin: dict
    violations: int
    strata: list = field(default_factory=list)
    cases: list = field(default_factory=list)

    def to_record(self) -> dict:
        return {
            "variant": self.variant, "space": self.space, "p": self.p, "C": self.C,
            "C_tilde": self.C_tilde, "samples": self.samples, "seed": self.seed,
            "min_gap": self.min_gap, "min_relative_gap": self.min_relative_gap,
            "argmin": self.argmin, "violations": self.violations,
            "strata": self.strata, "cases": self.cases,
        }


def _scan_chunk(args):
    space, maximal, k, n, seed_seq, case = args
    rng = np.random.default_rng(seed_seq)
    if case is not None:
        pt, pert = sample_case(space, case, n, rng)
        x, m, q, u, v, d, e = pt.x, pt.m, pt.q, pt.u, pt.v, pert.d, pert.e
        strata = np.zeros(n, dtype=np.int64)
    else:
        x, m, q, u, v, d, e, strata = _base_sample(space, rng, n, maximal)
    if maximal:
        gap, U0 = _gap_max(space, x, m, q, u, v, d, e, k)
        cases = _case_max(space, x, m, q, u, v, d, e)
    else:
        gap, U0 = _gap_plain(space, x, q, u, v, d, e, k)
        cases = _case_plain(space, q, u, v, d, e)
    rel = gap / gap_scale(U0)
    rel = np.where(np.isnan(rel), -np.inf, rel)
    i = int(np.argmin(rel))
    names = STRATA_MAX if maximal else STRATA_PLAIN
    case_names = CASES_MAX if maximal else CASES_PLAIN
    s_min = [float(rel[strata == j].min()) if np.any(strata == j) else math.inf
             for j in range(len(names))]
    s_cnt = [int(np.sum(strata == j)) for j in range(len(names))]
    c_min = [float(rel[cases == j].min()) if np.any(cases == j) else math.inf
             for j in range(len(case_names))]
    c_cnt = [int(np.sum(cases == j)) for j in range(len(case_names))]
    arg = {"x": x[i].tolist(), "m": float(m[i]) if maximal else None, "q": float(q[i]),
           "u": float(u[i]), "v": float(v[i]), "d": d[i].tolist(), "e": float(e[i])}
    return (float(np.min(gap)), float(rel[i]), arg, int(np.sum(rel < -VIOLATION_RTOL)),
            s_min, s_cnt, c_min, c_cnt)


def concavity_scan(space: SpaceDescriptor, variant: str, k: BellmanConstants,
                   sample_count: int, seed: int = 0, chunk: int = 50_000,
                   workers: int = 1, case: str | None = None) -> ScanReport:
    """Sample the concavity inequality and report its worst relative gap.

    Chunk i draws from SeedSequence(seed).spawn(n_chunks)[i], so the report
    depends on (seed, sample_count, chunk) only, never on the worker count.
    """
    if variant not in ("plain", "maximal"):
        raise ValueError(f"unknown variant {variant!r}")
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    maximal = variant == "maximal"
    if case is not None and not maximal:
        raise ValueError("case-restricted scans exist for the maximal variant only")
    sizes = [min(chunk, sample_count - i) for i in range(0, sample_count, chunk)]
    seqs = np.random.SeedSequence(seed).spawn(len(sizes))
    jobs = [(space, maximal, k, n, s, case) for n, s in zip(sizes, seqs)]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(workers) as ex:
            results = list(ex.map(_scan_chunk, jobs))
    else:
        results = [_scan_chunk(j) for j in jobs]

    names = STRATA_MAX if maximal else STRATA_PLAIN
    case_names = CASES_MAX if maximal else CASES_PLAIN
    best = min(range(len(results)), key=lambda i: results[i][1])
    strata = [{"name": nm,
               "count": sum(r[5][j] for r in results),
               "min_relative_gap": min(r[4][j] for r in results)}
              for j, nm in enumerate(names)]
    cases = [{"name": nm,
              "count": sum(r[7][j] for r in results),
              "min_relative_gap": min(r[6][j] for r in results)}
             for j, nm in enumerate(case_names)]
    return ScanReport(
        variant=variant, space=space.to_record(), p=space.p, C=k.C, C_tilde=k.C_tilde,
        samples=sample_count, seed=seed,
        min_gap=min(r[0] for r in results), min_relative_gap=results[best][1],
        argmin=results[best][2], violations=sum(r[3] for r in results),
        strata=strata, cases=cases,
    )
