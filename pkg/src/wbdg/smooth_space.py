"""Finite-dimensional uniformly smooth normed spaces.

Every supported space is an l^q norm on R^dim (scalar and euclidean are the
q=2 cases), so norms, the gradient of phi(x) = |x|^p and dual norms all have
closed forms. Functions are vectorized over leading axes: a batch of vectors
has shape (..., dim).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

KINDS = ("scalar", "euclidean", "lq")

# Pairs closer than this (relative to their size) are not used by the
# estimators; the difference quotients there are dominated by roundoff.
_RATIO_RANGE = (1e-2, 1e2)
_SCALE_RANGE = (1e-3, 1e3)


@dataclass(frozen=True)
class SpaceDescriptor:
    kind: str
    p: float
    C_H: float
    C_sm: float
    q: float | None = None
    dim: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown space kind {self.kind!r}")
        if not 1 < self.p <= 2:
            raise ValueError(f"smoothness exponent p={self.p} not in (1, 2]")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.kind == "scalar" and self.dim != 1:
            raise ValueError("scalar space has dim 1")
        if self.kind == "lq" and (self.q is None or self.q < 1):
            raise ValueError("lq space needs q >= 1")
        if self.C_H <= 0 or self.C_sm <= 0:
            raise ValueError("constants must be positive")

    @property
    def exponent(self) -> float:
        """Exponent of the underlying l^q norm."""
        return float(self.q) if self.kind == "lq" else 2.0

    @property
    def dual_exponent(self) -> float:
        r = self.exponent
        return math.inf if r == 1 else r / (r - 1)

    @property
    def p_conj(self) -> float:
        return self.p / (self.p - 1)

    def to_record(self) -> dict:
        return asdict(self)

    @classmethod
    def from_record(cls, rec: dict) -> "SpaceDescriptor":
        return cls(**{k: rec[k] for k in ("kind", "p", "C_H", "C_sm", "q", "dim") if k in rec})

    def __str__(self):
        if self.kind == "lq":
            return f"lq(q={self.q:g},dim={self.dim},p={self.p:g})"
        if self.kind == "euclidean":
            return f"euclidean(dim={self.dim},p={self.p:g})"
        return f"scalar(p={self.p:g})"


def make_space(kind: str, p: float = 2.0, q: float | None = None, dim: int = 1,
               C_H: float | None = None, C_sm: float | None = None) -> SpaceDescriptor:
    """Build a space, filling in the default smoothness constants.

    Defaults: Hilbert spaces are (p, 1)-smooth for every p <= 2 and
    x -> |x|^(p-2) x is (p-1)-Hoelder with constant 2^(2-p), so C_H^p = p 2^(2-p).
    l^q with q >= 2 is used at p = 2 with C_sm = sqrt(q-1), C_H = sqrt(2(q-1)).
    l^q with q <= 2 is used at p = q with C_sm = 1 and C_H^q = 2^(q+1).
    """
    if kind == "scalar":
        dim = 1
    if kind in ("scalar", "euclidean"):
        d_sm, d_H = 1.0, (p * 2.0 ** (2 - p)) ** (1 / p)
    elif kind == "lq":
        if q is None:
            raise ValueError("lq space needs q")
        if q >= 2 and p == 2:
            d_sm, d_H = math.sqrt(q - 1), math.sqrt(2 * (q - 1))
        elif q <= 2 and p == q:
            d_sm, d_H = 1.0, 2.0 ** ((q + 1) / q)
        elif C_H is None or C_sm is None:
            raise ValueError(f"no default constants for lq(q={q}) at p={p}; pass C_H and C_sm")
        else:
            d_sm = d_H = None
    else:
        raise ValueError(f"unknown space kind {kind!r}")
    return SpaceDescriptor(kind=kind, p=float(p), C_H=float(C_H if C_H is not None else d_H),
                           C_sm=float(C_sm if C_sm is not None else d_sm),
                           q=None if kind != "lq" else float(q), dim=int(dim))


def constant_relations(space: SpaceDescriptor) -> dict:
    """The three relations between C_sm and C_H, as booleans (roundoff-tolerant)."""
    p, H, S = space.p, space.C_H ** space.p, space.C_sm ** space.p
    tol = 1e-12
    return {
        "CH_p_ge_p": H >= p * (1 - tol),
        "Csm_p_le_CH_p_over_p": S <= H / p * (1 + tol),
        "CH_p_le_2_p1_Csm_p": H <= 2 ** (p + 1) * S * (1 + tol),
    }


def _as_batch(space, x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x[None]
    if x.shape[-1] != space.dim:
        raise ValueError(f"vector of dimension {x.shape[-1]} in a space of dimension {space.dim}")
    return x


def lq_norm(x, r: float, axis=-1):
    """l^r norm along ``axis``, computed with max-scaling to avoid overflow."""
    a = np.abs(np.asarray(x, dtype=float))
    if math.isinf(r):
        return a.max(axis=axis)
    big = a.max(axis=axis, keepdims=True)
    safe = np.where(big > 0, big, 1.0)
    s = np.sum((a / safe) ** r, axis=axis) ** (1 / r)
    return s * np.squeeze(safe, axis=axis) * (np.squeeze(big, axis=axis) > 0)


def norm(space: SpaceDescriptor, x):
    return lq_norm(_as_batch(space, x), space.exponent)


def phi(space: SpaceDescriptor, x):
    return norm(space, x) ** space.p


def phi_gradient_coords(space: SpaceDescriptor, x):
    """Coordinates of phi'(x) under the pairing h -> sum_i g_i h_i.

    For l^q: g_i = p |x|^(p-1) (|x_i|/|x|)^(q-1) sign(x_i); zero at x = 0.
    """
    x = _as_batch(space, x)
    r = space.exponent
    n = lq_norm(x, r)[..., None]
    safe = np.where(n > 0, n, 1.0)
    g = space.p * safe ** (space.p - 1) * (np.abs(x) / safe) ** (r - 1) * np.sign(x)
    return np.where(n > 0, g, 0.0)


@dataclass(frozen=True)
class DualVector:
    coords: np.ndarray
    space: SpaceDescriptor

    def apply(self, y):
        return np.sum(self.coords * _as_batch(self.space, y), axis=-1)

    @property
    def dual_norm(self):
        return lq_norm(self.coords, self.space.dual_exponent)

    def __sub__(self, other: "DualVector") -> "DualVector":
        return DualVector(self.coords - other.coords, self.space)


def phi_gradient(space: SpaceDescriptor, x) -> DualVector:
    return DualVector(phi_gradient_coords(space, x), space)


def dual_norm_sampled(space: SpaceDescriptor, coords, sample_count: int, seed=0) -> float:
    """Lower estimate of a dual norm by maximizing over random unit vectors."""
    rng = np.random.default_rng(seed)
    y = _unit_directions(space, rng, sample_count)
    return float(np.max(np.abs(y @ np.asarray(coords, dtype=float))))


def _unit_directions(space, rng, n):
    g = rng.standard_normal((n, space.dim))
    nz = lq_norm(g, space.exponent)
    nz = np.where(nz > 0, nz, 1.0)
    return g / nz[:, None]


def _loguniform(rng, lo, hi, n):
    return np.exp(rng.uniform(math.log(lo), math.log(hi), n))


def _sample_pairs(space, rng, n):
    """x, y with a common log-uniform scale and a log-uniform size ratio."""
    scale = _loguniform(rng, *_SCALE_RANGE, n)
    ratio = _loguniform(rng, *_RATIO_RANGE, n)
    x = _unit_directions(space, rng, n) * scale[:, None]
    y = _unit_directions(space, rng, n) * (scale * ratio)[:, None]
    return x, y


def _chunks(sample_count, chunk=100_000):
    while sample_count > 0:
        k = min(chunk, sample_count)
        yield k
        sample_count -= k


def estimate_Csm(space: SpaceDescriptor, sample_count: int, seed=0) -> float:
    """Largest sampled value of ((avg |x +- y|^p - |x|^p) / |y|^p)^(1/p)."""
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    rng = np.random.default_rng(seed)
    p = space.p
    best = 0.0
    for k in _chunks(sample_count):
        x, y = _sample_pairs(space, rng, k)
        num = 0.5 * (phi(space, x + y) + phi(space, x - y)) - phi(space, x)
        best = max(best, float(np.max(num / phi(space, y))))
    return max(best, 0.0) ** (1 / p)


def estimate_CH(space: SpaceDescriptor, sample_count: int, seed=0) -> float:
    """Largest sampled value of (|phi'(x) - phi'(y)|_{X'} / |x - y|^(p-1))^(1/p)."""
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    rng = np.random.default_rng(seed)
    p = space.p
    best = 0.0
    for k in _chunks(sample_count):
        x, z = _sample_pairs(space, rng, k)
        y = x + z
        diff = phi_gradient_coords(space, x) - phi_gradient_coords(space, y)
        ratio = lq_norm(diff, space.dual_exponent) / norm(space, x - y) ** (p - 1)
        best = max(best, float(np.max(ratio)))
    return best ** (1 / p)


@dataclass
class PsiReport:
    slack: dict
    violations: dict
    applicable: dict

    @property
    def ok(self) -> bool:
        return not any(self.violations.values())


def check_psi_estimates(space: SpaceDescriptor, x, d, q: float, t_grid: int = 65,
                     tol: float = 1e-12) -> PsiReport:
    """Check the four estimates on psi(t) = |x + t d|^p / C_H^p over t in [0, 1].

    Slack is RHS - LHS, minimized over the grid (over grid pairs for the
    Hoelder estimate). psi' is exact, via phi_gradient.
    """
    if t_grid < 2:
        raise ValueError("t_grid must be >= 2")
    x = _as_batch(space, x).reshape(space.dim)
    d = _as_batch(space, d).reshape(space.dim)
    p, CHp = space.p, space.C_H ** space.p
    t = np.linspace(0.0, 1.0, t_grid)
    pts = x[None, :] + t[:, None] * d[None, :]
    psi = phi(space, pts) / CHp
    dpsi = phi_gradient_coords(space, pts) @ d / CHp
    dn = float(norm(space, d))
    scale = 1.0 + float(np.max(np.abs(psi))) + float(np.max(np.abs(dpsi))) + dn ** p

    size = p * psi ** (1 - 1 / p) * dn - np.abs(dpsi)
    tt = np.abs(t[:, None] - t[None, :])
    hold = tt ** (p - 1) * dn ** p - np.abs(dpsi[:, None] - dpsi[None, :])
    lin = (t * dn) ** p / p - np.abs(psi - psi[0] - t * dpsi[0])
    slack = {"psi_size": float(size.min()), "psi_holder": float(hold.min()),
             "psi_linear_approx": float(lin.min())}
    applicable = {"psi_size": True, "psi_holder": True, "psi_linear_approx": True,
                  "sloppy": dn ** p <= q / 2}
    if applicable["sloppy"]:
        sl = psi[0] + dpsi[0] * t + q - np.maximum(psi[0] / 2, q / 2)
        slack["sloppy"] = float(sl.min())
    else:
        slack["sloppy"] = math.nan
    violations = {k: applicable[k] and v < -tol * scale for k, v in slack.items()}
    return PsiReport(slack=slack, violations=violations, applicable=applicable)
