"""Uniform dyadic filtrations with exact expectations.

A tree of depth N has 2^n atoms at level n; atom (n, i) splits into
(n+1, 2i) and (n+1, 2i+1), and every leaf has measure 2^-N. A process is a
list of per-level arrays, ``levels[n]`` of shape (2^n,) or (2^n, dim).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .smooth_space import SpaceDescriptor, norm

MARTINGALE_RTOL = 1e-12


@dataclass(frozen=True)
class FiltrationTree:
    depth: int

    def __post_init__(self):
        if self.depth < 0:
            raise ValueError("depth must be >= 0")

    @property
    def n_leaves(self) -> int:
        return 2 ** self.depth

    def level_size(self, n: int) -> int:
        return 2 ** n

    def to_leaves(self, values, n: int):
        """Spread level-n node values over the leaves below each node."""
        return np.repeat(np.asarray(values), 2 ** (self.depth - n), axis=0)

    def check_leaves(self, leaf_values):
        leaf_values = np.asarray(leaf_values, dtype=float)
        if leaf_values.shape[0] != self.n_leaves:
            raise ValueError(f"expected {self.n_leaves} leaf values, got {leaf_values.shape[0]}")
        return leaf_values


def _parent_mean(vals):
    return 0.5 * (vals[0::2] + vals[1::2])


def conditional_expectation(tree: FiltrationTree, leaf_values) -> list:
    """E(v | F_n) for every level n, as a list indexed by level."""
    vals = tree.check_leaves(leaf_values)
    out = [vals]
    for _ in range(tree.depth):
        vals = _parent_mean(vals)
        out.append(vals)
    return out[::-1]


class Martingale:
    """Node-indexed process whose nodes are the means of their children."""

    def __init__(self, tree: FiltrationTree, levels, space: SpaceDescriptor, check=True):
        self.tree = tree
        self.space = space
        self.levels = [np.asarray(v, dtype=float).reshape(2 ** n, space.dim)
                       for n, v in enumerate(levels)]
        if len(self.levels) != tree.depth + 1:
            raise ValueError("need one array per level")
        if check:
            self.check()

    def check(self):
        for n in range(self.tree.depth):
            mean = _parent_mean(self.levels[n + 1])
            scale = np.abs(self.levels[n + 1]).max(initial=0.0) + np.abs(mean).max(initial=0.0)
            if np.abs(self.levels[n] - mean).max(initial=0.0) > MARTINGALE_RTOL * max(scale, 1e-300):
                raise ValueError(f"martingale property fails between levels {n} and {n + 1}")

    @property
    def terminal(self):
        return self.levels[-1]

    def increments(self):
        """Delta_n = f_n - f_{n-1} for n = 1..N, each at level n."""
        return [self.levels[n] - np.repeat(self.levels[n - 1], 2, axis=0)
                for n in range(1, self.tree.depth + 1)]

    def norms(self):
        return [norm(self.space, v) for v in self.levels]

    def scaled(self, lam: float) -> "Martingale":
        return Martingale(self.tree, [lam * v for v in self.levels], self.space, check=False)


def martingale_from_terminal(tree: FiltrationTree, terminal, space: SpaceDescriptor) -> Martingale:
    terminal = tree.check_leaves(terminal).reshape(tree.n_leaves, space.dim)
    return Martingale(tree, conditional_expectation(tree, terminal), space, check=False)


def running_max(tree: FiltrationTree, levels):
    """Per-level max over ancestors (inclusive) of a nonnegative node process."""
    out = [np.asarray(levels[0], dtype=float)]
    for n in range(1, tree.depth + 1):
        out.append(np.maximum(np.repeat(out[-1], 2, axis=0), levels[n]))
    return out


def maximal_process(mart: Martingale):
    """(f*_n per level, f* per leaf) with f*_n the running max of |f_m|."""
    star = running_max(mart.tree, mart.norms())
    return star, star[-1]


def p_variation_process(mart: Martingale, p: float, include_initial: bool = True):
    """q_n = |f_0|^p + sum_{m<=n} |f_m - f_{m-1}|^p per level (p-th power of S_p)."""
    nrm = mart.norms()
    q = [nrm[0] ** p if include_initial else np.zeros(1)]
    for n, inc in enumerate(mart.increments(), start=1):
        q.append(np.repeat(q[-1], 2, axis=0) + norm(mart.space, inc) ** p)
    return q


def p_variation(mart: Martingale, p: float, include_initial: bool = True):
    if not 1 <= p <= 2:
        raise ValueError("p must lie in [1, 2]")
    return p_variation_process(mart, p, include_initial)[-1] ** (1 / p)


@dataclass
class WeightTriple:
    w: np.ndarray
    w_n: list
    w_star_n: list
    w_star: np.ndarray


def weight_processes(tree: FiltrationTree, w) -> WeightTriple:
    w = tree.check_leaves(w)
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    w_n = conditional_expectation(tree, w)
    w_star_n = running_max(tree, w_n)
    return WeightTriple(w=w, w_n=w_n, w_star_n=w_star_n, w_star=w_star_n[-1])


def conditional_square_function(g: Martingale):
    """(sum_{n>=1} E(|g_n - g_{n-1}|^2 | F_{n-1}))^(1/2) per leaf."""
    tree = g.tree
    total = np.zeros(tree.n_leaves)
    for n, inc in enumerate(g.increments(), start=1):
        cond = _parent_mean(norm(g.space, inc) ** 2)
        total += tree.to_leaves(cond, n - 1)
    return np.sqrt(total)


def expectation(tree: FiltrationTree, leaf_values):
    return np.mean(tree.check_leaves(leaf_values), axis=0)


def lr_norm(tree: FiltrationTree, leaf_values, r: float) -> float:
    if r < 1:
        raise ValueError("r must be >= 1")
    v = np.abs(tree.check_leaves(leaf_values))
    big = v.max(initial=0.0)
    if big == 0:
        return 0.0
    return float(big * np.mean((v / big) ** r) ** (1 / r))


def pair_expectation(tree: FiltrationTree, a, b) -> float:
    a = tree.check_leaves(a)
    b = tree.check_leaves(b)
    if a.shape != b.shape:
        raise ValueError("shape mismatch")
    return float(np.mean(a * b))


def tree_record(tree: FiltrationTree, leaf_values) -> dict:
    return {"depth": tree.depth, "leaf_values": np.asarray(leaf_values).tolist()}
