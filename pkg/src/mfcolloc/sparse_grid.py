"""Isotropic Smolyak grids on nested Clenshaw-Curtis rules for Gaussian inputs.

Level convention: 1D rules are indexed from 1 (one node at level 1,
``2**(i-1) + 1`` nodes at level ``i >= 2``) and a grid of level ``q`` in
``d`` dimensions contains every tensor rule with ``i_1 + ... + i_d <= q + d``.
With this convention ``d = 3, q = 8`` has 6017 nodes.

Nodes live on ``[-1, 1]`` and are mapped affinely to ``[-L, L]``; weights
integrate the Lagrange cardinals against the standard normal density
truncated to ``[-L, L]`` and renormalized.
"""

import csv
import itertools
from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np
from scipy.special import erf

from .errors import DimMismatch, InputError, NodeCountOverflow
from .fem import fmt

LEVEL_CONVENTION = "1-based CC levels, |i| <= q + d (d=3, q=8 -> 6017 nodes)"
DEFAULT_BOUND = 4.0
MAX_NODES = 250_000


@dataclass(frozen=True)
class Rule1D:
    level: int
    points: np.ndarray

    @property
    def count(self):
        return self.points.shape[0]


def rule_size(level):
    return 1 if level == 1 else 2 ** (level - 1) + 1


@lru_cache(maxsize=None)
def _cc_points(level):
    m = rule_size(level)
    if m == 1:
        return np.zeros(1)
    # cos(j pi / (m-1)) evaluated through sin: exact symmetry, exact zero and
    # bit-identical nesting across levels
    j = np.arange(m)
    pts = np.sin(np.pi * ((m - 1) - 2 * j) / (2 * (m - 1)))
    pts.setflags(write=False)
    return pts


def cc_rule(level):
    """Nested Clenshaw-Curtis (Chebyshev extrema) nodes ``cos(j pi / (m - 1))`` on ``[-1, 1]``."""
    if int(level) != level or level < 1:
        raise InputError("level must be a positive integer")
    return Rule1D(int(level), _cc_points(int(level)))


@lru_cache(maxsize=None)
def _bary_weights(level):
    m = rule_size(level)
    if m == 1:
        return np.ones(1)
    w = (-1.0) ** np.arange(m)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def lagrange_cardinals(points, bary, x):
    """Values of all Lagrange cardinals of ``points`` at ``x``; shape ``(len(x), len(points))``.

    Second barycentric formula; rows at a node are exact unit vectors.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if points.shape[0] == 1:
        return np.ones((x.shape[0], 1))
    diff = x[:, None] - points[None, :]
    hit = diff == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = bary[None, :] / diff
        out = terms / terms.sum(axis=1, keepdims=True)
    rows = hit.any(axis=1)
    out[rows] = hit[rows].astype(float)
    return out


def truncated_normal_mass(bound):
    return erf(bound / np.sqrt(2.0))


def truncated_normal_moment(power, bound):
    """``E[x^power]`` for the standard normal truncated to ``[-bound, bound]``.

    Uses ``int_{-L}^{L} x^(2k) phi = (2k-1) int x^(2k-2) phi - 2 L^(2k-1) phi(L)``.
    """
    if power % 2:
        return 0.0
    phi = np.exp(-0.5 * bound * bound) / np.sqrt(2.0 * np.pi)
    Z = truncated_normal_mass(bound)
    acc = Z
    for k in range(1, power // 2 + 1):
        acc = (2 * k - 1) * acc - 2.0 * bound ** (2 * k - 1) * phi
    return acc / Z


@lru_cache(maxsize=None)
def _density_quadrature(bound, panels=16, order=64):
    gx, gw = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(-bound, bound, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = (mid[:, None] + half[:, None] * gx[None, :]).ravel()
    w = (half[:, None] * gw[None, :]).ravel()
    rho = np.exp(-0.5 * x * x)
    q = w * rho
    return x, q / q.sum()


@lru_cache(maxsize=None)
def rule_weights(level, bound=DEFAULT_BOUND):
    """Weights of the level-``level`` interpolatory rule for the truncated normal on ``[-bound, bound]``."""
    x, q = _density_quadrature(float(bound))
    pts = bound * _cc_points(level)
    card = lagrange_cardinals(pts, _bary_weights(level), x)
    w = q @ card
    w.setflags(write=False)
    return w


@dataclass(frozen=True, eq=False)
class TensorGrid:
    levels: tuple
    coeff: int
    index: np.ndarray  # plan node indices in C order over the tensor grid


@dataclass(frozen=True, eq=False)
class SparseGridPlan:
    dim: int
    level: int
    bound: float
    nodes: np.ndarray
    node_levels: np.ndarray
    weights: np.ndarray
    grids: tuple

    @property
    def size(self):
        return self.nodes.shape[0]

    @property
    def comb(self):
        return {g.levels: g.coeff for g in self.grids}


def smolyak_size(d, q):
    """Distinct node count without building the grid."""
    def new(i):
        return 1 if i == 1 else (2 if i == 2 else 2 ** (i - 2))

    total = 0
    for idx in _multi_indices(d, d, q + d):
        p = 1
        for i in idx:
            p *= new(i)
        total += p
    return total


def _multi_indices(d, lo, hi):
    """1-based multi-indices with ``lo <= sum <= hi``."""
    out = []

    def rec(prefix, remaining_dims, budget_used):
        if remaining_dims == 0:
            if budget_used >= lo:
                out.append(tuple(prefix))
            return
        max_here = hi - budget_used - (remaining_dims - 1)
        for i in range(1, max_here + 1):
            prefix.append(i)
            rec(prefix, remaining_dims - 1, budget_used + i)
            prefix.pop()

    rec([], d, 0)
    return out


def smolyak_plan(d, q, bound=DEFAULT_BOUND, max_nodes=MAX_NODES):
    """Build the level-``q`` Smolyak plan in combination form.

    Nodes are ordered by the level at which they first appear (sum of the
    per-coordinate first levels), then lexicographically by coordinates.
    """
    if int(d) != d or d < 1 or int(q) != q or q < 0:
        raise InputError("need integer d >= 1 and q >= 0")
    if not bound > 0:
        raise InputError("bound must be positive")
    d, q = int(d), int(q)
    expected = smolyak_size(d, q)
    if expected > max_nodes:
        raise NodeCountOverflow(f"level {q} in {d} dimensions has {expected} nodes (cap {max_nodes})")

    top = q + 1
    first_level = {}
    for lev in range(1, top + 1):
        for x in (bound * _cc_points(lev)).tolist():
            first_level.setdefault(x, lev)

    combos = []
    for idx in _multi_indices(d, max(d, q + 1), q + d):
        s = q + d - sum(idx)
        combos.append((idx, (-1) ** s * comb(d - 1, s)))

    key_index = {}
    keys = []
    grids_raw = []
    for idx, coeff in combos:
        axes = [(bound * _cc_points(i)).tolist() for i in idx]
        ids = []
        for pt in itertools.product(*axes):
            j = key_index.get(pt)
            if j is None:
                j = len(keys)
                key_index[pt] = j
                keys.append(pt)
            ids.append(j)
        grids_raw.append((idx, coeff, np.array(ids, dtype=np.int64)))

    pts = np.array(keys, dtype=float).reshape(len(keys), d)
    lev = np.array([sum(first_level[x] for x in pt) for pt in keys], dtype=int)
    order = np.lexsort(tuple(pts[:, k] for k in reversed(range(d))) + (lev,))
    rank = np.empty_like(order)
    rank[order] = np.arange(order.shape[0])

    weights = np.zeros(len(keys))
    grids = []
    for idx, coeff, ids in grids_raw:
        w = rule_weights(idx[0], bound)
        for i in idx[1:]:
            w = np.multiply.outer(w, rule_weights(i, bound))
        new_ids = rank[ids]
        np.add.at(weights, new_ids, coeff * w.ravel())
        grids.append(TensorGrid(idx, coeff, new_ids))

    nodes = pts[order]
    return SparseGridPlan(d, q, float(bound), nodes, lev[order], weights, tuple(grids))


def _tensor_contract(vals, factors):
    """Contract the leading axes of ``vals`` with one vector per axis."""
    out = vals
    for f in factors:
        out = np.tensordot(f, out, axes=(0, 0))
    return out


def interpolate(plan, node_values, zeta):
    """Evaluate the Smolyak interpolant of ``node_values`` at ``zeta``.

    ``node_values`` has one leading entry per plan node; trailing axes (for
    example a field on the mesh) are carried through.
    """
    vals = np.asarray(node_values, dtype=float)
    coords = np.asarray(getattr(zeta, "coords", zeta), dtype=float).reshape(-1)
    if coords.shape[0] != plan.dim:
        raise DimMismatch(f"point has {coords.shape[0]} coordinates, plan has {plan.dim}")
    if vals.shape[0] != plan.size:
        raise DimMismatch(f"{vals.shape[0]} values for {plan.size} nodes")
    cache = {}

    def card(k, lev):
        key = (k, lev)
        if key not in cache:
            pts = plan.bound * _cc_points(lev)
            cache[key] = lagrange_cardinals(pts, _bary_weights(lev), coords[k])[0]
        return cache[key]

    tail = vals.shape[1:]
    total = np.zeros(tail)
    for g in plan.grids:
        shape = tuple(rule_size(i) for i in g.levels)
        block = vals[g.index].reshape(shape + tail)
        total = total + g.coeff * _tensor_contract(block, [card(k, lev) for k, lev in enumerate(g.levels)])
    return total


def moments(plan, node_values, k):
    """Quadrature of ``u^k`` against the (truncated) Gaussian density."""
    if k < 1:
        raise InputError("moment order must be at least 1")
    vals = np.asarray(node_values, dtype=float)
    return np.tensordot(plan.weights, vals**k, axes=(0, 0))


def min_pairwise_distance(plan):
    """Smallest max-norm distance between two distinct plan nodes."""
    from scipy.spatial import cKDTree

    if plan.size < 2:
        return np.inf
    tree = cKDTree(plan.nodes)
    dist, _ = tree.query(plan.nodes, k=2, p=np.inf)
    return float(dist[:, 1].min())


def gauss_hermite_tensor(d, n):
    """Tensor Gauss-Hermite rule (probabilists') for the untruncated standard normal."""
    x, w = np.polynomial.hermite_e.hermegauss(n)
    w = w / w.sum()
    nodes = np.array(list(itertools.product(x, repeat=d)))
    weights = np.ones(1)
    for _ in range(d):
        weights = np.multiply.outer(weights, w).ravel()
    return nodes, weights


def write_plan_csv(plan, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["node_index"] + [f"xi_{k}" for k in range(1, plan.dim + 1)] + ["weight"])
        for i, (pt, w) in enumerate(zip(plan.nodes, plan.weights)):
            writer.writerow([i] + [fmt(v) for v in pt] + [fmt(w)])
