"""Depth-first Schnorr-Euchner sphere decoding over the complex symbol tree.

The tree has one layer per transmit antenna; layer n-1 (the root layer) fixes
the last symbol and layers below fix the remaining ones, matching the upper
triangular reduced system z = R x.  The per-sub-tree depth-first core is JIT
compiled; the public functions stay plain Python/numpy.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .channel import Constellation
from .numerics import OpCounter, QrFactors
from .special import chi_square_quantile


class TooLarge(Exception):
    """Exhaustive enumeration guard tripped."""


@dataclass
class SearchProblem:
    """Reduced-domain search instance ||z - R x||^2 <= squared_radius.

    residual_offset carries ||q2^H y||^2 so the full-domain metric
    ||y - H x||^2 can be reconstructed; the search itself never reads it.
    """

    z: np.ndarray
    r: np.ndarray
    constellation: Constellation
    squared_radius: float
    counter: OpCounter = field(default_factory=OpCounter)
    residual_offset: float = 0.0

    def __post_init__(self):
        self.z = np.ascontiguousarray(self.z, dtype=np.complex128)
        self.r = np.ascontiguousarray(self.r, dtype=np.complex128)
        n = self.z.shape[0]
        if self.r.shape != (n, n) or n < 1:
            raise ValueError(f"r must be ({n}, {n}) to match z")
        diag = self.r.diagonal()
        if np.any(diag.imag != 0.0) or np.any(diag.real <= 0.0):
            raise ValueError("r must have a real, strictly positive diagonal")
        if np.any(np.tril(self.r, -1) != 0.0):
            raise ValueError("r must be upper triangular")
        if not self.squared_radius >= 0.0:
            raise ValueError(f"squared_radius must be >= 0, got {self.squared_radius}")

    @property
    def n_t(self) -> int:
        return self.z.shape[0]


@dataclass(frozen=True)
class SearchOutcome:
    """Result of one sphere search; empty (solution None) when the sphere holds no leaf."""

    solution: np.ndarray | None
    metric: float | None
    nodes_visited: int
    leaf_count: int
    subtrees_searched: int = 0
    terminated_early: bool = False


def reduced_problem(y: np.ndarray, factors: QrFactors, constellation: Constellation,
                    radius: float | None = None,
                    counter: OpCounter | None = None) -> SearchProblem:
    """Build a SearchProblem from a received vector and QR factors.

    `radius` is a full-domain distance bound on ||y - H x||; it is converted
    to the reduced budget  radius^2 - ||q2^H y||^2, floored at zero.  With no
    radius the budget is infinite.
    """
    z = factors.q1.conj().T @ y
    if factors.q2.shape[1] > 0:
        offset = float(np.sum(np.abs(factors.q2.conj().T @ y) ** 2))
    else:
        offset = 0.0
    if radius is None:
        budget = math.inf
    else:
        budget = max(radius * radius - offset, 0.0)
    return SearchProblem(z=z, r=factors.r, constellation=constellation,
                         squared_radius=budget,
                         counter=counter if counter is not None else OpCounter(),
                         residual_offset=offset)


def branch_metric(problem: SearchProblem, layer: int, partial: np.ndarray) -> float:
    """|z[layer] - sum_{k>=layer} r[layer, k] * partial[k]|^2 for one layer.

    `layer` is 0-based; only partial[layer:] is read.  Ops are charged to the
    problem counter: one product per coefficient, the matching adds, and the
    squared magnitude.
    """
    z = problem.z
    r = problem.r
    n = z.shape[0]
    if not 0 <= layer < n:
        raise ValueError(f"layer must be in [0, {n - 1}], got {layer}")
    acc = z[layer]
    for k in range(layer, n):
        acc -= r[layer, k] * partial[k]
    t = n - layer
    problem.counter.add(t + 1, t + 1)
    return float(acc.real * acc.real + acc.imag * acc.imag)


def se_child_order(problem: SearchProblem, layer: int,
                   partial_above: np.ndarray) -> np.ndarray:
    """All constellation symbols at `layer`, ascending by branch metric.

    Ties keep constellation index order.  partial_above[layer + 1:] fixes the
    upper layers.  Ops charged: the layer center plus one product, one
    subtract, and one squared magnitude per candidate.
    """
    z = problem.z
    r = problem.r
    n = z.shape[0]
    syms = problem.constellation.symbols
    m = syms.shape[0]
    c = z[layer]
    for k in range(layer + 1, n):
        c -= r[layer, k] * partial_above[k]
    d = c - r[layer, layer] * syms
    metrics = d.real * d.real + d.imag * d.imag
    problem.counter.add((n - 1 - layer) + 2 * m, (n - 1 - layer) + 2 * m)
    return syms[np.argsort(metrics, kind="stable")]


@njit(cache=True)
def _expand_layer(z, r, syms, fixed, bm, order, ptr, d):
    """Compute, sort (stable), and stage the children of the current node.

    Returns the (mults, adds) charged: the layer center costs one product and
    one add per fixed upper layer; each candidate costs one product, one
    subtract, and a squared magnitude.
    """
    n = z.shape[0]
    m = syms.shape[0]
    c = z[d]
    for k in range(d + 1, n):
        c -= r[d, k] * syms[fixed[k]]
    rdd = r[d, d]
    for j in range(m):
        t = c - rdd * syms[j]
        bm[d, j] = t.real * t.real + t.imag * t.imag
        order[d, j] = j
    for a in range(1, m):
        kj = order[d, a]
        kv = bm[d, kj]
        b = a - 1
        while b >= 0 and bm[d, order[d, b]] > kv:
            order[d, b + 1] = order[d, b]
            b -= 1
        order[d, b + 1] = kj
    ptr[d] = 0
    return (n - 1 - d) + 2 * m, (n - 1 - d) + 2 * m


@njit(cache=True)
def _subtree_dfs(z, r, syms, root_idx, root_bm, budget, have_best, best_idx_out):
    """Schnorr-Euchner DFS inside the sub-tree rooted at symbol `root_idx`.

    `budget` is the current squared radius; with `have_best` set, only strict
    improvements are accepted (and the radius shrinks to each one), otherwise
    leaves on the closed initial sphere are admitted.  Writes the incumbent's
    symbol indices into best_idx_out and returns
    (best_metric, improved, nodes, leaves, mults, adds).
    """
    n = z.shape[0]
    m = syms.shape[0]
    nodes = 0
    leaves = 0
    mults = 0
    adds = 0
    improved = False
    best = budget
    if have_best:
        if root_bm >= best:
            return best, False, nodes, leaves, mults, adds
    elif root_bm > best:
        return best, False, nodes, leaves, mults, adds
    nodes += 1
    if n == 1:
        leaves += 1
        best_idx_out[0] = root_idx
        return root_bm, True, nodes, leaves, mults, adds
    bm = np.empty((n, m), np.float64)
    order = np.empty((n, m), np.int64)
    ptr = np.empty(n, np.int64)
    fixed = np.empty(n, np.int64)
    partial = np.empty(n, np.float64)
    fixed[n - 1] = root_idx
    partial[n - 1] = root_bm
    depth = n - 2
    mu, ad = _expand_layer(z, r, syms, fixed, bm, order, ptr, depth)
    mults += mu
    adds += ad
    while depth <= n - 2:
        d = depth
        if ptr[d] >= m:
            depth += 1
            continue
        j = order[d, ptr[d]]
        ptr[d] += 1
        cand = partial[d + 1] + bm[d, j]
        adds += 1
        if have_best or improved:
            if cand >= best:          # children are sorted: siblings prune too
                ptr[d] = m
                continue
        elif cand > best:
            ptr[d] = m
            continue
        nodes += 1
        if d == 0:
            leaves += 1
            best = cand
            improved = True
            fixed[0] = j
            for i in range(n):
                best_idx_out[i] = fixed[i]
        else:
            fixed[d] = j
            partial[d] = cand
            depth = d - 1
            mu, ad = _expand_layer(z, r, syms, fixed, bm, order, ptr, depth)
            mults += mu
            adds += ad
    return best, improved, nodes, leaves, mults, adds


def _root_metrics(problem: SearchProblem) -> np.ndarray:
    z = problem.z
    r = problem.r
    n = z.shape[0]
    d = z[n - 1] - r[n - 1, n - 1] * problem.constellation.symbols
    return d.real * d.real + d.imag * d.imag


def sphere_decode(problem: SearchProblem,
                  subtree_order: np.ndarray | None = None,
                  early_stop=None) -> SearchOutcome:
    """Depth-first SE sphere search, optionally hooked for external control.

    subtree_order: permutation of the constellation symbols fixing the order
    in which root-layer sub-trees are visited; default is SE order (ascending
    root branch metric).  early_stop(current_squared_radius, subtree_index)
    is consulted after each completed sub-tree except the last; returning
    True abandons the remaining sub-trees.
    """
    z = problem.z
    r = problem.r
    syms = problem.constellation.symbols
    n = problem.n_t
    m = syms.shape[0]
    counter = problem.counter
    if subtree_order is None:
        root_bms = _root_metrics(problem)
        counter.add(2 * m, 2 * m)
        order_idx = np.argsort(root_bms, kind="stable")
    else:
        order_idx = np.array([problem.constellation.index_of(s) for s in subtree_order])
        if len(order_idx) != m or len(set(order_idx.tolist())) != m:
            raise ValueError("subtree_order must be a permutation of the constellation")
        root_bms = None
    best_metric = math.inf
    have = False
    best_idx = np.empty(n, dtype=np.int64)
    scratch = np.empty(n, dtype=np.int64)
    nodes = 0
    leaves = 0
    subtrees = 0
    terminated = False
    for p in range(m):
        q = int(order_idx[p])
        if root_bms is not None:
            root_bm = float(root_bms[q])
        else:
            t = z[n - 1] - r[n - 1, n - 1] * syms[q]
            root_bm = float(t.real * t.real + t.imag * t.imag)
            counter.add(2, 2)
        current = best_metric if have else problem.squared_radius
        metric, improved, nd, lv, mu, ad = _subtree_dfs(
            z, r, syms, q, root_bm, current, have, scratch)
        counter.add(int(mu), int(ad))
        nodes += int(nd)
        leaves += int(lv)
        if improved:
            best_metric = float(metric)
            have = True
            best_idx[:] = scratch
        subtrees += 1
        if early_stop is not None and p < m - 1:
            current = best_metric if have else problem.squared_radius
            if early_stop(current, p):
                terminated = True
                break
    return SearchOutcome(
        solution=syms[best_idx].copy() if have else None,
        metric=best_metric if have else None,
        nodes_visited=nodes,
        leaf_count=leaves,
        subtrees_searched=subtrees,
        terminated_early=terminated,
    )


def subtree_min_metric(problem: SearchProblem, root_symbol_index: int) -> float:
    """Exact minimum of ||z - R x||^2 over x with the root layer fixed.

    Radius-free (infinite initial budget) SE search restricted to the
    sub-tree of constellation symbol `root_symbol_index` (0-based).
    """
    m = problem.constellation.size
    if not 0 <= root_symbol_index < m:
        raise ValueError(f"root_symbol_index must be in [0, {m - 1}]")
    z = problem.z
    r = problem.r
    n = problem.n_t
    syms = problem.constellation.symbols
    t = z[n - 1] - r[n - 1, n - 1] * syms[root_symbol_index]
    root_bm = float(t.real * t.real + t.imag * t.imag)
    problem.counter.add(2, 2)
    scratch = np.empty(n, dtype=np.int64)
    metric, improved, _, _, mu, ad = _subtree_dfs(
        z, r, syms, root_symbol_index, root_bm, math.inf, False, scratch)
    problem.counter.add(int(mu), int(ad))
    assert improved
    return float(metric)


def ml_oracle(problem: SearchProblem, guard: int = 10 ** 7) -> SearchOutcome:
    """Exhaustive minimum of ||z - R x||^2 over the full candidate lattice.

    Candidates are enumerated in lexicographic index order (first antenna most
    significant), so metric ties resolve to the lexicographically smallest
    index tuple.  Guarded against search spaces above `guard` points.
    """
    n = problem.n_t
    syms = problem.constellation.symbols
    m = syms.shape[0]
    total = m ** n
    if total > guard:
        raise TooLarge(f"{m}^{n} = {total} candidates exceeds the {guard} guard")
    z = problem.z
    r = problem.r
    weights = m ** (n - 1 - np.arange(n))        # index tuple -> flat id
    best_metric = math.inf
    best_id = -1
    chunk = 1 << 16
    for start in range(0, total, chunk):
        ids = np.arange(start, min(start + chunk, total))
        digits = (ids[:, None] // weights[None, :]) % m
        cand = syms[digits]
        res = z[None, :] - cand @ r.T
        metrics = np.sum(res.real ** 2 + res.imag ** 2, axis=1)
        k = int(np.argmin(metrics))
        if metrics[k] < best_metric:
            best_metric = float(metrics[k])
            best_id = int(ids[k])
    digits = (best_id // weights) % m
    return SearchOutcome(solution=syms[digits], metric=best_metric,
                         nodes_visited=total, leaf_count=total,
                         subtrees_searched=m, terminated_early=False)


def conventional_radius(noise_variance: float, n_r: int,
                        epsilon_complement: float) -> float:
    """Noise-based initial radius: P(||v||^2 <= f^2) = epsilon_complement.

    ||v||^2 for circularly symmetric noise with per-dimension variance
    sigma_v^2 is (sigma_v^2 / 2) times a chi-square with 2 n_r degrees of
    freedom, so f^2 = (sigma_v^2 / 2) * quantile(epsilon_complement; 2 n_r).
    """
    if noise_variance <= 0:
        raise ValueError(f"noise_variance must be > 0, got {noise_variance}")
    if not 0.0 < epsilon_complement < 1.0:
        raise ValueError(f"epsilon_complement must be in (0, 1), got {epsilon_complement}")
    q = chi_square_quantile(epsilon_complement, 2 * n_r)
    return math.sqrt(0.5 * noise_variance * q)
