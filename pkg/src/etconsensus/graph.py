"""Weighted digraphs, Laplacians and the spectrum of Sym(L).

Vertices are 0-based internally. An edge ``(i, j, w)`` means ``j`` is an
out-neighbor of ``i``: agent ``i`` listens to ``j`` with weight ``w``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property
import math

import numpy as np

BALANCE_TOL = 1e-9
JACOBI_TOL = 1e-12


class GraphError(ValueError):
    """Raised for structurally invalid graphs or failed graph checks."""


class SpectralError(RuntimeError):
    pass


@dataclass(frozen=True)
class WeightedDigraph:
    n: int
    edges: tuple[tuple[int, int, float], ...]

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise GraphError(f"vertex count must be a positive integer, got {self.n!r}")
        edges = tuple((int(i), int(j), float(w)) for i, j, w in self.edges)
        object.__setattr__(self, "edges", edges)
        seen = set()
        for i, j, w in edges:
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise GraphError(f"edge ({i}, {j}) references a vertex outside 0..{self.n - 1}")
            if i == j:
                raise GraphError(f"self-loop at vertex {i}")
            if not (math.isfinite(w) and w > 0):
                raise GraphError(f"edge ({i}, {j}) has non-positive weight {w}")
            if (i, j) in seen:
                raise GraphError(f"duplicate edge ({i}, {j})")
            seen.add((i, j))

    @classmethod
    def undirected(cls, n: int, pairs, weight: float = 1.0) -> WeightedDigraph:
        """Each pair becomes two directed edges of the same weight."""
        edges = []
        for i, j in pairs:
            edges.append((i, j, weight))
            edges.append((j, i, weight))
        return cls(n, tuple(edges))

    @cached_property
    def adjacency(self) -> np.ndarray:
        W = np.zeros((self.n, self.n))
        for i, j, w in self.edges:
            W[i, j] = w
        W.setflags(write=False)
        return W

    @cached_property
    def out_neighbors(self) -> tuple[tuple[int, ...], ...]:
        nbrs = [[] for _ in range(self.n)]
        for i, j, _ in self.edges:
            nbrs[i].append(j)
        return tuple(tuple(sorted(a)) for a in nbrs)

    @cached_property
    def in_neighbors(self) -> tuple[tuple[int, ...], ...]:
        nbrs = [[] for _ in range(self.n)]
        for i, j, _ in self.edges:
            nbrs[j].append(i)
        return tuple(tuple(sorted(a)) for a in nbrs)

    def relabel(self, perm) -> WeightedDigraph:
        """Return the graph with vertex ``v`` renamed ``perm[v]``."""
        return WeightedDigraph(self.n, tuple((perm[i], perm[j], w) for i, j, w in self.edges))


@dataclass(frozen=True, eq=False)
class DegreeData:
    d_out: np.ndarray
    d_in: np.ndarray
    d_min_out: float
    w_i_max: np.ndarray
    w_max: float
    n_out: np.ndarray
    n_out_max: int


@dataclass(frozen=True)
class SpectralData:
    lambda2: float
    lambdaN: float
    eigenvalues: tuple[float, ...]


def laplacian(g: WeightedDigraph) -> np.ndarray:
    W = g.adjacency
    return np.diag(W.sum(axis=1)) - W


def sym_laplacian(g: WeightedDigraph) -> np.ndarray:
    L = laplacian(g)
    return 0.5 * (L + L.T)


def degrees(g: WeightedDigraph) -> DegreeData:
    d_out = np.zeros(g.n)
    d_in = np.zeros(g.n)
    w_i_max = np.zeros(g.n)
    n_out = np.zeros(g.n, dtype=int)
    # summed edge by edge so d_out matches the plain sum over out-neighbors
    for i, j, w in g.edges:
        d_out[i] += w
        d_in[j] += w
        w_i_max[i] = max(w_i_max[i], w)
        n_out[i] += 1
    return DegreeData(
        d_out=d_out,
        d_in=d_in,
        d_min_out=float(d_out.min()),
        w_i_max=w_i_max,
        w_max=float(w_i_max.max()),
        n_out=n_out,
        n_out_max=int(n_out.max()),
    )


def balance_defect(g: WeightedDigraph) -> np.ndarray:
    d = degrees(g)
    return d.d_out - d.d_in


def is_weight_balanced(g: WeightedDigraph, tol: float = BALANCE_TOL) -> bool:
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    return bool(np.max(np.abs(balance_defect(g))) <= tol)


def _reachable(adj, start: int) -> set[int]:
    seen = {start}
    queue = deque([start])
    while queue:
        v = queue.popleft()
        for k in adj[v]:
            if k not in seen:
                seen.add(k)
                queue.append(k)
    return seen


def unreachable_pair(g: WeightedDigraph) -> tuple[int, int] | None:
    """A pair ``(a, b)`` with no directed path from ``a`` to ``b``, or None.

    Strong connectivity only needs reachability from vertex 0 in the graph
    and in its reverse.
    """
    fwd = _reachable(g.out_neighbors, 0)
    if len(fwd) < g.n:
        return 0, min(set(range(g.n)) - fwd)
    back = _reachable(g.in_neighbors, 0)
    if len(back) < g.n:
        return min(set(range(g.n)) - back), 0
    return None


def is_strongly_connected(g: WeightedDigraph) -> bool:
    return unreachable_pair(g) is None


def union(graphs) -> WeightedDigraph:
    """Union of edge sets; weights of shared edges are summed."""
    graphs = list(graphs)
    acc: dict[tuple[int, int], float] = {}
    for g in graphs:
        for i, j, w in g.edges:
            acc[(i, j)] = acc.get((i, j), 0.0) + w
    return WeightedDigraph(graphs[0].n, tuple((i, j, w) for (i, j), w in sorted(acc.items())))


def jacobi_eigenvalues(A: np.ndarray, tol: float = JACOBI_TOL, max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations.

    Converged when the off-diagonal Frobenius norm drops below
    ``tol * max(1, ||A||_F)``. Returns eigenvalues in ascending order.
    """
    A = np.array(A, dtype=float, copy=True)
    n = A.shape[0]
    if A.shape != (n, n) or not np.allclose(A, A.T, rtol=0, atol=1e-12 * max(1.0, np.abs(A).max(initial=0))):
        raise ValueError("matrix must be square and symmetric")
    A = 0.5 * (A + A.T)
    target = tol * max(1.0, float(np.linalg.norm(A)))

    mask = ~np.eye(n, dtype=bool)

    def off(M):
        return float(np.linalg.norm(M[mask]))

    for _ in range(max_sweeps):
        if off(A) <= target:
            return np.sort(np.diag(A))
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                diff = A[q, q] - A[p, p]
                if abs(diff) + 100.0 * abs(apq) == abs(diff):
                    # angle so small that theta**2 would overflow
                    t = apq / diff
                else:
                    theta = diff / (2.0 * apq)
                    t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(1.0, theta))
                c = 1.0 / math.hypot(1.0, t)
                s = t * c
                Ap = A[:, p].copy()
                Aq = A[:, q]
                A[:, p] = c * Ap - s * Aq
                A[:, q] = s * Ap + c * Aq
                Ap = A[p, :].copy()
                Aq = A[q, :]
                A[p, :] = c * Ap - s * Aq
                A[q, :] = s * Ap + c * Aq
                A[p, q] = A[q, p] = 0.0
    if off(A) <= target:
        return np.sort(np.diag(A))
    raise SpectralError(f"Jacobi iteration did not reach off-diagonal norm {target:.3g} in {max_sweeps} sweeps")


def spectral(g: WeightedDigraph, check_samples: int = 64, tol: float = 1e-9) -> SpectralData:
    """Second-smallest and largest eigenvalue of Sym(L).

    The graph must be weight-balanced (otherwise Sym(L) need not be
    positive semidefinite). A graph that is not strongly connected gives
    ``lambda2 == 0`` up to rounding. The result is cross-checked against
    ``x'Lx >= lambda2 * ||x - mean(x)||^2`` on a fixed set of random vectors.
    """
    if not is_weight_balanced(g):
        raise GraphError("spectral data requires a weight-balanced digraph")
    S = sym_laplacian(g)
    ev = jacobi_eigenvalues(S)
    if g.n == 1:
        return SpectralData(0.0, 0.0, (0.0,))
    lam2, lamN = float(ev[1]), float(ev[-1])
    if abs(lam2) < 1e-12 * max(1.0, lamN):
        lam2 = 0.0
    L = laplacian(g)
    rng = np.random.default_rng(0)
    for x in rng.standard_normal((check_samples, g.n)):
        dev = x - x.mean()
        if x @ L @ x < lam2 * (dev @ dev) - tol * max(1.0, x @ x):
            raise SpectralError("computed lambda2 violates the Laplacian lower bound")
    return SpectralData(lam2, lamN, tuple(float(v) for v in ev))


def random_balanced_digraph(n: int, rng: np.random.Generator, extra_cycles: int = 2,
                            weights=(0.5, 2.0)) -> WeightedDigraph:
    """Random strongly connected, weight-balanced digraph.

    Built as a sum of weighted directed cycles: a Hamiltonian cycle for
    strong connectivity plus ``extra_cycles`` random shorter ones. Each
    cycle adds the same weight to in- and out-degree of its vertices.
    """
    acc: dict[tuple[int, int], float] = {}

    def add_cycle(verts, w):
        for a, b in zip(verts, verts[1:] + verts[:1]):
            acc[(a, b)] = acc.get((a, b), 0.0) + w

    lo, hi = weights
    add_cycle(list(rng.permutation(n)), float(rng.uniform(lo, hi)))
    for _ in range(extra_cycles):
        k = int(rng.integers(2, n + 1))
        add_cycle(list(rng.choice(n, size=k, replace=False)), float(rng.uniform(lo, hi)))
    return WeightedDigraph(n, tuple((int(i), int(j), w) for (i, j), w in sorted(acc.items())))
