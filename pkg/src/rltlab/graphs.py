"""Intersection graphs of a polynomial program and their summary metrics.

Two graphs are built: one over variables (adjacent when they co-occur in
a monomial) and one bipartite over distinct monomials vs. constraints and
the objective.  Metrics: edge density, a greedy min-fill treewidth upper
bound, greedy agglomerative modularity, transitivity, and eigenvector
centrality.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .model import Multiset, Problem, ms_make, ms_vars


@dataclass(frozen=True)
class Graph:
    n_nodes: int
    edges: tuple[tuple[int, int], ...]   # canonical: u < v, sorted, unique
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        for u, v in self.edges:
            if not (0 <= u < v < self.n_nodes):
                raise ValueError(f"bad edge ({u}, {v})")

    @staticmethod
    def from_edges(n_nodes: int, edges, labels=()) -> "Graph":
        canon = sorted({(min(u, v), max(u, v)) for u, v in edges if u != v})
        return Graph(n_nodes, tuple(canon), tuple(labels))

    def adjacency_sets(self) -> list[set[int]]:
        adj: list[set[int]] = [set() for _ in range(self.n_nodes)]
        for u, v in self.edges:
            adj[u].add(v)
            adj[v].add(u)
        return adj

    def adjacency_matrix(self) -> np.ndarray:
        a = np.zeros((self.n_nodes, self.n_nodes))
        for u, v in self.edges:
            a[u, v] = a[v, u] = 1.0
        return a

    def degrees(self) -> np.ndarray:
        d = np.zeros(self.n_nodes, dtype=int)
        for u, v in self.edges:
            d[u] += 1
            d[v] += 1
        return d

    def to_edgelist_text(self) -> str:
        return "".join(f"{u} {v}\n" for u, v in self.edges)


def build_vig(problem: Problem) -> Graph:
    """Variables adjacent iff they appear together in some monomial."""
    edges = set()
    for poly in problem.all_polys():
        for s in poly.supports():
            vs = ms_vars(s)
            for u, v in combinations(vs, 2):
                edges.add((u, v))
    return Graph.from_edges(problem.n, edges, labels=problem.var_names)


def build_cmig(problem: Problem) -> Graph:
    """Bipartite graph of distinct monomials vs. constraints + objective.

    Node order: distinct monomial supports (sorted), then constraints in
    declaration order, then the objective node last.
    """
    supports = problem.distinct_supports()
    mono_id = {s: i for i, s in enumerate(supports)}
    n_mono = len(supports)
    n_rows = len(problem.constraints) + 1
    labels = (
        ["m:" + "*".join(f"{problem.var_names[j]}^{m}" if m > 1 else problem.var_names[j]
                          for j, m in s) for s in supports]
        + ["c:" + c.name for c in problem.constraints]
        + ["objective"]
    )
    edges = set()
    for r, con in enumerate(problem.constraints):
        for s in con.poly.supports():
            edges.add((mono_id[s], n_mono + r))
    for s in problem.objective.supports():
        edges.add((mono_id[s], n_mono + len(problem.constraints)))
    return Graph.from_edges(n_mono + n_rows, edges, labels=labels)


def cmig_variable_nodes(problem: Problem) -> dict[int, int]:
    """Map variable index -> CMIG node of its singleton monomial, where
    the variable appears alone in some monomial of the problem."""
    supports = problem.distinct_supports()
    out: dict[int, int] = {}
    for i, s in enumerate(supports):
        if len(s) == 1 and s[0][1] == 1:
            out[s[0][0]] = i
    return out


def edge_density(g: Graph) -> float:
    if g.n_nodes < 2:
        return 0.0
    return len(g.edges) / (g.n_nodes * (g.n_nodes - 1) / 2)


def treewidth_ub(g: Graph) -> int:
    """Width of the greedy min-fill elimination ordering.

    Ties broken by minimum degree, then minimum node index.  Exact on
    chordal graphs.
    """
    adj = g.adjacency_sets()
    alive = set(range(g.n_nodes))
    width = 0
    while alive:
        best = None
        for v in sorted(alive):
            nbrs = adj[v] & alive
            fill = 0
            nl = sorted(nbrs)
            for i in range(len(nl)):
                for k in range(i + 1, len(nl)):
                    if nl[k] not in adj[nl[i]]:
                        fill += 1
            key = (fill, len(nbrs), v)
            if best is None or key < best[0]:
                best = (key, v, nbrs)
        _, v, nbrs = best
        width = max(width, len(nbrs))
        for a, b in combinations(sorted(nbrs), 2):
            adj[a].add(b)
            adj[b].add(a)
        alive.remove(v)
    return width


def _partition_modularity(m: int, intra: dict[int, int], degsum: dict[int, int]) -> float:
    return sum(intra[c] / m - (degsum[c] / (2 * m)) ** 2 for c in intra)


def modularity_greedy(g: Graph) -> float:
    """Greedy agglomerative modularity: repeatedly merge the community
    pair with the largest positive modularity gain."""
    m = len(g.edges)
    if m == 0:
        return 0.0
    comm = list(range(g.n_nodes))
    deg = g.degrees()
    degsum = {c: int(deg[c]) for c in range(g.n_nodes)}
    intra = {c: 0 for c in range(g.n_nodes)}
    between: dict[tuple[int, int], int] = {}
    for u, v in g.edges:
        between[(u, v)] = between.get((u, v), 0) + 1

    two_m = 2.0 * m
    while True:
        best_gain = 0.0
        best_pair = None
        for (a, b), e_ab in sorted(between.items()):
            gain = 2.0 * (e_ab / two_m - (degsum[a] / two_m) * (degsum[b] / two_m))
            if gain > best_gain + 1e-15:
                best_gain = gain
                best_pair = (a, b)
        if best_pair is None:
            break
        a, b = best_pair
        # merge b into a
        intra[a] += intra.pop(b) + between.pop((a, b))
        degsum[a] += degsum.pop(b)
        for (u, v), e in list(between.items()):
            if b in (u, v):
                other = u if v == b else v
                del between[(u, v)]
                key = (min(a, other), max(a, other))
                between[key] = between.get(key, 0) + e
    return _partition_modularity(m, intra, degsum)


def transitivity(g: Graph) -> float:
    """3 * triangles / connected triples (global clustering coefficient)."""
    adj = g.adjacency_sets()
    deg = g.degrees()
    triples = int(np.sum(deg * (deg - 1) // 2))
    if triples == 0:
        return 0.0
    triangles = 0
    for u, v in g.edges:
        triangles += len(adj[u] & adj[v])
    # each triangle counted once per edge
    return triangles / triples


def eigencentrality(g: Graph, max_iter: int = 1000, tol: float = 1e-12) -> np.ndarray:
    """Dominant-eigenvector scores, unit Euclidean norm, nonnegative.

    Iterates x <- (A + I) x, which has the same dominant eigenvector as A
    but converges on bipartite graphs where the plain iteration cycles.
    Starts from the uniform vector for determinism; zero-degree nodes
    decay to score 0; an empty edge set yields the all-zero vector.
    """
    if len(g.edges) == 0:
        return np.zeros(g.n_nodes)
    a = g.adjacency_matrix()
    x = np.full(g.n_nodes, 1.0 / np.sqrt(g.n_nodes))
    for _ in range(max_iter):
        nxt = a @ x + x
        norm = np.linalg.norm(nxt)
        nxt /= norm
        if np.linalg.norm(nxt - x) <= tol:
            x = nxt
            break
        x = nxt
    x[x < 0] = 0.0
    n = np.linalg.norm(x)
    return x / n if n > 0 else x
