import itertools

import numpy as np
import pytest

from rltlab.graphs import (
    Graph,
    build_cmig,
    build_vig,
    cmig_variable_nodes,
    edge_density,
    eigencentrality,
    modularity_greedy,
    transitivity,
    treewidth_ub,
)
from rltlab.model import parse_problem


def complete_graph(n):
    return Graph.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def exact_modularity(g: Graph) -> float:
    """Exhaustive best modularity over all partitions (|V| <= 6)."""
    m = len(g.edges)
    deg = g.degrees()

    def partitions(items):
        if not items:
            yield []
            return
        first, rest = items[0], items[1:]
        for p in partitions(rest):
            for i in range(len(p)):
                yield p[:i] + [[first] + p[i]] + p[i + 1:]
            yield [[first]] + p

    best = -1.0
    for p in partitions(list(range(g.n_nodes))):
        q = 0.0
        for comm in p:
            cs = set(comm)
            e_c = sum(1 for u, v in g.edges if u in cs and v in cs)
            d_c = sum(int(deg[u]) for u in comm)
            q += e_c / m - (d_c / (2 * m)) ** 2
        best = max(best, q)
    return best


def exact_treewidth(g: Graph) -> int:
    """Brute force over elimination orderings (|V| <= 8)."""
    best = g.n_nodes
    nodes = list(range(g.n_nodes))
    for order in itertools.permutations(nodes):
        adj = g.adjacency_sets()
        alive = set(nodes)
        width = 0
        for v in order:
            nbrs = adj[v] & alive
            width = max(width, len(nbrs))
            if width >= best:
                break
            for a, b in itertools.combinations(nbrs, 2):
                adj[a].add(b)
                adj[b].add(a)
            alive.remove(v)
        best = min(best, width)
    return best


def test_vig_examples():
    p = parse_problem("var x1 in [0,1]; var x2 in [0,1]; var x3 in [0,1]; "
                      "min: x1*x2 + x2*x3; st c1: x1 >= 0")
    assert build_vig(p).edges == ((0, 1), (1, 2))

    p = parse_problem("var x1 in [0,1]; var x2 in [0,1]; min: x1^2 + x2; st c1: x1 >= 0")
    assert build_vig(p).edges == ()

    p = parse_problem("var x1 in [0,1]; var x2 in [0,1]; var x3 in [0,1]; "
                      "min: x1*x2*x3; st c1: x1 >= 0")
    assert build_vig(p).edges == ((0, 1), (0, 2), (1, 2))


def test_cmig_examples():
    # one constraint with two monomials; the objective holds one of them
    p = parse_problem("var x1 in [0,1]; var x2 in [0,1]; "
                      "min: x1*x2; st c1: x1*x2 + x1 >= 0.1")
    g = build_cmig(p)
    assert g.n_nodes == 2 + 1 + 1  # 2 monomials + constraint + objective
    assert len(g.edges) == 3
    # the shared monomial has degree 2
    shared = g.labels.index("m:x1*x2")
    assert sum(1 for u, v in g.edges if shared in (u, v)) == 2

    # constant objective: the objective node is isolated
    p = parse_problem("var x1 in [0,1]; min: 5; st c1: x1 >= 0.1")
    g = build_cmig(p)
    obj_node = g.n_nodes - 1
    assert all(obj_node not in e for e in g.edges)


def test_cmig_variable_nodes():
    p = parse_problem("var x1 in [0,1]; var x2 in [0,1]; "
                      "min: x1*x2 + x1; st c1: x1 + x2 >= 0.1")
    nodes = cmig_variable_nodes(p)
    assert set(nodes) == {0, 1}
    p2 = parse_problem("var x1 in [0,1]; var x2 in [0,1]; "
                       "min: x1*x2; st c1: x1 >= 0.1")
    assert set(cmig_variable_nodes(p2)) == {0}  # x2 never appears alone


def test_edge_density():
    assert edge_density(complete_graph(3)) == 1.0
    assert edge_density(Graph.from_edges(3, [(0, 1), (1, 2)])) == pytest.approx(2 / 3)
    assert edge_density(Graph.from_edges(4, [])) == 0.0
    assert edge_density(Graph.from_edges(1, [])) == 0.0


def test_treewidth_examples():
    assert treewidth_ub(complete_graph(4)) == 3
    star = Graph.from_edges(4, [(0, 1), (0, 2), (0, 3)])
    assert treewidth_ub(star) == 1
    path = Graph.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4)])
    assert treewidth_ub(path) == 1
    c4 = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)])
    assert treewidth_ub(c4) == 2


def test_treewidth_vs_bruteforce():
    rng = np.random.default_rng(0)
    for trial in range(20):
        n = int(rng.integers(4, 8))
        edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < 0.45]
        g = Graph.from_edges(n, edges)
        assert treewidth_ub(g) >= exact_treewidth(g)
    # equality on chordal examples
    chordal = Graph.from_edges(5, [(0, 1), (0, 2), (1, 2), (1, 3), (2, 3), (3, 4)])
    assert treewidth_ub(chordal) == exact_treewidth(chordal) == 2


def test_modularity_examples():
    two_triangles = Graph.from_edges(
        6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])
    assert modularity_greedy(two_triangles) == pytest.approx(0.5, abs=1e-9)
    assert modularity_greedy(complete_graph(4)) == pytest.approx(0.0, abs=1e-12)
    assert modularity_greedy(Graph.from_edges(2, [(0, 1)])) == pytest.approx(0.0)
    assert modularity_greedy(Graph.from_edges(3, [])) == 0.0


def test_modularity_against_exhaustive():
    rng = np.random.default_rng(1)
    for trial in range(15):
        n = int(rng.integers(3, 7))
        edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < 0.5]
        if not edges:
            continue
        g = Graph.from_edges(n, edges)
        q = modularity_greedy(g)
        assert -0.5 <= q <= 1.0
        assert q <= exact_modularity(g) + 1e-12


def test_transitivity_examples():
    assert transitivity(complete_graph(3)) == 1.0
    assert transitivity(Graph.from_edges(3, [(0, 1), (1, 2)])) == 0.0
    assert transitivity(complete_graph(4)) == 1.0
    assert transitivity(Graph.from_edges(2, [(0, 1)])) == 0.0


def test_eigencentrality_star():
    star = Graph.from_edges(4, [(0, 1), (0, 2), (0, 3)])
    v = eigencentrality(star)
    assert v[0] == pytest.approx(np.sqrt(3 / 6), abs=1e-6)
    for leaf in (1, 2, 3):
        assert v[leaf] == pytest.approx(1 / np.sqrt(6), abs=1e-6)


def test_eigencentrality_triangle_and_empty():
    v = eigencentrality(complete_graph(3))
    assert v == pytest.approx([1 / np.sqrt(3)] * 3, abs=1e-9)
    assert np.array_equal(eigencentrality(Graph.from_edges(3, [])), np.zeros(3))


def test_eigencentrality_residual_and_degenerate():
    g = Graph.from_edges(6, [(0, 1), (1, 2), (2, 3), (3, 4), (0, 5), (1, 5)])
    v = eigencentrality(g)
    a = g.adjacency_matrix()
    lam = v @ a @ v
    assert np.linalg.norm(a @ v - lam * v) <= 1e-8
    # two disjoint edges: tied spectrum, but deterministic and nonnegative
    two_edges = Graph.from_edges(4, [(0, 1), (2, 3)])
    v1 = eigencentrality(two_edges)
    v2 = eigencentrality(two_edges)
    assert np.array_equal(v1, v2)
    assert np.all(v1 >= 0) and np.linalg.norm(v1) == pytest.approx(1.0)
    # isolated node scores zero
    pend = Graph.from_edges(3, [(0, 1)])
    assert eigencentrality(pend)[2] <= 1e-9


def test_builders_permutation_equivariant():
    rng = np.random.default_rng(2)
    from rltlab.model import GenSpec, generate_random
    for seed in range(5):
        p = generate_random(GenSpec(n=4, degree=2, density=0.6, n_constraints=2, seed=seed))
        perm = rng.permutation(4)
        text = []
        inv = np.argsort(perm)
        for j in perm:
            lo, hi = p.bounds[j]
            text.append(f"var {p.var_names[j]} in [{float(lo)!r}, {float(hi)!r}]")

        def rename(poly):
            parts = []
            for t in poly.terms:
                factors = " ".join(
                    f"{p.var_names[j]}^{m}" if m > 1 else p.var_names[j] for j, m in t.support)
                sign = "-" if t.coefficient < 0 else "+"
                parts.append(f"{sign} {abs(t.coefficient)!r} {factors}")
            return " ".join(parts) if parts else "0"

        text.append("min: " + rename(p.objective))
        for c in p.constraints:
            text.append(f"st {c.name}: {rename(c.poly)} >= {float(c.rhs)!r}")
        q = parse_problem("\n".join(text))
        g_p = build_vig(p)
        g_q = build_vig(q)
        # variable j of p sits at position inv[j] in q's declaration order
        expected = {(min(inv[u], inv[v]), max(inv[u], inv[v])) for u, v in g_p.edges}
        assert expected == set(g_q.edges)
