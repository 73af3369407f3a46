"""Sparse weighted directed graphs: ingestion, derived operators, generators.

The graph is stored as per-node adjacency lists, which is what the walk
sampler consumes directly. Dense conversions exist for the validation
oracle only.
"""

from __future__ import annotations

import io
import math
from importlib import resources
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np


class GraphFormatError(ValueError):
    """Raised for malformed edge-list input."""


class Graph:
    """Immutable sparse directed weighted graph.

    `out_edges[i]` is an ordered list of `(target, weight)` pairs. The
    unweighted degree (neighbour count) is the inverse of the uniform
    neighbour-sampling probability used by the walker; the weighted degree
    feeds adjacency normalization. Do not mutate after construction.
    """

    __slots__ = ("n", "out_edges", "unweighted_degree", "weighted_degree")

    def __init__(self, n: int, edges: Iterable[tuple[int, int, float]]):
        if n <= 0:
            raise ValueError("graph needs at least one node")
        adj: list[list[tuple[int, float]]] = [[] for _ in range(n)]
        seen: set[tuple[int, int]] = set()
        for src, dst, w in edges:
            if not (0 <= src < n and 0 <= dst < n):
                raise ValueError(f"node id out of range: ({src}, {dst}) with n={n}")
            if not math.isfinite(w):
                raise ValueError(f"non-finite weight on edge ({src}, {dst})")
            if (src, dst) in seen:
                raise ValueError(f"duplicate edge ({src}, {dst})")
            seen.add((src, dst))
            adj[src].append((dst, float(w)))
        self.n = n
        self.out_edges = adj
        self.unweighted_degree = [len(a) for a in adj]
        self.weighted_degree = np.array(
            [sum(w for _, w in a) for a in adj], dtype=np.float64
        )

    @property
    def num_nodes(self) -> int:
        return self.n

    @property
    def num_edges(self) -> int:
        return sum(self.unweighted_degree)

    def edges(self) -> list[tuple[int, int, float]]:
        return [(i, j, w) for i in range(self.n) for j, w in self.out_edges[i]]

    def to_dense(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        for i, nbrs in enumerate(self.out_edges):
            for j, w in nbrs:
                a[i, j] = w
        return a

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        y = np.zeros(self.n)
        for i, nbrs in enumerate(self.out_edges):
            acc = 0.0
            for j, w in nbrs:
                acc += w * x[j]
            y[i] = acc
        return y

    def abs_matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        y = np.zeros(self.n)
        for i, nbrs in enumerate(self.out_edges):
            acc = 0.0
            for j, w in nbrs:
                acc += abs(w) * x[j]
            y[i] = acc
        return y

    def scaled(self, factor: float) -> "Graph":
        return Graph(self.n, ((i, j, factor * w) for i, j, w in self.edges()))

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, edges={self.num_edges})"


def load_edge_list(source, directed: bool = True) -> Graph:
    """Parse a whitespace-separated edge list into a Graph.

    Each non-comment line is `<src> <dst> [<weight>]` with 0-indexed node
    ids; weight defaults to 1.0 and `#` starts a comment. With
    directed=False every listed edge materializes both directions
    (self-loops once). Malformed lines report their line number.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            return load_edge_list(fh, directed=directed)
    edges: list[tuple[int, int, float]] = []
    max_node = -1
    for lineno, raw in enumerate(source, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise GraphFormatError(f"line {lineno}: expected 'src dst [weight]', got {raw!r}")
        try:
            src, dst = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphFormatError(f"line {lineno}: node ids must be integers") from None
        if src < 0 or dst < 0:
            raise GraphFormatError(f"line {lineno}: negative node id")
        w = 1.0
        if len(parts) == 3:
            try:
                w = float(parts[2])
            except ValueError:
                raise GraphFormatError(f"line {lineno}: bad weight {parts[2]!r}") from None
            if not math.isfinite(w):
                raise GraphFormatError(f"line {lineno}: non-finite weight")
        edges.append((src, dst, w))
        max_node = max(max_node, src, dst)
    if max_node < 0:
        raise GraphFormatError("edge list is empty")
    if not directed:
        both = []
        for src, dst, w in edges:
            both.append((src, dst, w))
            if src != dst:
                both.append((dst, src, w))
        edges = both
    try:
        return Graph(max_node + 1, edges)
    except ValueError as exc:
        raise GraphFormatError(str(exc)) from None


def save_edge_list(g: Graph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, j, w in g.edges():
            fh.write(f"{i} {j} {w!r}\n")


def from_text(text: str, directed: bool = True) -> Graph:
    return load_edge_list(io.StringIO(text), directed=directed)


def from_dense(a: np.ndarray, tol: float = 0.0) -> Graph:
    a = np.asarray(a, dtype=np.float64)
    n = a.shape[0]
    edges = [
        (i, j, a[i, j]) for i in range(n) for j in range(n) if abs(a[i, j]) > tol
    ]
    return Graph(n, edges)


def normalized_adjacency(g: Graph) -> Graph:
    """Divide each weight by sqrt of the endpoint weighted degrees.

    Rows (and columns) touching a node of zero weighted degree are left
    all-zero so downstream kernels stay finite; such edges are dropped.
    """
    d = g.weighted_degree
    if np.any(d < 0):
        raise ValueError("normalization requires nonnegative weights")
    edges = []
    for i, nbrs in enumerate(g.out_edges):
        if d[i] <= 0.0:
            continue
        for j, w in nbrs:
            if d[j] <= 0.0:
                continue
            edges.append((i, j, w / math.sqrt(d[i] * d[j])))
    return Graph(g.n, edges)


def laplacian_graph(g: Graph, negate: bool = False) -> Graph:
    """Materialize I - normalized_adjacency(g) (or its negation) as a Graph.

    The identity contributes explicit diagonal self-loops, so the result
    can be walked and matvec'd exactly like any other operator.
    """
    wt = normalized_adjacency(g)
    sign = -1.0 if negate else 1.0
    diag = {i: sign * 1.0 for i in range(g.n)}
    edges = []
    for i, nbrs in enumerate(wt.out_edges):
        for j, w in nbrs:
            if i == j:
                diag[i] = sign * (1.0 - w)
            else:
                edges.append((i, j, sign * (-w)))
    edges.extend((i, i, w) for i, w in diag.items())
    return Graph(g.n, edges)


class SpectralRadiusResult(NamedTuple):
    value: float
    converged: bool
    iterations: int


def spectral_radius(g: Graph, tol: float = 1e-10, max_iters: int = 1000) -> SpectralRadiusResult:
    """Estimate the spectral radius by power iteration on absolute weights.

    Starts from the normalized all-ones vector (deterministic, no RNG) and
    stops when successive eigenvalue estimates change by less than tol.
    Non-convergence returns the best estimate with converged=False.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    x = np.full(g.n, 1.0 / math.sqrt(g.n))
    lam = 0.0
    for it in range(1, max_iters + 1):
        y = g.abs_matvec(x)
        norm = float(np.linalg.norm(y))
        if norm == 0.0:
            return SpectralRadiusResult(0.0, True, it)
        lam_new = float(x @ y)
        x = y / norm
        if it > 1 and abs(lam_new - lam) < tol:
            return SpectralRadiusResult(abs(lam_new), True, it)
        lam = lam_new
    return SpectralRadiusResult(abs(lam), False, max_iters)


# ---------------------------------------------------------------------------
# Generators for the experiment graphs (seeded, reproducible).
# ---------------------------------------------------------------------------


def erdos_renyi(n: int, p_edge: float, seed: int = 0) -> Graph:
    """Undirected G(n, p) with unit weights."""
    if not 0.0 <= p_edge <= 1.0:
        raise ValueError("p_edge must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    edges = []
    for i in range(n):
        draws = rng.random(n - i - 1)
        for k in np.flatnonzero(draws < p_edge):
            j = i + 1 + int(k)
            edges.append((i, j, 1.0))
            edges.append((j, i, 1.0))
    return Graph(n, edges)


def binary_tree(depth: int) -> Graph:
    """Perfect binary tree with 2**depth - 1 nodes, unit weights."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    n = 2**depth - 1
    edges = []
    for i in range(n):
        for c in (2 * i + 1, 2 * i + 2):
            if c < n:
                edges.append((i, c, 1.0))
                edges.append((c, i, 1.0))
    return Graph(n, edges)


def random_regular(n: int, d: int, seed: int = 0, max_tries: int = 200) -> Graph:
    """Random d-regular simple graph from the pairing model.

    Stubs are shuffled and matched greedily, each stub taking the nearest
    compatible partner (different node, edge unused); a round with no
    compatible partner restarts with a fresh shuffle.
    """
    if n * d % 2 != 0:
        raise ValueError("n*d must be even")
    if d >= n:
        raise ValueError("d must be < n")
    rng = np.random.default_rng(seed)
    all_stubs = np.repeat(np.arange(n), d)
    for _ in range(max_tries):
        stubs = [int(s) for s in rng.permutation(all_stubs)]
        seen: set[tuple[int, int]] = set()
        ok = True
        while stubs:
            a = stubs.pop()
            found = -1
            for idx in range(len(stubs) - 1, -1, -1):
                b = stubs[idx]
                if b != a and (a, b) not in seen:
                    found = idx
                    break
            if found < 0:
                ok = False
                break
            b = stubs.pop(found)
            seen.add((a, b))
            seen.add((b, a))
        if ok:
            edges = [(a, b, 1.0) for (a, b) in seen]
            return Graph(n, edges)
    raise RuntimeError(f"no simple {d}-regular pairing found in {max_tries} tries")


def triangulated_grid(nu: int, nv: int, torus: bool = True) -> tuple[Graph, np.ndarray]:
    """Triangulated nu-by-nv lattice with per-node unit normals.

    With torus=True the lattice wraps in both directions and the normals
    come from the standard torus embedding, so they are known analytically
    and vary over the surface. Returns (graph, normals[n, 3]).
    """
    if nu < 3 or nv < 3:
        raise ValueError("need nu, nv >= 3")
    n = nu * nv

    def nid(i, j):
        return (i % nu) * nv + (j % nv)

    seen = set()
    edges = []

    def add(a, b):
        if a != b and (a, b) not in seen:
            seen.add((a, b))
            seen.add((b, a))
            edges.append((a, b, 1.0))
            edges.append((b, a, 1.0))

    for i in range(nu):
        for j in range(nv):
            here = nid(i, j)
            if torus or i + 1 < nu:
                add(here, nid(i + 1, j))
            if torus or j + 1 < nv:
                add(here, nid(i, j + 1))
            if torus or (i + 1 < nu and j + 1 < nv):
                add(here, nid(i + 1, j + 1))  # diagonal of each quad

    normals = np.zeros((n, 3))
    for i in range(nu):
        u = 2.0 * math.pi * i / nu
        for j in range(nv):
            v = 2.0 * math.pi * j / nv
            if torus:
                normals[nid(i, j)] = (
                    math.cos(v) * math.cos(u),
                    math.cos(v) * math.sin(u),
                    math.sin(v),
                )
            else:
                normals[nid(i, j)] = (0.0, 0.0, 1.0)
    return Graph(n, edges), normals


def bundled_graph(name: str) -> Graph:
    """Load one of the data files shipped with the package."""
    ref = resources.files("graphrf.data").joinpath(f"{name}.edges")
    if not ref.is_file():
        available = sorted(
            p.name[: -len(".edges")]
            for p in resources.files("graphrf.data").iterdir()
            if p.name.endswith(".edges")
        )
        raise FileNotFoundError(f"no bundled graph {name!r}; available: {available}")
    with ref.open("r", encoding="utf-8") as fh:
        return load_edge_list(fh, directed=False)


BUNDLED_GRAPHS = ("karate", "dolphins", "er_small", "er_large", "binary_tree", "d_regular")
