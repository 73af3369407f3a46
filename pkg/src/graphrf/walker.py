"""Random-walk feature sampler.

For every node the sampler runs m independent halting walks. A walk
deposits `load * f(length)` at each node it visits, where the load is the
running product of traversed edge weights (regulariser folded in) divided
by the walk's marginal probability: uniform neighbour choice contributes
the unweighted degree, survival contributes 1/(1 - p_halt) per step. Rows
are averaged over the m walks, and dot products of rows drawn with
independent seeds estimate the kernel whose Taylor coefficients are the
convolution of the two modulation functions.

Randomness is counter-based: each (seed, node) pair keys its own Philox
stream and a node's walks consume that stream in a fixed order, so results
are bit-identical no matter how sampling is scheduled across threads.
"""

from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse

from .graphs import Graph
from .modulation import ModulationFn
from .seeding import derive_seed

DENSE_LIMIT = 4096
_MASK64 = 0xFFFFFFFFFFFFFFFF
_BLOCK = 64  # uniforms per draw; two per step, refilled for rare long walks


class SeedCollisionError(ValueError):
    """Two feature matrices that must be independent share a seed."""


def _check_sampling_args(p_halt: float, m: int, sigma: float) -> None:
    if not 0.0 < p_halt < 1.0:
        raise ValueError("p_halt must lie in (0, 1)")
    if m < 1:
        raise ValueError("m must be >= 1")
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")


def _node_buckets(adj, p_halt: float, m: int, sigma: float, seed: int, node: int):
    """Accumulated loads of m walks out of `node`, bucketed by walk length.

    Returns {length: {visited node: summed load}}. Deposits merge in
    chronological order, which fixes the floating-point result exactly.
    """
    key = np.array([seed & _MASK64, node], dtype=np.uint64)
    rng = np.random.Generator(np.random.Philox(key=key))
    bulk = rng.random((m, _BLOCK)).tolist()
    scale = sigma / (1.0 - p_halt)
    buckets: dict[int, dict[int, float]] = {}
    for w in range(m):
        u = bulk[w]
        ui = 0
        load = 1.0
        cur = node
        length = 0
        while True:
            cell = buckets.get(length)
            if cell is None:
                cell = {}
                buckets[length] = cell
            cell[cur] = cell.get(cur, 0.0) + load
            nbrs = adj[cur]
            deg = len(nbrs)
            if deg == 0:
                break  # dead end: the deposit already happened, walk stops
            if ui + 2 > _BLOCK:
                u = rng.random(_BLOCK).tolist()
                ui = 0
            k = int(u[ui] * deg)
            if k >= deg:
                k = deg - 1
            tgt, wgt = nbrs[k]
            load *= deg * scale * wgt
            length += 1
            cur = tgt
            if u[ui + 1] < p_halt:
                break
            ui += 2
    return buckets


@dataclass
class FeatureMatrix:
    """Row i is the feature vector of node i, plus the sampling metadata.

    Rows are dense for N <= 4096 and CSR sparse above that.
    """

    rows: object  # np.ndarray (n, n) or scipy.sparse.csr_matrix
    m: int
    p_halt: float
    sigma: float
    seed: int

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def is_dense(self) -> bool:
        return isinstance(self.rows, np.ndarray)

    def row(self, i: int) -> np.ndarray:
        if self.is_dense:
            return self.rows[i]
        return np.asarray(self.rows.getrow(i).todense()).ravel()

    def toarray(self) -> np.ndarray:
        return self.rows if self.is_dense else np.asarray(self.rows.todense())

    def save(self, path) -> None:
        flags = 0 if self.is_dense else 1
        header = struct.pack(
            "<4sBBQQQdd",
            b"GRFB",
            1,
            flags,
            self.n,
            self.m,
            self.seed & _MASK64,
            self.p_halt,
            self.sigma,
        )
        with open(path, "wb") as fh:
            fh.write(header)
            if self.is_dense:
                fh.write(np.ascontiguousarray(self.rows, dtype=np.float64).tobytes())
            else:
                csr = self.rows.tocsr()
                fh.write(struct.pack("<Q", csr.nnz))
                fh.write(np.asarray(csr.indptr, dtype=np.int64).tobytes())
                fh.write(np.asarray(csr.indices, dtype=np.int64).tobytes())
                fh.write(np.asarray(csr.data, dtype=np.float64).tobytes())

    @classmethod
    def load(cls, path) -> "FeatureMatrix":
        with open(path, "rb") as fh:
            head = fh.read(struct.calcsize("<4sBBQQQdd"))
            magic, version, flags, n, m, seed, p_halt, sigma = struct.unpack("<4sBBQQQdd", head)
            if magic != b"GRFB" or version != 1:
                raise ValueError(f"not a feature-matrix file: {path}")
            if flags == 0:
                data = np.frombuffer(fh.read(8 * n * n), dtype=np.float64)
                rows = data.reshape(n, n).copy()
            else:
                (nnz,) = struct.unpack("<Q", fh.read(8))
                indptr = np.frombuffer(fh.read(8 * (n + 1)), dtype=np.int64)
                indices = np.frombuffer(fh.read(8 * nnz), dtype=np.int64)
                data = np.frombuffer(fh.read(8 * nnz), dtype=np.float64)
                rows = sparse.csr_matrix((data, indices, indptr), shape=(n, n))
        return cls(rows=rows, m=int(m), p_halt=float(p_halt), sigma=float(sigma), seed=int(seed))

    def to_csv(self, path) -> None:
        np.savetxt(path, self.toarray(), delimiter=",")


def _map_nodes(fn, n: int, threads: int | None):
    """Apply fn to every node, optionally on a thread pool.

    Node results are independent and merged in node order, so the output
    is identical for any thread count.
    """
    if threads is None or threads <= 1:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n)))


def sample_features(
    g: Graph,
    f: ModulationFn,
    p_halt: float,
    m: int,
    sigma: float = 1.0,
    seed: int = 0,
    threads: int | None = None,
) -> FeatureMatrix:
    """Sample the full feature matrix: m modulated walks out of every node.

    The expectation of row i is sum_l f(l) * (sigma W)^l restricted to row
    i, with W the walked adjacency. Nodes without out-edges deposit f(0)
    once per walk and stop, matching their all-zero adjacency rows.
    """
    _check_sampling_args(p_halt, m, sigma)
    adj = g.out_edges
    n = g.n
    f.values(16)  # warm the shared cache before any parallel sampling

    def one_node(i):
        # Walk deposits touch O(m / p_halt) nodes, so rows are built as
        # compact (column, value) lists; per-column sums accumulate in
        # ascending length order, which pins the floating-point result.
        buckets = _node_buckets(adj, p_halt, m, sigma, seed, i)
        acc: dict[int, float] = {}
        for length in sorted(buckets):
            fl = f(length)
            for v, load in buckets[length].items():
                acc[v] = acc.get(v, 0.0) + fl * (load / m)
        cols = sorted(acc)
        return cols, [acc[v] for v in cols]

    results = _map_nodes(one_node, n, threads)
    if n <= DENSE_LIMIT:
        rows = np.zeros((n, n))
        for i, (cols, vals) in enumerate(results):
            rows[i, cols] = vals
    else:
        indptr = [0]
        indices: list[int] = []
        data: list[float] = []
        for cols, vals in results:
            indices.extend(cols)
            data.extend(vals)
            indptr.append(len(indices))
        rows = sparse.csr_matrix(
            (np.array(data), np.array(indices, dtype=np.int64), np.array(indptr, dtype=np.int64)),
            shape=(n, n),
        )
    return FeatureMatrix(rows=rows, m=m, p_halt=p_halt, sigma=sigma, seed=seed)


@dataclass
class LengthFeatureTensor:
    """Per-walk-length load matrices: per_length[l][i, v] is the mean load
    deposited at v by walks from i at step l, before any modulation.

    Contracting against f(0..l_max) plus the recorded overflow loads
    reproduces sample_features exactly, which is what makes losses
    differentiable in the modulation function. Loads beyond l_max stay
    individually recorded in `overflow`.
    """

    per_length: np.ndarray  # (l_max + 1, n, n)
    overflow: list  # (node, visited, length, mean load), ascending length per node
    m: int
    p_halt: float
    sigma: float
    seed: int
    l_max: int
    max_length: int

    @property
    def n(self) -> int:
        return self.per_length.shape[1]

    @property
    def overflow_count(self) -> int:
        return len(self.overflow)

    def contract(self, f: ModulationFn) -> FeatureMatrix:
        """sum_l f(l) * per_length[l] (+ overflow), as a FeatureMatrix."""
        n = self.n
        fvals = f.values(self.l_max + 1)
        rows = np.zeros((n, n))
        for length in range(self.l_max + 1):
            rows += fvals[length] * self.per_length[length]
        for node, v, length, load in self.overflow:
            rows[node, v] += f(length) * load
        return FeatureMatrix(rows=rows, m=self.m, p_halt=self.p_halt, sigma=self.sigma, seed=self.seed)

    def contract_values(self, fvals: np.ndarray, f_tail=None) -> np.ndarray:
        """Contract against a plain value table (training hot path)."""
        rows = np.zeros((self.n, self.n))
        for length in range(self.l_max + 1):
            rows += fvals[length] * self.per_length[length]
        if self.overflow:
            if f_tail is None:
                raise ValueError("tensor has overflow loads; supply f_tail")
            for node, v, length, load in self.overflow:
                rows[node, v] += f_tail(length) * load
        return rows


def sample_length_features(
    g: Graph,
    p_halt: float,
    m: int,
    sigma: float = 1.0,
    seed: int = 0,
    l_max: int = 32,
    threads: int | None = None,
) -> LengthFeatureTensor:
    """Sample walks exactly as sample_features does, but keep the per-length
    load decomposition instead of contracting it against a fixed f."""
    _check_sampling_args(p_halt, m, sigma)
    if l_max < 0:
        raise ValueError("l_max must be >= 0")
    adj = g.out_edges
    n = g.n

    def one_node(i):
        return _node_buckets(adj, p_halt, m, sigma, seed, i)

    results = _map_nodes(one_node, n, threads)
    per_length = np.zeros((l_max + 1, n, n))
    overflow = []
    max_length = 0
    for i, buckets in enumerate(results):
        for length in sorted(buckets):
            if length > max_length:
                max_length = length
            cell = buckets[length]
            if length <= l_max:
                dest = per_length[length]
                for v, load in cell.items():
                    dest[i, v] = load / m
            else:
                for v, load in cell.items():
                    overflow.append((i, v, length, load / m))
    return LengthFeatureTensor(
        per_length=per_length,
        overflow=overflow,
        m=m,
        p_halt=p_halt,
        sigma=sigma,
        seed=seed,
        l_max=l_max,
        max_length=max_length,
    )


def feature_pair(
    g: Graph,
    f1: ModulationFn,
    p_halt: float,
    m: int,
    sigma: float = 1.0,
    seed: int = 0,
    f2: ModulationFn | None = None,
    threads: int | None = None,
) -> tuple[FeatureMatrix, FeatureMatrix]:
    """Two independently seeded feature matrices for Gram estimation.

    Diagonal kernel estimates are biased if the pair shares walks, so the
    two child seeds are always distinct derivations of `seed`.
    """
    s1 = derive_seed(seed, 1)
    s2 = derive_seed(seed, 2)
    phi1 = sample_features(g, f1, p_halt, m, sigma=sigma, seed=s1, threads=threads)
    phi2 = sample_features(g, f2 if f2 is not None else f1, p_halt, m, sigma=sigma, seed=s2, threads=threads)
    return phi1, phi2
