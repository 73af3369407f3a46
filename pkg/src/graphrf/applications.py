"""Downstream consumers of kernel estimates: node clustering and
node-attribute regression."""

from __future__ import annotations

import numpy as np

from .estimator import kernel_matvec
from .seeding import derive_seed
from .walker import FeatureMatrix


def kernel_kmeans(k_hat: np.ndarray, k: int, max_iters: int = 300, seed: int = 0) -> np.ndarray:
    """Kernelized Lloyd iteration on a Gram matrix.

    Distances use only kernel entries:
        d(i, c)^2 = K_ii - 2 mean_{j in c} K_ij + mean_{j,j' in c} K_jj'.
    Seeding is kmeans++-style on kernel distances, deterministic given
    `seed`. Ties in assignment go to the lowest cluster id. An emptied
    cluster is re-seeded from the point farthest from its own cluster
    (lowest index on ties); if every distance is zero the data are
    degenerate and the cluster is left empty. Stops at a label fixpoint or
    after max_iters.
    """
    k_hat = np.asarray(k_hat, dtype=np.float64)
    n = k_hat.shape[0]
    if k_hat.ndim != 2 or k_hat.shape[1] != n:
        raise ValueError("kernel matrix must be square")
    if not 2 <= k <= n:
        raise ValueError(f"need 2 <= k <= N, got k={k}, N={n}")
    diag = np.diag(k_hat).copy()

    rng = np.random.default_rng(seed)
    centers = [int(rng.integers(n))]
    point_d2 = np.maximum(diag - 2.0 * k_hat[:, centers[0]] + diag[centers[0]], 0.0)
    while len(centers) < k:
        total = float(point_d2.sum())
        if total <= 0.0:
            probs = np.full(n, 1.0 / n)
        else:
            probs = point_d2 / total
        centers.append(int(rng.choice(n, p=probs)))
        cand = np.maximum(diag - 2.0 * k_hat[:, centers[-1]] + diag[centers[-1]], 0.0)
        point_d2 = np.minimum(point_d2, cand)

    labels = np.argmin(
        np.stack([diag - 2.0 * k_hat[:, c] + diag[c] for c in centers], axis=1), axis=1
    ).astype(np.int64)

    for _ in range(max_iters):
        d2 = np.empty((n, k))
        for c in range(k):
            members = np.flatnonzero(labels == c)
            if members.size == 0:
                d2[:, c] = np.inf
                continue
            cross = k_hat[:, members].mean(axis=1)
            inner = float(k_hat[np.ix_(members, members)].mean())
            d2[:, c] = diag - 2.0 * cross + inner
        new_labels = np.argmin(d2, axis=1).astype(np.int64)

        own = d2[np.arange(n), new_labels]
        for c in range(k):
            if np.any(new_labels == c):
                continue
            far = int(np.argmax(own))
            if own[far] <= 0.0:
                continue  # identical rows: leave the cluster empty
            new_labels[far] = c
            own[far] = 0.0

        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return labels


def clustering_error(labels_a, labels_b) -> float:
    """Fraction of unordered node pairs whose same-cluster status disagrees.

    Invariant under permutations of the label ids of either argument.
    """
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("labelings must be equal-length vectors")
    n = a.size
    if n < 2:
        return 0.0
    same_a = a[:, None] == a[None, :]
    same_b = b[:, None] == b[None, :]
    iu = np.triu_indices(n, k=1)
    wrong = int(np.sum(same_a[iu] != same_b[iu]))
    return wrong / (n * (n - 1) / 2)


def random_mask(n: int, fraction: float = 0.05, seed: int = 0) -> np.ndarray:
    """Boolean mask marking a deterministic random subset as missing."""
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie in (0, 1)")
    count = max(1, int(round(n * fraction)))
    if count >= n:
        raise ValueError("mask would cover every node")
    rng = np.random.default_rng(derive_seed(seed, 0x3A5C))
    picks = rng.choice(n, size=count, replace=False)
    mask = np.zeros(n, dtype=bool)
    mask[picks] = True
    return mask


def kernel_regression_predict(
    phi1: FeatureMatrix, phi2: FeatureMatrix, attrs: np.ndarray, mask: np.ndarray
) -> np.ndarray:
    """Unnormalized kernel regression of per-node attribute vectors.

    prediction_i = sum_{j unmasked} K_hat(i, j) attrs_j, evaluated one
    attribute column at a time through kernel_matvec so the Gram matrix is
    never formed. Masked rows of `attrs` are ignored.
    """
    attrs = np.asarray(attrs, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    n = phi1.n
    if attrs.shape[0] != n or mask.shape != (n,):
        raise ValueError("attrs and mask must cover every node")
    if mask.all():
        raise ValueError("every node is masked; nothing to regress from")
    known = attrs.copy()
    known[mask] = 0.0
    pred = np.empty_like(known)
    for col in range(known.shape[1]):
        pred[:, col] = kernel_matvec(phi1, phi2, known[:, col])
    return pred


def angular_error(pred: np.ndarray, truth: np.ndarray, mask: np.ndarray) -> float:
    """Mean 1 - cos(angle between predicted and true rows) over masked nodes.

    Zero-norm predictions count as orthogonal (error 1), keeping the score
    bounded while still penalizing degenerate output.
    """
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        raise ValueError("mask selects no nodes")
    total = 0.0
    for i in idx:
        tn = float(np.linalg.norm(truth[i]))
        if tn == 0.0:
            raise ValueError(f"true attribute row {i} has zero norm")
        pn = float(np.linalg.norm(pred[i]))
        if pn == 0.0:
            total += 1.0
            continue
        total += 1.0 - float(pred[i] @ truth[i]) / (pn * tn)
    return total / idx.size


def load_attributes(path) -> np.ndarray:
    """Read one `nx ny nz` line per node."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"line {lineno}: expected 3 components, got {len(parts)}")
            rows.append([float(p) for p in parts])
    if not rows:
        raise ValueError(f"no attribute rows in {path}")
    return np.asarray(rows)


def save_attributes(attrs: np.ndarray, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in np.asarray(attrs):
            fh.write(f"{float(row[0])!r} {float(row[1])!r} {float(row[2])!r}\n")
