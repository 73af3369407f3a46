"""Dense, exact evaluation of node kernels for validation.

Everything here is desk scale (N <= 4096) and exists to provide ground
truth for the random-walk estimator, never to compete with it.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .graphs import Graph, normalized_adjacency
from .modulation import (
    DIFFUSION,
    DREG,
    INVERSE_COSINE,
    PSTEP,
    CoeffSeq,
    DivergenceError,
    KernelSpec,
    taylor_coeffs,
)

MAX_DENSE_NODES = 4096


def _check_size(n: int) -> None:
    if n > MAX_DENSE_NODES:
        raise ValueError(f"dense oracle capped at N={MAX_DENSE_NODES}, got {n}")


def dense_normalized_adjacency(g: Graph) -> np.ndarray:
    _check_size(g.n)
    return normalized_adjacency(g).to_dense()


def dense_laplacian(g: Graph) -> np.ndarray:
    return np.eye(g.n) - dense_normalized_adjacency(g)


def expm(a: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling and squaring.

    Scales by 2**s with s = ceil(log2(norm1)) so the scaled matrix has
    1-norm at most 1, runs a degree-20 Taylor core, then squares s times.
    Works for real and complex square matrices.
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expm expects a square matrix")
    _check_size(a.shape[0])
    n = a.shape[0]
    norm1 = float(np.max(np.sum(np.abs(a), axis=0))) if n else 0.0
    s = max(0, math.ceil(math.log2(norm1))) if norm1 > 1.0 else 0
    x = a / (2.0**s)
    eye = np.eye(n, dtype=a.dtype)
    term = eye.copy()
    total = eye.copy()
    for k in range(1, 21):
        term = term @ x / k
        total = total + term
    for _ in range(s):
        total = total @ total
    return total


class TaylorKernelResult(NamedTuple):
    matrix: np.ndarray
    terms_used: int
    converged: bool


def taylor_kernel(
    w: np.ndarray, coeffs, tail_tol: float = 1e-12, max_terms: int = 400
) -> TaylorKernelResult:
    """Evaluate sum_k alpha_k W^k by iterated multiply-accumulate.

    Stops once two consecutive added terms fall below tail_tol in
    Frobenius norm (two, so alternating zero coefficients cannot fake
    convergence). Exhausting the coefficients while term norms are still
    above tail_tol and non-decreasing raises DivergenceError; a still-
    decaying truncated sum is returned with converged=False.
    """
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError("taylor_kernel expects a square matrix")
    _check_size(w.shape[0])
    if not isinstance(coeffs, CoeffSeq):
        coeffs = CoeffSeq(coeffs)
    n = w.shape[0]
    total = coeffs[0] * np.eye(n)
    if coeffs.k_max == 0:
        return TaylorKernelResult(total, 0, True)
    power = np.eye(n)
    prev_norm = math.inf
    below = 0
    k_stop = min(coeffs.k_max, max_terms)
    for k in range(1, k_stop + 1):
        power = power @ w
        term = coeffs[k] * power
        tnorm = float(np.linalg.norm(term))
        total += term
        below = below + 1 if tnorm < tail_tol else 0
        if below >= 2:
            return TaylorKernelResult(total, k, True)
        if tnorm >= tail_tol:
            if k == k_stop and tnorm >= prev_norm:
                raise DivergenceError(
                    f"term norms non-decreasing at exhaustion (k={k}, |term|={tnorm:.3e})"
                )
            prev_norm = tnorm
    return TaylorKernelResult(total, k_stop, False)


def form_scale(spec: KernelSpec) -> float:
    """Constant relating the textbook kernel form to its normalized series.

    exact_kernel(g, spec) == form_scale(spec) * sum_k alpha_k W~^k with
    alpha = taylor_coeffs(spec), because normalizing alpha_0 to 1 divides
    the kernel by this number.
    """
    if spec.kind == DREG:
        return (1.0 + spec.sigma**2) ** (-spec.d)
    if spec.kind == PSTEP:
        return (spec.alpha - 1.0) ** spec.p
    if spec.kind == DIFFUSION:
        return math.exp(-(spec.sigma**2) / 2.0)
    return math.cos(math.pi / 4.0)


def exact_kernel(g: Graph, spec: KernelSpec) -> np.ndarray:
    """Exact dense kernel in its textbook form.

    d-regularised Laplacian (I + sigma^2 L)^-d via d dense solves; p-step
    (alpha I - L)^p by repeated multiplication; diffusion exp(-sigma^2 L/2)
    by scaling and squaring; inverse cosine cos(pi L / 4) via its cosine
    series. L is the normalized Laplacian of g.
    """
    _check_size(g.n)
    lap = dense_laplacian(g)
    n = g.n
    if spec.kind == DREG:
        b = np.eye(n) + spec.sigma**2 * lap
        k = np.eye(n)
        for _ in range(spec.d):
            k = np.linalg.solve(b, k)
        return k
    if spec.kind == PSTEP:
        m = spec.alpha * np.eye(n) - lap
        k = np.eye(n)
        for _ in range(spec.p):
            k = k @ m
        return k
    if spec.kind == DIFFUSION:
        return expm(-(spec.sigma**2) / 2.0 * lap)
    # cos(M) with M = pi L / 4, series sum_j (-1)^j M^(2j) / (2j)!
    m = math.pi / 4.0 * lap
    cos_coeffs = np.zeros(61)
    val = 1.0
    for j in range(0, 31):
        cos_coeffs[2 * j] = val if j % 2 == 0 else -val
        val /= (2 * j + 1) * (2 * j + 2)
    return taylor_kernel(m, cos_coeffs).matrix


def normalized_exact_kernel(g: Graph, spec: KernelSpec) -> np.ndarray:
    """The kernel the walk estimator targets: exact form rescaled so the
    zeroth Taylor coefficient is 1."""
    return exact_kernel(g, spec) / form_scale(spec)


def exact_taylor_kernel(g: Graph, spec: KernelSpec, k_max: int = 400,
                        tail_tol: float = 1e-12) -> TaylorKernelResult:
    """Normalized kernel via its Taylor series on the normalized adjacency."""
    w = dense_normalized_adjacency(g)
    return taylor_kernel(w, taylor_coeffs(spec, k_max), tail_tol=tail_tol)
