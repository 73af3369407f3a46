"""Time-invariant non-homogeneous ODEs on graph nodes.

Solves dx/dt = W x + y(t) with x(0) = 0, where W is any operator
expressed as a (possibly self-looped) graph. The solution is the
convolution integral of exp(W (t - tau)) y(tau); the Monte-Carlo path
samples tau uniformly and replaces each matrix exponential with a
low-rank random-walk feature pair, never forming an N x N matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimator import kernel_matvec
from .graphs import Graph
from .modulation import KernelSpec, heat_modulation, modulation_for, taylor_coeffs
from .oracle import expm, taylor_kernel
from .seeding import derive_seed
from .walker import feature_pair


@dataclass
class OdeProblem:
    """Operator, drive, horizon and sample budget for one ODE run.

    The drive is either a constant vector or a tabulated time series
    (times, values[t, n]) interpolated linearly. Sampling times are
    uniform on [0, horizon], so the importance density is 1/horizon.
    """

    operator: Graph
    drive: object
    horizon: float
    n_samples: int = 10

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        n = self.operator.n
        if isinstance(self.drive, tuple):
            times, values = self.drive
            times = np.asarray(times, dtype=np.float64)
            values = np.asarray(values, dtype=np.float64)
            if times.ndim != 1 or values.shape != (times.size, n):
                raise ValueError("tabulated drive needs times[t] and values[t, n]")
            if np.any(np.diff(times) <= 0):
                raise ValueError("drive times must be strictly increasing")
            self.drive = (times, values)
        else:
            vec = np.asarray(self.drive, dtype=np.float64)
            if vec.shape != (n,):
                raise ValueError(f"drive must have length {n}")
            self.drive = vec

    def drive_at(self, tau: float) -> np.ndarray:
        if isinstance(self.drive, tuple):
            times, values = self.drive
            tau = min(max(tau, times[0]), times[-1])
            k = int(np.searchsorted(times, tau, side="right") - 1)
            if k >= times.size - 1:
                return values[-1]
            w = (tau - times[k]) / (times[k + 1] - times[k])
            return (1.0 - w) * values[k] + w * values[k + 1]
        return self.drive

    @property
    def density(self) -> float:
        return 1.0 / self.horizon


def simulate_exact(
    problem: OdeProblem, n_quad: int = 200, drive_kernel: KernelSpec | None = None
) -> np.ndarray:
    """Trapezoidal quadrature of the exact convolution solution.

    Matrix exponentials advance incrementally from the tau = t end, where
    exp(W (t - tau)) = I, multiplying by exp(W dt) per step; for decaying
    operators every factor contracts, so rounding never amplifies. When a
    drive kernel is supplied the drive is first multiplied by the exact
    kernel of the operator, mirroring the estimator's low-rank version.
    """
    if n_quad < 2:
        raise ValueError("n_quad must be >= 2")
    w = problem.operator.to_dense()
    t = problem.horizon
    taus = np.linspace(0.0, t, n_quad)
    dt = taus[1] - taus[0]
    z = None
    if drive_kernel is not None:
        z = exact_taylor_kernel_matrix(problem.operator, drive_kernel)
    exp_now = np.eye(problem.operator.n)  # exp(W (t - tau)) at tau = t
    step = expm(w * dt)
    x = np.zeros(problem.operator.n)
    for k in range(n_quad - 1, -1, -1):
        y = problem.drive_at(float(taus[k]))
        if z is not None:
            y = z @ y
        weight = 0.5 if k in (0, n_quad - 1) else 1.0
        x += weight * (exp_now @ y)
        if k > 0:
            exp_now = exp_now @ step
    return x * dt


def exact_taylor_kernel_matrix(operator: Graph, spec: KernelSpec, k_max: int = 400) -> np.ndarray:
    """Normalized Taylor kernel of `spec` evaluated on the operator matrix
    itself (not on a re-normalized adjacency)."""
    return taylor_kernel(operator.to_dense(), taylor_coeffs(spec, k_max)).matrix


def simulate_grf(
    problem: OdeProblem,
    m: int,
    seed: int = 0,
    drive_kernel: KernelSpec | None = None,
    p_halt: float = 0.1,
    threads: int | None = None,
) -> np.ndarray:
    """Monte-Carlo estimate of x(t) from low-rank walk features.

    Draws n_samples times uniformly on [0, t], one per equal-width stratum
    (stratification keeps the estimator unbiased for the uniform density
    while removing most of the time-sampling variance, which would
    otherwise drown the walk-count signal). Each sample approximates
    exp(W (t - tau_j)) with a fresh feature pair built from the heat
    modulation function at scale t - tau_j (a fresh derived seed per
    sample), then accumulates the importance-weighted matvecs. The drive
    kernel, when present, is decomposed once and applied innermost.
    """
    t = problem.horizon
    rng = np.random.default_rng(derive_seed(seed, 0))
    n = problem.n_samples
    taus = (np.arange(n) + rng.uniform(0.0, 1.0, n)) * (t / n)
    z_pair = None
    if drive_kernel is not None:
        f_z = modulation_for(drive_kernel)
        z_pair = feature_pair(
            problem.operator, f_z, p_halt, m, sigma=1.0,
            seed=derive_seed(seed, 1), threads=threads,
        )
    x = np.zeros(problem.operator.n)
    for j, tau in enumerate(taus):
        y = problem.drive_at(float(tau))
        if z_pair is not None:
            y = kernel_matvec(z_pair[0], z_pair[1], y)
        f_heat = heat_modulation(t - float(tau))
        a, b = feature_pair(
            problem.operator, f_heat, p_halt, m, sigma=1.0,
            seed=derive_seed(seed, 2, j), threads=threads,
        )
        x += kernel_matvec(a, b, y) / problem.density
    return x / problem.n_samples
