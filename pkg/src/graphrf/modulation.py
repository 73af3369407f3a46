"""Taylor coefficients and modulation functions.

A modulation function maps a walk length to the weight its deposit
receives. A pair (f1, f2) estimates the kernel whose Taylor coefficients
are their discrete convolution, so everything here revolves around moving
between coefficient sequences and modulation functions:

  * closed forms for the regularised-Laplacian / random-walk / heat kernels,
  * an iterative solver for the symmetric square root of any coefficient
    sequence (the inverse-cosine kernel has no closed form, so it always
    takes this route),
  * the convolution itself, used to recover coefficients from learned
    modulation functions,
  * batch-size and Rademacher-complexity bounds.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

DREG = "d_regularised_laplacian"
PSTEP = "p_step_random_walk"
DIFFUSION = "diffusion"
INVERSE_COSINE = "inverse_cosine"

KINDS = (DREG, PSTEP, DIFFUSION, INVERSE_COSINE)


class DivergenceError(ArithmeticError):
    """A partial sum failed to converge within the supplied terms."""


class UnsupportedClosedFormError(ValueError):
    """The kernel has no closed-form modulation function."""


@dataclass(frozen=True)
class KernelSpec:
    """One of the four built-in node-kernel families.

    sigma regularises the d-regularised-Laplacian and diffusion kernels;
    the p-step kernel uses `alpha` (>= 2) instead and the inverse-cosine
    kernel is parameter free. Taylor series are taken in powers of the
    normalized adjacency matrix.
    """

    kind: str
    sigma: float = 0.25
    d: int = 2
    p: int = 2
    alpha: float = 20.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}; expected one of {KINDS}")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.kind == DREG and (self.d < 1 or self.d != int(self.d)):
            raise ValueError("d must be a positive integer")
        if self.kind == PSTEP:
            if self.p < 1 or self.p != int(self.p):
                raise ValueError("p must be a positive integer")
            if self.alpha < 2:
                raise ValueError("alpha must be >= 2")

    @classmethod
    def d_regularised(cls, d: int = 2, sigma: float = 0.25) -> "KernelSpec":
        return cls(DREG, sigma=sigma, d=d)

    @classmethod
    def p_step(cls, p: int = 2, alpha: float = 20.0) -> "KernelSpec":
        return cls(PSTEP, p=p, alpha=alpha)

    @classmethod
    def diffusion(cls, sigma: float = 0.25) -> "KernelSpec":
        return cls(DIFFUSION, sigma=sigma)

    @classmethod
    def inverse_cosine(cls) -> "KernelSpec":
        return cls(INVERSE_COSINE)

    def step_scale(self) -> float:
        """Per-power regulariser factor: coefficient k carries step_scale**k.

        Rescaling the walked matrix by this factor (or, identically, the
        modulation function by step_scale**i) absorbs the regulariser, so
        closed forms only ever need their parameter-free shape.
        """
        if self.kind == DREG:
            return self.sigma**2 / (1.0 + self.sigma**2)
        if self.kind == PSTEP:
            return 1.0 / (self.alpha - 1.0)
        if self.kind == DIFFUSION:
            return self.sigma**2 / 2.0
        return math.pi / 4.0


class CoeffSeq:
    """Finite prefix (alpha_0, ..., alpha_k_max) of a normalized Taylor series."""

    __slots__ = ("values",)

    def __init__(self, values):
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("coefficients must be a non-empty 1-D sequence")
        if abs(arr[0] - 1.0) > 1e-12:
            raise ValueError(f"coefficients must be normalized with alpha_0 = 1, got {arr[0]}")
        self.values = arr

    @property
    def k_max(self) -> int:
        return self.values.size - 1

    def __len__(self) -> int:
        return self.values.size

    def __getitem__(self, k):
        return self.values[k]

    def __iter__(self):
        return iter(self.values)


def _base_coefficients(spec: KernelSpec, k_max: int) -> np.ndarray:
    """Regulariser-free coefficient shapes, one recurrence per family."""
    a = np.empty(k_max + 1)
    a[0] = 1.0
    if spec.kind == DREG:
        for k in range(k_max):  # binomial(d+k-1, k)
            a[k + 1] = a[k] * (spec.d + k) / (k + 1)
    elif spec.kind == PSTEP:
        for k in range(k_max):  # binomial(p, k), zero past p
            a[k + 1] = a[k] * (spec.p - k) / (k + 1) if k < spec.p else 0.0
    elif spec.kind == DIFFUSION:
        for k in range(k_max):
            a[k + 1] = a[k] / (k + 1)
    else:  # inverse cosine: 1/k! with sign pattern + + - - + + - -
        mag = 1.0
        for k in range(k_max + 1):
            a[k] = mag if k % 4 in (0, 1) else -mag
            mag /= k + 1
    return a


def taylor_coeffs(spec: KernelSpec, k_max: int) -> CoeffSeq:
    """Normalized Taylor coefficients of the kernel in powers of the
    normalized adjacency matrix, regulariser factors included."""
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    base = _base_coefficients(spec, k_max)
    scale = np.power(spec.step_scale(), np.arange(k_max + 1))
    return CoeffSeq(base * scale)


class ModulationFn:
    """Lazily evaluated, cached map from walk length to deposit weight.

    Evaluation is deterministic; the prefix cache grows under a lock so
    concurrent sampling threads can share one instance. Tabulated
    functions return 0.0 past the end of their table (the caller chooses
    a table long enough for its walk-length bound).
    """

    def __init__(self, step: Callable[[int, list], float], kind: str, length: int | None = None):
        self._step = step
        self.kind = kind
        self.length = length
        self._cache: list[float] = []
        self._lock = threading.Lock()

    @classmethod
    def from_table(cls, values: Sequence[float]) -> "ModulationFn":
        table = [float(v) for v in values]

        def step(i, _cache):
            return table[i] if i < len(table) else 0.0

        return cls(step, "tabulated", length=len(table))

    @classmethod
    def from_callable(cls, fn: Callable[[int], float], kind: str = "callable") -> "ModulationFn":
        return cls(lambda i, _cache: float(fn(i)), kind)

    def _extend(self, upto: int) -> None:
        with self._lock:
            while len(self._cache) < upto:
                i = len(self._cache)
                self._cache.append(float(self._step(i, self._cache)))

    def __call__(self, i: int) -> float:
        if i < 0:
            raise ValueError("walk lengths are nonnegative")
        if i >= len(self._cache):
            self._extend(i + 1)
        return self._cache[i]

    def values(self, count: int) -> np.ndarray:
        """First `count` values f(0), ..., f(count-1)."""
        if count > len(self._cache):
            self._extend(count)
        return np.array(self._cache[:count])

    def scaled(self, beta: float) -> "ModulationFn":
        """The modulation function i -> f(i) * beta**i.

        This is exactly the effect of rescaling the walked matrix by beta,
        so it absorbs regularisers and kernel lengthscales.
        """

        def step(i, _cache):
            return self(i) * beta**i

        return ModulationFn(step, self.kind, length=self.length)

    def save_table(self, path, count: int) -> None:
        """Write the first `count` values, one per line (round-trip exact)."""
        vals = self.values(count)
        with open(path, "w", encoding="utf-8") as fh:
            for v in vals:
                fh.write(f"{float(v)!r}\n")


def load_table(path) -> ModulationFn:
    with open(path, "r", encoding="utf-8") as fh:
        values = [float(line.strip()) for line in fh if line.strip()]
    if not values:
        raise ValueError(f"empty modulation table: {path}")
    return ModulationFn.from_table(values)


def indicator_modulation() -> ModulationFn:
    """The lazy-walker modulation: all load deposited at the start node."""
    return ModulationFn.from_table([1.0])


def closed_form_modulation(spec: KernelSpec, absorb_regulariser: bool = True) -> ModulationFn:
    """Closed-form symmetric modulation function for the kernel family.

    By default the regulariser is folded in (f(i) picks up step_scale**i)
    so that the self-convolution reproduces taylor_coeffs(spec) directly.
    With absorb_regulariser=False the parameter-free shape is returned and
    the caller passes step_scale() to the walker instead. The inverse
    cosine kernel has no closed form; use symmetric_from_coeffs.
    """
    if spec.kind == INVERSE_COSINE:
        raise UnsupportedClosedFormError(
            "inverse cosine has no closed-form modulation function; "
            "use symmetric_from_coeffs(taylor_coeffs(spec, k_max))"
        )
    beta = spec.step_scale() if absorb_regulariser else 1.0
    if spec.kind == DREG:
        half_d = spec.d / 2.0

        def step(i, cache, _b=beta, _h=half_d):
            if i == 0:
                return 1.0
            return cache[i - 1] * (_h + i - 1) / i * _b

    elif spec.kind == PSTEP:
        half_p = spec.p / 2.0

        def step(i, cache, _b=beta, _h=half_p):
            if i == 0:
                return 1.0
            return cache[i - 1] * (_h - (i - 1)) / i * _b

    else:  # diffusion: 1 / (2^i i!)

        def step(i, cache, _b=beta):
            if i == 0:
                return 1.0
            return cache[i - 1] / (2.0 * i) * _b

    return ModulationFn(step, "closed_form")


def heat_modulation(scale: float) -> ModulationFn:
    """Symmetric modulation function whose pair estimates exp(scale * W):
    f(i) = scale^i / (2^i i!). scale = 0 degenerates to the lazy walker."""

    def step(i, cache, _s=float(scale)):
        if i == 0:
            return 1.0
        return cache[i - 1] * _s / (2.0 * i)

    return ModulationFn(step, "closed_form")


def symmetric_from_coeffs(coeffs) -> ModulationFn:
    """Solve f * f = alpha for the symmetric modulation function.

    The solution is unique up to a global sign; the positive branch
    (f(0) = +1) is returned. Runs the O(k^2) iterative recursion

        f(i+1) = (alpha_{i+1} - sum_{p=0}^{i-1} f(i-p) f(p+1)) / (2 f(0)).
    """
    if not isinstance(coeffs, CoeffSeq):
        coeffs = CoeffSeq(coeffs)
    n = len(coeffs)
    f = np.empty(n)
    f[0] = 1.0
    for i in range(n - 1):
        s = 0.0
        for p in range(i):
            s += f[i - p] * f[p + 1]
        f[i + 1] = (coeffs[i + 1] - s) / (2.0 * f[0])
    return ModulationFn.from_table(f)


def modulation_for(spec: KernelSpec, k_max: int = 200) -> ModulationFn:
    """Symmetric modulation function for a kernel spec, regulariser folded in.

    Dispatches to the closed form when one exists and to the iterative
    solver (tabulated up to k_max) otherwise.
    """
    if spec.kind == INVERSE_COSINE:
        return symmetric_from_coeffs(taylor_coeffs(spec, k_max))
    return closed_form_modulation(spec)


def walk_plan(spec: KernelSpec, k_max: int = 200) -> tuple[ModulationFn, float]:
    """Parameter-free modulation plus the matrix scale to walk with.

    Sampling with `sample_features(g_norm, f, ..., sigma=scale)` estimates
    the same kernel as the regulariser-folded modulation at sigma=1 (the
    scale can live on either side); keeping it on the walked matrix keeps
    the modulation bounded, which is the form learned functions take.
    """
    scale = spec.step_scale()
    if spec.kind == INVERSE_COSINE:
        base = CoeffSeq(_base_coefficients(spec, k_max))
        return symmetric_from_coeffs(base), scale
    return closed_form_modulation(spec, absorb_regulariser=False), scale


def convolve(f1: ModulationFn, f2: ModulationFn, k_max: int) -> np.ndarray:
    """Discrete convolution (sum_p f1(k-p) f2(p)) for k = 0..k_max.

    This is the coefficient sequence of the kernel a (f1, f2) feature pair
    estimates.
    """
    a = f1.values(k_max + 1)
    b = f2.values(k_max + 1)
    return np.convolve(a, b)[: k_max + 1]


def min_batch_size(m: int, p_halt: float, delta: float) -> int:
    """Smallest b with all m walk lengths < b with probability >= 1 - delta.

    Walk lengths are geometric with termination probability p_halt, so
    Pr(all m walks shorter than b) = (1 - (1-p)^b)^m. Evaluates the exact
    closed form, then adjusts +-1 so the returned integer satisfies the
    inequality exactly while b-1 does not.
    """
    if not 0.0 < p_halt < 1.0:
        raise ValueError("p_halt must lie in (0, 1)")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if m < 1:
        raise ValueError("m must be >= 1")

    def satisfied(b: int) -> bool:
        if b < 1:
            return False
        # (1 - (1-p)^b)^m >= 1 - delta, in logs for precision
        return m * math.log1p(-((1.0 - p_halt) ** b)) >= math.log1p(-delta)

    x = -math.expm1(math.log1p(-delta) / m)  # 1 - (1-delta)^(1/m)
    b = max(1, math.ceil(math.log(x) / math.log1p(-p_halt) - 1e-12))
    while not satisfied(b):
        b += 1
    while b > 1 and satisfied(b - 1):
        b -= 1
    return b


def rademacher_bound(coeff_bounds, rho: float, m: int, tail_tol: float = 1e-12) -> float:
    """Empirical Rademacher complexity bound sqrt((1/m) sum_i bounds_i rho^i).

    `coeff_bounds` caps the absolute Taylor coefficients of the learnable
    kernel family. The finite sequence must resolve the series: its last
    term has to fall below tail_tol, otherwise the sum is not trusted and
    a DivergenceError is raised.
    """
    bounds = np.asarray(coeff_bounds, dtype=np.float64)
    if bounds.ndim != 1 or bounds.size == 0:
        raise ValueError("coeff_bounds must be a non-empty 1-D sequence")
    if np.any(bounds < 0):
        raise ValueError("coefficient bounds must be nonnegative")
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    if m < 1:
        raise ValueError("m must be >= 1")
    terms = bounds * np.power(rho, np.arange(bounds.size))
    if bounds.size > 1 and terms[-1] > tail_tol:
        trend = "non-decreasing" if terms[-1] >= terms[-2] else "still decaying"
        raise DivergenceError(
            f"series tail unresolved: last term {terms[-1]:.3e} > {tail_tol:.1e} ({trend}); "
            "supply more coefficient bounds or a smaller rho"
        )
    return math.sqrt(float(np.sum(terms)) / m)
