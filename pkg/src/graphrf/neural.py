"""Trainable modulation functions.

A four-parameter network softplus(w2 * relu(w1 * x + b1) + b2) maps walk
lengths to deposit weights. Because feature matrices are linear in the
per-length loads, expressing them through a LengthFeatureTensor makes any
downstream loss differentiable in the four parameters with a short chain
rule; training runs plain Adam on analytic gradients, resampling the walk
tensors from a fresh derived seed every epoch so the optimizer sees the
sampling noise it has to be robust to.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .graphs import Graph, normalized_adjacency
from .modulation import KernelSpec, ModulationFn, convolve, min_batch_size
from .oracle import normalized_exact_kernel
from .applications import random_mask
from .seeding import derive_seed
from .walker import LengthFeatureTensor, sample_length_features


class TrainingDivergedError(RuntimeError):
    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class NeuralModParams:
    w1: float = -0.5
    b1: float = 1.0
    w2: float = 1.0
    b2: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.w1, self.b1, self.w2, self.b2])

    @classmethod
    def from_array(cls, arr) -> "NeuralModParams":
        w1, b1, w2, b2 = (float(v) for v in arr)
        return cls(w1, b1, w2, b2)

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump({"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}, fh, indent=2)
            fh.write("\n")

    @classmethod
    def from_json(cls, path) -> "NeuralModParams":
        with open(path, "r", encoding="utf-8") as fh:
            d = json.load(fh)
        return cls(d["w1"], d["b1"], d["w2"], d["b2"])


def lazy_flat_init() -> tuple[NeuralModParams, NeuralModParams]:
    """Asymmetric starting point: one flat function, one lazy-leaning walker
    that front-loads its deposits at the start node.

    The lazy side is kept mildly saturated; a harder cutoff (softplus deep
    in its tail) leaves the unit with vanishing gradients, and training
    then settles into a lazy/compensating split instead of drawing the two
    functions together.
    """
    flat = NeuralModParams(w1=0.0, b1=1.0, w2=1.0, b2=0.0)
    lazy = NeuralModParams(w1=-0.5, b1=1.0, w2=1.3, b2=-0.5)
    return flat, lazy


def neural_mod_eval(params: NeuralModParams, x) -> np.ndarray | float:
    """softplus(w2 * relu(w1 * x + b1) + b2); always positive."""
    xs = np.asarray(x, dtype=np.float64)
    z = params.w1 * xs + params.b1
    u = params.w2 * np.maximum(z, 0.0) + params.b2
    out = np.logaddexp(0.0, u)
    return float(out) if np.isscalar(x) or xs.ndim == 0 else out


def neural_modulation(params: NeuralModParams) -> ModulationFn:
    return ModulationFn(lambda i, _cache: neural_mod_eval(params, i), "neural")


def _eval_with_grad(theta: np.ndarray, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """f(x) and df/d(w1, b1, w2, b2) for a batch of walk lengths.

    ReLU subgradient at exactly zero is taken as 0.
    """
    w1, b1, w2, b2 = theta
    z = w1 * xs + b1
    active = z > 0.0
    r = np.where(active, z, 0.0)
    u = w2 * r + b2
    f = np.logaddexp(0.0, u)
    s = expit(u)
    grad = np.empty((xs.size, 4))
    grad[:, 0] = s * w2 * active * xs
    grad[:, 1] = s * w2 * active
    grad[:, 2] = s * r
    grad[:, 3] = s
    return f, grad


def implied_coefficients(params, k_max: int) -> np.ndarray:
    """Taylor coefficients of the kernel a trained modulation pair estimates."""
    if isinstance(params, NeuralModParams):
        p1 = p2 = params
    else:
        p1, p2 = params
    return convolve(neural_modulation(p1), neural_modulation(p2), k_max)


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    gamma: float = 0.975
    epochs: int = 1000
    m: int = 16
    p_halt: float = 0.5
    sigma: float = 1.0
    seed: int = 0
    loss: str = "frobenius"
    target: KernelSpec | None = None
    asymmetric: bool = False
    l_max: int | None = None
    mask_fraction: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if self.loss not in ("frobenius", "angular"):
            raise ValueError("loss must be 'frobenius' or 'angular'")
        if self.loss == "frobenius" and self.target is None:
            raise ValueError("frobenius loss needs a target kernel spec")


def _contract_with_grads(tensor: LengthFeatureTensor, theta: np.ndarray):
    """Feature matrix for the current parameters plus everything the
    backward pass needs (per-length values/gradients, overflow terms)."""
    lengths = np.arange(tensor.l_max + 1, dtype=np.float64)
    fvals, fgrads = _eval_with_grad(theta, lengths)
    phi = np.tensordot(fvals, tensor.per_length, axes=(0, 0))
    over = []
    if tensor.overflow:
        xs = np.array([length for (_, _, length, _) in tensor.overflow], dtype=np.float64)
        ovals, ograds = _eval_with_grad(theta, xs)
        for idx, (i, v, _length, load) in enumerate(tensor.overflow):
            phi[i, v] += ovals[idx] * load
            over.append((i, v, load, ograds[idx]))
    return phi, fgrads, over


def _loss_grad_wrt_phi(tensor, dphi, fgrads, over) -> np.ndarray:
    """Chain d(loss)/d(phi) back to the four parameters."""
    per_length = np.tensordot(tensor.per_length, dphi, axes=([1, 2], [0, 1]))
    g = per_length @ fgrads
    for i, v, load, ograd in over:
        g = g + dphi[i, v] * load * ograd
    return g


def frobenius_loss_and_grad(
    theta1: np.ndarray,
    theta2: np.ndarray,
    t1: LengthFeatureTensor,
    t2: LengthFeatureTensor,
    target: np.ndarray,
):
    """Relative Frobenius error of the estimated Gram matrix, with analytic
    gradients for both parameter sets (frozen tensors)."""
    phi1, fg1, ov1 = _contract_with_grads(t1, theta1)
    phi2, fg2, ov2 = _contract_with_grads(t2, theta2)
    resid = phi1 @ phi2.T - target
    target_norm = float(np.linalg.norm(target))
    rnorm = float(np.linalg.norm(resid))
    loss = rnorm / target_norm
    if rnorm == 0.0:
        return loss, np.zeros(4), np.zeros(4)
    scale = 1.0 / (rnorm * target_norm)
    dphi1 = scale * (resid @ phi2)
    dphi2 = scale * (resid.T @ phi1)
    return loss, _loss_grad_wrt_phi(t1, dphi1, fg1, ov1), _loss_grad_wrt_phi(t2, dphi2, fg2, ov2)


def angular_loss_and_grad(
    theta1: np.ndarray,
    theta2: np.ndarray,
    t1: LengthFeatureTensor,
    t2: LengthFeatureTensor,
    attrs: np.ndarray,
    mask: np.ndarray,
):
    """Mean angular prediction error over masked nodes, with gradients.

    Predictions are phi1 (phi2^T attrs_known); zero-norm predictions score
    1 and propagate no gradient.
    """
    phi1, fg1, ov1 = _contract_with_grads(t1, theta1)
    phi2, fg2, ov2 = _contract_with_grads(t2, theta2)
    known = np.asarray(attrs, dtype=np.float64).copy()
    known[mask] = 0.0
    inner = phi2.T @ known
    pred = phi1 @ inner
    idx = np.flatnonzero(mask)
    gpred = np.zeros_like(pred)
    loss = 0.0
    for i in idx:
        v = attrs[i]
        vn = float(np.linalg.norm(v))
        p = pred[i]
        pn = float(np.linalg.norm(p))
        if pn == 0.0:
            loss += 1.0
            continue
        cos = float(p @ v) / (pn * vn)
        loss += 1.0 - cos
        gpred[i] = -(v / (pn * vn) - cos * p / pn**2) / idx.size
    loss /= idx.size
    dphi1 = gpred @ inner.T
    dphi2 = known @ (gpred.T @ phi1)
    return loss, _loss_grad_wrt_phi(t1, dphi1, fg1, ov1), _loss_grad_wrt_phi(t2, dphi2, fg2, ov2)


class _Adam:
    def __init__(self, shape, lr, beta1, beta2, eps):
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0

    def step(self, theta, grad):
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        mhat = self.m / (1.0 - self.beta1**self.t)
        vhat = self.v / (1.0 - self.beta2**self.t)
        return theta - self.lr * mhat / (np.sqrt(vhat) + self.eps)


def default_tensor_length(g: Graph, cfg: TrainConfig) -> int:
    return min_batch_size(cfg.m * g.n, cfg.p_halt, 1e-4)


def train_modulation(
    g: Graph,
    cfg: TrainConfig,
    attrs: np.ndarray | None = None,
    init: NeuralModParams | tuple[NeuralModParams, NeuralModParams] | None = None,
):
    """Train the modulation parameters against the configured loss.

    Walks run on the normalized adjacency of `g` scaled by cfg.sigma. Each
    epoch resamples the two walk tensors (independent derived seeds), so
    identical configs reproduce identical parameter trajectories. Returns
    (params, trace) with one (epoch, loss, lr) row per epoch; asymmetric
    training returns a parameter pair.
    """
    op = normalized_adjacency(g)
    l_max = cfg.l_max if cfg.l_max is not None else default_tensor_length(g, cfg)

    if cfg.loss == "frobenius":
        target = normalized_exact_kernel(g, cfg.target)
        mask = None
    else:
        if attrs is None:
            raise ValueError("angular loss needs node attributes")
        attrs = np.asarray(attrs, dtype=np.float64)
        if attrs.shape != (g.n, 3):
            raise ValueError(f"attributes must be ({g.n}, 3)")
        mask = random_mask(g.n, cfg.mask_fraction, seed=cfg.seed)
        target = None

    if init is None:
        init = lazy_flat_init() if cfg.asymmetric else NeuralModParams()
    if cfg.asymmetric:
        if isinstance(init, NeuralModParams):
            raise ValueError("asymmetric training needs an (init1, init2) pair")
        theta1 = init[0].as_array()
        theta2 = init[1].as_array()
    else:
        if not isinstance(init, NeuralModParams):
            raise ValueError("symmetric training takes a single init")
        theta1 = init.as_array()
        theta2 = theta1

    opt1 = _Adam(4, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)
    opt2 = _Adam(4, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps) if cfg.asymmetric else None
    lr = cfg.learning_rate
    trace: list[tuple[int, float, float]] = []

    for epoch in range(cfg.epochs):
        t1 = sample_length_features(
            op, cfg.p_halt, cfg.m, sigma=cfg.sigma,
            seed=derive_seed(cfg.seed, 0xE0, epoch, 1), l_max=l_max,
        )
        t2 = sample_length_features(
            op, cfg.p_halt, cfg.m, sigma=cfg.sigma,
            seed=derive_seed(cfg.seed, 0xE0, epoch, 2), l_max=l_max,
        )
        if cfg.loss == "frobenius":
            loss, g1, g2 = frobenius_loss_and_grad(theta1, theta2, t1, t2, target)
        else:
            loss, g1, g2 = angular_loss_and_grad(theta1, theta2, t1, t2, attrs, mask)
        if not math.isfinite(loss):
            raise TrainingDivergedError(f"non-finite loss at epoch {epoch}", trace)
        trace.append((epoch, float(loss), lr))
        opt1.lr = lr
        if cfg.asymmetric:
            opt2.lr = lr
            theta1 = opt1.step(theta1, g1)
            theta2 = opt2.step(theta2, g2)
        else:
            theta1 = opt1.step(theta1, g1 + g2)
            theta2 = theta1
        lr *= cfg.gamma

    if cfg.asymmetric:
        return (NeuralModParams.from_array(theta1), NeuralModParams.from_array(theta2)), trace
    return NeuralModParams.from_array(theta1), trace
