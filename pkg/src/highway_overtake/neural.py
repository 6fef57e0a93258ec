"""Dense networks in numpy with hand-written backpropagation.

Two parameter families share one functional interface:

* ``MlpParams``     - plain stack of affine layers, ReLU between them.
* ``DuelingParams`` - shared trunk feeding a state-value stream and an
  advantage stream, recombined into Q values.

Parameter sets are treated as immutable values: ``sgd_step`` returns a new
set, so a forward cache made against an older set is detectably stale.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import ShapeError, StateError

MAX_AGG = "max"
MEAN_AGG = "mean"


def relu(x):
    return np.maximum(x, 0.0)


@dataclass
class MlpParams:
    weights: list
    biases: list
    out_relu: bool = False  # ReLU on the last layer too (used for the dueling trunk)

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ShapeError("need matching, non-empty weight and bias lists")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ShapeError(f"layer {i}: weight {w.shape} and bias {b.shape} disagree")
            if i and w.shape[0] != self.weights[i - 1].shape[1]:
                raise ShapeError(f"layer {i} input {w.shape[0]} != previous output "
                                 f"{self.weights[i - 1].shape[1]}")

    @property
    def layer_dims(self) -> list:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def arrays(self) -> list:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def with_arrays(self, arrays) -> "MlpParams":
        arrays = list(arrays)
        return MlpParams(arrays[0::2], arrays[1::2], self.out_relu)


@dataclass
class DuelingParams:
    trunk: MlpParams
    value: MlpParams
    advantage: MlpParams
    aggregation: str = MAX_AGG

    def __post_init__(self):
        width = self.trunk.layer_dims[-1]
        if self.value.layer_dims[0] != width or self.advantage.layer_dims[0] != width:
            raise ShapeError("both streams must read the trunk output")
        if self.value.layer_dims[-1] != 1:
            raise ShapeError("value stream must output a scalar")
        if self.aggregation not in (MAX_AGG, MEAN_AGG):
            raise ShapeError(f"unknown aggregation {self.aggregation!r}")

    @property
    def input_dim(self) -> int:
        return self.trunk.layer_dims[0]

    @property
    def output_dim(self) -> int:
        return self.advantage.layer_dims[-1]

    def arrays(self) -> list:
        return self.trunk.arrays() + self.value.arrays() + self.advantage.arrays()

    def with_arrays(self, arrays) -> "DuelingParams":
        arrays = list(arrays)
        nt = len(self.trunk.arrays())
        nv = len(self.value.arrays())
        return DuelingParams(self.trunk.with_arrays(arrays[:nt]),
                             self.value.with_arrays(arrays[nt:nt + nv]),
                             self.advantage.with_arrays(arrays[nt + nv:]),
                             self.aggregation)


Params = Union[MlpParams, DuelingParams]
# gradients are stored in the same container type as the parameters
Gradients = Params


def copy_params(params: Params) -> Params:
    return params.with_arrays([a.copy() for a in params.arrays()])


def zeros_like(params: Params) -> Params:
    return params.with_arrays([np.zeros_like(a) for a in params.arrays()])


def init_mlp(dims: Sequence[int], rng: np.random.Generator, out_relu: bool = False) -> MlpParams:
    """Uniform Glorot initialisation, zero biases."""
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights, biases, out_relu)


def init_dueling(input_dim: int, n_actions: int, rng: np.random.Generator, width: int = 128,
                 aggregation: str = MAX_AGG) -> DuelingParams:
    trunk = init_mlp([input_dim, width], rng, out_relu=True)
    value = init_mlp([width, width, 1], rng)
    advantage = init_mlp([width, width, n_actions], rng)
    return DuelingParams(trunk, value, advantage, aggregation)


@dataclass
class ForwardCache:
    params: Params
    inputs: list = field(default_factory=list)   # layer inputs (activations)
    pre: list = field(default_factory=list)      # pre-activations
    streams: tuple = ()
    max_index: np.ndarray | None = None
    batched: bool = True


def _mlp_forward(params: MlpParams, x: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    cache = ForwardCache(params)
    h = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        cache.inputs.append(h)
        z = h @ w + b
        cache.pre.append(z)
        h = relu(z) if (i < last or params.out_relu) else z
    return h, cache


def _mlp_backward(params: MlpParams, cache: ForwardCache, g: np.ndarray):
    gw = [None] * len(params.weights)
    gb = [None] * len(params.weights)
    last = len(params.weights) - 1
    for i in range(last, -1, -1):
        if i < last or params.out_relu:
            g = g * (cache.pre[i] > 0)
        gw[i] = cache.inputs[i].T @ g
        gb[i] = g.sum(axis=0)
        g = g @ params.weights[i].T
    return MlpParams(gw, gb, params.out_relu), g


def dueling_aggregate(v, a, mode: str = MAX_AGG) -> np.ndarray:
    """Combine state value ``v`` and advantages ``a`` into Q values.

    Works on a single state (scalar ``v``, 1-D ``a``) or a batch
    (``v`` of shape (N, 1) or (N,), ``a`` of shape (N, A)).
    """
    a = np.asarray(a, dtype=float)
    if a.size == 0 or a.shape[-1] == 0:
        raise ShapeError("advantage vector is empty")
    v = np.asarray(v, dtype=float)
    if a.ndim == 2 and v.ndim == 1:
        v = v[:, None]
    ref = a.max(axis=-1, keepdims=True) if mode == MAX_AGG else a.mean(axis=-1, keepdims=True)
    return v + (a - ref)


def argmax_action(q) -> int:
    """First index of the maximum (numpy's argmax already breaks ties low)."""
    q = np.asarray(q)
    if q.size == 0:
        raise ShapeError("empty Q vector")
    return int(np.argmax(q))


def forward(params: Params, x) -> tuple[np.ndarray, ForwardCache]:
    x = np.asarray(x, dtype=float)
    batched = x.ndim == 2
    xb = x if batched else x[None, :]
    in_dim = params.input_dim if isinstance(params, DuelingParams) else params.layer_dims[0]
    if xb.ndim != 2 or xb.shape[1] != in_dim:
        raise ShapeError(f"expected input of width {in_dim}, got shape {x.shape}")

    if isinstance(params, MlpParams):
        out, cache = _mlp_forward(params, xb)
    else:
        h, tc = _mlp_forward(params.trunk, xb)
        v, vc = _mlp_forward(params.value, h)
        a, ac = _mlp_forward(params.advantage, h)
        out = dueling_aggregate(v, a, params.aggregation)
        cache = ForwardCache(params, streams=(tc, vc, ac))
        cache.max_index = np.argmax(a, axis=1)
    cache.batched = batched
    return (out if batched else out[0]), cache


def backward(params: Params, cache: ForwardCache, upstream) -> Gradients:
    """Gradients of a scalar loss given d(loss)/d(output) for the cached forward pass."""
    if cache.params is not params:
        raise StateError("forward cache was produced with a different parameter set")
    g = np.asarray(upstream, dtype=float)
    if not cache.batched:
        g = g[None, :]

    if isinstance(params, MlpParams):
        grads, _ = _mlp_backward(params, cache, g)
        return grads

    tc, vc, ac = cache.streams
    total = g.sum(axis=1, keepdims=True)
    g_adv = g.copy()
    if params.aggregation == MAX_AGG:
        # subgradient of max: all mass through the first maximal advantage
        g_adv[np.arange(len(g)), cache.max_index] -= total[:, 0]
    else:
        g_adv -= total / g.shape[1]
    gv, gh_v = _mlp_backward(params.value, vc, total)
    ga, gh_a = _mlp_backward(params.advantage, ac, g_adv)
    gt, _ = _mlp_backward(params.trunk, tc, gh_v + gh_a)
    return DuelingParams(gt, gv, ga, params.aggregation)


def sgd_step(params: Params, grads: Gradients, lr: float) -> Params:
    if not lr > 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    pa, ga = params.arrays(), grads.arrays()
    if len(pa) != len(ga) or any(p.shape != g.shape for p, g in zip(pa, ga)):
        raise ShapeError("gradient shapes do not match parameters")
    return params.with_arrays([p - lr * g for p, g in zip(pa, ga)])


def global_norm(grads: Gradients) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.arrays())))


def scale(grads: Gradients, factor: float) -> Gradients:
    return grads.with_arrays([g * factor for g in grads.arrays()])


def td_target(r, q_next, gamma: float, terminal) -> np.ndarray | float:
    """Bootstrapped target ``r + gamma * max q_next``; plain ``r`` at terminal steps.

    ``q_next`` must come from the target network. Accepts a single
    transition or a batch (``q_next`` of shape (N, A)).
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    q_next = np.asarray(q_next, dtype=float)
    boot = q_next.max(axis=-1)
    y = np.asarray(r, dtype=float) + gamma * boot * (1.0 - np.asarray(terminal, dtype=float))
    return float(y) if y.ndim == 0 else y


def mse_loss(pred, targets) -> float:
    pred = np.asarray(pred, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if pred.shape != targets.shape or pred.size == 0:
        raise ShapeError(f"pred {pred.shape} and targets {targets.shape} must match and be non-empty")
    return float(np.mean((targets - pred) ** 2))


def mse_grad(pred, targets) -> np.ndarray:
    pred = np.asarray(pred, dtype=float)
    return 2.0 * (pred - np.asarray(targets, dtype=float)) / pred.size


def params_digest(params: Params) -> str:
    h = hashlib.sha256()
    for a in params.arrays():
        h.update(np.ascontiguousarray(a, dtype="<f8").tobytes())
    return h.hexdigest()
