"""Dense MLP substrate: forward/backward passes, losses, Adam and gradient checks.

Everything runs in float64 on row-major batches (one sample per row). Layers
hold a weight matrix of shape ``(out, in)`` and a bias of shape ``(out,)``.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import NumericError, ShapeError

ACTIVATIONS = ("identity", "relu", "sigmoid", "tanh", "softmax-grouped")
FORMAT_VERSION = 1

# log arguments are kept inside [LOG_CLAMP, 1 - LOG_CLAMP]
LOG_CLAMP = 1e-12


def sigmoid(a):
    return 0.5 * (1.0 + np.tanh(0.5 * a))


@dataclass
class DenseLayer:
    weights: np.ndarray
    bias: np.ndarray
    activation: str = "identity"
    # (start, stop) column slices that get a softmax; other columns pass through
    groups: tuple = ()

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64).reshape(-1)
        if self.weights.ndim != 2:
            raise ShapeError(f"weights must be 2-D, got shape {self.weights.shape}")
        if self.bias.shape[0] != self.weights.shape[0]:
            raise ShapeError(
                f"bias length {self.bias.shape[0]} != weight rows {self.weights.shape[0]}"
            )
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        self.groups = tuple((int(a), int(b)) for a, b in self.groups)
        if self.groups and self.activation != "softmax-grouped":
            raise ValueError("groups only apply to the softmax-grouped activation")
        prev = 0
        for a, b in sorted(self.groups):
            if a < prev or b <= a or b > self.n_out:
                raise ValueError(f"invalid softmax group bounds {self.groups}")
            prev = b

    @property
    def n_in(self) -> int:
        return self.weights.shape[1]

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]

    def activate(self, a):
        if self.activation == "identity":
            return a
        if self.activation == "relu":
            return np.maximum(a, 0.0)
        if self.activation == "sigmoid":
            return sigmoid(a)
        if self.activation == "tanh":
            return np.tanh(a)
        h = a.copy()
        for lo, hi in self.groups:
            block = a[:, lo:hi]
            e = np.exp(block - block.max(axis=1, keepdims=True))
            h[:, lo:hi] = e / e.sum(axis=1, keepdims=True)
        return h

    def activation_backward(self, a, h, grad_h):
        if self.activation == "identity":
            return grad_h
        if self.activation == "relu":
            return grad_h * (a > 0)
        if self.activation == "sigmoid":
            return grad_h * h * (1.0 - h)
        if self.activation == "tanh":
            return grad_h * (1.0 - h * h)
        grad_a = grad_h.copy()
        for lo, hi in self.groups:
            s = h[:, lo:hi]
            g = grad_h[:, lo:hi]
            grad_a[:, lo:hi] = s * (g - (g * s).sum(axis=1, keepdims=True))
        return grad_a


@dataclass
class MlpNetwork:
    layers: list = field(default_factory=list)

    def __post_init__(self):
        for i in range(len(self.layers) - 1):
            if self.layers[i].n_out != self.layers[i + 1].n_in:
                raise ShapeError(
                    f"layer {i} outputs {self.layers[i].n_out} but layer {i + 1} "
                    f"expects {self.layers[i + 1].n_in}"
                )

    @property
    def n_in(self) -> int:
        return self.layers[0].n_in

    @property
    def n_out(self) -> int:
        return self.layers[-1].n_out

    def params(self) -> list:
        """Parameter arrays in a fixed order (W0, b0, W1, b1, ...); live references."""
        out = []
        for layer in self.layers:
            out.extend([layer.weights, layer.bias])
        return out

    def copy(self) -> "MlpNetwork":
        return copy.deepcopy(self)

    def __call__(self, x):
        return forward(self, x)


def init_mlp(sizes: Sequence[int], activations: Sequence[str], rng: np.random.Generator,
             output_groups=()) -> MlpNetwork:
    """Glorot-uniform weights, zero biases. ``output_groups`` apply to the last layer."""
    if len(activations) != len(sizes) - 1:
        raise ValueError("need one activation per layer")
    layers = []
    for i, act in enumerate(activations):
        fan_in, fan_out = sizes[i], sizes[i + 1]
        s = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-s, s, size=(fan_out, fan_in))
        groups = output_groups if i == len(activations) - 1 else ()
        layers.append(DenseLayer(w, np.zeros(fan_out), act, groups))
    return MlpNetwork(layers)


def _as_batch(x, n_in):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.ndim != 2 or x.shape[1] != n_in:
        raise ShapeError(f"expected batch with {n_in} columns, got shape {x.shape}")
    return x


def forward(net: MlpNetwork, x, return_cache=False):
    h = _as_batch(x, net.n_in)
    cache = []
    for i, layer in enumerate(net.layers):
        with np.errstate(over="ignore", invalid="ignore"):
            a = h @ layer.weights.T + layer.bias
            out = layer.activate(a)
        if not np.all(np.isfinite(out)):
            raise NumericError(f"non-finite activation in layer {i}", layer=i)
        cache.append((h, a, out))
        h = out
    if return_cache:
        return h, cache
    return h


def backward(net: MlpNetwork, cache, grad_out):
    """Backpropagate ``grad_out`` (dL/d output) through a cached forward pass.

    Returns ``(param_grads, grad_input)`` with ``param_grads`` aligned to
    ``net.params()``.
    """
    grads = [None] * (2 * len(net.layers))
    g = np.asarray(grad_out, dtype=np.float64)
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        h_in, a, h_out = cache[i]
        ga = layer.activation_backward(a, h_out, g)
        grads[2 * i] = ga.T @ h_in
        grads[2 * i + 1] = ga.sum(axis=0)
        g = ga @ layer.weights
    return grads, g


# ---------------------------------------------------------------------------
# losses: each returns (value, dL/d prediction)

def mse_loss(pred, target):
    diff = pred - target
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size


def bce_loss(prob, target, clamp=LOG_CLAMP):
    p = np.clip(prob, clamp, 1.0 - clamp)
    value = -np.mean(target * np.log(p) + (1.0 - target) * np.log(1.0 - p))
    inside = (prob > clamp) & (prob < 1.0 - clamp)
    grad = inside * (p - target) / (p * (1.0 - p)) / prob.size
    return float(value), grad


def grouped_ce_loss(prob, target, groups):
    """Mean over rows and groups of -sum_k t_k log p_k."""
    n = prob.shape[0]
    value = 0.0
    grad = np.zeros_like(prob)
    scale = 1.0 / (n * len(groups))
    for lo, hi in groups:
        p = np.maximum(prob[:, lo:hi], LOG_CLAMP)
        t = target[:, lo:hi]
        value -= float(np.sum(t * np.log(p))) * scale
        grad[:, lo:hi] = -t / p * scale
    return value, grad


def loss_fn(name: str, groups=()) -> Callable:
    if name == "mse":
        return mse_loss
    if name == "bce":
        return bce_loss
    if name == "categorical":
        return lambda p, t: grouped_ce_loss(p, t, groups)
    raise ValueError(f"unknown loss {name!r}")


def loss_and_grads(net: MlpNetwork, x, targets, loss="mse"):
    fn = loss if callable(loss) else loss_fn(loss, net.layers[-1].groups)
    out, cache = forward(net, x, return_cache=True)
    value, g = fn(out, np.asarray(targets, dtype=np.float64))
    grads, _ = backward(net, cache, g)
    return value, grads


# ---------------------------------------------------------------------------
# optimizer

@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_step(params: list, grads: list, state: AdamState):
    """Bias-corrected Adam update, applied to ``params`` in place."""
    if len(params) != len(grads):
        raise ShapeError("params and grads differ in length")
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    state.step += 1
    c1 = 1.0 - state.beta1 ** state.step
    c2 = 1.0 - state.beta2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape or m.shape != p.shape:
            raise ShapeError(f"shape mismatch: param {p.shape}, grad {g.shape}")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


# ---------------------------------------------------------------------------
# finite-difference verification

@dataclass
class GradCheckReport:
    max_rel_dev: float
    tol: float
    n_checked: int

    @property
    def passed(self) -> bool:
        return self.max_rel_dev < self.tol


def check_gradients(objective: Callable[[], float], params: list, analytic: list,
                    eps=1e-5, tol=1e-4) -> GradCheckReport:
    """Compare ``analytic`` against central differences of ``objective``.

    ``objective`` is re-evaluated after each in-place perturbation of
    ``params``; every entry is restored afterwards.
    """
    if eps <= 0 or tol <= 0:
        raise ValueError("eps and tol must be positive")
    worst = 0.0
    n = 0
    for p, g in zip(params, analytic):
        flat = p.reshape(-1)
        gflat = np.asarray(g).reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + eps
            up = objective()
            flat[k] = orig - eps
            down = objective()
            flat[k] = orig
            numeric = (up - down) / (2.0 * eps)
            a = gflat[k]
            denom = max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, abs(a - numeric) / denom)
            n += 1
    return GradCheckReport(worst, tol, n)


def grad_check(net: MlpNetwork, loss, x, targets, eps=1e-5, tol=1e-4) -> GradCheckReport:
    _, analytic = loss_and_grads(net, x, targets, loss)
    return check_gradients(lambda: loss_and_grads(net, x, targets, loss)[0],
                           net.params(), analytic, eps, tol)


# ---------------------------------------------------------------------------
# serialization

def network_to_dict(net: MlpNetwork) -> dict:
    return {
        "version": FORMAT_VERSION,
        "layers": [
            {
                "in": layer.n_in,
                "out": layer.n_out,
                "activation": layer.activation,
                "groups": [list(g) for g in layer.groups],
                "weights": layer.weights.reshape(-1).tolist(),
                "bias": layer.bias.tolist(),
            }
            for layer in net.layers
        ],
    }


def network_from_dict(d: dict) -> MlpNetwork:
    if d.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {d.get('version')!r}")
    layers = []
    for spec in d["layers"]:
        w = np.array(spec["weights"], dtype=np.float64).reshape(spec["out"], spec["in"])
        layers.append(DenseLayer(w, np.array(spec["bias"], dtype=np.float64),
                                 spec["activation"], tuple(map(tuple, spec["groups"]))))
    return MlpNetwork(layers)
