"""Minimal dense-network engine: layers, losses, Adam, training loop.

Parameters live in one flat float64 vector per model so the optimizer and
finite-difference checks treat every architecture uniformly. Nets are
immutable; training returns new parameter vectors.

Loss conventions, with n the batch size and w_i = positive_weight for
positive rows (weighted-bce only):
    weighted-bce    mean_i w_i * -(y_i ln p_i + (1-y_i) ln(1-p_i))
    absolute-error  mean_i |y_hat_i - y_i|, subgradient 0 at equality
    cross-entropy   mean_i -ln p_i[class_i]
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

ACTIVATIONS = ("relu", "sigmoid", "softmax", "identity")
LOSSES = ("weighted-bce", "absolute-error", "cross-entropy")

_LOG_EPS = 1e-12


class ShapeError(ValueError):
    pass


class NumericError(ArithmeticError):
    pass


class LabelError(ValueError):
    pass


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: str

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ShapeError(f"unknown activation {self.activation!r}")
        if self.in_dim < 1 or self.out_dim < 1:
            raise ShapeError("layer dims must be positive")

    @property
    def n_params(self) -> int:
        return self.in_dim * self.out_dim + self.out_dim


def _validate_stack(specs: Sequence[LayerSpec]) -> None:
    if not specs:
        raise ShapeError("a net needs at least one layer")
    for a, b in zip(specs, specs[1:]):
        if a.out_dim != b.in_dim:
            raise ShapeError(f"layer dims {a.out_dim} -> {b.in_dim} incompatible")


def stack_n_params(specs: Sequence[LayerSpec]) -> int:
    return sum(s.n_params for s in specs)


def _layer_params(specs, theta):
    """Yield (W view, b view) per layer from the flat vector."""
    offset = 0
    for s in specs:
        w_end = offset + s.in_dim * s.out_dim
        yield theta[offset:w_end].reshape(s.in_dim, s.out_dim), theta[w_end:w_end + s.out_dim]
        offset = w_end + s.out_dim


def glorot_stack(specs: Sequence[LayerSpec], rng: np.random.Generator) -> np.ndarray:
    theta = np.empty(stack_n_params(specs), dtype=np.float64)
    offset = 0
    for s in specs:
        limit = np.sqrt(6.0 / (s.in_dim + s.out_dim))
        n_w = s.in_dim * s.out_dim
        theta[offset:offset + n_w] = rng.uniform(-limit, limit, size=n_w)
        offset += n_w
        theta[offset:offset + s.out_dim] = 0.0
        offset += s.out_dim
    return theta


def _activate(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "sigmoid":
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out
    if name == "softmax":
        shifted = z - z.max(axis=1, keepdims=True)
        ez = np.exp(shifted)
        return ez / ez.sum(axis=1, keepdims=True)
    return z


def _activation_backward(name: str, z: np.ndarray, a: np.ndarray, da: np.ndarray) -> np.ndarray:
    if name == "relu":
        return da * (z > 0)
    if name == "sigmoid":
        return da * a * (1.0 - a)
    if name == "softmax":
        return a * (da - (da * a).sum(axis=1, keepdims=True))
    return da


def _stack_forward(specs, theta, X, keep_cache):
    cache = [] if keep_cache else None
    a = X
    for s, (W, b) in zip(specs, _layer_params(specs, theta)):
        z = a @ W + b
        out = _activate(s.activation, z)
        if keep_cache:
            cache.append((a, z, out))
        a = out
    return a, cache


def _stack_backward(specs, theta, cache, d_last, last_is_dz, grad, grad_base):
    """Backprop through a layer stack; writes dW/db into `grad` and returns dX.

    `theta` is the stack's own flat vector; gradients land at `grad_base`.
    """
    local = []
    offset = 0
    for s in specs:
        local.append(offset)
        offset += s.n_params
    d = d_last
    for i in range(len(specs) - 1, -1, -1):
        s = specs[i]
        x_in, z, a = cache[i]
        if i == len(specs) - 1 and last_is_dz:
            dz = d
        else:
            dz = _activation_backward(s.activation, z, a, d)
        o = local[i]
        n_w = s.in_dim * s.out_dim
        grad[grad_base + o:grad_base + o + n_w] = (x_in.T @ dz).ravel()
        grad[grad_base + o + n_w:grad_base + o + n_w + s.out_dim] = dz.sum(axis=0)
        W = theta[o:o + n_w].reshape(s.in_dim, s.out_dim)
        d = dz @ W.T
    return d


class DenseNet:
    """Fully connected stack over one flat parameter vector."""

    def __init__(self, specs: Sequence[LayerSpec], theta: np.ndarray, seed: int = 0):
        _validate_stack(specs)
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (stack_n_params(specs),):
            raise ShapeError(
                f"theta has {theta.size} values, net needs {stack_n_params(specs)}"
            )
        if not np.isfinite(theta).all():
            raise NumericError("parameters must be finite")
        self.specs = tuple(specs)
        self.theta = theta.copy()
        self.theta.setflags(write=False)
        self.seed = seed

    @classmethod
    def init(cls, dims: Sequence[int], activations: Sequence[str], seed: int) -> "DenseNet":
        if len(activations) != len(dims) - 1:
            raise ShapeError("need one activation per layer")
        specs = [LayerSpec(dims[i], dims[i + 1], activations[i]) for i in range(len(dims) - 1)]
        rng = np.random.default_rng(seed)
        return cls(specs, glorot_stack(specs, rng), seed=seed)

    @property
    def input_dim(self) -> int:
        return self.specs[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.specs[-1].out_dim

    @property
    def final_activation(self) -> str:
        return self.specs[-1].activation

    def n_params(self) -> int:
        return stack_n_params(self.specs)

    def with_params(self, theta: np.ndarray) -> "DenseNet":
        return DenseNet(self.specs, theta, seed=self.seed)

    def param_vector(self) -> np.ndarray:
        return self.theta.copy()


class TwoTowerNet:
    """Two towers merged by elementwise product, then a head stack."""

    def __init__(self, tower_a: DenseNet, tower_b: DenseNet, head: DenseNet):
        if tower_a.output_dim != tower_b.output_dim:
            raise ShapeError("tower output widths must match for the multiply merge")
        if head.input_dim != tower_a.output_dim:
            raise ShapeError("head input dim must equal the tower width")
        self.tower_a = tower_a
        self.tower_b = tower_b
        self.head = head

    @property
    def input_dims(self) -> tuple[int, int]:
        return (self.tower_a.input_dim, self.tower_b.input_dim)

    @property
    def output_dim(self) -> int:
        return self.head.output_dim

    @property
    def final_activation(self) -> str:
        return self.head.final_activation

    def n_params(self) -> int:
        return self.tower_a.n_params() + self.tower_b.n_params() + self.head.n_params()

    def param_vector(self) -> np.ndarray:
        return np.concatenate(
            [self.tower_a.theta, self.tower_b.theta, self.head.theta]
        )

    def with_params(self, theta: np.ndarray) -> "TwoTowerNet":
        na, nb = self.tower_a.n_params(), self.tower_b.n_params()
        return TwoTowerNet(
            self.tower_a.with_params(theta[:na]),
            self.tower_b.with_params(theta[na:na + nb]),
            self.head.with_params(theta[na + nb:]),
        )


Network = DenseNet | TwoTowerNet


def merge_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Elementwise product of equal-length vectors (the tower merge)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"merge shapes differ: {a.shape} vs {b.shape}")
    return a * b


def _as_batch(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    return X


def _forward_cached(net: Network, X, keep_cache: bool):
    if isinstance(net, TwoTowerNet):
        if not isinstance(X, (tuple, list)) or len(X) != 2:
            raise ShapeError("two-tower nets take an (X_a, X_b) input pair")
        xa, xb = _as_batch(X[0]), _as_batch(X[1])
        if xa.shape[1] != net.tower_a.input_dim or xb.shape[1] != net.tower_b.input_dim:
            raise ShapeError("two-tower input widths do not match the towers")
        out_a, cache_a = _stack_forward(net.tower_a.specs, net.tower_a.theta, xa, keep_cache)
        out_b, cache_b = _stack_forward(net.tower_b.specs, net.tower_b.theta, xb, keep_cache)
        merged = out_a * out_b
        out, cache_h = _stack_forward(net.head.specs, net.head.theta, merged, keep_cache)
        return out, (cache_a, cache_b, cache_h, out_a, out_b)
    X = _as_batch(X)
    if X.shape[1] != net.input_dim:
        raise ShapeError(f"input width {X.shape[1]} != net input dim {net.input_dim}")
    return _stack_forward(net.specs, net.theta, X, keep_cache)


def forward(net: Network, X) -> np.ndarray:
    """Deterministic batch forward pass; raises on non-finite outputs."""
    out, _ = _forward_cached(net, X, keep_cache=False)
    if not np.isfinite(out).all():
        raise NumericError("non-finite network output")
    return out


def _loss_and_dout(out: np.ndarray, y: np.ndarray, loss: str, positive_weight: float,
                   final_activation: str):
    """Scalar loss plus (d_last, last_is_dz) for backprop."""
    n = out.shape[0]
    if loss == "weighted-bce":
        if final_activation != "sigmoid":
            raise LabelError("weighted-bce requires a sigmoid output layer")
        p = out[:, 0]
        y = np.asarray(y, dtype=np.float64).reshape(-1)
        if y.shape[0] != n:
            raise ShapeError("label count does not match batch")
        if ((y != 0.0) & (y != 1.0)).any():
            raise LabelError("weighted-bce labels must be 0 or 1")
        w = np.where(y == 1.0, positive_weight, 1.0)
        pc = np.clip(p, _LOG_EPS, 1.0 - _LOG_EPS)
        value = float(np.mean(-w * (y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc))))
        dz = ((p - y) * w / n)[:, None]
        return value, dz, True
    if loss == "absolute-error":
        p = out[:, 0]
        y = np.asarray(y, dtype=np.float64).reshape(-1)
        if y.shape[0] != n:
            raise ShapeError("label count does not match batch")
        if (y < 0).any():
            raise LabelError("absolute-error labels must be non-negative")
        value = float(np.mean(np.abs(p - y)))
        da = (np.sign(p - y) / n)[:, None]
        return value, da, False
    if loss == "cross-entropy":
        if final_activation != "softmax":
            raise LabelError("cross-entropy requires a softmax output layer")
        y = np.asarray(y)
        if y.shape[0] != n:
            raise ShapeError("label count does not match batch")
        yi = y.astype(np.int64)
        if (yi < 0).any() or (yi >= out.shape[1]).any():
            raise LabelError("class index out of range")
        pc = np.clip(out[np.arange(n), yi], _LOG_EPS, None)
        value = float(np.mean(-np.log(pc)))
        onehot = np.zeros_like(out)
        onehot[np.arange(n), yi] = 1.0
        dz = (out - onehot) / n
        return value, dz, True
    raise LabelError(f"unknown loss {loss!r}")


def loss_value(net: Network, X, y, loss: str, positive_weight: float = 1.0) -> float:
    out, _ = _forward_cached(net, X, keep_cache=False)
    value, _, _ = _loss_and_dout(out, y, loss, positive_weight, net.final_activation)
    return value


def loss_and_grad(net: Network, X, y, loss: str, positive_weight: float = 1.0):
    """Scalar loss and the gradient over the model's flat parameter vector.

    The gradient covers all parameters, including both towers through the
    multiply merge.
    """
    out, cache = _forward_cached(net, X, keep_cache=True)
    if not np.isfinite(out).all():
        raise NumericError("non-finite network output")
    value, d_last, last_is_dz = _loss_and_dout(out, y, loss, positive_weight, net.final_activation)
    grad = np.zeros(net.n_params(), dtype=np.float64)
    if isinstance(net, TwoTowerNet):
        cache_a, cache_b, cache_h, out_a, out_b = cache
        na, nb = net.tower_a.n_params(), net.tower_b.n_params()
        d_merge = _stack_backward(
            net.head.specs, net.head.theta, cache_h, d_last, last_is_dz, grad, na + nb
        )
        _stack_backward(net.tower_a.specs, net.tower_a.theta, cache_a,
                        d_merge * out_b, False, grad, 0)
        _stack_backward(net.tower_b.specs, net.tower_b.theta, cache_b,
                        d_merge * out_a, False, grad, na)
    else:
        _stack_backward(net.specs, net.theta, cache, d_last, last_is_dz, grad, 0)
    return value, grad


def numerical_gradient(net: Network, X, y, loss: str, positive_weight: float = 1.0,
                       h: float = 1e-5) -> np.ndarray:
    """Central finite differences of the loss over the flat parameters."""
    theta = net.param_vector()
    grad = np.zeros_like(theta)
    for i in range(theta.size):
        up, down = theta.copy(), theta.copy()
        up[i] += h
        down[i] -= h
        grad[i] = (
            loss_value(net.with_params(up), X, y, loss, positive_weight)
            - loss_value(net.with_params(down), X, y, loss, positive_weight)
        ) / (2.0 * h)
    return grad


@dataclass(frozen=True)
class AdamState:
    step: int
    m: np.ndarray
    v: np.ndarray
    lr: float = 3e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init(cls, n_params: int, lr: float = 1e-3, beta1: float = 0.9,
             beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(0, np.zeros(n_params), np.zeros(n_params), lr, beta1, beta2, eps)


def adam_step(state: AdamState, params: np.ndarray, grads: np.ndarray):
    """One bias-corrected Adam update; returns (new_params, new_state)."""
    if grads.shape != params.shape or state.m.shape != params.shape:
        raise ShapeError("optimizer state and gradient shapes must match params")
    if not np.isfinite(grads).all():
        raise NumericError("non-finite gradient")
    t = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    new_params = params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new_params, replace(state, step=t, m=m, v=v)


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 64
    max_epochs: int = 50
    lr: float = 3e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    positive_weight: float = 20.0
    patience: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float


def _take(X, idx):
    if isinstance(X, (tuple, list)):
        return tuple(x[idx] for x in X)
    return X[idx]


def _n_rows(X) -> int:
    if isinstance(X, (tuple, list)):
        return X[0].shape[0]
    return X.shape[0]


def train(net: Network, train_data, val_data, config: TrainConfig, loss: str):
    """Mini-batch Adam with per-epoch seeded shuffling and early stopping.

    Stops when validation loss has not improved for `patience` epochs, and
    returns the parameters of the best validation epoch plus the trace.
    Fully deterministic for a given config seed.
    """
    X_train, y_train = train_data
    X_val, y_val = val_data
    n = _n_rows(X_train)
    if n == 0:
        raise ValueError("empty training set")
    rng = np.random.default_rng(config.seed)
    theta = net.param_vector()
    state = AdamState.init(theta.size, config.lr, config.beta1, config.beta2, config.eps)

    best_theta = theta.copy()
    best_val = np.inf
    bad_epochs = 0
    trace: list[EpochRecord] = []
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(n)
        running = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            value, grad = loss_and_grad(
                net.with_params(theta), _take(X_train, idx), y_train[idx],
                loss, config.positive_weight,
            )
            running += value * idx.size
            theta, state = adam_step(state, theta, grad)
        val_loss = loss_value(net.with_params(theta), X_val, y_val, loss, config.positive_weight)
        trace.append(EpochRecord(epoch, running / n, val_loss))
        if val_loss < best_val:
            best_val = val_loss
            best_theta = theta.copy()
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= config.patience:
                break
    return net.with_params(best_theta), trace
