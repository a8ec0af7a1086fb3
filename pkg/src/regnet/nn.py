"""Small fixed-topology MLP engine in float64 numpy.

Weights are stored ``out x in`` per layer. Hidden layers use ReLU or ELU,
the output layer is linear and always has width 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class Activation(str, Enum):
    RELU = "relu"
    ELU = "elu"


class LossKind(str, Enum):
    MSE = "mse"
    BCE = "bce"


@dataclass(frozen=True)
class MlpSpec:
    layer_sizes: tuple
    activation: Activation = Activation.ELU

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2:
            raise ValueError(f"an MLP needs at least 2 layer sizes, got {sizes}")
        if any(s < 1 for s in sizes):
            raise ValueError(f"layer sizes must be positive, got {sizes}")
        if sizes[-1] != 1:
            raise ValueError(f"output width must be 1, got {sizes[-1]}")
        object.__setattr__(self, "layer_sizes", sizes)
        object.__setattr__(self, "activation", Activation(self.activation))

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    def with_input(self, d: int) -> "MlpSpec":
        """Same hidden layout, different input width."""
        return MlpSpec((d,) + self.layer_sizes[1:], self.activation)

    def to_dict(self) -> dict:
        return {"layer_sizes": list(self.layer_sizes), "activation": self.activation.value}

    @classmethod
    def from_dict(cls, d: dict) -> "MlpSpec":
        return cls(tuple(d["layer_sizes"]), Activation(d.get("activation", "elu")))


@dataclass
class ParamSet:
    spec: MlpSpec
    weights: list
    biases: list

    def arrays(self) -> list:
        """Flat view, ordered W0, b0, W1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def copy(self) -> "ParamSet":
        return ParamSet(self.spec, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def to_bytes(self) -> bytes:
        return b"".join(a.tobytes() for a in self.arrays())

    @classmethod
    def from_arrays(cls, spec: MlpSpec, arrays) -> "ParamSet":
        arrays = list(arrays)
        return cls(spec, arrays[0::2], arrays[1::2])


def init_mlp(spec: MlpSpec, seed: int, zero_output: bool = False) -> ParamSet:
    """Fan-in scaled uniform init in +-sqrt(6 / fan_in), zero biases.

    With ``zero_output`` the output layer weights are zeroed after drawing,
    so the network starts as the zero function. The random stream, and so
    every hidden layer, is the same either way.
    """
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(spec.layer_sizes[:-1], spec.layer_sizes[1:]):
        bound = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    if zero_output:
        weights[-1][...] = 0.0
    return ParamSet(spec, weights, biases)


def _act(z, activation):
    if activation is Activation.RELU:
        return np.maximum(z, 0.0)
    # max(z, 0) + (exp(min(z, 0)) - 1) is ELU with alpha = 1
    out = np.minimum(z, 0.0)
    np.exp(out, out=out)
    out -= 1.0
    out += np.maximum(z, 0.0)
    return out


def _act_grad(z, a, activation):
    if activation is Activation.RELU:
        return (z > 0).astype(np.float64)
    # 1 for z > 0, exp(z) = a + 1 otherwise
    return np.minimum(a + 1.0, 1.0)


def _check_batch(params: ParamSet, batch) -> np.ndarray:
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != params.spec.input_dim:
        raise ValueError(
            f"batch of shape {batch.shape} does not match input dim {params.spec.input_dim}"
        )
    return batch


def forward_cache(params: ParamSet, batch):
    """Forward pass that keeps pre/post activations for backprop."""
    batch = _check_batch(params, batch)
    act = params.spec.activation
    h = batch
    cache = [(None, h)]
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w.T + b
        h = z if i == last else _act(z, act)
        cache.append((z, h))
    return h[:, 0], cache


def forward(params: ParamSet, batch) -> np.ndarray:
    return forward_cache(params, batch)[0]


def backward(params: ParamSet, cache, dout) -> ParamSet:
    """Backprop ``dL/doutput`` (length n) through a cached forward pass."""
    act = params.spec.activation
    n_layers = len(params.weights)
    gw = [None] * n_layers
    gb = [None] * n_layers
    delta = np.asarray(dout, dtype=np.float64)[:, None]
    for i in range(n_layers - 1, -1, -1):
        h_prev = cache[i][1]
        gw[i] = delta.T @ h_prev
        gb[i] = delta.sum(axis=0)
        if i > 0:
            z_prev, a_prev = cache[i]
            delta = (delta @ params.weights[i]) * _act_grad(z_prev, a_prev, act)
    return ParamSet(params.spec, gw, gb)


def _prep_loss_inputs(pred, target, kind, sample_weights):
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape or pred.ndim != 1:
        raise ValueError(f"pred {pred.shape} and target {target.shape} must be equal-length vectors")
    if np.isnan(pred).any() or np.isnan(target).any():
        raise ValueError("NaN in loss input")
    kind = LossKind(kind)
    if kind is LossKind.BCE and not np.isin(target, (0.0, 1.0)).all():
        raise ValueError("BCE targets must be 0 or 1")
    if sample_weights is None:
        w = np.ones_like(pred)
    else:
        w = np.asarray(sample_weights, dtype=np.float64)
        if w.shape != pred.shape:
            raise ValueError("sample_weights must match pred length")
    return pred, target, kind, w


def loss(pred, target, kind=LossKind.MSE, sample_weights=None) -> float:
    """Weighted mean loss; weights are normalized by their sum.

    BCE takes raw logits and uses ``max(z, 0) - z*y + log1p(exp(-|z|))``.
    """
    pred, target, kind, w = _prep_loss_inputs(pred, target, kind, sample_weights)
    if kind is LossKind.MSE:
        per = (pred - target) ** 2
    else:
        per = np.maximum(pred, 0.0) - pred * target + np.log1p(np.exp(-np.abs(pred)))
    return float(np.sum(w * per) / np.sum(w))


def loss_grad(pred, target, kind=LossKind.MSE, sample_weights=None) -> np.ndarray:
    """Gradient of :func:`loss` w.r.t. ``pred``."""
    pred, target, kind, w = _prep_loss_inputs(pred, target, kind, sample_weights)
    if kind is LossKind.MSE:
        g = 2.0 * (pred - target)
    else:
        g = sigmoid(pred) - target
    return w * g / np.sum(w)


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def grad(params: ParamSet, batch, target, kind=LossKind.MSE, sample_weights=None) -> ParamSet:
    pred, cache = forward_cache(params, batch)
    return backward(params, cache, loss_grad(pred, target, kind, sample_weights))


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def zeros_like(cls, arrays, **hyper) -> "AdamState":
        return cls([np.zeros_like(a) for a in arrays], [np.zeros_like(a) for a in arrays], **hyper)

    def copy(self) -> "AdamState":
        return AdamState(
            [a.copy() for a in self.m], [a.copy() for a in self.v],
            self.t, self.lr, self.beta1, self.beta2, self.epsilon,
        )


def adam_step_(arrays, grads, state: AdamState) -> AdamState:
    """In-place Adam step with bias correction; mutates ``arrays`` and the moments."""
    if len(arrays) != len(grads) or len(arrays) != len(state.m):
        raise ValueError("parameter, gradient and moment lists differ in length")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for p, g, m, v in zip(arrays, grads, state.m, state.v):
        if p.shape != g.shape or p.shape != m.shape:
            raise ValueError(f"shape mismatch: param {p.shape}, grad {g.shape}, moment {m.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.epsilon)
    return state


def adam_step(arrays, grads, state: AdamState):
    """Functional Adam step: returns ``(new_arrays, new_state)``, inputs untouched."""
    new_arrays = [np.array(a, dtype=np.float64) for a in arrays]
    new_state = adam_step_(new_arrays, grads, state.copy())
    return new_arrays, new_state


def adam_update(params: ParamSet, grads: ParamSet, state: AdamState):
    new_arrays, state = adam_step(params.arrays(), grads.arrays(), state)
    return ParamSet.from_arrays(params.spec, new_arrays), state


def finite_diff_check(params: ParamSet, batch, target, kind=LossKind.MSE,
                      sample_weights=None, h=1e-5, analytic: ParamSet | None = None) -> float:
    """Worst relative error between ``grad`` and central differences.

    ``analytic`` overrides the gradient under test (used to confirm the check
    actually notices a wrong gradient).
    """
    if analytic is None:
        analytic = grad(params, batch, target, kind, sample_weights)
    probe = params.copy()
    worst = 0.0
    for arr, g in zip(probe.arrays(), analytic.arrays()):
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + h
            up = loss(forward(probe, batch), target, kind, sample_weights)
            flat[j] = orig - h
            down = loss(forward(probe, batch), target, kind, sample_weights)
            flat[j] = orig
            num = (up - down) / (2 * h)
            denom = max(abs(num), abs(gflat[j]), 1e-8)
            worst = max(worst, abs(num - gflat[j]) / denom)
    return worst
