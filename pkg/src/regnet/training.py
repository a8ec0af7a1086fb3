"""Phase-structured training for additive networks.

Step-wise mode trains level 1, freezes it, trains level 2 on top of it and so
on, finishing with the residual network. All-at-once mode updates every unit
in a single phase. Each phase has its own early-stopping window and restores
its best validation snapshot when it ends.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np

from .model import BIAS, RESIDUAL, RegressionNetwork, Task, architecture_spec, build_model, predict, unit_seed
from .nn import AdamState, LossKind, ParamSet, adam_step_, backward, forward_cache, loss, loss_grad

log = logging.getLogger(__name__)


class TrainMode(str, Enum):
    STEPWISE = "stepwise"
    ALL_AT_ONCE = "all-at-once"


@dataclass
class TrainConfig:
    max_epochs: int = 512
    patience: int = 32
    min_delta: float = 0.005
    batch_size: int = 256
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    mode: TrainMode = TrainMode.STEPWISE
    class_balancing: bool = True
    seed: int = 0

    def __post_init__(self):
        self.mode = TrainMode(self.mode)
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.min_delta < 0:
            raise ValueError("min_delta must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    def adam_hyper(self) -> dict:
        return {"lr": self.lr, "beta1": self.beta1, "beta2": self.beta2, "epsilon": self.epsilon}

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mode"] = self.mode.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


CONTINUE = "continue"
STOP = "stop"


class EarlyStopping:
    """Patience counter with an absolute improvement threshold.

    An epoch improves only when ``val_loss < best_val_loss - min_delta``;
    improvements take the parameter snapshot and reset the counter. Gains
    smaller than ``min_delta`` neither move the best loss nor the snapshot,
    so restoring gives the last epoch that cleared the tolerance.
    """

    def __init__(self, patience=32, min_delta=0.005):
        self.patience = patience
        self.min_delta = min_delta
        self.best_val_loss = np.inf
        self.best_epoch = 0
        self.epochs_since_improvement = 0
        self.best_params = None
        self.failed = False

    def start(self, val_loss, params=None):
        """Use the pre-training state as epoch 0: the baseline to beat and the fallback snapshot."""
        if np.isfinite(val_loss):
            self.best_val_loss = val_loss
            self.best_epoch = 0
            self.best_params = params() if callable(params) else params

    def update(self, epoch, val_loss, params=None):
        """Record one epoch; ``params`` may be a zero-arg callable returning a snapshot."""
        if not np.isfinite(val_loss):
            self.failed = True
            return STOP
        if val_loss < self.best_val_loss - self.min_delta:
            self.best_val_loss = val_loss
            self.best_epoch = epoch
            self.best_params = params() if callable(params) else params
            self.epochs_since_improvement = 0
        else:
            self.epochs_since_improvement += 1
        if self.epochs_since_improvement >= self.patience:
            return STOP
        return CONTINUE


def class_weights(targets):
    """Balanced weights ``n / (2 * n_c)`` for classes 0 and 1."""
    t = np.asarray(targets)
    n1 = int(np.sum(t == 1))
    n0 = int(np.sum(t == 0))
    if n0 + n1 != t.size:
        raise ValueError("targets must be 0 or 1")
    if n0 == 0 or n1 == 0:
        raise ValueError("class balancing needs both classes present")
    n = t.size
    return n / (2.0 * n0), n / (2.0 * n1)


@dataclass
class PhaseHistory:
    name: str
    units: list
    epochs: list = field(default_factory=list)  # (epoch, train_loss, val_loss)
    initial_val_loss: float = float("nan")
    best_epoch: int = 0
    best_val_loss: float = float("inf")
    stop_epoch: int = 0
    stopped_early: bool = False
    failed: bool = False

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "units": [u if isinstance(u, str) else list(u) for u in self.units],
            "epochs": [list(e) for e in self.epochs],
            "initial_val_loss": self.initial_val_loss,
            "best_epoch": self.best_epoch,
            "best_val_loss": self.best_val_loss,
            "stop_epoch": self.stop_epoch,
            "stopped_early": self.stopped_early,
            "failed": self.failed,
        }


@dataclass
class TrainHistory:
    phases: list = field(default_factory=list)

    @property
    def final_val_loss(self) -> float:
        return self.phases[-1].best_val_loss if self.phases else float("nan")

    def summary(self) -> dict:
        return {
            "final_val_loss": self.final_val_loss,
            "phases": [
                {"name": p.name, "best_epoch": p.best_epoch, "best_val_loss": p.best_val_loss,
                 "stop_epoch": p.stop_epoch, "failed": p.failed}
                for p in self.phases
            ],
        }

    def to_dict(self) -> dict:
        return {"final_val_loss": self.final_val_loss, "phases": [p.to_dict() for p in self.phases]}


def loss_kind(task) -> LossKind:
    return LossKind.BCE if Task(task) is Task.BINARY else LossKind.MSE


def _sample_weights(model, y, config):
    if Task(model.task) is Task.BINARY and config.class_balancing:
        w0, w1 = class_weights(y)
        return np.where(y == 1, w1, w0)
    return None


def _unit_level(key):
    if key == RESIDUAL:
        return np.inf
    if key == BIAS:
        return 1
    return len(key)


def _phase_name(levels):
    return "+".join(str(l) if l != RESIDUAL else RESIDUAL for l in levels)


def _unit_arrays(model, key):
    unit = model.get_unit(key)
    return [unit] if key == BIAS else unit.arrays()


def _set_unit_arrays(model, key, arrays):
    if key == BIAS:
        model.set_unit(key, arrays[0])
    else:
        unit = model.get_unit(key)
        model.set_unit(key, type(unit).from_arrays(unit.spec, arrays))


def train_level(model: RegressionNetwork, levels, train, val, config: TrainConfig,
                active=None, name=None):
    """Train the units at ``levels`` while every other unit stays frozen.

    ``levels`` holds subset sizes and/or ``"residual"`` (``"bias"`` can be
    included explicitly). Frozen units still add to the forward pass, so the
    trained units fit what the frozen ones leave unexplained. ``active`` limits
    the forward pass to units whose level is at most the given value; by
    default it is the highest level being trained, so untrained higher levels
    do not leak into lower phases.

    ``train`` and ``val`` are ``(X, y)`` pairs of encoded matrices. The model
    is updated in place and also returned with the phase history.
    """
    levels = list(levels)
    if not levels:
        raise ValueError("no levels to train")
    wanted = {l if isinstance(l, str) else int(l) for l in levels}
    trainable = [k for k in model.unit_keys()
                 if (k == RESIDUAL and RESIDUAL in wanted)
                 or (k == BIAS and (BIAS in wanted or 1 in wanted))
                 or (isinstance(k, tuple) and len(k) in wanted)]
    if not trainable:
        raise ValueError(f"model has no units at levels {sorted(map(str, wanted))}")
    if active is None:
        active = max(_unit_level(k) for k in trainable)
    frozen = [k for k in model.unit_keys() if k not in trainable and _unit_level(k) <= active]
    phase = PhaseHistory(name or _phase_name(levels), trainable)

    X, y = (np.asarray(a, dtype=np.float64) for a in train)
    Xv, yv = (np.asarray(a, dtype=np.float64) for a in val)
    if X.shape[1] != model.n_columns or Xv.shape[1] != model.n_columns:
        raise ValueError(f"data must have {model.n_columns} encoded columns")
    kind = loss_kind(model.task)
    weights = _sample_weights(model, y, config)
    order = [k for k in model.unit_keys() if k in trainable or k in frozen]

    # frozen units are constant for the whole phase
    offset = predict(model, X, frozen) if frozen else None
    offset_v = predict(model, Xv, frozen) if frozen else None
    inputs = {k: X[:, model.columns(k)] for k in trainable if k != BIAS}
    inputs_v = {k: Xv[:, model.columns(k)] for k in trainable if k != BIAS}
    params = {k: [a.copy() for a in _unit_arrays(model, k)] for k in trainable}
    states = {k: AdamState.zeros_like(params[k], **config.adam_hyper()) for k in trainable}

    def _sum_outputs(base, outs):
        total = base
        for k in order:
            if k in outs:
                total = outs[k] if total is None else total + outs[k]
        return total

    def _val_loss():
        outs = {}
        for k in trainable:
            if k == BIAS:
                outs[k] = np.full(Xv.shape[0], params[k][0][0])
            else:
                unit = model.get_unit(k)
                outs[k] = _forward_arrays(unit.spec, params[k], inputs_v[k])
        return loss(_sum_outputs(offset_v, outs), yv, kind)

    rng = np.random.default_rng(unit_seed(config.seed, "phase:" + phase.name))
    stopper = EarlyStopping(config.patience, config.min_delta)

    def snapshot():
        return {k: [a.copy() for a in v] for k, v in params.items()}

    phase.initial_val_loss = float(_val_loss())
    stopper.start(phase.initial_val_loss, snapshot)
    n = X.shape[0]
    bs = min(config.batch_size, n)
    specs = {k: model.get_unit(k).spec for k in trainable if k != BIAS}
    for epoch in range(1, config.max_epochs + 1):
        perm = rng.permutation(n)
        tot_loss = 0.0
        tot_w = 0.0
        for start in range(0, n, bs):
            idx = perm[start:start + bs]
            outs, caches = {}, {}
            for k in trainable:
                if k == BIAS:
                    outs[k] = np.full(idx.size, params[k][0][0])
                else:
                    outs[k], caches[k] = _forward_cache_arrays(specs[k], params[k], inputs[k][idx])
            pred = _sum_outputs(None if offset is None else offset[idx], outs)
            bw = None if weights is None else weights[idx]
            dout = loss_grad(pred, y[idx], kind, bw)
            wsum = float(idx.size if bw is None else bw.sum())
            tot_loss += loss(pred, y[idx], kind, bw) * wsum
            tot_w += wsum
            for k in trainable:
                if k == BIAS:
                    grads = [np.array([dout.sum()])]
                else:
                    grads = _backward_arrays(specs[k], params[k], caches[k], dout)
                adam_step_(params[k], grads, states[k])
        val_loss = _val_loss()
        phase.epochs.append((epoch, tot_loss / tot_w, val_loss))
        decision = stopper.update(epoch, val_loss, snapshot)
        if decision == STOP:
            phase.stopped_early = True
            break
    phase.stop_epoch = len(phase.epochs)
    phase.failed = stopper.failed
    phase.best_epoch = stopper.best_epoch
    phase.best_val_loss = float(stopper.best_val_loss)
    best = stopper.best_params if stopper.best_params is not None else params
    for k in trainable:
        _set_unit_arrays(model, k, best[k])
    log.debug("phase %s stopped at epoch %d, best %.6g at %d", phase.name,
              phase.stop_epoch, phase.best_val_loss, phase.best_epoch)
    return model, phase


def _as_params(spec, arrays):
    return ParamSet.from_arrays(spec, arrays)


def _forward_arrays(spec, arrays, X):
    return _forward_cache_arrays(spec, arrays, X)[0]


def _forward_cache_arrays(spec, arrays, X):
    return forward_cache(_as_params(spec, arrays), X)


def _backward_arrays(spec, arrays, cache, dout):
    return backward(_as_params(spec, arrays), cache, dout).arrays()


def train_stepwise(model: RegressionNetwork, train, val, config: TrainConfig):
    """Levels 1..k in increasing order, then the residual, one phase each."""
    history = TrainHistory()
    for level in model.levels():
        model, phase = train_level(model, [level], train, val, config)
        history.phases.append(phase)
    if model.residual is not None:
        model, phase = train_level(model, [RESIDUAL], train, val, config)
        history.phases.append(phase)
    if model.bias is not None and not model.subnets:
        model, phase = train_level(model, [BIAS], train, val, config, active=np.inf)
        history.phases.append(phase)
    return model, history


def train_all_at_once(model: RegressionNetwork, train, val, config: TrainConfig):
    levels = list(model.levels())
    if model.residual is not None:
        levels.append(RESIDUAL)
    if model.bias is not None:
        levels.append(BIAS)
    model, phase = train_level(model, levels, train, val, config, active=np.inf, name="all")
    return model, TrainHistory([phase])


def train(model: RegressionNetwork, train_data, val_data, config: TrainConfig):
    if config.mode is TrainMode.ALL_AT_ONCE:
        return train_all_at_once(model, train_data, val_data, config)
    return train_stepwise(model, train_data, val_data, config)


def train_baseline_regression(schema, train_data, val_data, task=Task.REGRESSION,
                              config: TrainConfig | None = None, seed=None):
    """Linear (or logistic) regression as a level-1 model of affine units.

    Every feature group gets a single ``[width, 1]`` unit, so the sum is an
    affine function of the encoded inputs; it is trained by the same loop.
    """
    config = config or TrainConfig()
    model = build_model(schema, architecture_spec("regression"), task,
                        config.seed if seed is None else seed)
    return train_stepwise(model, train_data, val_data, config)
