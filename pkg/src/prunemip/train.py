"""Training of masked networks: backprop, Adam, MAPE-based early stopping."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, mape
from .errors import InvalidInputError, TrainingDivergedError
from .network import DenseLayer, MaskedNetwork

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class TrainConfig:
    epochs: int = 300
    learning_rate: float = 1e-3
    batch_size: int = 256
    l2_lambda: float = 5e-7
    early_stop_tolerance: float = 0.001  # MAPE percentage points
    patience: int = 15
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise InvalidInputError("learning_rate must be positive")
        if self.batch_size < 1:
            raise InvalidInputError("batch_size must be >= 1")
        if self.l2_lambda < 0:
            raise InvalidInputError("l2_lambda must be >= 0")
        if self.patience < 1:
            raise InvalidInputError("patience must be >= 1")
        if self.epochs < 0:
            raise InvalidInputError("epochs must be >= 0")


@dataclass
class HistoryRow:
    epoch: int
    train_loss: float
    val_mape: float


def initialize_network(layer_sizes, seed: int) -> MaskedNetwork:
    """Xavier-uniform (fan-average) initialization, biases zero."""
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2 or any(s < 1 for s in sizes):
        raise InvalidInputError("layer_sizes needs at least [input, output], all >= 1")
    rng = np.random.default_rng(seed)
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=(fan_out, fan_in))
        layers.append(DenseLayer(w, np.zeros(fan_out),
                                 np.ones_like(w, dtype=np.int8),
                                 np.ones(fan_out, dtype=np.int8)))
    return MaskedNetwork(layers, sizes[0], sizes[-1])


def _forward_trace(net: MaskedNetwork, x: np.ndarray):
    """Forward pass keeping preactivations and activations for backprop."""
    acts = [x]
    pres = []
    z = x
    for layer in net.layers[:-1]:
        p = z @ layer.weights.T + layer.bias
        pres.append(p)
        z = np.maximum(0.0, p)
        acts.append(z)
    p = z @ net.layers[-1].weights.T + net.layers[-1].bias
    pres.append(p)
    acts.append(p)
    return pres, acts


def loss_and_gradients(net: MaskedNetwork, inputs, targets, l2_lambda: float):
    """Mean-squared-error loss (+ L2 on weights) and its masked gradients.

    Gradients of masked parameters are exactly zero. The ReLU subgradient
    at 0 is taken as 0.
    """
    x = np.asarray(inputs, dtype=float)
    y = np.asarray(targets, dtype=float)
    if x.ndim != 2 or x.shape[1] != net.input_dim:
        raise InvalidInputError("batch inputs must be (n, input_dim)")
    if y.shape != (x.shape[0], net.output_dim):
        raise InvalidInputError("batch targets must be (n, output_dim)")
    if x.shape[0] == 0:
        raise InvalidInputError("batch must be non-empty")

    pres, acts = _forward_trace(net, x)
    pred = acts[-1]
    resid = pred - y
    loss = float(np.mean(resid**2))
    if l2_lambda > 0:
        loss += l2_lambda * sum(float(np.sum(layer.weights**2)) for layer in net.layers)

    grads = []
    delta = 2.0 * resid / resid.size
    for j in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[j]
        dw = delta.T @ acts[j]
        db = delta.sum(axis=0)
        if l2_lambda > 0:
            dw = dw + 2.0 * l2_lambda * layer.weights
        dw *= layer.weight_mask
        db *= layer.bias_mask
        grads.append((dw, db))
        if j > 0:
            delta = (delta @ layer.weights) * (pres[j - 1] > 0)
    grads.reverse()
    return loss, grads


@dataclass
class AdamState:
    """First/second-moment accumulators, one pair per layer."""

    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    t: int = 0

    @classmethod
    def for_network(cls, net: MaskedNetwork) -> "AdamState":
        state = cls()
        for layer in net.layers:
            state.m.append((np.zeros_like(layer.weights), np.zeros_like(layer.bias)))
            state.v.append((np.zeros_like(layer.weights), np.zeros_like(layer.bias)))
        return state


def adam_step(net: MaskedNetwork, grads, state: AdamState, learning_rate: float) -> None:
    """One Adam update in place; masked parameters stay exactly zero."""
    state.t += 1
    bc1 = 1.0 - ADAM_BETA1**state.t
    bc2 = 1.0 - ADAM_BETA2**state.t
    for layer, (dw, db), (mw, mb), (vw, vb) in zip(net.layers, grads, state.m, state.v):
        for param, grad, m, v, mask in (
            (layer.weights, dw, mw, vw, layer.weight_mask),
            (layer.bias, db, mb, vb, layer.bias_mask),
        ):
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * grad
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * grad**2
            step = learning_rate * (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)
            param -= step * mask
            param *= mask


def _snapshot(net: MaskedNetwork):
    return [(layer.weights.copy(), layer.bias.copy()) for layer in net.layers]


def _restore(net: MaskedNetwork, snap) -> None:
    for layer, (w, b) in zip(net.layers, snap):
        layer.weights[...] = w
        layer.bias[...] = b


def train_to_convergence(net: MaskedNetwork, train_ds: Dataset, val_ds: Dataset,
                         cfg: TrainConfig) -> tuple[MaskedNetwork, list[HistoryRow]]:
    """Mini-batch Adam training with MAPE early stopping.

    Stops when validation MAPE has not improved by more than the tolerance
    for ``patience`` consecutive epochs; the best-validation parameters are
    restored before returning. Mutates and returns ``net``.
    """
    if train_ds.input_dim != net.input_dim or train_ds.target_dim != net.output_dim:
        raise InvalidInputError("training data dimensions do not match the network")
    if val_ds.input_dim != net.input_dim or val_ds.target_dim != net.output_dim:
        raise InvalidInputError("validation data dimensions do not match the network")

    history: list[HistoryRow] = []
    if cfg.epochs == 0:
        return net, history

    rng = np.random.default_rng(cfg.seed)
    state = AdamState.for_network(net)
    best_mape = np.inf
    best_params = _snapshot(net)
    reference_mape = np.inf  # last value the tolerance test beat
    stall = 0

    for epoch in range(1, cfg.epochs + 1):
        perm = rng.permutation(train_ds.n)
        batch_losses = []
        for start in range(0, train_ds.n, cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            loss, grads = loss_and_gradients(
                net, train_ds.inputs[idx], train_ds.targets[idx], cfg.l2_lambda)
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"loss became non-finite in epoch {epoch}", last_finite_epoch=epoch - 1)
            adam_step(net, grads, state, cfg.learning_rate)
            batch_losses.append(loss)

        val_mape = mape(val_ds.targets, net.forward(val_ds.inputs))
        if not np.isfinite(val_mape):
            raise TrainingDivergedError(
                f"validation MAPE became non-finite in epoch {epoch}",
                last_finite_epoch=epoch - 1)
        history.append(HistoryRow(epoch, float(np.mean(batch_losses)), val_mape))

        if val_mape < best_mape:
            best_mape = val_mape
            best_params = _snapshot(net)
        if val_mape < reference_mape - cfg.early_stop_tolerance:
            reference_mape = val_mape
            stall = 0
        else:
            stall += 1
            if stall >= cfg.patience:
                break

    _restore(net, best_params)
    return net, history
