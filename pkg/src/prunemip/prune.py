"""Iterative magnitude pruning: unstructured weights, structured nodes, cleanup.

Weight pruning masks the globally smallest-magnitude unmasked weights.
Node pruning removes, per hidden layer, the nodes with the smallest sum of
absolute incoming weights, masking their incoming weights, bias, and
outgoing weights. Dead-neuron cleaning folds constant neurons into
downstream biases without changing the network function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset, mape
from .errors import InvalidInputError, LayerCollapseError, NothingToPruneError
from .network import MaskedNetwork
from .train import TrainConfig, train_to_convergence


@dataclass
class PruneConfig:
    method: str  # "weight" or "node"
    final_sparsity: float
    relative_rate: float = 0.25
    fine_tune: bool = False
    fine_tune_cfg: TrainConfig | None = None
    clean_per_iteration: bool = False

    def __post_init__(self):
        if self.method not in ("weight", "node"):
            raise InvalidInputError("method must be 'weight' or 'node'")
        if not 0.0 < self.final_sparsity < 1.0:
            raise InvalidInputError("final_sparsity must lie strictly in (0, 1)")
        if not 0.0 < self.relative_rate < 1.0:
            raise InvalidInputError("relative_rate must lie strictly in (0, 1)")


@dataclass
class PruneIterationMetrics:
    iteration: int
    sparsity: float
    val_mape: float
    dead_neurons_cleaned: int


def num_iterations(final_sparsity: float, relative_rate: float) -> int:
    """Iteration count that keeps the per-step rate closest to the requested one."""
    if not 0.0 < final_sparsity < 1.0 or not 0.0 < relative_rate < 1.0:
        raise InvalidInputError("sparsity and rate must lie strictly in (0, 1)")
    n = round(math.log(1.0 - final_sparsity) / math.log(1.0 - relative_rate))
    return max(int(n), 1)


def effective_rate(final_sparsity: float, iterations: int) -> float:
    """Per-iteration rate that lands exactly on the final sparsity."""
    return 1.0 - (1.0 - final_sparsity) ** (1.0 / iterations)


def prune_weights_step(net: MaskedNetwork, rate: float) -> MaskedNetwork:
    """Mask the ceil(rate * unmasked) smallest-|w| weights, globally ranked.

    Ties at the cut are broken by (layer, row, col) lexicographic order.
    Biases are never touched.
    """
    if not 0.0 < rate < 1.0:
        raise InvalidInputError("rate must lie strictly in (0, 1)")
    net = net.copy()
    entries = []
    for j, layer in enumerate(net.layers):
        rows, cols = np.nonzero(layer.weight_mask)
        mags = np.abs(layer.weights[rows, cols])
        entries.append((np.full(len(rows), j), rows, cols, mags))
    layer_ix = np.concatenate([e[0] for e in entries])
    rows = np.concatenate([e[1] for e in entries])
    cols = np.concatenate([e[2] for e in entries])
    mags = np.concatenate([e[3] for e in entries])
    n_unmasked = len(mags)
    if n_unmasked == 0:
        raise NothingToPruneError("all weights are already masked")
    k = min(math.ceil(rate * n_unmasked), n_unmasked)
    order = np.lexsort((cols, rows, layer_ix, mags))
    for idx in order[:k]:
        layer = net.layers[layer_ix[idx]]
        layer.weights[rows[idx], cols[idx]] = 0.0
        layer.weight_mask[rows[idx], cols[idx]] = 0
    return net


def node_scores(net: MaskedNetwork, hidden_index: int) -> np.ndarray:
    """Per-node sum of absolute unmasked incoming weights."""
    layer = net.layers[hidden_index]
    return np.abs(layer.weights * layer.weight_mask).sum(axis=1)


def _remove_node(net: MaskedNetwork, hidden_index: int, node: int) -> None:
    layer = net.layers[hidden_index]
    nxt = net.layers[hidden_index + 1]
    layer.weights[node, :] = 0.0
    layer.weight_mask[node, :] = 0
    layer.bias[node] = 0.0
    layer.bias_mask[node] = 0
    nxt.weights[:, node] = 0.0
    nxt.weight_mask[:, node] = 0


def prune_nodes_step(net: MaskedNetwork, rate: float) -> MaskedNetwork:
    """Per hidden layer, remove the ceil(rate * live) lowest-score live nodes."""
    if not 0.0 < rate < 1.0:
        raise InvalidInputError("rate must lie strictly in (0, 1)")
    net = net.copy()
    for h in range(len(net.layers) - 1):
        live = net.live_hidden_nodes(h)
        n_live = int(live.sum())
        if n_live == 0:
            raise LayerCollapseError(f"hidden layer {h} has no live nodes left")
        k = math.ceil(rate * n_live)
        if n_live - k < 1:
            raise LayerCollapseError(
                f"pruning {k} of {n_live} live nodes would empty hidden layer {h}")
        scores = node_scores(net, h)
        candidates = np.nonzero(live)[0]
        order = candidates[np.lexsort((candidates, scores[candidates]))]
        for node in order[:k]:
            _remove_node(net, h, int(node))
    return net


def node_sparsity(net: MaskedNetwork) -> float:
    """Fraction of hidden nodes removed relative to the architecture."""
    total = sum(layer.out_width for layer in net.layers[:-1])
    live = sum(int(net.live_hidden_nodes(h).sum()) for h in range(len(net.layers) - 1))
    return (total - live) / total


def clean_dead_neurons(net: MaskedNetwork) -> tuple[MaskedNetwork, int]:
    """Fold away neurons with fully-masked incoming or outgoing weights.

    A neuron with all incoming weights masked outputs the constant
    ReLU(bias); that constant is folded into each downstream bias before
    the neuron's bias and outgoing weights are masked. A neuron with all
    outgoing weights masked is disconnected outright. Cascades run to a
    fixpoint. The network function is preserved exactly (up to one
    floating-point add per fold). Returns the cleaned copy and the number
    of neurons removed.
    """
    net = net.copy()
    cleaned = 0
    changed = True
    while changed:
        changed = False
        for h in range(len(net.layers) - 1):
            layer = net.layers[h]
            nxt = net.layers[h + 1]
            for i in range(layer.out_width):
                has_params = (layer.weight_mask[i].any() or layer.bias_mask[i]
                              or nxt.weight_mask[:, i].any())
                if not has_params:
                    continue
                if not layer.weight_mask[i].any():
                    const = max(0.0, layer.bias[i]) if layer.bias_mask[i] else 0.0
                    if const != 0.0:
                        for t in np.nonzero(nxt.weight_mask[:, i])[0]:
                            nxt.bias[t] += nxt.weights[t, i] * const
                            nxt.bias_mask[t] = 1 if nxt.bias[t] != 0.0 else nxt.bias_mask[t]
                    nxt.weights[:, i] = 0.0
                    nxt.weight_mask[:, i] = 0
                    layer.bias[i] = 0.0
                    layer.bias_mask[i] = 0
                    cleaned += 1
                    changed = True
                elif not nxt.weight_mask[:, i].any():
                    layer.weights[i, :] = 0.0
                    layer.weight_mask[i, :] = 0
                    layer.bias[i] = 0.0
                    layer.bias_mask[i] = 0
                    cleaned += 1
                    changed = True
    return net, cleaned


def _weight_schedule_rate(net: MaskedNetwork, target_unmasked: float, remaining: int) -> float:
    n_u = net.num_weights() - net.num_masked_weights()
    if n_u <= target_unmasked:
        return 0.0
    if remaining == 1:
        return 1.0 - target_unmasked / n_u
    return 1.0 - (target_unmasked / n_u) ** (1.0 / remaining)


def _node_schedule_rate(net: MaskedNetwork, targets: list[int], remaining: int) -> float:
    lives = [int(net.live_hidden_nodes(h).sum()) for h in range(len(net.layers) - 1)]
    if remaining == 1:
        # guarantee every layer reaches its own target on the last step
        return max((live - tgt) / live for live, tgt in zip(lives, targets))
    live_total, target_total = sum(lives), sum(targets)
    if live_total <= target_total:
        return 0.0
    return 1.0 - (target_total / live_total) ** (1.0 / remaining)


def prune_to_sparsity(net: MaskedNetwork, method: str, target: float) -> MaskedNetwork:
    """Single mask-only step taking the network to the target sparsity.

    No retraining happens, so the monotone-tightening guarantee applies to
    the result. Chaining calls with increasing targets keeps masks monotone.
    """
    if method == "weight":
        goal = net.num_weights() * (1.0 - target)
        rate = _weight_schedule_rate(net, goal, 1)
        return prune_weights_step(net, rate) if rate > 0 else net.copy()
    if method == "node":
        targets = [layer.out_width - math.ceil(target * layer.out_width)
                   for layer in net.layers[:-1]]
        rate = _node_schedule_rate(net, targets, 1)
        return prune_nodes_step(net, rate) if rate > 0 else net.copy()
    raise InvalidInputError("method must be 'weight' or 'node'")


def iterative_prune(net: MaskedNetwork, train_ds: Dataset, val_ds: Dataset,
                    prune_cfg: PruneConfig, train_cfg: TrainConfig,
                    ) -> tuple[MaskedNetwork, list[PruneIterationMetrics]]:
    """Run N rounds of {train to convergence, score, prune}, then clean.

    The per-iteration rate is recomputed each round so the final sparsity
    is hit exactly (up to the per-step ceiling). Dead-neuron cleaning runs
    once after the last iteration (or every iteration when configured);
    cleanup performed after the loop is charged to the last metrics row,
    whose sparsity is recorded before that cleanup. An optional fine-tuning
    pass with frozen masks follows.
    """
    net = net.copy()
    n_iter = num_iterations(prune_cfg.final_sparsity, prune_cfg.relative_rate)
    weight_target = net.num_weights() * (1.0 - prune_cfg.final_sparsity)
    node_targets = [
        layer.out_width - math.ceil(prune_cfg.final_sparsity * layer.out_width)
        for layer in net.layers[:-1]
    ]
    metrics: list[PruneIterationMetrics] = []

    for i in range(1, n_iter + 1):
        net, _ = train_to_convergence(net, train_ds, val_ds, train_cfg)
        remaining = n_iter - i + 1
        if prune_cfg.method == "weight":
            rate = _weight_schedule_rate(net, weight_target, remaining)
            if rate > 0.0:
                net = prune_weights_step(net, rate)
            sparsity = net.weight_sparsity()
        else:
            rate = _node_schedule_rate(net, node_targets, remaining)
            if rate > 0.0:
                net = prune_nodes_step(net, rate)
            sparsity = node_sparsity(net)
        cleaned = 0
        if prune_cfg.clean_per_iteration:
            net, cleaned = clean_dead_neurons(net)
        val = mape(val_ds.targets, net.forward(val_ds.inputs))
        metrics.append(PruneIterationMetrics(i, sparsity, val, cleaned))

    if not prune_cfg.clean_per_iteration:
        net, cleaned = clean_dead_neurons(net)
        metrics[-1].dead_neurons_cleaned += cleaned

    if prune_cfg.fine_tune:
        cfg = prune_cfg.fine_tune_cfg or train_cfg
        net, _ = train_to_convergence(net, train_ds, val_ds, cfg)

    return net, metrics
