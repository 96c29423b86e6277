"""Interval-arithmetic bound propagation and the pruning/tightening checks.

Propagates an input box layer by layer to per-neuron preactivation bounds
[L, U] (the big-M constants) and activation bounds [zL, zU]. Also provides
executable checks for the two tightening properties: pure pruning never
widens any interval, and under non-degeneracy conditions it strictly
shrinks a chosen output width.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NotAPurePruningError
from .network import MaskedNetwork


@dataclass
class BoundsTable:
    """Per-layer preactivation and activation bounds for a fixed input box."""

    input_lower: np.ndarray
    input_upper: np.ndarray
    pre_lower: list[np.ndarray]
    pre_upper: list[np.ndarray]
    act_lower: list[np.ndarray]
    act_upper: list[np.ndarray]

    @property
    def num_layers(self) -> int:
        return len(self.pre_lower)

    def pre_width(self, layer: int) -> np.ndarray:
        return self.pre_upper[layer] - self.pre_lower[layer]

    def act_width(self, layer: int) -> np.ndarray:
        """Activation width of a layer; layer -1 addresses the input box."""
        if layer == -1:
            return self.input_upper - self.input_lower
        return self.act_upper[layer] - self.act_lower[layer]

    def all_pre_widths(self) -> np.ndarray:
        return np.concatenate([self.pre_width(j) for j in range(self.num_layers)])


def _check_box(box, dim: int):
    box = np.asarray(box, dtype=float)
    if box.ndim != 2 or box.shape != (dim, 2):
        raise InvalidInputError(f"box must be ({dim}, 2), got {box.shape}")
    if not np.isfinite(box).all():
        raise InvalidInputError("box must be finite")
    if np.any(box[:, 0] > box[:, 1]):
        raise InvalidInputError("box needs lo <= hi in every dimension")
    return box[:, 0].copy(), box[:, 1].copy()


def propagate_ia(net: MaskedNetwork, box) -> BoundsTable:
    """Interval-arithmetic bounds for every neuron over the input box.

    Hidden activations are clamped through ReLU; the output layer bounds
    stay unclamped. Scaling metadata, when present, is folded into the
    layers first so the box is interpreted in raw input units.
    """
    net = net.fold_scaling()
    lo, hi = _check_box(box, net.input_dim)
    for layer in net.layers:
        if not (np.isfinite(layer.weights).all() and np.isfinite(layer.bias).all()):
            raise InvalidInputError("network has non-finite parameters")
    pre_lower, pre_upper, act_lower, act_upper = [], [], [], []
    z_lo, z_hi = lo, hi
    for j, layer in enumerate(net.layers):
        w_pos = np.maximum(layer.weights, 0.0)
        w_neg = np.minimum(layer.weights, 0.0)
        l = w_pos @ z_lo + w_neg @ z_hi + layer.bias
        u = w_pos @ z_hi + w_neg @ z_lo + layer.bias
        pre_lower.append(l)
        pre_upper.append(u)
        if j < len(net.layers) - 1:
            z_lo, z_hi = np.maximum(0.0, l), np.maximum(0.0, u)
        else:
            z_lo, z_hi = l.copy(), u.copy()
        act_lower.append(z_lo)
        act_upper.append(z_hi)
    return BoundsTable(lo, hi, pre_lower, pre_upper, act_lower, act_upper)


def width_identity_check(net: MaskedNetwork, table: BoundsTable) -> float:
    """Max residual of the affine width identity width(p) = |W| width(z)."""
    net = net.fold_scaling()
    worst = 0.0
    for j, layer in enumerate(net.layers):
        upstream = table.act_width(j - 1)
        expected = np.abs(layer.weights) @ upstream
        worst = max(worst, float(np.abs(table.pre_width(j) - expected).max()))
    return worst


def _verify_pure_prune(before: MaskedNetwork, after: MaskedNetwork) -> None:
    if [l.weights.shape for l in before.layers] != [l.weights.shape for l in after.layers]:
        raise NotAPurePruningError("networks have different architectures")
    for j, (a, b) in enumerate(zip(before.layers, after.layers)):
        if np.any(b.weight_mask > a.weight_mask):
            raise NotAPurePruningError(f"layer {j}: a masked weight was restored")
        survivors = b.weight_mask == 1
        if np.any(a.weights[survivors] != b.weights[survivors]):
            raise NotAPurePruningError(f"layer {j}: a surviving weight changed value")


@dataclass
class MonotoneTighteningReport:
    pre_violation_per_layer: list[float]
    act_violation_per_layer: list[float]
    pre_tightening_per_layer: list[float]
    max_violation: float
    max_tightening: float

    def ok(self, tolerance: float = 1e-12) -> bool:
        return self.max_violation <= tolerance


def check_monotone_tightening(net_before: MaskedNetwork, net_after: MaskedNetwork,
                              box) -> MonotoneTighteningReport:
    """Verify widths never grow when net_after is a pure prune of net_before.

    The pure-prune precondition is verified on the weights (masks may only
    be cleared and surviving values must be identical); bias edits are
    tolerated because interval widths do not depend on biases.
    """
    _verify_pure_prune(net_before.fold_scaling(), net_after.fold_scaling())
    t0 = propagate_ia(net_before, box)
    t1 = propagate_ia(net_after, box)
    pre_viol, act_viol, tighten = [], [], []
    for j in range(t0.num_layers):
        d_pre = t1.pre_width(j) - t0.pre_width(j)
        d_act = t1.act_width(j) - t0.act_width(j)
        pre_viol.append(float(d_pre.max(initial=0.0)))
        act_viol.append(float(d_act.max(initial=0.0)))
        tighten.append(float((-d_pre).max(initial=0.0)))
    return MonotoneTighteningReport(
        pre_viol, act_viol, tighten,
        max(max(pre_viol), max(act_viol)),
        max(tighten),
    )


@dataclass
class StrictTighteningVerdict:
    nontrivial_prune: bool
    upstream_signal: bool
    downstream_path: bool
    path_nondegenerate: bool
    strict_decrease_observed: bool | None
    width_decrease: float | None

    @property
    def conditions_held(self) -> bool:
        return (self.nontrivial_prune and self.upstream_signal
                and self.downstream_path and self.path_nondegenerate)


def _reachable_outputs(net: MaskedNetwork, table: BoundsTable, layer: int, neuron: int,
                       filter_degenerate: bool):
    """Neurons of the output layer reachable from (layer, neuron) through
    nonzero unmasked weights; optionally avoid dead or zero-width neurons."""
    last = len(net.layers) - 1

    def alive(j, idx_array):
        if not filter_degenerate or j == last:
            return idx_array
        keep = (table.pre_upper[j][idx_array] > 0.0) & (table.pre_width(j)[idx_array] > 0.0)
        return idx_array[keep]

    frontier = alive(layer, np.array([neuron], dtype=int))
    j = layer
    while j < last and frontier.size:
        w = net.layers[j + 1].weights * net.layers[j + 1].weight_mask
        nxt = np.nonzero((w[:, frontier] != 0.0).any(axis=1))[0]
        frontier = alive(j + 1, nxt)
        j += 1
    return set(frontier.tolist()) if frontier.size else set()


def check_strict_tightening(net: MaskedNetwork, box, layer: int, i: int, k: int,
                            out_index: int) -> StrictTighteningVerdict:
    """Evaluate the four strict-tightening conditions for pruning W[layer][i, k].

    When all four hold, the weight is pruned in a copy, bounds are
    recomputed, and the observed decrease of the chosen output activation
    width is reported.
    """
    net = net.fold_scaling()
    table = propagate_ia(net, box)
    wlayer = net.layers[layer]
    cond1 = bool(wlayer.weight_mask[i, k] == 1 and wlayer.weights[i, k] != 0.0)
    cond2 = bool(table.act_width(layer - 1)[k] > 0.0)
    cond3 = out_index in _reachable_outputs(net, table, layer, i, filter_degenerate=False)
    cond4 = out_index in _reachable_outputs(net, table, layer, i, filter_degenerate=True)

    verdict = StrictTighteningVerdict(cond1, cond2, cond3, cond4, None, None)
    if not verdict.conditions_held:
        return verdict

    pruned = net.copy()
    pruned.layers[layer].weights[i, k] = 0.0
    pruned.layers[layer].weight_mask[i, k] = 0
    after = propagate_ia(pruned, box)
    last = len(net.layers) - 1
    before_w = float(table.act_width(last)[out_index])
    after_w = float(after.act_width(last)[out_index])
    verdict.width_decrease = before_w - after_w
    verdict.strict_decrease_observed = after_w < before_w
    return verdict


@dataclass
class LayerWidthStats:
    layer: int  # 1-based layer position
    kind: str  # "hidden" or "output"
    count: int
    mean: float
    median: float
    max: float


@dataclass
class WidthSummary:
    per_layer: list[LayerWidthStats]
    mean: float
    median: float
    max: float


def width_summary(table: BoundsTable) -> WidthSummary:
    """Mean/median/max preactivation width, overall and per layer."""
    per_layer = []
    for j in range(table.num_layers):
        w = table.pre_width(j)
        kind = "output" if j == table.num_layers - 1 else "hidden"
        per_layer.append(LayerWidthStats(
            j + 1, kind, len(w), float(w.mean()), float(np.median(w)), float(w.max())))
    widths = table.all_pre_widths()
    return WidthSummary(per_layer, float(widths.mean()), float(np.median(widths)),
                        float(widths.max()))
