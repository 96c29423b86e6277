"""Masked fully-connected ReLU networks: evaluation, sparsity, serialization.

A network is a stack of dense layers with per-parameter binary masks.
Hidden layers apply ReLU, the final layer is affine. A masked parameter
(mask bit 0) always stores the value 0, so masked entries can never leak
into the output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, ParseError, ValidationError


def relu(x):
    """max(0, x), elementwise on arrays."""
    return np.maximum(0.0, x)


@dataclass
class AffineScaling:
    """Per-dimension min-max scaling parameters (maps raw values to [0,1])."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=float)
        self.hi = np.asarray(self.hi, dtype=float)
        if self.lo.shape != self.hi.shape or self.lo.ndim != 1:
            raise ValidationError("scaling lo/hi must be 1-D and the same length")
        if np.any(self.hi <= self.lo):
            raise ValidationError("scaling requires hi > lo in every dimension")

    def encode(self, x):
        return (x - self.lo) / (self.hi - self.lo)

    def decode(self, u):
        return u * (self.hi - self.lo) + self.lo


@dataclass
class DenseLayer:
    """One dense layer: weights (out x in), bias (out), and binary masks."""

    weights: np.ndarray
    bias: np.ndarray
    weight_mask: np.ndarray
    bias_mask: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.bias = np.asarray(self.bias, dtype=float)
        self.weight_mask = np.asarray(self.weight_mask, dtype=np.int8)
        self.bias_mask = np.asarray(self.bias_mask, dtype=np.int8)
        if self.weights.ndim != 2:
            raise ValidationError("weights must be a 2-D matrix")
        if self.bias.shape != (self.weights.shape[0],):
            raise ValidationError(
                f"bias length {self.bias.shape} does not match weight rows "
                f"{self.weights.shape[0]}"
            )
        if self.weight_mask.shape != self.weights.shape:
            raise ValidationError("weight_mask shape does not match weights")
        if self.bias_mask.shape != self.bias.shape:
            raise ValidationError("bias_mask shape does not match bias")
        for name, mask in (("weight_mask", self.weight_mask), ("bias_mask", self.bias_mask)):
            if not np.isin(mask, (0, 1)).all():
                raise ValidationError(f"{name} entries must be 0 or 1")
        if np.any(self.weights[self.weight_mask == 0] != 0.0):
            raise ValidationError("masked weight entries must store exactly 0")
        if np.any(self.bias[self.bias_mask == 0] != 0.0):
            raise ValidationError("masked bias entries must store exactly 0")

    @property
    def out_width(self) -> int:
        return self.weights.shape[0]

    @property
    def in_width(self) -> int:
        return self.weights.shape[1]

    def copy(self) -> "DenseLayer":
        return DenseLayer(
            self.weights.copy(), self.bias.copy(),
            self.weight_mask.copy(), self.bias_mask.copy(),
        )


def layer_from_arrays(weights, bias) -> DenseLayer:
    """Build a fully-unmasked layer from weight/bias arrays."""
    weights = np.asarray(weights, dtype=float)
    bias = np.asarray(bias, dtype=float)
    return DenseLayer(weights, bias, np.ones_like(weights, dtype=np.int8),
                      np.ones_like(bias, dtype=np.int8))


@dataclass
class MaskedNetwork:
    """Dense ReLU MLP with binary parameter masks.

    Hidden layers use ReLU; the last layer is affine. Optional min-max
    scaling metadata makes the network map raw inputs to raw outputs even
    when the layers were trained on [0,1]-scaled data.
    """

    layers: list[DenseLayer]
    input_dim: int
    output_dim: int
    input_scaling: AffineScaling | None = field(default=None)
    target_scaling: AffineScaling | None = field(default=None)

    def __post_init__(self):
        if not self.layers:
            raise ValidationError("a network needs at least one layer")
        if self.layers[0].in_width != self.input_dim:
            raise ValidationError(
                f"first layer expects {self.layers[0].in_width} inputs, "
                f"network declares input_dim={self.input_dim}"
            )
        if self.layers[-1].out_width != self.output_dim:
            raise ValidationError(
                f"last layer produces {self.layers[-1].out_width} outputs, "
                f"network declares output_dim={self.output_dim}"
            )
        for j in range(1, len(self.layers)):
            if self.layers[j].in_width != self.layers[j - 1].out_width:
                raise ValidationError(
                    f"layer {j} input width {self.layers[j].in_width} does not "
                    f"chain with layer {j - 1} output width {self.layers[j - 1].out_width}"
                )
        if self.input_scaling is not None and len(self.input_scaling.lo) != self.input_dim:
            raise ValidationError("input_scaling dimension does not match input_dim")
        if self.target_scaling is not None and len(self.target_scaling.lo) != self.output_dim:
            raise ValidationError("target_scaling dimension does not match output_dim")

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @property
    def hidden_widths(self) -> list[int]:
        return [layer.out_width for layer in self.layers[:-1]]

    @property
    def layer_sizes(self) -> list[int]:
        return [self.input_dim] + [layer.out_width for layer in self.layers]

    def forward(self, x):
        """Evaluate the network on a single input vector or an (n, d) batch."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        batch = x[None, :] if single else x
        if batch.ndim != 2 or batch.shape[1] != self.input_dim:
            raise InvalidInputError(
                f"expected inputs of dimension {self.input_dim}, got shape {x.shape}"
            )
        z = self.input_scaling.encode(batch) if self.input_scaling else batch
        for layer in self.layers[:-1]:
            z = relu(z @ layer.weights.T + layer.bias)
        z = z @ self.layers[-1].weights.T + self.layers[-1].bias
        if self.target_scaling:
            z = self.target_scaling.decode(z)
        return z[0] if single else z

    def num_weights(self) -> int:
        return sum(layer.weights.size for layer in self.layers)

    def num_masked_weights(self) -> int:
        return sum(int((layer.weight_mask == 0).sum()) for layer in self.layers)

    def weight_sparsity(self) -> float:
        """Fraction of weight entries masked; biases are not counted."""
        return self.num_masked_weights() / self.num_weights()

    def live_hidden_nodes(self, hidden_index: int) -> np.ndarray:
        """Boolean array: hidden neurons of layer ``hidden_index`` not fully removed.

        A node counts as removed when all of its incoming weights, its bias,
        and all of its outgoing weights are masked.
        """
        layer = self.layers[hidden_index]
        nxt = self.layers[hidden_index + 1]
        in_dead = (layer.weight_mask == 0).all(axis=1) & (layer.bias_mask == 0)
        out_dead = (nxt.weight_mask == 0).all(axis=0)
        return ~(in_dead & out_dead)

    def copy(self) -> "MaskedNetwork":
        return MaskedNetwork(
            [layer.copy() for layer in self.layers],
            self.input_dim,
            self.output_dim,
            input_scaling=self.input_scaling,
            target_scaling=self.target_scaling,
        )

    def fold_scaling(self) -> "MaskedNetwork":
        """Return an equivalent network with scaling composed into its layers.

        Input scaling folds into the first layer's columns, target scaling
        into the last layer's rows. Biases touched by the fold are unmasked
        when they become nonzero.
        """
        if self.input_scaling is None and self.target_scaling is None:
            return self.copy()
        layers = [layer.copy() for layer in self.layers]
        if self.input_scaling is not None:
            span = self.input_scaling.hi - self.input_scaling.lo
            first = layers[0]
            shift = first.weights @ (self.input_scaling.lo / span)
            first.weights = first.weights / span
            first.bias = first.bias - shift
            first.bias_mask = np.where(first.bias != 0.0, 1, first.bias_mask).astype(np.int8)
        if self.target_scaling is not None:
            span = self.target_scaling.hi - self.target_scaling.lo
            last = layers[-1]
            last.weights = last.weights * span[:, None]
            last.bias = last.bias * span + self.target_scaling.lo
            last.bias_mask = np.where(last.bias != 0.0, 1, last.bias_mask).astype(np.int8)
        return MaskedNetwork(layers, self.input_dim, self.output_dim)


def _scaling_to_json(scaling: AffineScaling | None):
    if scaling is None:
        return None
    return {"lo": scaling.lo.tolist(), "hi": scaling.hi.tolist()}


def save_network(net: MaskedNetwork, path) -> None:
    """Write the network interchange JSON (full float precision)."""
    doc = {
        "input_dim": net.input_dim,
        "output_dim": net.output_dim,
        "layers": [
            {
                "weights": layer.weights.tolist(),
                "bias": layer.bias.tolist(),
                "weight_mask": layer.weight_mask.tolist(),
                "bias_mask": layer.bias_mask.tolist(),
            }
            for layer in net.layers
        ],
    }
    if net.input_scaling is not None:
        doc["input_scaling"] = _scaling_to_json(net.input_scaling)
    if net.target_scaling is not None:
        doc["target_scaling"] = _scaling_to_json(net.target_scaling)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_network(path) -> MaskedNetwork:
    """Read a network interchange file, validating every invariant."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"not valid JSON: {exc}") from exc
    for key in ("input_dim", "output_dim", "layers"):
        if key not in doc:
            raise ParseError(f"missing field '{key}'")
    layers = []
    for j, entry in enumerate(doc["layers"]):
        for key in ("weights", "bias", "weight_mask", "bias_mask"):
            if key not in entry:
                raise ParseError(f"layer {j}: missing field '{key}'")
        try:
            layers.append(
                DenseLayer(
                    np.asarray(entry["weights"], dtype=float),
                    np.asarray(entry["bias"], dtype=float),
                    np.asarray(entry["weight_mask"]),
                    np.asarray(entry["bias_mask"]),
                )
            )
        except (TypeError, ValueError) as exc:
            raise ParseError(f"layer {j}: malformed numeric data: {exc}") from exc
    def read_scaling(key):
        if key not in doc or doc[key] is None:
            return None
        entry = doc[key]
        if "lo" not in entry or "hi" not in entry:
            raise ParseError(f"{key}: missing field 'lo' or 'hi'")
        return AffineScaling(np.asarray(entry["lo"], float), np.asarray(entry["hi"], float))
    return MaskedNetwork(
        layers,
        int(doc["input_dim"]),
        int(doc["output_dim"]),
        input_scaling=read_scaling("input_scaling"),
        target_scaling=read_scaling("target_scaling"),
    )
