"""Dense feedforward baseline with hand-written backpropagation."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DataError, DimensionError
from .fields import NormStats

CHECKPOINT_FORMAT = "mlp-checkpoint"

LF_HIDDEN = (256, 256, 256, 256)
DELTA_HIDDEN = (128, 128, 128, 128)


def mlp_param_count(widths) -> int:
    widths = list(widths)
    if len(widths) < 2:
        raise ConfigurationError("an MLP needs at least input and output widths")
    return sum(a * b + b for a, b in zip(widths[:-1], widths[1:]))


class MlpModel:
    """ReLU hidden layers, identity output layer.

    Parameters are named ``W0, b0, W1, b1, ...``; ``W_l`` has shape
    ``(fan_in, fan_out)``.
    """

    kind = "mlp"

    def __init__(self, widths, weights, biases, input_norm=None, output_norm=None):
        self.widths = tuple(int(w) for w in widths)
        if len(self.widths) < 2 or min(self.widths) < 1:
            raise ConfigurationError(f"invalid widths {widths}")
        self.weights = list(weights)
        self.biases = list(biases)
        for l, (a, b) in enumerate(zip(self.widths[:-1], self.widths[1:])):
            if self.weights[l].shape != (a, b) or self.biases[l].shape != (b,):
                raise DimensionError(f"layer {l} parameters do not match widths {self.widths}")
        self.input_norm = input_norm
        self.output_norm = output_norm

    @classmethod
    def create(cls, widths, seed: int = 0, zero_head: bool = False) -> "MlpModel":
        """He-uniform weights, zero biases; ``zero_head`` also zeroes the
        output layer's weights."""
        rng = np.random.default_rng(seed)
        widths = tuple(widths)
        weights, biases = [], []
        for a, b in zip(widths[:-1], widths[1:]):
            bound = np.sqrt(6.0 / a)
            weights.append(rng.uniform(-bound, bound, size=(a, b)))
            biases.append(np.zeros(b))
        if zero_head:
            weights[-1][:] = 0.0
        return cls(widths, weights, biases)

    @property
    def n_in(self) -> int:
        return self.widths[0]

    @property
    def n_out(self) -> int:
        return self.widths[-1]

    def parameters(self) -> dict:
        out = {}
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            out[f"W{l}"] = W
            out[f"b{l}"] = b
        return out

    def param_count(self) -> int:
        return sum(a.size for a in self.parameters().values())

    def output_bias(self) -> np.ndarray:
        return self.biases[-1]

    def copy(self) -> "MlpModel":
        return MlpModel(self.widths, [W.copy() for W in self.weights],
                        [b.copy() for b in self.biases], self.input_norm, self.output_norm)

    def _check_input(self, x):
        X = np.asarray(x, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.ndim != 2 or X.shape[1] != self.n_in:
            raise DimensionError(f"expected input of length {self.n_in}, got shape {np.shape(x)}")
        return X, single

    def _forward(self, X):
        acts = [X]
        h = X
        last = len(self.weights) - 1
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ W + b
            h = z if l == last else np.maximum(z, 0.0)
            acts.append(h)
        return h, acts

    def _backward(self, acts, G) -> dict:
        grads = {}
        delta = G
        for l in range(len(self.weights) - 1, -1, -1):
            grads[f"W{l}"] = acts[l].T @ delta
            grads[f"b{l}"] = delta.sum(axis=0)
            if l > 0:
                delta = (delta @ self.weights[l].T) * (acts[l] > 0)
        return grads

    def predict(self, X):
        """Outputs in physical units for inputs in physical units."""
        X = np.asarray(X, dtype=float)
        return self.predict_normalized(self.input_norm.apply(X) if self.input_norm is not None else X)

    def predict_normalized(self, Xn):
        """Outputs in physical units for already-normalized inputs."""
        Y = mlp_forward(self, Xn)
        return self.output_norm.invert(Y) if self.output_norm is not None else Y

    def to_dict(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "version": 1,
            "widths": list(self.widths),
            "layers": [{"W": W.ravel().tolist(), "b": b.tolist()}
                       for W, b in zip(self.weights, self.biases)],
            "layer_order": "W row-major [fan_in][fan_out], then b",
            "input_norm": None if self.input_norm is None else self.input_norm.to_dict(),
            "output_norm": None if self.output_norm is None else self.output_norm.to_dict(),
        }

    @classmethod
    def from_dict(cls, data) -> "MlpModel":
        if data.get("format") != CHECKPOINT_FORMAT:
            raise DataError("not an MLP checkpoint")
        widths = data["widths"]
        weights = [np.array(layer["W"], dtype=float).reshape(a, b)
                   for layer, a, b in zip(data["layers"], widths[:-1], widths[1:])]
        biases = [np.array(layer["b"], dtype=float) for layer in data["layers"]]
        norm = lambda key: None if data.get(key) is None else NormStats.from_dict(data[key])
        return cls(widths, weights, biases, norm("input_norm"), norm("output_norm"))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "MlpModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def mlp_forward(model: MlpModel, x):
    X, single = model._check_input(x)
    out, _ = model._forward(X)
    return out[0] if single else out


def mlp_backward(model: MlpModel, x, upstream) -> dict:
    """Gradients of ``sum(upstream * mlp_forward(model, x))``, keyed like
    :meth:`MlpModel.parameters`."""
    X, _ = model._check_input(x)
    G = np.atleast_2d(np.asarray(upstream, dtype=float))
    if G.shape != (X.shape[0], model.n_out):
        raise DimensionError(
            f"upstream shape {np.shape(upstream)} does not match outputs ({X.shape[0]}, {model.n_out})")
    _, acts = model._forward(X)
    return model._backward(acts, G)
