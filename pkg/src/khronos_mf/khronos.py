"""Separable kernel-expansion surrogate (KHRONOS).

For a normalized input ``x`` in ``[0, 1]^d`` the model evaluates

    y_m = bias_m + sum_j head[j, m] * prod_i atom_ij(x_i)
    atom_ij(x_i) = sum_s alpha[i, s, j] * psi(|x_i - g_s| * gamma_i)

where ``psi`` is the cardinal quadratic B-spline, ``g_s`` are ``k`` uniform
grid points on [0, 1] and ``gamma_i = softplus(gamma_raw_i)`` is a learnable
per-dimension width. The ``r`` rank modes are shared across all outputs
through the ``head`` matrix.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DataError, DimensionError
from .fields import NormStats
from .splines import SUPPORT

CHECKPOINT_FORMAT = "khronos-checkpoint"


def softplus(z):
    return np.logaddexp(0.0, z)


def inverse_softplus(y):
    y = np.asarray(y, dtype=float)
    return y + np.log(-np.expm1(-y))


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass(frozen=True)
class KernelConfig:
    d: int
    k: int
    r: int
    n_out: int = 81

    def __post_init__(self):
        for name in ("d", "k", "r", "n_out"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ConfigurationError(f"{name} must be a positive integer, got {value}")

    @property
    def grid(self) -> np.ndarray:
        if self.k == 1:
            return np.array([0.5])
        return np.linspace(0.0, 1.0, self.k)

    def to_dict(self):
        return {"d": self.d, "k": self.k, "r": self.r, "n_out": self.n_out}


def param_count(config: KernelConfig) -> int:
    d, k, r, m = config.d, config.k, config.r, config.n_out
    return d * k * r + d + r * m + m


@dataclass
class KhronosParams:
    alphas: np.ndarray      # (d, k, r)
    gamma_raw: np.ndarray   # (d,), unconstrained; gamma = softplus(gamma_raw)
    head: np.ndarray        # (r, n_out)
    bias: np.ndarray        # (n_out,)

    NAMES = ("alphas", "gamma_raw", "head", "bias")

    @property
    def gammas(self) -> np.ndarray:
        return softplus(self.gamma_raw)

    def arrays(self) -> dict:
        return {name: getattr(self, name) for name in self.NAMES}

    @property
    def size(self) -> int:
        return sum(a.size for a in self.arrays().values())

    def flatten(self) -> np.ndarray:
        """Flat vector: alphas [i][s][j], gamma_raw, head [j][m], bias."""
        return np.concatenate([a.ravel() for a in self.arrays().values()])

    @classmethod
    def from_flat(cls, config: KernelConfig, flat) -> "KhronosParams":
        flat = np.asarray(flat, dtype=float)
        if flat.size != param_count(config):
            raise DimensionError(
                f"expected {param_count(config)} parameters, got {flat.size}")
        d, k, r, m = config.d, config.k, config.r, config.n_out
        sizes = np.cumsum([d * k * r, d, r * m])
        a, g, h, b = np.split(flat, sizes)
        return cls(a.reshape(d, k, r).copy(), g.copy(), h.reshape(r, m).copy(), b.copy())

    @classmethod
    def zeros(cls, config: KernelConfig) -> "KhronosParams":
        return cls.from_flat(config, np.zeros(param_count(config)))

    def copy(self) -> "KhronosParams":
        return KhronosParams(*(a.copy() for a in self.arrays().values()))


def default_alpha_offset(d: int) -> float:
    """``max(0, 1 - 2/d)``: zero-mean atoms for one or two inputs, near-unit
    atoms for many, so a product over ``d`` atoms neither vanishes nor starts
    out symmetric across modes."""
    return max(0.0, 1.0 - 2.0 / d)


def init_params(config: KernelConfig, seed: int, alpha_offset: float | None = None,
                zero_head: bool = False) -> KhronosParams:
    """Random initial parameters, reproducible from ``seed``.

    Alphas are ``alpha_offset + U(-0.5, 0.5) / sqrt(k)``; the offset defaults
    to :func:`default_alpha_offset`. Effective widths start at ``k - 1`` so
    neighbouring kernels overlap. Head entries are ``U(-1, 1) / sqrt(r)``, or
    zero with ``zero_head`` so the model starts as the constant ``bias``
    (used for correction models). The output bias is zero.
    """
    if alpha_offset is None:
        alpha_offset = default_alpha_offset(config.d)
    d, k, r, m = config.d, config.k, config.r, config.n_out
    rng = np.random.default_rng(seed)
    alphas = alpha_offset + rng.uniform(-0.5, 0.5, size=(d, k, r)) / np.sqrt(k)
    gamma = float(k - 1) if k >= 2 else 1.0
    gamma_raw = np.full(d, float(inverse_softplus(gamma)))
    bound = 1.0 / np.sqrt(r)
    head = rng.uniform(-bound, bound, size=(r, m))
    if zero_head:
        head[:] = 0.0
    return KhronosParams(alphas, gamma_raw, head, np.zeros(m))


class KhronosModel:
    """KHRONOS expansion plus the input/output min-max statistics."""

    kind = "khronos"

    def __init__(self, config: KernelConfig, params: KhronosParams,
                 input_norm: NormStats | None = None,
                 output_norm: NormStats | None = None):
        self.config = config
        self.params = params
        self.input_norm = input_norm
        self.output_norm = output_norm
        if input_norm is not None and len(input_norm) != config.d:
            raise DimensionError("input_norm length must equal d")
        if output_norm is not None and len(output_norm) != config.n_out:
            raise DimensionError("output_norm length must equal n_out")

    @classmethod
    def create(cls, config: KernelConfig, seed: int = 0, **init_kwargs) -> "KhronosModel":
        return cls(config, init_params(config, seed, **init_kwargs))

    @property
    def n_in(self) -> int:
        return self.config.d

    @property
    def n_out(self) -> int:
        return self.config.n_out

    def parameters(self) -> dict:
        return self.params.arrays()

    def param_count(self) -> int:
        return self.params.size

    def output_bias(self) -> np.ndarray:
        return self.params.bias

    def copy(self) -> "KhronosModel":
        return KhronosModel(self.config, self.params.copy(), self.input_norm, self.output_norm)

    # -- core evaluation on normalized inputs ---------------------------------

    def _check_input(self, x):
        X = np.asarray(x, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.ndim != 2 or X.shape[1] != self.config.d:
            raise DimensionError(f"expected input of length {self.config.d}, got shape {np.shape(x)}")
        return X, single

    def _forward(self, X):
        p = self.params
        # dimension-major layout: (d, n, k) so each dimension is one matmul
        dist = np.abs(X.T[:, :, None] - self.config.grid)
        D = dist * p.gammas[:, None, None]
        # D >= 0, so the kernel branches need no abs/sign
        inner = D <= 0.5
        tail = np.maximum(SUPPORT - D, 0.0)
        psi = np.where(inner, 0.75 - D * D, 0.5 * tail * tail)
        atoms = np.matmul(psi, p.alphas)                                   # (d, n, r)
        # sorted so the product does not depend on input-dimension order
        modes = np.prod(np.sort(atoms, axis=0), axis=0)                   # (n, r)
        # unoptimized einsum accumulates ranks in order, so a zero extra rank
        # leaves the output bit-identical (BLAS matmul does not guarantee this)
        out = np.einsum("nr,rm->nm", modes, p.head)
        out += p.bias
        return out, (dist, D, inner, tail, psi, atoms, modes)

    def _backward(self, cache, G) -> dict:
        dist, D, inner, tail, psi, atoms, modes = cache
        p = self.params
        g_head = modes.T @ G
        g_bias = G.sum(axis=0)
        g_modes = G @ p.head.T                                            # (n, r)

        # product over all other dimensions via prefix and suffix products;
        # explicit loops beat np.cumprod along the leading axis
        d = atoms.shape[0]
        before = np.empty_like(atoms)
        after = np.empty_like(atoms)
        before[0] = 1.0
        after[-1] = 1.0
        for i in range(1, d):
            np.multiply(before[i - 1], atoms[i - 1], out=before[i])
            np.multiply(after[d - i], atoms[d - i], out=after[d - i - 1])
        g_atoms = before * after
        g_atoms *= g_modes                                                # (d, n, r)

        g_alphas = np.matmul(psi.transpose(0, 2, 1), g_atoms)
        g_psi = np.matmul(g_atoms, p.alphas.transpose(0, 2, 1))
        d_psi = np.where(inner, -2.0 * D, -tail)
        g_gamma = (g_psi * d_psi * dist).sum(axis=(1, 2))
        g_gamma_raw = g_gamma * _sigmoid(p.gamma_raw)
        return {"alphas": g_alphas, "gamma_raw": g_gamma_raw, "head": g_head, "bias": g_bias}

    # -- raw-space prediction --------------------------------------------------

    def predict(self, X):
        """Outputs in physical units for inputs in physical units."""
        X = np.asarray(X, dtype=float)
        return self.predict_normalized(self.input_norm.apply(X) if self.input_norm is not None else X)

    def predict_normalized(self, Xn):
        """Outputs in physical units for already-normalized inputs."""
        Y = forward(self, Xn)
        return self.output_norm.invert(Y) if self.output_norm is not None else Y

    # -- checkpoints -----------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "version": 1,
            "config": self.config.to_dict(),
            "param_order": ["alphas[i][s][j]", "gamma_raw[i]", "head[j][m]", "bias[m]"],
            "input_norm": None if self.input_norm is None else self.input_norm.to_dict(),
            "output_norm": None if self.output_norm is None else self.output_norm.to_dict(),
            "params": self.params.flatten().tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "KhronosModel":
        if data.get("format") != CHECKPOINT_FORMAT:
            raise DataError("not a KHRONOS checkpoint")
        config = KernelConfig(**data["config"])
        norm = lambda key: None if data.get(key) is None else NormStats.from_dict(data[key])
        return cls(config, KhronosParams.from_flat(config, data["params"]),
                   norm("input_norm"), norm("output_norm"))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "KhronosModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def forward(model: KhronosModel, x):
    """Evaluate on normalized input(s); a single vector gives a single output."""
    X, single = model._check_input(x)
    out, _ = model._forward(X)
    return out[0] if single else out


def backward(model: KhronosModel, x, upstream) -> KhronosParams:
    """Gradients of ``sum(upstream * forward(model, x))`` w.r.t. every parameter.

    Gradients are summed over the batch; ``gamma_raw`` receives the gradient
    through the softplus map.
    """
    X, single = model._check_input(x)
    G = np.atleast_2d(np.asarray(upstream, dtype=float))
    if G.shape != (X.shape[0], model.config.n_out):
        raise DimensionError(
            f"upstream shape {np.shape(upstream)} does not match outputs "
            f"({X.shape[0]}, {model.config.n_out})")
    _, cache = model._forward(X)
    return KhronosParams(**model._backward(cache, G))
