"""Multi-fidelity airfoil Cp surrogates built on separable spline kernels.

Modules: ``splines`` (kernel and clamped B-spline bases), ``khronos``
(the separable model), ``baseline`` (dense MLP), ``training``, ``geometry``
(airfoil B-spline fitting), ``fields`` (pressure and Cp post-processing),
``mfpipe`` (delta learning and the synthetic benchmark), ``evalharness``
and ``cli``.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigurationError,
    DataError,
    KhronosError,
    NumericalError,
)
from .khronos import KernelConfig, KhronosModel, KhronosParams, param_count
from .baseline import MlpModel, mlp_param_count
from .training import TrainConfig, train
from .mfpipe import MfDataset, MfSurrogate, fit_surrogate, predict_mf, synth_benchmark

__all__ = [
    "ConfigurationError",
    "DataError",
    "KernelConfig",
    "KhronosError",
    "KhronosModel",
    "KhronosParams",
    "MfDataset",
    "MfSurrogate",
    "MlpModel",
    "NumericalError",
    "TrainConfig",
    "fit_surrogate",
    "mlp_param_count",
    "param_count",
    "predict_mf",
    "synth_benchmark",
    "train",
]
