"""Classic single-reservoir echo-state network.

A leaky tanh reservoir with a sparse random recurrent matrix and a purely
linear readout; the comparison baseline in every experiment.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np

from . import core_math
from ._base import (ReservoirModel, check_alpha, draw_reservoir, sparse_from_dict,
                    sparse_to_dict)
from .exceptions import ParameterError


@dataclass(frozen=True)
class EsnHyperparams:
    """Hyperparameters of :class:`EsnModel`.

    Attributes:
        n: Reservoir size.
        alpha: Leaking rate.
        beta: Tikhonov regularization of the readout.
        p: Connection probability of the random reservoir graph.
        rho: Target spectral radius of the reservoir matrix.
        input_scale: Multiplier on the uniform(-0.5, 0.5) input weights.
        seed: Master seed for all random draws.
    """

    n: int
    alpha: float = 0.3
    beta: float = 1e-6
    p: float = 0.01
    rho: float = 0.9
    input_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ParameterError(f"reservoir size must be a positive integer, got {self.n!r}")
        check_alpha(self.alpha)
        if not self.beta > 0:
            raise ParameterError(f"beta must be positive, got {self.beta!r}")
        if not 0 < self.p < 1:
            raise ParameterError(f"connection probability must lie in (0, 1), got {self.p!r}")
        if not self.rho > 0:
            raise ParameterError(f"spectral radius must be positive, got {self.rho!r}")
        if self.rho >= 1:
            warnings.warn(f"spectral radius {self.rho} >= 1 may violate the echo-state property",
                          stacklevel=3)
        if not self.input_scale > 0:
            raise ParameterError("input_scale must be positive")


class EsnModel(ReservoirModel):
    """Classic ESN: ``r <- (1-a) r + a tanh(W r + W_in u + d)``, ``y = W_out r``.

    Args:
        n_inputs: Input dimension ``m``.
        n_outputs: Output dimension ``p``.
        hyper: Hyperparameters; ``hyper.seed`` fixes every random draw.
    """

    kind = "esn"

    def __init__(self, n_inputs: int, n_outputs: int, hyper: EsnHyperparams):
        if n_inputs < 1 or n_outputs < 1:
            raise ParameterError("input and output dimensions must be positive")
        self.hyper = hyper
        self.n_inputs = int(n_inputs)
        self.n_outputs = int(n_outputs)
        n = hyper.n
        rng_in = np.random.default_rng(core_math.derive_seed(hyper.seed, 0))
        self.W_in = hyper.input_scale * rng_in.uniform(-0.5, 0.5, (n, self.n_inputs))
        self.W, draws = draw_reservoir(n, hyper.p, hyper.rho, core_math.derive_seed(hyper.seed, 1))
        rng_d = np.random.default_rng(core_math.derive_seed(hyper.seed, 2))
        self.d = rng_d.uniform(-0.5, 0.5, n)
        self.r = np.zeros(n)
        self.W_out = None
        self.metadata = {"reservoir_draws": draws}

    @property
    def beta(self) -> float:
        return self.hyper.beta

    def _recur(self, r, drive):
        a = self.hyper.alpha
        return (1.0 - a) * r + a * np.tanh(self.W @ r + drive)

    def _features(self, r):
        return r

    def to_dict(self) -> dict:
        d = self._common_dict()
        d.update(kind=self.kind, hyper=asdict(self.hyper), W=sparse_to_dict(self.W))
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EsnModel":
        obj = cls.__new__(cls)
        obj.hyper = EsnHyperparams(**d["hyper"])
        obj._load_common(d)
        obj.W = sparse_from_dict(d["W"])
        return obj
