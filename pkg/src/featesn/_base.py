"""Lifecycle shared by the classic and the feature-based reservoir."""

from __future__ import annotations

import copy
import logging
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from . import core_math
from .data import TimeSeries, as_array
from .exceptions import NotTrainedError, NumericError, ParameterError, ShapeError
from .metrics import nrmse

logger = logging.getLogger(__name__)

#: Redraws allowed when a sparse random reservoir has spectral radius zero.
MAX_RESERVOIR_DRAWS = 10_000

Feedback = Callable[[np.ndarray, np.ndarray], np.ndarray]


def draw_reservoir(size: int, p: float, rho: float, seed: int):
    """Erdős–Rényi reservoir normalized to spectral radius ``rho``.

    At small sizes and sparse ``p`` most draws are nilpotent (radius zero)
    and cannot be normalized; those are redrawn from the next child seed.

    Returns:
        ``(matrix, draws)`` where ``draws`` counts the attempts used.
    """
    for attempt in range(MAX_RESERVOIR_DRAWS):
        raw = core_math.erdos_renyi(size, p, core_math.derive_seed(seed, attempt))
        try:
            return core_math.normalize_spectral(raw, rho).tocsr(), attempt + 1
        except core_math.ZeroSpectralRadiusError:
            continue
    raise ParameterError(
        f"no reservoir with nonzero spectral radius in {MAX_RESERVOIR_DRAWS} draws "
        f"(size={size}, p={p})")


def check_alpha(alpha):
    if not 0.0 <= alpha <= 1.0:
        raise ParameterError(f"leaking rate must lie in (0, 1], got {alpha!r}")
    if alpha == 0.0:
        logger.warning("leaking rate 0 freezes the reservoir state")


def sparse_to_dict(M) -> dict:
    coo = sp.coo_matrix(M)
    order = np.lexsort((coo.col, coo.row))
    return {"shape": list(coo.shape), "rows": coo.row[order].tolist(),
            "cols": coo.col[order].tolist(), "vals": coo.data[order].tolist()}


def sparse_from_dict(d: dict) -> sp.csr_matrix:
    return sp.csr_matrix((np.asarray(d["vals"], dtype=float),
                          (np.asarray(d["rows"], dtype=int), np.asarray(d["cols"], dtype=int))),
                         shape=tuple(d["shape"]))


def identity_feedback(y, u):
    return y


class ReservoirModel:
    """Drive, train and roll out a reservoir with a linear readout.

    Subclasses provide the recurrence (``_recur``) and the readout feature
    map (``_features``); training is ridge regression of the targets on the
    features of the state reached after consuming each input.
    """

    n_inputs: int
    n_outputs: int
    W_in: np.ndarray
    d: np.ndarray
    r: np.ndarray
    W_out: Optional[np.ndarray]
    metadata: dict

    # -- to implement ---------------------------------------------------
    def _recur(self, r: np.ndarray, drive: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _features(self, r: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def beta(self) -> float:
        raise NotImplementedError

    # -- shared ---------------------------------------------------------
    @property
    def trained(self) -> bool:
        return self.W_out is not None

    @property
    def state_size(self) -> int:
        return self.r.size

    def reset_state(self):
        self.r = np.zeros(self.state_size)

    def copy(self):
        return copy.deepcopy(self)

    def _check_input(self, u) -> np.ndarray:
        u = np.ravel(np.asarray(u, dtype=float))
        if u.size != self.n_inputs:
            raise ShapeError(f"expected input of length {self.n_inputs}, got {u.size}")
        if not np.all(np.isfinite(u)):
            raise NumericError("reservoir input contains non-finite values")
        return u

    def step(self, u) -> np.ndarray:
        """Advance the state by one input vector and return the new state."""
        u = self._check_input(u)
        self.r = self._recur(self.r, self.W_in @ u + self.d)
        return self.r.copy()

    def output(self) -> np.ndarray:
        """Readout of the current state."""
        if not self.trained:
            raise NotTrainedError("model has no trained readout")
        return self.W_out @ self._features(self.r)

    def collect(self, inputs) -> np.ndarray:
        """Drive with ``inputs`` from the current state; return features as columns."""
        U = as_array(inputs)
        if U.shape[1] != self.n_inputs:
            raise ShapeError(f"expected {self.n_inputs} input channels, got {U.shape[1]}")
        if not np.all(np.isfinite(U)):
            raise NumericError("training inputs contain non-finite values")
        drive = U @ self.W_in.T + self.d
        r = self.r
        first = self._features(r)
        F = np.empty((first.size, U.shape[0]))
        for k in range(U.shape[0]):
            r = self._recur(r, drive[k])
            F[:, k] = self._features(r)
        self.r = r
        return F

    def train(self, inputs, targets, washout: int = 0):
        """Teacher-forced ridge training of the readout.

        The state is reset to zero, driven through every input, and the
        feature vector after input ``k`` is regressed on target ``k``. The
        first ``washout`` columns are discarded.

        Returns:
            ``self``, trained, with the state left after the last input.
        """
        U, Y = as_array(inputs), as_array(targets)
        if U.shape[0] != Y.shape[0]:
            raise ShapeError(f"{U.shape[0]} inputs but {Y.shape[0]} targets")
        if Y.shape[1] != self.n_outputs:
            raise ShapeError(f"expected {self.n_outputs} target channels, got {Y.shape[1]}")
        if not 0 <= washout < U.shape[0]:
            raise ParameterError(f"washout {washout} must be below the training length {U.shape[0]}")
        self.reset_state()
        F = self.collect(U)[:, washout:]
        Yt = Y[washout:].T
        self.W_out = core_math.ridge_solve(Yt, F, self.beta)
        fit = (self.W_out @ F).T
        try:
            train_err = nrmse(Yt.T, fit)
        except ParameterError:
            train_err = 0.0 if np.allclose(fit, 0.0) else float("inf")
        self.metadata.update(train_nrmse=train_err, washout=int(washout),
                             train_length=int(U.shape[0]),
                             last_input=U[-1].tolist(), last_target=Y[-1].tolist())
        return self

    def predict(self, steps: int, u0=None, feedback: Optional[Feedback] = None,
                dt: float = 1.0) -> TimeSeries:
        """Closed-loop rollout.

        Each step drives the reservoir with the current input, reads out
        ``y`` and forms the next input as ``feedback(y, u)``. By default
        ``feedback`` returns ``y`` itself, which needs as many outputs as
        inputs. ``u0`` defaults to ``feedback`` applied to the last training
        target and input, continuing the training sequence.

        Rollouts that diverge are not interrupted; the returned values then
        contain ``inf`` or ``nan``.
        """
        if not self.trained:
            raise NotTrainedError("predict needs a trained model")
        if steps < 0:
            raise ParameterError("steps must be non-negative")
        if feedback is None:
            if self.n_outputs != self.n_inputs:
                raise ShapeError("closed loop needs n_outputs == n_inputs or a feedback map")
            feedback = identity_feedback
        if u0 is None:
            if "last_target" not in self.metadata:
                raise ParameterError("no initial input given and none stored from training")
            u0 = feedback(np.asarray(self.metadata["last_target"], dtype=float),
                          np.asarray(self.metadata["last_input"], dtype=float))
        u = self._check_input(u0)
        out = np.empty((steps, self.n_outputs))
        r = self.r
        with np.errstate(over="ignore", invalid="ignore"):
            for k in range(steps):
                r = self._recur(r, self.W_in @ u + self.d)
                y = self.W_out @ self._features(r)
                out[k] = y
                u = np.ravel(feedback(y, u))
        self.r = r
        return TimeSeries(out, dt)

    # -- serialization helpers -----------------------------------------
    def _common_dict(self) -> dict:
        return {
            "n_inputs": self.n_inputs,
            "n_outputs": self.n_outputs,
            "W_in": self.W_in.tolist(),
            "d": self.d.tolist(),
            "r": self.r.tolist(),
            "W_out": None if self.W_out is None else self.W_out.tolist(),
            "metadata": self.metadata,
        }

    def _load_common(self, d: dict):
        self.n_inputs = int(d["n_inputs"])
        self.n_outputs = int(d["n_outputs"])
        self.W_in = np.asarray(d["W_in"], dtype=float).reshape(-1, self.n_inputs)
        self.d = np.asarray(d["d"], dtype=float)
        self.r = np.asarray(d["r"], dtype=float)
        self.W_out = None if d["W_out"] is None else np.asarray(d["W_out"], dtype=float)
        self.metadata = dict(d.get("metadata", {}))
