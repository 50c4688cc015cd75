"""Feature-based echo-state network.

Each feature (a subset of input channels) drives its own small linear
reservoir block. All blocks share one recurrent matrix ``W_r`` so the full
transition is ``I ⊗ W_r``, the input map is ``W_f ⊗ W_b`` and the output is
read linearly from ``[1, r, psi(r)]``. Readout weights grouped by block
measure how much each feature contributes, and weak blocks can be pruned.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import List, NamedTuple, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from . import core_math
from ._base import (ReservoirModel, check_alpha, draw_reservoir, sparse_from_dict,
                    sparse_to_dict)
from .exceptions import NotTrainedError, ParameterError

READOUT_KINDS = ("square", "tanh")
MAX_FULL_FEATURE_INPUTS = 20


@dataclass
class FeatureMatrix:
    """Binary ``N_f x m`` selection matrix plus the subset behind each row.

    Row ``i`` has a one in column ``j`` iff input ``j`` belongs to feature
    ``i``. Labels are tuples of 0-based input indices.
    """

    W_f: np.ndarray
    labels: List[Tuple[int, ...]] = field(default_factory=list)

    def __post_init__(self):
        W = np.atleast_2d(np.asarray(self.W_f, dtype=float))
        if W.size == 0:
            raise ParameterError("feature matrix is empty")
        if not np.all((W == 0) | (W == 1)):
            raise ParameterError("feature matrix entries must be 0 or 1")
        if np.any(W.sum(axis=1) == 0):
            raise ParameterError("feature matrix has an all-zero row")
        if len({row.tobytes() for row in W}) != W.shape[0]:
            raise ParameterError("feature matrix has duplicate rows")
        self.W_f = W
        derived = [tuple(int(j) for j in np.flatnonzero(row)) for row in W]
        if self.labels and [tuple(lab) for lab in self.labels] != derived:
            raise ParameterError("feature labels do not match the matrix rows")
        self.labels = derived

    @property
    def n_features(self) -> int:
        return self.W_f.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.W_f.shape[1]

    def label_names(self) -> List[str]:
        """Human-readable labels with 1-based indices, e.g. ``{1,3}`` or ``{1-40}``."""
        return [_format_label(lab) for lab in self.labels]

    def subset(self, rows: Sequence[int]) -> "FeatureMatrix":
        return FeatureMatrix(self.W_f[list(rows)])

    @classmethod
    def from_subsets(cls, subsets: Sequence[Sequence[int]], m: int) -> "FeatureMatrix":
        W = np.zeros((len(subsets), m))
        for i, s in enumerate(subsets):
            W[i, list(s)] = 1.0
        return cls(W)


def _format_label(label: Sequence[int]) -> str:
    parts = []
    for _, run in itertools.groupby(enumerate(label), key=lambda t: t[1] - t[0]):
        idx = [j + 1 for _, j in run]
        parts.append(f"{idx[0]}-{idx[-1]}" if len(idx) > 2 else ",".join(map(str, idx)))
    return "{" + ",".join(parts) + "}"


def full_feature_matrix(m: int) -> FeatureMatrix:
    """All ``2^m - 1`` nonempty input subsets, by size then lexicographically."""
    if int(m) != m or not 1 <= m <= MAX_FULL_FEATURE_INPUTS:
        raise ParameterError(f"full feature set needs 1 <= m <= {MAX_FULL_FEATURE_INPUTS}, got {m!r}")
    subsets = [c for k in range(1, m + 1) for c in itertools.combinations(range(m), k)]
    return FeatureMatrix.from_subsets(subsets, m)


def prefix_feature_matrix(m: int) -> FeatureMatrix:
    """Feature ``i`` holds the ``i`` most recent delays (lower-triangular ones)."""
    if int(m) != m or m < 1:
        raise ParameterError(f"m must be a positive integer, got {m!r}")
    return FeatureMatrix(np.tril(np.ones((m, m))))


def singleton_feature_matrix(m: int) -> FeatureMatrix:
    """One feature per input channel (identity matrix)."""
    if int(m) != m or m < 1:
        raise ParameterError(f"m must be a positive integer, got {m!r}")
    return FeatureMatrix(np.eye(m))


FEATURE_CONSTRUCTORS = {
    "full": full_feature_matrix,
    "prefix": prefix_feature_matrix,
    "singleton": singleton_feature_matrix,
}


@dataclass(frozen=True)
class FeatEsnHyperparams:
    """Hyperparameters of :class:`FeatEsnModel`.

    Attributes:
        b: Block size, the number of nodes per feature reservoir.
        alpha: Leaking rate.
        beta: Tikhonov regularization of the readout.
        p: Connection probability of the block graph.
        rho: Target spectral radius of ``W_r``.
        seed: Master seed.
        readout_kind: Elementwise nonlinearity ``psi``, ``"square"`` or ``"tanh"``.
        shared_block: Use one input block vector for every feature instead of
            drawing one per feature.
    """

    b: int
    alpha: float = 0.3
    beta: float = 1e-6
    p: float = 0.01
    rho: float = 0.9
    seed: int = 0
    readout_kind: str = "square"
    shared_block: bool = True

    def __post_init__(self):
        if int(self.b) != self.b or self.b < 1:
            raise ParameterError(f"block size must be a positive integer, got {self.b!r}")
        check_alpha(self.alpha)
        if not self.beta > 0:
            raise ParameterError(f"beta must be positive, got {self.beta!r}")
        if not 0 < self.p < 1:
            raise ParameterError(f"connection probability must lie in (0, 1), got {self.p!r}")
        if not self.rho > 0:
            raise ParameterError(f"spectral radius must be positive, got {self.rho!r}")
        if self.readout_kind not in READOUT_KINDS:
            raise ParameterError(f"readout_kind must be one of {READOUT_KINDS}")


def psi(r: np.ndarray, kind: str) -> np.ndarray:
    if kind == "square":
        return r * r
    if kind == "tanh":
        return np.tanh(r)
    raise ParameterError(f"unknown readout kind {kind!r}")


def readout_vector(r, kind: str = "square") -> np.ndarray:
    """Concatenate ``[1, r, psi(r)]``."""
    r = np.ravel(np.asarray(r, dtype=float))
    return np.concatenate(([1.0], r, psi(r, kind)))


class FeatureContribution(NamedTuple):
    label: Tuple[int, ...]
    linear_norm: float
    nonlinear_norm: float

    @property
    def total(self) -> float:
        return math.hypot(self.linear_norm, self.nonlinear_norm)


class FeatEsnModel(ReservoirModel):
    """Parallel linear feature reservoirs with a nonlinear readout.

    Args:
        features: Which inputs drive which block.
        n_outputs: Output dimension.
        hyper: Hyperparameters.
    """

    kind = "feat_esn"

    def __init__(self, features: FeatureMatrix, n_outputs: int, hyper: FeatEsnHyperparams):
        if n_outputs < 1:
            raise ParameterError("output dimension must be positive")
        self.features = features
        self.hyper = hyper
        self.n_inputs = features.n_inputs
        self.n_outputs = int(n_outputs)
        b, nf = hyper.b, features.n_features
        rng_b = np.random.default_rng(core_math.derive_seed(hyper.seed, 0))
        if hyper.shared_block:
            self.W_b = rng_b.uniform(-0.5, 0.5, (1, b))
            self.W_in = core_math.kronecker(features.W_f, self.W_b.T)
        else:
            self.W_b = rng_b.uniform(-0.5, 0.5, (nf, b))
            self.W_in = np.vstack([core_math.kronecker(features.W_f[i:i + 1], self.W_b[i:i + 1].T)
                                   for i in range(nf)])
        self.W_r, draws = draw_reservoir(b, hyper.p, hyper.rho, core_math.derive_seed(hyper.seed, 1))
        self._W_r_dense = self.W_r.toarray()
        rng_d = np.random.default_rng(core_math.derive_seed(hyper.seed, 2))
        self.d = rng_d.uniform(-0.5, 0.5, nf * b)
        self.r = np.zeros(nf * b)
        self.W_out = None
        self.metadata = {"reservoir_draws": draws}

    @property
    def beta(self) -> float:
        return self.hyper.beta

    @property
    def n_features(self) -> int:
        return self.features.n_features

    @property
    def W(self) -> sp.csr_matrix:
        """Full block-diagonal transition ``I_{N_f} ⊗ W_r``."""
        return sp.kron(sp.identity(self.n_features, format="csr"), self.W_r, format="csr")

    def _recur(self, r, drive):
        a = self.hyper.alpha
        b = self.hyper.b
        rec = (r.reshape(-1, b) @ self._W_r_dense.T).reshape(-1)
        return (1.0 - a) * r + a * (rec + drive)

    def _features(self, r):
        return readout_vector(r, self.hyper.readout_kind)

    def readout_vector(self) -> np.ndarray:
        return self._features(self.r)

    def block_slices(self, i: int) -> Tuple[slice, slice]:
        """Columns of ``W_out`` fed by block ``i`` (linear part, nonlinear part)."""
        b, n = self.hyper.b, self.state_size
        return slice(1 + i * b, 1 + (i + 1) * b), slice(1 + n + i * b, 1 + n + (i + 1) * b)

    # -- serialization --------------------------------------------------
    def to_dict(self) -> dict:
        d = self._common_dict()
        d.update(kind=self.kind, hyper=asdict(self.hyper),
                 features={"W_f": self.features.W_f.tolist(),
                           "labels": [list(lab) for lab in self.features.labels]},
                 W_b=self.W_b.tolist(), W_r=sparse_to_dict(self.W_r))
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FeatEsnModel":
        obj = cls.__new__(cls)
        obj.hyper = FeatEsnHyperparams(**d["hyper"])
        obj.features = FeatureMatrix(np.asarray(d["features"]["W_f"], dtype=float),
                                     [tuple(lab) for lab in d["features"]["labels"]])
        obj._load_common(d)
        obj.W_b = np.asarray(d["W_b"], dtype=float)
        obj.W_r = sparse_from_dict(d["W_r"])
        obj._W_r_dense = obj.W_r.toarray()
        return obj


def feature_contributions(model: FeatEsnModel) -> List[FeatureContribution]:
    """Frobenius norms of the readout weights attached to each feature block.

    The bias column is excluded; linear and nonlinear parts are reported
    separately.
    """
    if not model.trained:
        raise NotTrainedError("feature contributions need a trained model")
    out = []
    for i, label in enumerate(model.features.labels):
        lin, nonlin = model.block_slices(i)
        out.append(FeatureContribution(label,
                                       float(np.linalg.norm(model.W_out[:, lin])),
                                       float(np.linalg.norm(model.W_out[:, nonlin]))))
    return out


def suggest_prune_threshold(contributions: Sequence[FeatureContribution]) -> float:
    """Threshold in the widest gap of the sorted total norms.

    Gaps are measured as ratios; the threshold is the geometric mean of the
    two norms on either side of the widest one. With fewer than two
    features nothing can be separated and ``0.0`` is returned.
    """
    totals = sorted(c.total for c in contributions)
    if len(totals) < 2:
        return 0.0
    tiny = np.finfo(float).tiny
    logs = np.log(np.maximum(totals, tiny))
    k = int(np.argmax(np.diff(logs)))
    return float(math.sqrt(max(totals[k], tiny) * totals[k + 1]))


def prune(model: FeatEsnModel, threshold: float, retrain_data=None,
          washout: int = 0) -> FeatEsnModel:
    """Drop feature blocks whose combined readout norm is below ``threshold``.

    Args:
        model: Trained model; it is not modified.
        threshold: Non-negative norm threshold.
        retrain_data: Optional ``(inputs, targets)`` to retrain the reduced
            readout. Without it the surviving readout columns are kept.
        washout: Washout used when retraining.

    Returns:
        A new, smaller model.
    """
    if not model.trained:
        raise NotTrainedError("prune needs a trained model")
    if threshold < 0:
        raise ParameterError("prune threshold must be non-negative")
    keep = [i for i, c in enumerate(feature_contributions(model)) if not c.total < threshold]
    if not keep:
        raise ParameterError("pruning would remove every feature")
    b = model.hyper.b
    state_idx = np.concatenate([np.arange(i * b, (i + 1) * b) for i in keep])
    n = model.state_size
    new = model.copy()
    new.features = model.features.subset(keep)
    new.W_in = model.W_in[state_idx]
    if not model.hyper.shared_block:
        new.W_b = model.W_b[keep]
    new.d = model.d[state_idx]
    new.r = model.r[state_idx]
    cols = np.concatenate(([0], 1 + state_idx, 1 + n + state_idx))
    new.W_out = model.W_out[:, cols]
    new.metadata = dict(model.metadata, pruned_from=model.n_features,
                        prune_threshold=float(threshold))
    if retrain_data is not None:
        inputs, targets = retrain_data
        new.train(inputs, targets, washout=washout)
    return new
