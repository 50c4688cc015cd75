"""Prediction scores and Monte-Carlo aggregation."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .data import as_array
from .exceptions import ParameterError, ShapeError


def _pair(truth, pred):
    x, xh = as_array(truth), as_array(pred)
    if x.shape != xh.shape:
        raise ShapeError(f"truth {x.shape} and prediction {xh.shape} differ in shape")
    return x, xh


def nrmse(truth, pred) -> float:
    """Root of summed squared error over summed squared truth norm.

    The denominator is the raw (uncentered) energy of ``truth``.
    """
    x, xh = _pair(truth, pred)
    den = float(np.sum(x * x))
    if den == 0.0:
        raise ParameterError("NRMSE undefined for an identically zero truth series")
    with np.errstate(over="ignore", invalid="ignore"):
        num = float(np.sum((x - xh) ** 2))
    if not np.isfinite(num):
        return math.inf
    return math.sqrt(num / den)


def pearson(truth, pred) -> float:
    """Pearson correlation of two (possibly multichannel) series.

    Samples are centered by their time averages; the inner products run
    over time and channels together.
    """
    x, xh = _pair(truth, pred)
    xc = x - x.mean(axis=0)
    yc = xh - xh.mean(axis=0)
    nx = math.sqrt(float(np.sum(xc * xc)))
    ny = math.sqrt(float(np.sum(yc * yc)))
    if nx == 0.0 or ny == 0.0:
        raise ParameterError("Pearson correlation undefined for a zero-variance series")
    r = float(np.sum(xc * yc)) / (nx * ny)
    return min(1.0, max(-1.0, r))


@dataclass
class TrialResult:
    """Scores of one Monte-Carlo trial."""

    variant: str
    block_size: int
    trial: int
    seed: int
    horizon: int
    nrmse: float
    pearson: Optional[float] = None
    train_nrmse: Optional[float] = None
    status: str = "ok"
    error: Optional[str] = None

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("nrmse", "pearson", "train_nrmse"):
            v = d[key]
            if v is not None and not math.isfinite(v):
                d[key] = None
                d["diverged"] = True
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrialResult":
        d = dict(d)
        diverged = d.pop("diverged", False)
        if diverged and d.get("nrmse") is None and d.get("status") == "ok":
            d["nrmse"] = math.inf
        return cls(**d)


def _summary(vals: np.ndarray) -> dict:
    if vals.size == 0:
        return {"median": None, "iqr": None, "mean": None, "std": None}
    q1, med, q3 = np.percentile(vals, [25, 50, 75])
    with np.errstate(invalid="ignore"):
        return {"median": float(med), "iqr": float(q3 - q1),
                "mean": float(np.mean(vals)), "std": float(np.std(vals))}


def aggregate(results: Sequence[TrialResult],
              group_by: Iterable[str] = ("variant", "block_size")) -> list:
    """Median, IQR, mean and std of NRMSE and Pearson per group.

    Failed trials are counted but excluded from the statistics. Rows come
    out sorted by the group key.
    """
    results = list(results)
    if not results:
        raise ParameterError("cannot aggregate an empty result list")
    keys = tuple(group_by)
    groups: dict = {}
    for res in results:
        groups.setdefault(tuple(getattr(res, k) for k in keys), []).append(res)
    rows = []
    for key in sorted(groups):
        members = groups[key]
        ok = [r for r in members if r.status == "ok"]
        row = dict(zip(keys, key))
        row["trials"] = len(members)
        row["failed"] = len(members) - len(ok)
        row["nrmse"] = _summary(np.array([r.nrmse for r in ok], dtype=float))
        pear = np.array([r.pearson for r in ok if r.pearson is not None
                         and math.isfinite(r.pearson)], dtype=float)
        row["pearson"] = _summary(pear)
        rows.append(row)
    return rows


def bootstrap_median_wins(a, b, n_resamples: int = 50, seed: int = 0) -> int:
    """Count paired bootstrap resamples in which ``median(a) < median(b)``.

    ``a[i]`` and ``b[i]`` belong to the same trial and are resampled together.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size == 0:
        raise ShapeError("bootstrap needs two equal-length non-empty 1-D samples")
    rng = np.random.default_rng(seed)
    wins = 0
    for _ in range(n_resamples):
        idx = rng.integers(0, a.size, a.size)
        wins += bool(np.median(a[idx]) < np.median(b[idx]))
    return wins
