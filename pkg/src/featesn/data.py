"""Time series containers, chaotic-system generators and data plumbing.

Everything the experiments consume flows through :class:`TimeSeries`:
RK4 trajectories of the Lorenz and Rössler systems, measurement noise,
hourly traffic counts read from CSV, and delay embeddings of scalar
observations.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np
import pandas as pd

from .exceptions import DataError, ParameterError, ShapeError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


@dataclass
class TimeSeries:
    """Uniformly sampled multivariate series.

    Attributes:
        values: Array of shape ``(N, d)``; 1-D input is promoted to one column.
        dt: Sampling interval.
        start_time: Optional ISO-8601 timestamp of the first sample.
        metadata: Free-form provenance (generator parameters, gap counts, ...).
    """

    values: np.ndarray
    dt: float = 1.0
    start_time: Optional[str] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals.reshape(-1, 1)
        if vals.ndim != 2:
            raise ShapeError(f"time series values must be 1-D or 2-D, got {vals.ndim}-D")
        if not self.dt > 0:
            raise ParameterError(f"dt must be positive, got {self.dt!r}")
        self.values = vals

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def slice(self, start: int, stop: int) -> "TimeSeries":
        return TimeSeries(self.values[start:stop].copy(), self.dt, None, dict(self.metadata))


def as_array(data) -> np.ndarray:
    """Return the ``(N, d)`` value array of a TimeSeries or array-like."""
    if isinstance(data, TimeSeries):
        return data.values
    arr = np.asarray(data, dtype=float)
    return arr.reshape(-1, 1) if arr.ndim == 1 else arr


# ---------------------------------------------------------------------------
# Chaotic systems


@dataclass
class LorenzParams:
    sigma: float = 10.0
    rho: float = 28.0
    beta: float = 8.0 / 3.0
    initial_state: Sequence[float] = (1.0, 1.0, 1.0)
    dt: float = 0.02
    n_samples: int = 10_000
    discard: int = 1000


@dataclass
class RosslerParams:
    """Rössler parameters.

    ``printed_form`` swaps the first equation to ``dx/dt = -y - x``; the
    default is the standard ``dx/dt = -y - z``.
    """

    a: float = 0.5
    b: float = 2.0
    c: float = 4.0
    initial_state: Sequence[float] = (1.0, 1.0, 1.0)
    dt: float = 0.1
    n_samples: int = 10_000
    discard: int = 1000
    printed_form: bool = False


def rk4(f: Callable[[np.ndarray], np.ndarray], x0, dt: float, n_samples: int,
        discard: int = 0) -> np.ndarray:
    """Fixed-step classical Runge-Kutta integration of ``dx/dt = f(x)``.

    Sample 0 is the state after ``discard`` steps from ``x0`` (``x0`` itself
    when ``discard == 0``).
    """
    if not dt > 0:
        raise ParameterError(f"dt must be positive, got {dt!r}")
    if n_samples < 0 or discard < 0:
        raise ParameterError("n_samples and discard must be non-negative")
    x = np.array(x0, dtype=float)
    out = np.empty((n_samples, x.size))
    h2 = 0.5 * dt
    for i in range(discard + n_samples):
        if i >= discard:
            out[i - discard] = x
        k1 = f(x)
        k2 = f(x + h2 * k1)
        k3 = f(x + h2 * k2)
        k4 = f(x + dt * k3)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return out


def _check_positive(**kw):
    for name, val in kw.items():
        if not val > 0:
            raise ParameterError(f"{name} must be positive, got {val!r}")


def lorenz_rhs(params: LorenzParams):
    s, r, b = params.sigma, params.rho, params.beta

    def f(x):
        return np.array([s * (x[1] - x[0]), x[0] * (r - x[2]) - x[1], x[0] * x[1] - b * x[2]])
    return f


def rossler_rhs(params: RosslerParams):
    a, b, c = params.a, params.b, params.c
    if params.printed_form:
        def f(x):
            return np.array([-x[1] - x[0], x[0] + a * x[1], b + x[2] * (x[0] - c)])
    else:
        def f(x):
            return np.array([-x[1] - x[2], x[0] + a * x[1], b + x[2] * (x[0] - c)])
    return f


def generate_lorenz(params: LorenzParams = LorenzParams()) -> TimeSeries:
    """Integrate the Lorenz system with RK4 at step ``params.dt``."""
    _check_positive(sigma=params.sigma, rho=params.rho, beta=params.beta)
    vals = rk4(lorenz_rhs(params), params.initial_state, params.dt,
               params.n_samples, params.discard)
    meta = {"system": "lorenz", "sigma": params.sigma, "rho": params.rho,
            "beta": params.beta, "initial_state": list(map(float, params.initial_state)),
            "discard": params.discard}
    return TimeSeries(vals, params.dt, metadata=meta)


def generate_rossler(params: RosslerParams = RosslerParams()) -> TimeSeries:
    """Integrate the Rössler system with RK4 at step ``params.dt``."""
    _check_positive(a=params.a, b=params.b, c=params.c)
    vals = rk4(rossler_rhs(params), params.initial_state, params.dt,
               params.n_samples, params.discard)
    meta = {"system": "rossler", "a": params.a, "b": params.b, "c": params.c,
            "initial_state": list(map(float, params.initial_state)),
            "discard": params.discard, "printed_form": params.printed_form}
    return TimeSeries(vals, params.dt, metadata=meta)


def rossler_fixed_point(a: float, b: float, c: float) -> np.ndarray:
    """The equilibrium of the standard Rössler system nearest the origin.

    From ``y = -x/a``, ``z = x/a`` and ``b + z(x - c) = 0`` we get
    ``x^2 - c x + a b = 0``.
    """
    disc = c * c - 4.0 * a * b
    if disc < 0:
        raise ParameterError("Rössler parameters admit no real equilibrium")
    x = 0.5 * (c - np.sqrt(disc))
    return np.array([x, -x / a, x / a])


# ---------------------------------------------------------------------------
# Noise, embedding, splitting


def channel_std(series) -> np.ndarray:
    return as_array(series).std(axis=0)


def add_noise(series: TimeSeries, sigma_v, seed: int) -> TimeSeries:
    """Add i.i.d. zero-mean Gaussian noise.

    Args:
        series: Clean series.
        sigma_v: Noise standard deviation, scalar or one value per channel.
        seed: Generator seed.
    """
    sig = np.asarray(sigma_v, dtype=float)
    if np.any(sig < 0):
        raise ParameterError(f"noise level must be non-negative, got {sigma_v!r}")
    vals = series.values
    if np.all(sig == 0):
        noisy = vals.copy()
    else:
        rng = np.random.default_rng(seed)
        noisy = vals + sig * rng.standard_normal(vals.shape)
    meta = dict(series.metadata, noise_sigma=sig.tolist(), noise_seed=int(seed))
    return TimeSeries(noisy, series.dt, series.start_time, meta)


@dataclass(frozen=True)
class EmbeddingSpec:
    m: int
    lag: int = 1

    def __post_init__(self):
        if self.m < 1 or self.lag < 1:
            raise ParameterError(f"embedding needs m >= 1 and lag >= 1, got {self}")


def delay_embed(series, spec: EmbeddingSpec) -> TimeSeries:
    """Delay-embed a scalar series, newest sample first.

    Row ``k`` of the result is ``[x(t_j), x(t_j - lag), ..., x(t_j - (m-1) lag)]``
    with ``j = k + (m-1) lag``.
    """
    x = as_array(series)
    if x.shape[1] != 1:
        raise ShapeError(f"delay embedding needs a scalar series, got {x.shape[1]} channels")
    x = x[:, 0]
    span = (spec.m - 1) * spec.lag
    if x.size <= span:
        raise DataError(f"series of length {x.size} too short for embedding {spec}")
    n_out = x.size - span
    cols = [x[span - i * spec.lag: span - i * spec.lag + n_out] for i in range(spec.m)]
    emb = np.column_stack(cols)
    dt = series.dt if isinstance(series, TimeSeries) else 1.0
    meta = dict(series.metadata) if isinstance(series, TimeSeries) else {}
    meta["embedding"] = {"m": spec.m, "lag": spec.lag}
    return TimeSeries(emb, dt, metadata=meta)


def closed_loop_embed_adapter(prediction, embedding) -> np.ndarray:
    """Shift a lag-1 delay vector: prepend the new prediction, drop the oldest."""
    y = np.ravel(np.asarray(prediction, dtype=float))
    if y.size != 1:
        raise ShapeError(f"embedding adapter needs a scalar prediction, got {y.size} values")
    emb = np.ravel(np.asarray(embedding, dtype=float))
    return np.concatenate([y, emb[:-1]])


def split(series: TimeSeries, train_n: int, test_n: int):
    """Contiguous train/test split, test immediately following train."""
    n = len(series)
    if train_n < 0 or test_n < 0 or train_n + test_n > n:
        raise ParameterError(f"cannot split {n} samples into {train_n} + {test_n}")
    return series.slice(0, train_n), series.slice(train_n, train_n + test_n)


# ---------------------------------------------------------------------------
# CSV I/O


def write_series_csv(series: TimeSeries, path: PathLike,
                     columns: Optional[Sequence[str]] = None,
                     metadata: Optional[dict] = None) -> Path:
    """Write a series as a headed CSV plus a one-line JSON sidecar."""
    path = Path(path)
    cols = list(columns) if columns else [f"x{i}" for i in range(series.dim)]
    df = pd.DataFrame(series.values, columns=cols)
    if series.start_time is not None:
        stamps = pd.date_range(series.start_time, periods=len(series),
                               freq=pd.to_timedelta(series.dt, unit="h"))
        df.insert(0, "timestamp", stamps.strftime("%Y-%m-%dT%H:%M:%S"))
    df.to_csv(path, index=False, lineterminator="\n")
    side = {"dt": series.dt, "start_time": series.start_time, "columns": cols}
    side.update(series.metadata)
    if metadata:
        side.update(metadata)
    sidecar_path(path).write_text(json.dumps(side, sort_keys=True) + "\n")
    return path


def sidecar_path(path: PathLike) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def read_series_csv(path: PathLike) -> TimeSeries:
    """Read a CSV written by :func:`write_series_csv` (sidecar optional)."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"data file not found: {path}")
    try:
        df = pd.read_csv(path, float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot parse {path}: {exc}") from exc
    meta = {}
    side = sidecar_path(path)
    if side.exists():
        meta = json.loads(side.read_text())
    start = None
    if "timestamp" in df.columns:
        start = str(df["timestamp"].iloc[0])
        df = df.drop(columns="timestamp")
    if df.empty or not all(np.issubdtype(t, np.number) for t in df.dtypes):
        raise DataError(f"{path} has no numeric data columns")
    dt = float(meta.pop("dt", 1.0))
    meta.pop("start_time", None)
    return TimeSeries(df.to_numpy(dtype=float), dt, start, meta)


# ---------------------------------------------------------------------------
# Traffic counts

#: Fraction of interpolated hours above which a loaded series is flagged.
MISSING_WARN_FRACTION = 0.10


def load_traffic_csv(path: PathLike, column: str, resample: str = "h") -> TimeSeries:
    """Load one sensor's counts as an hourly scalar series.

    The first CSV column holds ISO-8601 timestamps. Sub-hour rows are summed
    into their hour; hours with no rows are filled by linear interpolation
    and counted in ``metadata["gaps"]``.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"traffic file not found: {path}")
    try:
        df = pd.read_csv(path, encoding="utf-8", float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot parse {path}: {exc}") from exc
    if column not in df.columns[1:]:
        raise DataError(f"column {column!r} not in {list(df.columns[1:])}")
    try:
        stamps = pd.to_datetime(df.iloc[:, 0], format="ISO8601")
    except (ValueError, TypeError) as exc:
        raise DataError(f"first column of {path} is not ISO-8601 timestamps") from exc
    counts = pd.to_numeric(df[column], errors="coerce")
    s = pd.Series(counts.to_numpy(), index=pd.DatetimeIndex(stamps)).sort_index()
    hourly = s.resample(resample).sum(min_count=1)
    gaps = int(hourly.isna().sum())
    filled = hourly.interpolate(method="linear", limit_direction="both")
    frac = gaps / len(hourly) if len(hourly) else 0.0
    meta = {"source": str(path), "column": column, "gaps": gaps,
            "missing_fraction": frac, "missing_warning": frac > MISSING_WARN_FRACTION}
    if meta["missing_warning"]:
        logger.warning("%s: %.1f%% of hours missing in column %s", path, 100 * frac, column)
    dt = pd.Timedelta(1, unit=resample) / pd.Timedelta(hours=1)
    start = hourly.index[0].strftime("%Y-%m-%dT%H:%M:%S")
    return TimeSeries(filled.to_numpy(dtype=float), dt, start, meta)


def synthetic_traffic(n_hours: int = 1440, seed: int = 0, base: float = 200.0,
                      amplitude: float = 150.0, noise: float = 15.0,
                      start_time: str = "2022-09-01T00:00:00") -> TimeSeries:
    """Daily-periodic stand-in for hourly vehicle counts."""
    t = np.arange(n_hours, dtype=float)
    vals = base + amplitude * np.sin(2.0 * np.pi * t / 24.0)
    if noise > 0:
        vals = vals + np.random.default_rng(seed).normal(0.0, noise, n_hours)
    meta = {"system": "synthetic_traffic", "base": base, "amplitude": amplitude,
            "noise": noise, "seed": int(seed)}
    return TimeSeries(vals, 1.0, start_time, meta)
