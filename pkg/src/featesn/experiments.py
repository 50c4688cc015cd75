"""Experiment manifests, seeded Monte-Carlo trials and result bundles.

A manifest is a flat JSON document. Trial ``t`` at block size ``b`` draws
its data realization from ``derive_seed(seed, 0, t)`` (shared across block
sizes and variants) and its reservoir from ``derive_seed(seed, 1, b, t)``
(shared by the Feat-ESN and the classic ESN of that trial), so both
variants always see identical data.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from . import data as dp
from .core_math import derive_seed
from .esn import EsnHyperparams, EsnModel
from .exceptions import ConfigError, DataError, FeatEsnError
from .feat_esn import (FEATURE_CONSTRUCTORS, FeatEsnHyperparams, FeatEsnModel,
                       feature_contributions)
from .metrics import TrialResult, aggregate, nrmse, pearson

logger = logging.getLogger(__name__)

EXPERIMENTS = ("lorenz", "rossler", "traffic", "custom")
VARIANTS = ("feat_esn", "esn")
REPORT_FORMAT = "featesn-report"
MODEL_FORMAT = "featesn-model"
FORMAT_VERSION = 1


@dataclass
class Manifest:
    """Everything needed to reproduce an experiment.

    ``sigma_v`` is an absolute noise level; when it is ``None`` the noise
    level is ``noise_relative`` times the per-channel standard deviation of
    the clean training window. ``offset_range`` bounds a per-trial random
    start offset along the generated trajectory.
    """

    experiment: str = "lorenz"
    dt: float = 0.02
    block_size: int = 5
    block_sizes: List[int] = field(default_factory=lambda: [5])
    features: str = "full"
    embedding_dim: Optional[int] = None
    embedding_lag: int = 1
    p: float = 0.01
    n_train: int = 5000
    readout_kind: str = "square"
    alpha: float = 0.3
    beta: float = 1e-6
    rho: float = 0.9
    shared_block: bool = True
    washout: int = 0
    sigma_v: Optional[float] = None
    noise_relative: float = 0.01
    trials: int = 50
    horizon: int = 500
    seed: int = 0
    variant: str = "feat_esn"
    offset_range: int = 10_000
    initial_state: List[float] = field(default_factory=lambda: [1.0, 1.0, 1.0])
    discard: int = 1000
    rossler_printed_form: bool = False
    data_hours: int = 1440
    sensor_column: str = "sensor_1"
    paths: Dict[str, Optional[str]] = field(default_factory=lambda: {"data": None, "out": "results"})

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if self.features not in FEATURE_CONSTRUCTORS:
            raise ConfigError(f"features must be one of {sorted(FEATURE_CONSTRUCTORS)}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}")
        if not self.block_sizes or any(int(b) != b or b < 1 for b in self.block_sizes):
            raise ConfigError("block_sizes must be a non-empty list of positive integers")
        for name in ("trials", "n_train", "block_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        for name in ("horizon", "washout", "offset_range", "discard"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if self.washout >= self.n_train:
            raise ConfigError("washout must be smaller than n_train")
        if self.embedding_dim is not None and self.embedding_dim < 1:
            raise ConfigError("embedding_dim must be positive")
        if self.embedding_lag != 1 and self.embedding_dim is not None:
            raise ConfigError("closed-loop prediction supports embedding_lag = 1 only")
        self.paths = {"data": None, "out": "results", **(self.paths or {})}

    @classmethod
    def preset(cls, experiment: str, **overrides) -> "Manifest":
        """Reference settings for one of the three experiments."""
        base: Dict[str, Any]
        if experiment == "lorenz":
            base = dict(dt=0.02, block_size=5, block_sizes=[5], n_train=5000,
                        readout_kind="square", alpha=0.3, horizon=500)
        elif experiment == "rossler":
            base = dict(dt=0.1, block_size=5, block_sizes=[5], n_train=1000,
                        readout_kind="square", alpha=0.3, horizon=300, offset_range=5000)
        elif experiment == "traffic":
            base = dict(dt=1.0, block_size=10, block_sizes=[10], n_train=1000,
                        readout_kind="tanh", alpha=0.7, horizon=70, features="prefix",
                        embedding_dim=100, noise_relative=0.0, offset_range=0, trials=10)
        else:
            raise ConfigError(f"no preset for experiment {experiment!r}")
        base.update(experiment=experiment, p=0.01, beta=1e-6)
        base.update(overrides)
        return cls(**base)

    @classmethod
    def from_dict(cls, d: dict) -> "Manifest":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown manifest keys: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "Manifest":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"manifest not found: {path}")
        try:
            return cls.from_dict(json.loads(path.read_text()))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"manifest {path} is not valid JSON: {exc}") from exc

    def to_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# Data


@dataclass
class TrialData:
    """Inputs/targets for training plus what is needed for the rollout."""

    inputs: np.ndarray
    targets: np.ndarray
    truth: np.ndarray
    embedding: Optional[int]
    truth_start: int
    dt: float

    @property
    def feedback(self):
        return dp.closed_loop_embed_adapter if self.embedding else None


def required_length(man: Manifest) -> int:
    span = (man.embedding_dim - 1) * man.embedding_lag if man.embedding_dim else 0
    return span + man.n_train + 1 + man.horizon


def base_series(man: Manifest) -> dp.TimeSeries:
    """Clean series for the experiment, generated or read from ``paths.data``."""
    path = man.paths.get("data")
    if man.experiment in ("lorenz", "rossler"):
        if path and Path(path).exists():
            return dp.read_series_csv(path)
        n = required_length(man) + man.offset_range
        if man.experiment == "lorenz":
            return dp.generate_lorenz(dp.LorenzParams(
                dt=man.dt, n_samples=n, discard=man.discard, initial_state=man.initial_state))
        return dp.generate_rossler(dp.RosslerParams(
            dt=man.dt, n_samples=n, discard=man.discard, initial_state=man.initial_state,
            printed_form=man.rossler_printed_form))
    if man.experiment == "traffic":
        if path:
            p = Path(path)
            if p.exists():
                return dp.load_traffic_csv(p, man.sensor_column)
            raise DataError(f"traffic data file not found: {p}")
        return dp.synthetic_traffic(n_hours=man.data_hours, seed=man.seed)
    if not path:
        raise ConfigError("custom experiments need paths.data")
    return dp.read_series_csv(path)


def trial_data(man: Manifest, series: dp.TimeSeries, data_seed: int,
               offset: Optional[int] = None) -> TrialData:
    """Cut one training/test realization from ``series``.

    The offset is drawn from ``data_seed`` unless given; measurement noise
    (also from ``data_seed``) corrupts only the training window, while the
    truth used for scoring stays clean.
    """
    need = required_length(man)
    slack = len(series) - need
    if slack < 0:
        raise DataError(f"series has {len(series)} samples, experiment needs {need}")
    rng = np.random.default_rng(data_seed)
    if offset is None:
        offset = int(rng.integers(0, min(slack, man.offset_range) + 1))
    noise_seed = int(rng.integers(0, 2**63))
    window = series.values[offset: offset + need]
    if man.embedding_dim:
        if window.shape[1] != 1:
            raise DataError("delay embedding needs a scalar series")
        span = (man.embedding_dim - 1) * man.embedding_lag
        clean = dp.TimeSeries(window, series.dt)
        obs = _noisy(man, clean.slice(0, span + man.n_train + 1), noise_seed)
        emb = dp.delay_embed(obs, dp.EmbeddingSpec(man.embedding_dim, man.embedding_lag)).values
        inputs = emb[:man.n_train]
        targets = obs.values[span + 1: span + 1 + man.n_train]
        first_truth = span + man.n_train + 1
    else:
        clean = dp.TimeSeries(window, series.dt)
        obs = _noisy(man, clean.slice(0, man.n_train + 1), noise_seed)
        inputs = obs.values[:man.n_train]
        targets = obs.values[1:man.n_train + 1]
        first_truth = man.n_train + 1
    truth = window[first_truth: first_truth + man.horizon]
    return TrialData(inputs, targets, truth, man.embedding_dim, offset + first_truth, series.dt)


def _noisy(man: Manifest, clean: dp.TimeSeries, seed: int) -> dp.TimeSeries:
    sigma = man.sigma_v if man.sigma_v is not None else man.noise_relative * dp.channel_std(clean)
    return dp.add_noise(clean, sigma, seed)


# ---------------------------------------------------------------------------
# Models and trials


def build_model(man: Manifest, variant: str, b: int, seed: int, n_inputs: int, n_outputs: int):
    feats = FEATURE_CONSTRUCTORS[man.features](n_inputs)
    if variant == "feat_esn":
        hyper = FeatEsnHyperparams(b=b, alpha=man.alpha, beta=man.beta, p=man.p, rho=man.rho,
                                   seed=seed, readout_kind=man.readout_kind,
                                   shared_block=man.shared_block)
        return FeatEsnModel(feats, n_outputs, hyper)
    hyper = EsnHyperparams(n=feats.n_features * b, alpha=man.alpha, beta=man.beta, p=man.p,
                           rho=man.rho, seed=seed)
    return EsnModel(n_inputs, n_outputs, hyper)


def _score(truth, pred):
    err = nrmse(truth, pred)
    try:
        corr = pearson(truth, pred) if np.all(np.isfinite(pred)) else None
    except FeatEsnError:
        corr = None
    return err, corr


def run_trial(man: Manifest, td: TrialData, variant: str, b: int, trial: int, seed: int):
    """Train and roll out one model; failures become ``status="failed"`` records."""
    contrib = None
    pred = None
    try:
        model = build_model(man, variant, b, seed, td.inputs.shape[1], td.targets.shape[1])
        model.train(td.inputs, td.targets, washout=man.washout)
        pred = model.predict(man.horizon, feedback=td.feedback).values
        if man.horizon:
            err, corr = _score(td.truth, pred)
        else:
            err, corr = 0.0, None
        res = TrialResult(variant, b, trial, seed, man.horizon, err, corr,
                          model.metadata["train_nrmse"])
        if variant == "feat_esn":
            names = model.features.label_names()
            contrib = [(names[i], c.linear_norm, c.nonlinear_norm)
                       for i, c in enumerate(feature_contributions(model))]
    except Exception as exc:  # noqa: BLE001 - one bad trial must not stop the sweep
        logger.warning("trial %s b=%d #%d failed: %s", variant, b, trial, exc)
        res = TrialResult(variant, b, trial, seed, man.horizon, math.nan,
                          status="failed", error=f"{type(exc).__name__}: {exc}")
    return res, contrib, pred


def _run_task(args):
    man_dict, td, variant, b, trial, seed = args
    return run_trial(Manifest.from_dict(man_dict), td, variant, b, trial, seed)


def ablate(man: Manifest, series: Optional[dp.TimeSeries] = None, threads: int = 1) -> dict:
    """Monte-Carlo sweep over block sizes for both variants.

    Returns:
        A report dict: manifest copy, per-trial results, aggregate table,
        mean feature contributions per block size and sample rollouts of
        trial 0. Nothing in it depends on wall-clock time.
    """
    if series is None:
        series = base_series(man)
    data_cache = {t: trial_data(man, series, derive_seed(man.seed, 0, t)) for t in range(man.trials)}
    tasks = []
    for b in man.block_sizes:
        for t in range(man.trials):
            seed = derive_seed(man.seed, 1, b, t)
            for variant in VARIANTS:
                tasks.append((man.to_dict(), data_cache[t], variant, b, t, seed))
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(_run_task, tasks))
    else:
        outcomes = [_run_task(task) for task in tasks]

    results = [o[0] for o in outcomes]
    order = sorted(range(len(results)),
                   key=lambda i: (results[i].variant, results[i].block_size, results[i].trial))
    results = [results[i] for i in order]
    outcomes = [outcomes[i] for i in order]

    contributions = _mean_contributions(outcomes)
    samples = {}
    for res, _, pred in outcomes:
        if res.trial == 0 and pred is not None:
            entry = samples.setdefault(str(res.block_size),
                                       {"truth": data_cache[0].truth.tolist()})
            entry[res.variant] = _finite_list(pred)
    return {
        "format": REPORT_FORMAT,
        "version": FORMAT_VERSION,
        "manifest": man.to_dict(),
        "trials": [r.to_dict() for r in results],
        "summary": aggregate(results),
        "contributions": contributions,
        "samples": samples,
    }


def _finite_list(arr) -> list:
    return [[float(v) if math.isfinite(v) else None for v in row] for row in np.asarray(arr)]


def _mean_contributions(outcomes) -> list:
    acc: Dict[tuple, list] = {}
    for res, contrib, _ in outcomes:
        if contrib is None:
            continue
        for pos, (name, lin, nonlin) in enumerate(contrib):
            acc.setdefault((res.block_size, pos, name), []).append((lin, nonlin))
    rows = []
    for (b, _, name), vals in sorted(acc.items()):
        v = np.asarray(vals)
        lin, nonlin = float(np.mean(v[:, 0])), float(np.mean(v[:, 1]))
        rows.append({"block_size": b, "feature": name, "linear_norm": lin,
                     "nonlinear_norm": nonlin, "total": math.hypot(lin, nonlin)})
    rows.sort(key=lambda r: (r["block_size"], -r["total"], r["feature"]))
    return rows


# ---------------------------------------------------------------------------
# Tables


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def results_table_csv(report: dict) -> str:
    """One row per trial, deterministic column order."""
    cols = ["variant", "block_size", "trial", "seed", "horizon", "nrmse", "pearson",
            "train_nrmse", "status", "error"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for tr in report["trials"]:
        row = dict(tr)
        if row.get("diverged") and row.get("nrmse") is None and row.get("status") == "ok":
            row["nrmse"] = math.inf
        w.writerow([_fmt(row.get(c)) for c in cols])
    return buf.getvalue()


def long_format_csv(report: dict) -> str:
    """Plot-ready long table: one metric value per row."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["variant", "block_size", "trial", "seed", "metric", "value"])
    for tr in report["trials"]:
        if tr.get("status") != "ok":
            continue
        for metric in ("nrmse", "pearson", "train_nrmse"):
            val = tr.get(metric)
            if val is None and metric == "nrmse" and tr.get("diverged"):
                val = math.inf
            if val is not None:
                w.writerow([tr["variant"], tr["block_size"], tr["trial"], tr["seed"], metric, _fmt(val)])
    return buf.getvalue()


def contributions_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["block_size", "feature", "linear_norm", "nonlinear_norm", "total"])
    for row in sorted(report.get("contributions", []), key=lambda r: (-r["total"], r["block_size"], r["feature"])):
        w.writerow([row["block_size"], row["feature"], _fmt(row["linear_norm"]),
                    _fmt(row["nonlinear_norm"]), _fmt(row["total"])])
    return buf.getvalue()


def summary_text(report: dict) -> str:
    """Fixed-width human-readable summary of a report."""
    if not report.get("trials"):
        raise DataError("report contains no trials")
    man = report.get("manifest", {})
    lines = [f"experiment: {man.get('experiment')}  trials: {man.get('trials')}  "
             f"seed: {man.get('seed')}", ""]
    head = f"{'variant':<10}{'b':>5}{'n':>6}{'failed':>8}{'NRMSE med':>12}{'IQR':>10}" \
           f"{'mean':>10}{'Pearson med':>13}"
    lines += [head, "-" * len(head)]

    def num(x):
        return "-" if x is None else f"{x:.4g}"

    for row in report["summary"]:
        nr, pe = row["nrmse"], row["pearson"]
        lines.append(f"{row['variant']:<10}{row['block_size']:>5}{row['trials']:>6}{row['failed']:>8}"
                     f"{num(nr['median']):>12}{num(nr['iqr']):>10}{num(nr['mean']):>10}"
                     f"{num(pe['median']):>13}")
    contrib = sorted(report.get("contributions", []), key=lambda r: (-r["total"], r["block_size"], r["feature"]))
    if contrib:
        lines += ["", "feature contributions (mean Frobenius norm of readout blocks)",
                  f"{'b':>5}  {'feature':<16}{'linear':>12}{'nonlinear':>12}{'total':>12}"]
        for row in contrib:
            lines.append(f"{row['block_size']:>5}  {row['feature']:<16}{row['linear_norm']:>12.4g}"
                         f"{row['nonlinear_norm']:>12.4g}{row['total']:>12.4g}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Model files


def model_to_json(model, extra: Optional[dict] = None) -> str:
    doc = {"format": MODEL_FORMAT, "version": FORMAT_VERSION, "model": model.to_dict()}
    if extra:
        doc.update(extra)
    return json.dumps(doc, sort_keys=True) + "\n"


def model_from_json(text: str):
    doc = json.loads(text)
    if doc.get("format") != MODEL_FORMAT:
        raise DataError("not a featesn model file")
    if doc.get("version") != FORMAT_VERSION:
        raise DataError(f"unsupported model file version {doc.get('version')}")
    md = doc["model"]
    cls = {"esn": EsnModel, "feat_esn": FeatEsnModel}.get(md.get("kind"))
    if cls is None:
        raise DataError(f"unknown model kind {md.get('kind')!r}")
    return cls.from_dict(md), doc
