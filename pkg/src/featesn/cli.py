"""Command-line driver: generate | train | predict | ablate | report.

Exit codes: 0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path


from . import data as dp
from . import experiments as ex
from .exceptions import ConfigError, DataError, FeatEsnError

logger = logging.getLogger("featesn")

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3


def _manifest(args) -> ex.Manifest:
    if args.manifest is None:
        raise ConfigError("--manifest is required for this command")
    man = ex.Manifest.load(args.manifest)
    if args.seed is not None:
        man.seed = args.seed
    if args.out is not None:
        man.paths["out"] = args.out
    return man


def _out_dir(man_or_path) -> Path:
    out = Path(man_or_path.paths["out"] if isinstance(man_or_path, ex.Manifest) else man_or_path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_generate(args) -> int:
    man = _manifest(args)
    out = _out_dir(man)
    if man.experiment == "custom":
        raise ConfigError("custom experiments bring their own data")
    if man.experiment == "traffic":
        if man.paths.get("data"):
            raise ConfigError("traffic manifest already names a data file; nothing to generate")
        series = dp.synthetic_traffic(n_hours=man.data_hours, seed=man.seed)
        path = dp.write_series_csv(series, out / "traffic.csv", columns=[man.sensor_column])
    else:
        series = ex.base_series(ex.Manifest.from_dict({**man.to_dict(), "paths": {"data": None}}))
        path = dp.write_series_csv(series, out / f"{man.experiment}.csv", columns=["x", "y", "z"],
                                   metadata={"seed": man.seed})
    print(f"wrote {path} ({len(series)} samples)")
    return EXIT_OK


def _load_data(man: ex.Manifest, override=None) -> dp.TimeSeries:
    path = override or man.paths.get("data")
    if not path:
        raise ConfigError("no data path: set paths.data in the manifest or pass --data")
    if not Path(path).exists():
        raise DataError(f"data file not found: {path}")
    if man.experiment == "traffic":
        return dp.load_traffic_csv(path, man.sensor_column)
    return dp.read_series_csv(path)


def cmd_train(args) -> int:
    man = _manifest(args)
    series = _load_data(man, args.data)
    td = ex.trial_data(man, series, ex.derive_seed(man.seed, 0, 0), offset=0)
    model = ex.build_model(man, man.variant, man.block_size, ex.derive_seed(man.seed, 1, man.block_size, 0),
                           td.inputs.shape[1], td.targets.shape[1])
    model.train(td.inputs, td.targets, washout=man.washout)
    extra = {"embedding_dim": man.embedding_dim, "truth_start": td.truth_start,
             "dt": td.dt, "experiment": man.experiment}
    out = _out_dir(man)
    model_path = out / "model.json"
    model_path.write_text(ex.model_to_json(model, extra))
    diag = {"variant": man.variant, "block_size": man.block_size,
            "state_size": model.state_size, "train_nrmse": model.metadata["train_nrmse"],
            "reservoir_draws": model.metadata["reservoir_draws"], "manifest": man.to_dict()}
    (out / "train_diagnostics.json").write_text(json.dumps(diag, indent=2, sort_keys=True) + "\n")
    print(f"wrote {model_path}; one-step training NRMSE {model.metadata['train_nrmse']:.4g}")
    return EXIT_OK


def cmd_predict(args) -> int:
    model_path = Path(args.model) if args.model else None
    if model_path is None:
        raise ConfigError("--model is required")
    if not model_path.exists():
        raise DataError(f"model file not found: {model_path}")
    model, doc = ex.model_from_json(model_path.read_text())
    horizon = args.horizon
    if horizon is None:
        horizon = ex.Manifest.load(args.manifest).horizon if args.manifest else 0
    feedback = dp.closed_loop_embed_adapter if doc.get("embedding_dim") else None
    pred = model.predict(horizon, feedback=feedback).values
    truth = None
    if args.data:
        if not Path(args.data).exists():
            raise DataError(f"data file not found: {args.data}")
        if doc.get("experiment") == "traffic":
            series = dp.load_traffic_csv(args.data, args.column)
        else:
            series = dp.read_series_csv(args.data)
        start = int(doc.get("truth_start", 0))
        truth = series.values[start: start + horizon]
        if len(truth) < horizon:
            truth = None
            logger.warning("data file too short for truth alongside the prediction")
    out = _out_dir(args.out or ".")
    path = out / "prediction.csv"
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        head = ["step"] + [f"pred_{j}" for j in range(pred.shape[1])]
        if truth is not None:
            head += [f"truth_{j}" for j in range(truth.shape[1])]
        w.writerow(head)
        for k in range(horizon):
            row = [k + 1] + [repr(float(v)) for v in pred[k]]
            if truth is not None:
                row += [repr(float(v)) for v in truth[k]]
            w.writerow(row)
    print(f"wrote {path} ({horizon} rows)")
    return EXIT_OK


def cmd_ablate(args) -> int:
    man = _manifest(args)
    report = ex.ablate(man, threads=args.threads)
    out = _out_dir(man)
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    (out / "results.csv").write_text(ex.results_table_csv(report))
    run_info = {"finished": datetime.now(timezone.utc).isoformat(timespec="seconds"),
                "threads": args.threads}
    (out / "run_info.json").write_text(json.dumps(run_info, sort_keys=True) + "\n")
    sys.stdout.write(ex.summary_text(report))
    return EXIT_OK


def cmd_report(args) -> int:
    path = Path(args.report) if args.report else None
    if path is None:
        raise ConfigError("--report is required")
    if not path.exists():
        raise DataError(f"report file not found: {path}")
    try:
        report = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"report {path} is not valid JSON") from exc
    if report.get("format") != ex.REPORT_FORMAT:
        raise DataError(f"{path} is not a featesn report")
    text = ex.summary_text(report)
    out = _out_dir(args.out or path.parent)
    (out / "summary.txt").write_text(text)
    (out / "report_long.csv").write_text(ex.long_format_csv(report))
    (out / "contributions.csv").write_text(ex.contributions_csv(report))
    sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--manifest", help="experiment manifest (JSON)")
    common.add_argument("--seed", type=int, help="override the manifest master seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=int, default=1, help="parallel trial workers")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="featesn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="write synthetic data + metadata sidecar")
    p = sub.add_parser("train", parents=[common], help="train one model from a data file")
    p.add_argument("--data", help="data CSV (overrides paths.data)")
    p = sub.add_parser("predict", parents=[common], help="closed-loop rollout of a saved model")
    p.add_argument("--model", help="model file written by train")
    p.add_argument("--horizon", type=int)
    p.add_argument("--data", help="data CSV to put truth alongside the prediction")
    p.add_argument("--column", default="sensor_1", help="traffic sensor column")
    sub.add_parser("ablate", parents=[common], help="Monte-Carlo block-size sweep")
    p = sub.add_parser("report", parents=[common], help="tables from a saved report")
    p.add_argument("--report", help="report.json written by ablate")
    return parser


COMMANDS = {"generate": cmd_generate, "train": cmd_train, "predict": cmd_predict,
            "ablate": cmd_ablate, "report": cmd_report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FeatEsnError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
