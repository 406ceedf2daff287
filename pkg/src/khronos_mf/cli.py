"""``khronos-mf`` command-line entry point.

Subcommands: ``synth``, ``ingest``, ``fit-geom``, ``train``, ``predict``,
``eval`` and ``benchmark``. Every run writes ``run_manifest.json`` with the
fully resolved options into its output directory. Failures exit with 2
(configuration), 3 (data or I/O) or 4 (numerical) and print a JSON error
object on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigurationError, DataError, KhronosError
from .evalharness import (
    SplitTask,
    budget_curves,
    kfold_evaluate,
    r_squared,
    sweep_curves,
    write_curve_csv,
    write_records_csv,
    write_summary_json,
)
from .geometry import fit_from_rows, read_surface_csv, write_curve_json, write_reconstruction_csv
from .mfpipe import (
    BIAS_PROFILES,
    CASE_RATIOS,
    DEFAULT_HYPER,
    DEFAULT_TRAIN,
    MODEL_FAMILIES,
    BenchmarkData,
    assemble_lf_input,
    build_cases,
    fit_surrogate,
    ingest_cases,
    load_surrogate,
    predict_mf,
    save_surrogate,
    synth_benchmark,
)
from .training import TrainConfig

logger = logging.getLogger("khronos_mf")

RUN_MANIFEST = "run_manifest.json"


# -- helpers ------------------------------------------------------------------------

def _int_list(text):
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def read_config_file(path) -> dict:
    """``key = value`` lines; ``#`` starts a comment. Keys use flag names
    with or without the leading dashes."""
    out = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file: {exc}") from None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


def _write_manifest(out_dir: Path, command: str, args: argparse.Namespace, extra=None):
    options = {k: v for k, v in vars(args).items() if k not in ("func", "config")}
    manifest = {"tool": "khronos-mf", "version": __version__, "command": command,
                "options": options, **(extra or {})}
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / RUN_MANIFEST).write_text(json.dumps(manifest, indent=2, default=str))


def _stage_settings(args, family, stage):
    hyper = dict(DEFAULT_HYPER[(family, stage)])
    base = DEFAULT_TRAIN[(family, stage)]
    prefix = f"{stage}_"
    if family == "khronos":
        for key in ("k", "r"):
            value = getattr(args, prefix + key)
            if value is not None:
                hyper[key] = value
    else:
        hidden = getattr(args, prefix + "hidden")
        if hidden is not None:
            hyper["hidden"] = tuple(hidden)
    lr = getattr(args, prefix + "lr")
    epochs = getattr(args, prefix + "epochs")
    config = TrainConfig(peak_lr=base.peak_lr if lr is None else lr,
                         epochs=base.epochs if epochs is None else epochs,
                         w_hf=args.w_hf, seed=args.seed)
    return hyper, config


def _resolve_ratio(args) -> float:
    if args.hf_ratio is not None:
        if not 0.0 <= args.hf_ratio <= 1.0:
            raise ConfigurationError("--hf-ratio must lie in [0, 1]")
        return args.hf_ratio
    return CASE_RATIOS[args.case]


def _delta_flags_given(args) -> bool:
    return any(getattr(args, f"delta_{k}") is not None
               for k in ("k", "r", "hidden", "lr", "epochs"))


# -- commands -------------------------------------------------------------------------

def cmd_synth(args):
    data = synth_benchmark(args.n_cases, args.n_stations, args.bias, args.seed,
                           layout=args.layout, shift=args.shift, damping=args.damping)
    out = Path(args.out)
    data.save(out)
    _write_manifest(out, "synth", args)
    print(f"wrote {data.n_cases} cases to {out}")


def cmd_ingest(args):
    meta = None
    if args.meta:
        try:
            meta = json.loads(Path(args.meta).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read meta file: {exc}") from None
    data = ingest_cases(args.lf, args.hf, meta, args.n_ctrl, args.layout, args.n_stations)
    out = Path(args.out)
    data.save(out)
    _write_manifest(out, "ingest", args)
    print(f"ingested {data.n_cases} cases ({int(data.hf_available.sum())} with HF) into {out}")


def cmd_fit_geom(args):
    rows = read_surface_csv(args.csv)
    curve, report = fit_from_rows(rows, args.n_ctrl, ordered=not args.unordered)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_curve_json(out / "curve.json", curve, report)
    report.write_csv(out / "fit_report.csv")
    write_reconstruction_csv(out / "reconstruction.csv", curve, report)
    _write_manifest(out, "fit-geom", args, {"rmse": report.rmse, "condition": report.condition})
    print(f"RMSE: {report.rmse:.6g}")


def cmd_train(args):
    data = BenchmarkData.load(args.data)
    ratio = _resolve_ratio(args)
    if ratio == 0.0 and _delta_flags_given(args):
        logger.warning("case %s has no delta model; delta options are ignored", args.case)
    ds = build_cases(data, ratio, seed=args.seed)
    lf_hyper, lf_config = _stage_settings(args, args.model, "lf")
    delta_hyper, delta_config = _stage_settings(args, args.model, "delta")
    fit = fit_surrogate(ds, args.model, lf_hyper, delta_hyper, lf_config, delta_config,
                        seed=args.seed, hf_in_lf=args.hf_in_lf)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = save_surrogate(fit.surrogate, out)
    fit.lf_history.write_history(out / "lf_history.csv")
    fit.lf_history.write_summary(out / "lf_summary.json", lf_config)
    stages = {"lf": {"hyper": lf_hyper, "train": asdict(lf_config)}}
    if fit.delta_history is not None:
        fit.delta_history.write_history(out / "delta_history.csv")
        fit.delta_history.write_summary(out / "delta_summary.json", delta_config)
        stages["delta"] = {"hyper": delta_hyper, "train": asdict(delta_config)}

    te = ds.test_idx
    x = assemble_lf_input(data.features[te], data.U[te], data.aoa[te], fit.surrogate.input_stats)
    target = data.cp_hf[te] if np.all(data.hf_available[te]) else data.cp_lf[te]
    metrics = {"test_r2_lf": r_squared(target, fit.surrogate.lf_predict(x)),
               "test_r2_mf": r_squared(target, predict_mf(fit.surrogate, x)),
               "n_train": int(ds.train_idx.size), "n_test": int(te.size),
               "n_hf": int(ds.hf_idx.size)}
    (out / "metrics.json").write_text(json.dumps(metrics, indent=2))
    _write_manifest(out, "train", args, {"hf_ratio": ratio, "stages": stages,
                                         "split": ds.manifest(), "n_stations": data.n_stations,
                                         "checkpoints": [p.name for p in paths]})
    print(f"trained {len(paths)} model(s); test R2 LF {metrics['test_r2_lf']:.4f} "
          f"MF {metrics['test_r2_mf']:.4f}")


def _load_train_manifest(ckpt_dir: Path) -> dict:
    try:
        return json.loads((ckpt_dir / RUN_MANIFEST).read_text())
    except FileNotFoundError:
        raise DataError(f"{ckpt_dir} has no {RUN_MANIFEST}; pass a 'train' output directory") from None


def cmd_predict(args):
    data = BenchmarkData.load(args.data)
    surrogate = load_surrogate(args.checkpoints)
    if surrogate.lf_model.n_out != data.n_stations:
        raise DataError(f"checkpoint predicts {surrogate.lf_model.n_out} stations, "
                        f"dataset has {data.n_stations}")
    x = assemble_lf_input(data.features, data.U, data.aoa, surrogate.input_stats)
    lf = surrogate.lf_predict(x)
    mf = predict_mf(surrogate, x)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "predictions.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["case", "station", "x", "side", "Cp_LF_pred", "Cp_MF_pred"])
        for i in range(data.n_cases):
            for s in range(data.n_stations):
                writer.writerow([i, s, repr(float(data.station_x[s])), int(data.station_side[s]),
                                 repr(float(lf[i, s])), repr(float(mf[i, s]))])
    _write_manifest(out, "predict", args)
    print(f"wrote predictions for {data.n_cases} cases to {out / 'predictions.csv'}")


def cmd_eval(args):
    data = BenchmarkData.load(args.data)
    ckpt = Path(args.checkpoints)
    trained = _load_train_manifest(ckpt)
    if trained.get("n_stations") != data.n_stations:
        raise DataError(f"checkpoints were trained on {trained.get('n_stations')} stations, "
                        f"dataset has {data.n_stations}")
    family = trained["options"]["model"]
    stages = trained["stages"]
    fit_kwargs = {"lf_hyper": stages["lf"]["hyper"], "lf_train": TrainConfig(**stages["lf"]["train"]),
                  "hf_in_lf": trained["options"].get("hf_in_lf", False)}
    if "delta" in stages:
        fit_kwargs.update(delta_hyper=stages["delta"]["hyper"],
                          delta_train=TrainConfig(**stages["delta"]["train"]))
    records = kfold_evaluate(data, family, trained["hf_ratio"], args.K, args.seed,
                             args.jobs, **fit_kwargs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_records_csv(out / "eval_records.csv", records)
    write_summary_json(out / "eval_summary.json", records,
                       {"K": args.K, "seed": args.seed, "hf_ratio": trained["hf_ratio"]})
    _write_manifest(out, "eval", args, {"trained_with": trained["options"]})
    mean = float(np.mean([r.r2 for r in records]))
    print(f"{args.K}-fold mean R2 {mean:.4f}")


def cmd_benchmark(args):
    data = BenchmarkData.load(args.data)
    task = SplitTask.lf_from_benchmark(data, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    models = [m.strip() for m in args.models.split(",") if m.strip()]
    for m in models:
        if m not in MODEL_FAMILIES:
            raise ConfigurationError(f"unknown model family {m!r}")
    if args.budgets:
        curves = budget_curves(task, args.budgets, models, seed=args.seed)
        rows = [{"model": m, **p.row()} for m, pts in curves.items() for p in pts]
        write_curve_csv(out / "budget_curve.csv", rows,
                        ["model", "x", "error", "param_count", "epochs", "steps", "seconds",
                         "single_step"])
        for row in rows:
            print(f"{row['model']:8s} budget {row['x']:g}s  1-R2 {row['error']:.5f}")
    if args.ranks or args.widths:
        knobs = {"khronos": args.ranks, "mlp": args.widths}
        families = [m for m in models if knobs[m]]
        curves = sweep_curves(task, families, knobs, seed=args.seed)
        rows = [{"model": m, **p.row()} for m, pts in curves.items() for p in pts]
        write_curve_csv(out / "sweep_curve.csv", rows,
                        ["model", "knob", "param_count", "error", "epochs", "seconds"])
        for row in rows:
            print(f"{row['model']:8s} knob {row['knob']:>4s} params {row['param_count']:7d}  "
                  f"1-R2 {row['error']:.5f}")
    _write_manifest(out, "benchmark", args)


# -- parser -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="khronos-mf", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="key = value file providing option defaults")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", required=True, help="output directory")
        p.set_defaults(func=func)
        return p

    p = command("synth", cmd_synth, "generate the synthetic LF/HF benchmark")
    p.add_argument("--n-cases", type=int, default=500)
    p.add_argument("--n-stations", type=int, default=81)
    p.add_argument("--bias", choices=BIAS_PROFILES, default="suction-damped")
    p.add_argument("--layout", choices=("y-only", "xy-flat"), default="y-only")
    p.add_argument("--shift", type=float, default=0.2, help="offset for --bias offset")
    p.add_argument("--damping", type=float, default=0.8, help="attenuation for suction-damped")

    p = command("ingest", cmd_ingest, "build a dataset from per-case surface CSVs")
    p.add_argument("--lf", required=True, help="directory of LF case files (x, y, p, Cp)")
    p.add_argument("--hf", help="directory of HF case files with matching names")
    p.add_argument("--meta", help="JSON mapping file name -> {U, aoa}")
    p.add_argument("--n-ctrl", type=int, default=16)
    p.add_argument("--n-stations", type=int, default=81)
    p.add_argument("--layout", choices=("y-only", "xy-flat"), default="y-only")

    p = command("fit-geom", cmd_fit_geom, "fit a clamped cubic B-spline to an airfoil outline")
    p.add_argument("csv", help="surface CSV with x, y (optional zeta, side)")
    p.add_argument("--n-ctrl", type=int, default=16)
    p.add_argument("--unordered", action="store_true",
                   help="points are an unordered cloud rather than an ordered outline")

    p = command("train", cmd_train, "train the LF model and, for cases 2-3, the delta model")
    p.add_argument("--data", required=True)
    p.add_argument("--case", type=int, choices=(1, 2, 3), default=1)
    p.add_argument("--hf-ratio", type=float, help="overrides the ratio implied by --case")
    p.add_argument("--model", choices=MODEL_FAMILIES, default="khronos")
    p.add_argument("--w-hf", type=float, default=10.0)
    p.add_argument("--hf-in-lf", action="store_true",
                   help="use HF labels (weight --w-hf) for HF cases in LF training")
    for stage in ("lf", "delta"):
        p.add_argument(f"--{stage}-k", type=int)
        p.add_argument(f"--{stage}-r", type=int)
        p.add_argument(f"--{stage}-hidden", type=_int_list, help="MLP widths, e.g. 256,256")
        p.add_argument(f"--{stage}-lr", type=float)
        p.add_argument(f"--{stage}-epochs", type=int)

    p = command("predict", cmd_predict, "LF and MF predictions for every case of a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoints", required=True, help="'train' output directory")

    p = command("eval", cmd_eval, "K-fold retraining with the checkpoints' recorded settings")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoints", required=True, help="'train' output directory")
    p.add_argument("--K", type=int, default=5)
    p.add_argument("--jobs", type=int, default=1)

    p = command("benchmark", cmd_benchmark, "time-budget and parameter-sweep curves")
    p.add_argument("--data", required=True)
    p.add_argument("--models", default="khronos,mlp")
    p.add_argument("--budgets", type=_float_list, help="wall-clock seconds, e.g. 5,15,60")
    p.add_argument("--ranks", type=_int_list, help="KHRONOS ranks for the parameter sweep")
    p.add_argument("--widths", type=_int_list, help="MLP hidden widths for the parameter sweep")
    p.add_argument("--jobs", type=int, default=1, help="accepted for symmetry; curves run serially")
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        values = read_config_file(args.config)
        subparser = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in subparser._actions}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigurationError(f"unknown config keys: {', '.join(unknown)}")
        for action in subparser._actions:
            if action.dest in values and action.nargs == 0:
                flag = values[action.dest].lower()
                if flag not in ("true", "false", "1", "0", "yes", "no"):
                    raise ConfigurationError(f"{action.dest} must be true or false")
                values[action.dest] = flag in ("true", "1", "yes")
        subparser.set_defaults(**values)
        args = parser.parse_args(argv)
        for action in subparser._actions:
            if action.choices is not None and action.dest in values:
                if getattr(args, action.dest) not in action.choices:
                    raise ConfigurationError(
                        f"{action.dest}: {getattr(args, action.dest)!r} not in {list(action.choices)}")
    return args


def _error_exit(kind: str, message: str, code: int) -> int:
    print(json.dumps({"error": kind, "message": message, "exit_code": code}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except KhronosError as exc:
        return _error_exit(type(exc).__name__, str(exc), exc.exit_code)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except KhronosError as exc:
        return _error_exit(type(exc).__name__, str(exc), exc.exit_code)
    except OSError as exc:
        return _error_exit("IOError", str(exc), DataError.exit_code)
    return 0


if __name__ == "__main__":
    sys.exit(main())
