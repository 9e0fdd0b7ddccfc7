"""Command-line front end: synthesize data, train, evaluate, plot.

Exit codes: 0 success, 1 runtime failure, 2 usage error. Every command
writes a manifest next to its primary output recording the resolved
configuration and input digests.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .conformal import calibrate, calibration_records, evaluate
from .data import (DEFAULT_FRACTIONS, SplitSpec, apply_normalization,
                   load_csv, normalize, split)
from .figures import band_csv, compute_band, render_svg
from .ioutil import sha256_file, write_text_atomic
from .knn import DEFAULT_K_GRID, KnnModel, fit as knn_fit
from .serialize import ModelBundle, load_model, save_model
from .synthetic import KINDS, SynthSpec, generate
from .training import (CLI_FAMILIES, TrainConfig, TrainTrace, run_protocol,
                       train, train_erc_error_fit)
from .transforms import FixedTransform

MANIFEST_FORMAT_VERSION = 1


def write_manifest(primary_out, command: str, config: dict, inputs,
                   outputs) -> str:
    doc = {
        "format_version": MANIFEST_FORMAT_VERSION,
        "tool": "scoremorph",
        "version": __version__,
        "command": command,
        "config": config,
        "inputs": {os.fspath(p): sha256_file(p) for p in inputs},
        "outputs": [os.fspath(p) for p in outputs],
    }
    path = os.fspath(primary_out) + ".manifest.json"
    write_text_atomic(path, json.dumps(doc, indent=1, sort_keys=True) + "\n")
    return path


def _parse_alphas(text: str):
    try:
        alphas = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ValueError(f"cannot parse alphas '{text}'") from None
    if not alphas:
        raise ValueError("no alphas given")
    return alphas


def read_raw_axis(path):
    """Raw X coordinates from a '# raw_x:' comment line, if present."""
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("# raw_x:"):
                return np.asarray(
                    [float(t) for t in line[len("# raw_x:"):].split()])
    return None


# ---- synth ----

def cmd_synth(args) -> int:
    spec = SynthSpec(kind=args.kind, n=args.n, rho=args.rho, seed=args.seed)
    sd = generate(spec)
    lines = [
        f"# scoremorph synth format_version=1 kind={spec.kind} n={spec.n} "
        f"rho={spec.rho!r} seed={spec.seed}",
        "# raw_x: " + " ".join(repr(float(v)) for v in sd.x_raw),
        "# weights: " + " ".join(repr(float(v)) for v in sd.weights),
    ]
    ds = sd.dataset
    for i in range(ds.n):
        cells = [repr(float(v)) for v in ds.x[i]] + [repr(float(ds.y[i]))]
        lines.append(",".join(cells))
    write_text_atomic(args.out, "\n".join(lines) + "\n")
    write_manifest(args.out, "synth",
                   {"kind": spec.kind, "n": spec.n, "rho": spec.rho,
                    "seed": spec.seed, "out": os.fspath(args.out)},
                   [], [args.out])
    return 0


# ---- train ----

def _fit_point_model(proper, seed):
    grid = [k for k in DEFAULT_K_GRID if k <= proper.n]
    return knn_fit(proper, grid, folds=5, seed=seed)


def cmd_train(args) -> int:
    ds = normalize(load_csv(args.data, args.has_header))
    spec = SplitSpec(args.seed, DEFAULT_FRACTIONS)
    proper, cp_train, validation, _ = split(ds, spec)
    model = _fit_point_model(proper, args.seed)
    if args.family == "fixed":
        fam, trace = FixedTransform(), TrainTrace()
    else:
        config = TrainConfig(
            family="erc" if args.family == "erc-fit" else args.family,
            seed=args.seed, epochs=args.epochs, batch_size=args.batch,
            learning_rate=args.lr, patience=args.patience, gamma=args.gamma)
        trainer = train_erc_error_fit if args.family == "erc-fit" else train
        fam, trace = trainer(config, cp_train, validation, model.predict_batch)

    save_model(args.model_out, args.family, fam, ds.stats, model.k, spec)
    trace_path = os.path.splitext(os.fspath(args.model_out))[0] + ".trace.csv"
    rows = ["# scoremorph train-trace format_version=1",
            "epoch,train_loss,val_loss"]
    for epoch, tr, val in trace.epochs:
        rows.append(f"{epoch},{'' if tr is None else repr(tr)},{val!r}")
    write_text_atomic(trace_path, "\n".join(rows) + "\n")
    write_manifest(args.model_out, "train",
                   {"data": os.fspath(args.data), "family": args.family,
                    "seed": args.seed, "epochs": args.epochs, "lr": args.lr,
                    "batch": args.batch, "patience": args.patience,
                    "gamma": args.gamma, "has_header": args.has_header,
                    "fractions": list(DEFAULT_FRACTIONS),
                    "model_out": os.fspath(args.model_out),
                    "knn_k": model.k, "best_epoch": trace.best_epoch},
                   [args.data], [args.model_out, trace_path])
    return 0


# ---- eval ----

def _format_row(r) -> str:
    return (f"{r['dataset']},{r['family']},{r['alpha']!r},{r['run_seed']},"
            f"{'' if r['mean_size'] is None else repr(r['mean_size'])},"
            f"{'' if r['validity'] is None else repr(r['validity'])},"
            f"{r['error']}")


def _aggregate(rows, families, alphas):
    out = []
    for fam in families:
        for alpha in alphas:
            cell = [r for r in rows if r["family"] == fam
                    and r["alpha"] == alpha and r["error"] == ""]
            if not cell:
                continue
            sizes = np.asarray([r["mean_size"] for r in cell])
            vals = np.asarray([r["validity"] for r in cell])
            out.append({"family": fam, "alpha": alpha,
                        "size_mean": float(sizes.mean()),
                        "size_sd": float(sizes.std()),
                        "validity_mean": float(vals.mean()),
                        "validity_sd": float(vals.std())})
    return out


def _print_table(aggregates, alphas, dataset_name):
    cells = {(a["family"], a["alpha"]): a for a in aggregates}
    families = []
    for a in aggregates:
        if a["family"] not in families:
            families.append(a["family"])
    header = f"{dataset_name:12s}"
    for alpha in alphas:
        header += f" | alpha={alpha:<5g} size         val         "
    print(header)
    for fam in families:
        line = f"{fam:12s}"
        for alpha in alphas:
            c = cells.get((fam, alpha))
            if c is None:
                line += " | " + " " * 37
            else:
                line += (f" | {c['size_mean']:.3f}+-{c['size_sd']:.3f} "
                         f"{c['validity_mean']:.3f}+-{c['validity_sd']:.3f}")
        print(line)


def _eval_frozen(args, ds_name, alphas):
    rows = []
    bundles = [load_model(p) for p in args.model.split(",")]
    ds_raw = load_csv(args.data, args.has_header)
    base_seed = args.seed if args.seed is not None else bundles[0].split.seed
    if not any(b.label == "fixed" for b in bundles):
        first = bundles[0]
        bundles.append(ModelBundle("fixed", FixedTransform(), first.stats,
                                   first.knn_k, first.split))
    for r in range(args.runs):
        run_seed = base_seed + r
        for b in bundles:
            ds = apply_normalization(ds_raw, b.stats)
            proper, cp_train, _, test = split(
                ds, SplitSpec(run_seed, b.split.fractions))
            model = KnnModel(proper.x.copy(), proper.y.copy(), b.knn_k)
            for alpha in alphas:
                row = {"dataset": ds_name, "family": b.label, "alpha": alpha,
                       "run_seed": run_seed, "mean_size": None,
                       "validity": None, "error": ""}
                try:
                    rep = evaluate(b.family, model.predict_batch, cp_train,
                                   test, [alpha])[0]
                    row["mean_size"] = rep.mean_size
                    row["validity"] = rep.empirical_validity
                except ValueError as exc:
                    row["error"] = str(exc).replace(",", ";")
                rows.append(row)
    return rows, [b.label for b in bundles], {b.label: b.knn_k for b in bundles}


def _eval_protocol(args, ds_name, alphas):
    families = [f.strip() for f in args.families.split(",") if f.strip()]
    ds = normalize(load_csv(args.data, args.has_header))
    n_cal = len(split(ds, SplitSpec(0, DEFAULT_FRACTIONS))[1])
    valid = [a for a in alphas if 1.0 / (n_cal + 1) <= a <= 1.0]
    invalid = [a for a in alphas if a not in valid]
    base_seed = args.seed if args.seed is not None else 0
    result = run_protocol(ds, families, valid, runs=args.runs,
                          seed0=base_seed, epochs=args.epochs,
                          batch_size=args.batch, learning_rate=args.lr,
                          patience=args.patience, gamma=args.gamma,
                          dataset_name=ds_name)
    rows = [{"dataset": r.dataset, "family": r.family, "alpha": r.alpha,
             "run_seed": r.run_seed, "mean_size": r.mean_size,
             "validity": r.validity, "error": ""} for r in result.rows]
    knn_ks = {str(seed): k for seed, k in result.knn_ks.items()}
    for alpha in invalid:
        for fam in families:
            for r in range(args.runs):
                rows.append({"dataset": ds_name, "family": fam, "alpha": alpha,
                             "run_seed": base_seed + r, "mean_size": None,
                             "validity": None,
                             "error": f"alpha={alpha} outside "
                                      f"[1/(N+1); 1] for N={n_cal}"})
    return rows, families, knn_ks


def cmd_eval(args) -> int:
    if (args.model is None) == (args.families is None):
        raise ValueError("pass exactly one of --model or --families")
    alphas = _parse_alphas(args.alphas)
    ds_name = os.path.splitext(os.path.basename(os.fspath(args.data)))[0]
    if args.model is not None:
        rows, families, knn_ks = _eval_frozen(args, ds_name, alphas)
    else:
        rows, families, knn_ks = _eval_protocol(args, ds_name, alphas)

    lines = ["# scoremorph eval-report format_version=1",
             "dataset,family,alpha,run_seed,mean_size,validity,error"]
    lines += [_format_row(r) for r in rows]
    write_text_atomic(args.report, "\n".join(lines) + "\n")

    aggregates = _aggregate(rows, families, alphas)
    agg_path = os.path.splitext(os.fspath(args.report))[0] + ".aggregate.csv"
    agg_lines = ["# scoremorph eval-aggregate format_version=1",
                 "family,alpha,size_mean,size_sd,validity_mean,validity_sd"]
    for a in aggregates:
        agg_lines.append(f"{a['family']},{a['alpha']!r},{a['size_mean']!r},"
                         f"{a['size_sd']!r},{a['validity_mean']!r},"
                         f"{a['validity_sd']!r}")
    write_text_atomic(agg_path, "\n".join(agg_lines) + "\n")
    _print_table(aggregates, alphas, ds_name)

    inputs = [args.data]
    if args.model is not None:
        inputs += args.model.split(",")
    write_manifest(args.report, "eval",
                   {"data": os.fspath(args.data), "model": args.model,
                    "families": args.families, "alphas": alphas,
                    "runs": args.runs, "seed": args.seed,
                    "epochs": args.epochs, "lr": args.lr, "batch": args.batch,
                    "patience": args.patience, "gamma": args.gamma,
                    "has_header": args.has_header, "knn_ks": knn_ks,
                    "report": os.fspath(args.report)},
                   inputs, [args.report, agg_path])
    return 0


# ---- plot ----

def cmd_plot(args) -> int:
    bundle = load_model(args.model)
    ds_raw = load_csv(args.data, args.has_header)
    ds = apply_normalization(ds_raw, bundle.stats)
    proper, cp_train, _, _ = split(ds, bundle.split)
    model = KnnModel(proper.x.copy(), proper.y.copy(), bundle.knn_k)
    records = calibration_records(bundle.family, model.predict_batch, cp_train)
    q_hat = calibrate(records, args.alpha)
    axis = read_raw_axis(args.data)
    if axis is None:
        axis = ds.x[:, 0]
    elif axis.shape[0] != ds.n:
        raise ValueError("raw_x comment length mismatches the data rows")
    band = compute_band(bundle.family, model.predict_batch, ds.x, axis, ds.y,
                        q_hat)
    svg = render_svg(band, title=f"{bundle.label} alpha={args.alpha:g}")
    write_text_atomic(args.out, svg)
    csv_path = os.fspath(args.out) + ".band.csv"
    write_text_atomic(csv_path, band_csv(band))
    write_manifest(args.out, "plot",
                   {"data": os.fspath(args.data), "model": os.fspath(args.model),
                    "alpha": args.alpha, "has_header": args.has_header,
                    "out": os.fspath(args.out)},
                   [args.data, args.model], [args.out, csv_path])
    return 0


# ---- parser ----

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scoremorph",
        description="Locally adaptive conformal prediction intervals via "
                    "trainable monotone score transformations.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a heteroskedastic dataset")
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--rho", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="split, fit the point model, train a family")
    p.add_argument("--data", required=True)
    p.add_argument("--family", required=True, choices=CLI_FAMILIES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--patience", type=int, default=20)
    p.add_argument("--gamma", type=float, default=1e-2)
    p.add_argument("--has-header", action="store_true")
    p.add_argument("--model-out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="interval size and validity tables")
    p.add_argument("--data", required=True)
    p.add_argument("--model", help="comma-separated model files (frozen eval)")
    p.add_argument("--families",
                   help="comma-separated family names; retrains per run")
    p.add_argument("--alphas", default="0.05,0.1,0.32")
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--patience", type=int, default=20)
    p.add_argument("--gamma", type=float, default=1e-2)
    p.add_argument("--has-header", action="store_true")
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("plot", help="SVG scatter with the interval band")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--has-header", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
