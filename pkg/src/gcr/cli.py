"""Command-line interface: ``gcr gen | fit | experiment | report``.

Exit codes: 0 success, 2 usage or configuration error, 3 input/output
error, 4 algorithmic failure (no connected pairs, degenerate data).
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .estimators import DegenerateError, GcrParams, NoPairsError, gcr_fit, scr_matrix, sir_fit
from .geometry import projection_distance, smallest_eigvecs
from .harness import (
    ConfigError,
    ExperimentConfig,
    default_alpha_rule,
    default_r_rule,
    evaluate_rule,
    run_sweep,
)
from .io import export_pairs, fmt, load_dataset_csv, read_sidecar, save_dataset_csv
from .regression import ComposedModel, fit_kernel, fit_stage_two
from .synthetic import EXAMPLE_IDS, make_example

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_ALGO = 0, 2, 3, 4

log = logging.getLogger("gcr")


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _available_cpus() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def _write_text(path, text):
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc.strerror or exc}", EXIT_IO) from None


def cmd_gen(args) -> int:
    if str(args.example).lower() not in EXAMPLE_IDS:
        raise CliError(f"unknown example {args.example!r}; valid ids: {', '.join(EXAMPLE_IDS)}", EXIT_USAGE)
    if args.n < 2:
        raise CliError("--n must be at least 2", EXIT_USAGE)
    if args.noise < 0:
        raise CliError("--noise must be nonnegative", EXIT_USAGE)
    data = make_example(args.example, args.n, args.noise, seed=args.seed)
    try:
        save_dataset_csv(data, args.out, noise=args.noise)
    except OSError as exc:
        raise CliError(f"cannot write {args.out}: {exc.strerror or exc}", EXIT_IO) from None
    log.info("wrote %d samples of example %s to %s", data.n, data.truth.example_id, args.out)
    return EXIT_OK


def _load(path):
    try:
        return load_dataset_csv(path), read_sidecar(path) or {}
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror or exc}", EXIT_IO) from None
    except (ValueError, KeyError, IndexError, json.JSONDecodeError) as exc:
        raise CliError(f"malformed input {path}: {exc}", EXIT_IO) from None


def _threshold(method, args, sidecar, n, D):
    if args.alpha is not None:
        return float(args.alpha)
    example = sidecar.get("example") or ""
    rule = default_alpha_rule(method, example, float(sidecar.get("noise", 0.0)))
    return evaluate_rule(rule, n, D)


def cmd_fit(args) -> int:
    data, sidecar = _load(args.inp)
    method = args.method.upper()
    d = args.d if args.d is not None else (data.truth.d if data.truth is not None else None)
    if d is None:
        raise CliError("--d is required when the dataset has no truth sidecar", EXIT_USAGE)
    if not 1 <= d <= data.D:
        raise CliError(f"--d must lie in [1, {data.D}]", EXIT_USAGE)
    n, D = data.n, data.D
    pairs = None
    try:
        if method == "GCR":
            alpha = _threshold("GCR", args, sidecar, n, D)
            example = sidecar.get("example") or ""
            r = float(args.r) if args.r is not None else evaluate_rule(default_r_rule(example), n, D)
            report = gcr_fit(data, GcrParams(alpha, r, candidate_cap=args.candidate_cap), d)
            basis, pairs = report.basis, report.pairs
            print(f"alpha={fmt(alpha)}")
            print(f"r={fmt(r)}")
            print(f"n_alpha={report.n_alpha}")
        elif method == "SCR":
            alpha = _threshold("SCR", args, sidecar, n, D)
            K, pair_arr = scr_matrix(data, alpha)
            basis, _ = smallest_eigvecs(K, d)
            pairs = [tuple(p) for p in pair_arr]
            print(f"alpha={fmt(alpha)}")
            print(f"n_pairs={len(pairs)}")
        else:
            slices = args.slices
            if slices is None and sidecar.get("example") == "1":
                slices = 10
            basis = sir_fit(data, d, n_slices=slices)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_USAGE) from None
    except NoPairsError as exc:
        raise CliError(str(exc), EXIT_ALGO) from None
    except DegenerateError as exc:
        raise CliError(str(exc), EXIT_ALGO) from None

    Z = data.X @ basis
    g_hat = fit_kernel(Z, data.y) if args.regressor == "kernel" else fit_stage_two(Z, data.y, args.smoothness)
    model = ComposedModel(basis, g_hat)
    rmse = float(np.sqrt(np.mean((model.predict(data.X) - data.y) ** 2)))
    if data.truth is not None:
        print(f"subspace_error={fmt(projection_distance(basis, data.truth.phi))}")
    print(f"train_rmse={fmt(rmse)}")
    if args.out_model:
        _write_text(args.out_model, json.dumps(model.to_dict()) + "\n")
    if args.out_pairs:
        if pairs is None:
            raise CliError("--out-pairs needs a pair-based method (GCR or SCR)", EXIT_USAGE)
        try:
            export_pairs(pairs, data.X, args.out_pairs)
        except OSError as exc:
            raise CliError(f"cannot write {args.out_pairs}: {exc.strerror or exc}", EXIT_IO) from None
    return EXIT_OK


def _read_json(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror or exc}", EXIT_IO) from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        return exc


def cmd_experiment(args) -> int:
    doc = _read_json(args.config)
    if isinstance(doc, Exception) or not isinstance(doc, dict):
        raise CliError(f"{args.config}: config must be a JSON object", EXIT_USAGE)
    try:
        config = ExperimentConfig.from_dict(doc)
    except ConfigError as exc:
        raise CliError(f"invalid config: {exc}", EXIT_USAGE) from None
    jobs = args.jobs if args.jobs is not None else _available_cpus()
    if jobs < 1:
        raise CliError("--jobs must be at least 1", EXIT_USAGE)
    result = run_sweep(config, jobs=jobs)
    out = Path(args.out)
    _write_text(out, result.to_json())
    _write_text(out.with_suffix(".csv"), result.to_csv())
    for row in result.summary:
        if row["failures"]:
            log.warning("n=%d: %d of %d trials failed", row["n"], row["failures"], row["trials_run"])
    for key in ("subspace_slope", "regression_slope"):
        v = getattr(result, key)
        print(f"{key}={'' if v is None else fmt(v)}")
    return EXIT_OK


def cmd_report(args) -> int:
    blocks, grids = [], []
    for path in args.inputs:
        doc = _read_json(path)
        if isinstance(doc, Exception) or not isinstance(doc, dict) or "summary" not in doc:
            raise CliError(f"{path}: not a sweep result", EXIT_IO)
        label = doc.get("config", {}).get("label") or doc.get("config", {}).get("method") or Path(path).stem
        taken = {b[0] for b in blocks}
        base, k = label, 2
        while label in taken:
            label, k = f"{base}_{k}", k + 1
        rows = {int(r["n"]): r for r in doc["summary"]}
        blocks.append((label, rows))
        grids.append(sorted(rows))
    if any(g != grids[0] for g in grids[1:]):
        print("warning: sweeps have different n grids; missing entries are left blank", file=sys.stderr)
    ns = sorted(set().union(*grids))
    header = ["n"]
    for label, _ in blocks:
        header += [f"{label}_mean_subspace_error", f"{label}_mean_regression_error"]
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for n in ns:
        line = [str(n)]
        for _, rows in blocks:
            r = rows.get(n, {})
            for key in ("mean_subspace_error", "mean_regression_error"):
                v = r.get(key)
                line.append("" if v is None else fmt(v))
        w.writerow(line)
    if args.out:
        _write_text(args.out, buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gcr", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0, help="more log output on stderr")
    sub = p.add_subparsers(dest="command", required=True, metavar="{gen,fit,experiment,report}")

    g = sub.add_parser("gen", help="generate a synthetic dataset")
    g.add_argument("--example", required=True, help=f"example id ({', '.join(EXAMPLE_IDS)})")
    g.add_argument("--n", type=int, required=True, help="number of samples")
    g.add_argument("--noise", type=float, default=0.0, help="noise level in percent of RMS(f)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="CSV path; truth goes to <stem>.truth.json")
    g.set_defaults(func=cmd_gen)

    f = sub.add_parser("fit", help="estimate the subspace and fit the link function")
    f.add_argument("--in", dest="inp", required=True, help="dataset CSV")
    f.add_argument("--method", type=str.upper, choices=["GCR", "SCR", "SIR"], default="GCR")
    f.add_argument("--d", type=int, help="subspace dimension (default: from the truth sidecar)")
    f.add_argument("--alpha", type=float, help="connection threshold (default: per-example table)")
    f.add_argument("--r", type=float, help="tube radius for GCR (default: 2 n^(-1/D))")
    f.add_argument("--slices", type=int, help="number of SIR slices (default: about 200 samples each)")
    f.add_argument("--candidate-cap", type=int, help="GCR: limit partners tried per leader")
    f.add_argument("--regressor", choices=["piecewise_poly", "kernel"], default="piecewise_poly")
    f.add_argument("--smoothness", type=float, default=2.0, help="smoothness s of the piecewise fit")
    f.add_argument("--out-model", help="write the fitted model as JSON")
    f.add_argument("--out-pairs", help="write connected pairs as CSV")
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("experiment", help="run a sample-size sweep from a JSON config")
    e.add_argument("--config", required=True, help="JSON file with ExperimentConfig fields")
    e.add_argument("--out", required=True, help="sweep JSON path; the CSV table is written next to it")
    e.add_argument("--jobs", type=int, help="worker processes (default: available CPUs)")
    e.set_defaults(func=cmd_experiment)

    r = sub.add_parser("report", help="merge sweep results into one CSV table")
    r.add_argument("--in", dest="inputs", nargs="+", required=True, help="sweep JSON files")
    r.add_argument("--out", help="output CSV (default: stdout)")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"gcr {args.command}: error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
