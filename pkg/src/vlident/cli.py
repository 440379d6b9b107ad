"""Command-line entry point: ``vlident <subcommand> ...``.

Failures print a single line ``error: <ErrorClass>: <message>`` on stderr and
exit with status 1 (2 for usage errors, from argparse).
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import io
from ._version import __version__
from .errors import ConfigError, MissingColumnError, VLError
from .experiment import MODES, ExperimentConfig, run_experiment, summarize
from .laguerre import LaguerreSeriesSpec, laguerre_functions
from .model import (coefficient_count, vl_param_count_exact, volterra_param_count,
                    volterra_param_count_approx)
from .regressor import Dataset, assemble, fit, predict
from .simulate import (PRNG_ALGORITHM, difference_transform, evaluate, generate_inputs,
                       inverse_cumulate, simulate_plant)
from .tuner import TuneConfig, tune_time_scales

log = logging.getLogger("vlident")

WARMUP_COLUMN = "warmup"


def _echo_seed(seed):
    print(f"seed: {seed} ({PRNG_ALGORITHM})", file=sys.stderr)


def _difference_columns(columns: dict, names) -> tuple:
    """Difference the named columns, drop the first row of the rest. Returns (columns, initials)."""
    missing = [n for n in names if n not in columns]
    if missing:
        raise MissingColumnError(f"cannot difference missing column(s) {missing}")
    initials = {}
    out = {}
    for name, values in columns.items():
        if name in names:
            initials[name] = float(values[0])
            out[name] = difference_transform(values)
        else:
            out[name] = values[1:]
    return out, initials


def _default_start(columns: dict, memory: int, start):
    if start is not None:
        return start
    warm = columns.get(WARMUP_COLUMN)
    warm_rows = int(np.count_nonzero(warm)) if warm is not None else 0
    return max(memory, warm_rows)


def _load_for_structure(path, structure, difference=(), need_output=True):
    columns = io.read_csv_columns(path)
    initials = {}
    if difference:
        columns, initials = _difference_columns(columns, difference)
    output = structure.output_name if (need_output or structure.output_name in columns) else None
    ds = io.dataset_from_columns(columns, structure.input_names, output, path,
                                 structure.sample_interval)
    return ds, columns, initials


# ---------------------------------------------------------------- commands

def cmd_laguerre(args):
    spec = LaguerreSeriesSpec(args.order, args.time_scale)
    if args.memory < 0 or not args.dt > 0:
        raise ConfigError("--memory must be >= 0 and --dt positive")
    t = np.arange(int(math.floor(args.memory / args.dt + 1e-9)) + 1) * args.dt
    values = laguerre_functions(t, spec.order_count - 1, spec.time_scale)
    columns = {"t": t}
    columns.update({f"l{r}": values[r] for r in range(spec.order_count)})
    _emit_csv(args.out, columns)


def cmd_count(args):
    structure = io.load_structure(args.structure).structure
    N, M = structure.max_degree, structure.memory_length
    lines = [
        f"vl_coefficients: {coefficient_count(structure)}",
        f"volterra_parameters: {volterra_param_count(N, M) if M >= 1 else 'undefined (M=0)'}",
        f"volterra_parameters_approx: {volterra_param_count_approx(N, M) if M >= 1 else 'undefined (M=0)'}",
    ]
    orders = {s.order_count for s in structure.specs.values()}
    if len(orders) == 1 and structure.num_inputs == 1:
        R = orders.pop()
        lines.append(f"vl_table_count: {R ** N}")
        lines.append(f"vl_distinct_siso: {vl_param_count_exact(N, R)}")
    print("\n".join(lines))


def cmd_fit(args):
    sf = io.load_structure(args.structure)
    structure = sf.structure
    ridge = sf.ridge if args.ridge is None else args.ridge
    ds, columns, initials = _load_for_structure(args.data, structure, args.difference)
    start = _default_start(columns, structure.memory_length, args.start)
    design = assemble(ds, structure, start, args.rows)
    model = fit(design, ds.output[design.row_times], ridge, differenced=initials)
    io.save_model(args.out, model)
    print(f"sse: {io.format_float(model.fit_stats.sse)} rows: {model.fit_stats.num_rows} "
          f"coefficients: {model.theta.size}")


def cmd_predict(args):
    model = io.load_model(args.model)
    structure = model.structure
    diff_cols = list(model.differenced)
    raw = io.read_csv_columns(args.data)
    ds, columns, _ = _load_for_structure(args.data, structure, diff_cols, need_output=False)
    start = _default_start(columns, structure.memory_length, args.start)
    y_hat = predict(model, ds, start, args.rows)
    out = {"t": np.arange(start, start + y_hat.size), "y_hat": y_hat}
    out_name = structure.output_name
    if out_name in model.differenced and out_name in raw:
        # differenced row j predicts y(j+1) - y(j); integrate from the observed level y(start)
        out["t"] = out["t"] + 1
        out["y_hat_level"] = inverse_cumulate(raw[out_name][start], y_hat)[1:]
    io.write_csv(args.out, out)


def cmd_evaluate(args):
    model = io.load_model(args.model)
    ds, columns, _ = _load_for_structure(args.data, model.structure, list(model.differenced))
    start = _default_start(columns, model.structure.memory_length, args.start)
    m = evaluate(model, ds, start, args.rows)
    io.write_json(args.out, {"sse": m.sse, "mse": m.mse,
                             "normalized_sse": m.normalized_sse if m.normalized_defined else None,
                             "normalized_defined": m.normalized_defined,
                             "rows": m.rows, "start": start})
    print(f"sse: {io.format_float(m.sse)} normalized_sse: "
          f"{io.format_float(m.normalized_sse) if m.normalized_defined else 'undefined'}")


def cmd_tune(args):
    sf = io.load_structure(args.structure)
    structure = sf.structure
    _echo_seed(args.seed)
    ds, columns, _ = _load_for_structure(args.data, structure)
    start = _default_start(columns, structure.memory_length, args.start)
    try:
        lo, hi = (float(v) for v in args.bounds.split(","))
    except ValueError:
        raise ConfigError(f"--bounds must be 'a_min,a_max', got {args.bounds!r}") from None
    config = TuneConfig((lo, hi), args.starts, args.budget, args.tolerance, seed=args.seed,
                        validation_split=args.val_split,
                        ridge=sf.ridge if args.ridge is None else args.ridge)
    result = tune_time_scales(ds, structure, config, start, args.rows)
    io.save_structure(args.out, result.structure, config.ridge)
    trace_path = args.trace or str(Path(args.out).with_suffix("")) + ".trace.csv"
    keys = structure.timescale_keys()
    names = [f"a_{n}_{structure.input_names[i]}" for n, i in keys]
    trace = {"start": np.array([e.start for e in result.trace], dtype=int),
             "iter": np.array([e.iteration for e in result.trace], dtype=int)}
    for j, name in enumerate(names):
        trace[name] = np.array([e.time_scales[j] for e in result.trace])
    trace["sse"] = np.array([e.sse for e in result.trace])
    io.write_csv(trace_path, trace)
    print(f"sse: {io.format_float(result.sse)} evaluations: {result.evaluations} "
          + " ".join(f"{n}={io.format_float(v)}" for n, v in zip(names, result.structure.time_scales())))


def cmd_simulate(args):
    plant, names, output = io.load_plant(args.plant)
    _echo_seed(args.seed)
    columns = io.read_csv_columns(args.inputs)
    missing = [n for n in names if n not in columns]
    if missing:
        raise MissingColumnError(f"{args.inputs}: missing input column(s) {missing}")
    u = np.column_stack([columns[n] for n in names])
    result = simulate_plant(plant, u, args.seed)
    out = {n: columns[n] for n in names}
    out[output] = result.output
    warm = np.zeros(u.shape[0], dtype=int)
    warm[:result.warmup] = 1
    out[WARMUP_COLUMN] = warm
    io.write_csv(args.out, out)


def cmd_excite(args):
    _echo_seed(args.seed)
    names = args.names.split(",")
    u = generate_inputs(args.kind, args.length, len(names), args.seed, dwell=args.dwell,
                        gain=args.gain, pole=args.pole)
    io.write_csv(args.out, {n: u[:, j] for j, n in enumerate(names)})


def experiment_config_from_dict(data: dict, base: Path):
    """Parse an experiment document. Returns ``(configs, dataset)``."""
    known = {"trials", "degree_domain", "order_domain", "timescale_domain", "mode", "seed",
             "memory", "rows", "start", "ridge", "validation_split", "max_resamples",
             "data", "plant", "excitation", "schema_version"}
    extra = sorted(set(data) - known)
    if extra:
        raise ConfigError(f"unknown experiment field(s) {extra}")
    kwargs = {k: data[k] for k in known - {"data", "plant", "excitation", "mode", "schema_version"}
              if k in data}
    for k in ("degree_domain", "order_domain", "timescale_domain"):
        if k in kwargs:
            kwargs[k] = tuple(kwargs[k])
    mode = data.get("mode", "both")
    modes = MODES if mode == "both" else (mode,)
    configs = [ExperimentConfig(mode=m, **kwargs) for m in modes]
    seed = configs[0].seed
    if "data" in data:
        ref = data["data"]
        path = base / ref["path"]
        if not path.exists():
            raise ConfigError(f"data file {path} does not exist")
        dataset = io.load_csv(path, ref["inputs"], ref["output"])
    elif "plant" in data:
        ref = data["plant"]
        plant_doc = io.read_json(base / ref) if isinstance(ref, str) else ref
        plant, names, output = io.plant_from_dict(plant_doc)
        exc = dict(data.get("excitation", {}))
        kind = exc.pop("kind", "two-level")
        length = int(exc.pop("length", 600))
        u = generate_inputs(kind, length, len(names), exc.pop("seed", seed), **exc)
        y = simulate_plant(plant, u, seed).output
        dataset = Dataset(u, y, tuple(names), output)
    else:
        raise ConfigError("experiment needs a 'data' or 'plant' reference")
    return configs, dataset


def cmd_experiment(args):
    path = Path(args.config)
    data = io.read_json(path)
    configs, dataset = experiment_config_from_dict(data, path.parent)
    _echo_seed(configs[0].seed)
    table = []
    for cfg in configs:
        table.extend(run_experiment(cfg, dataset))
    io.write_csv(args.out, {
        "trial": np.array([r.trial for r in table], dtype=int),
        "mode": np.array([r.mode for r in table], dtype=object),
        "params_json": np.array([io.dumps(r.params).strip() for r in table], dtype=object),
        "sse": np.array([r.sse for r in table]),
        "resamples": np.array([r.resamples for r in table], dtype=int),
    })
    summary = summarize(table)
    summary["seed"] = configs[0].seed
    summary["prng"] = PRNG_ALGORITHM
    if args.summary:
        io.write_json(args.summary, summary)
    for mode, st in summary["arms"].items():
        if st.get("count"):
            print(f"{mode}: n={st['count']} median={io.format_float(st['median'])} "
                  f"mean={io.format_float(st['mean'])} std={io.format_float(st['std'])}")


def _emit_csv(out, columns):
    if out:
        io.write_csv(out, columns)
    else:
        sys.stdout.write(io.csv_text(columns))


# ------------------------------------------------------------------- parser

def _window_args(p):
    p.add_argument("--start", type=int, default=None, help="first row index k (default: max(M, warm-up))")
    p.add_argument("--rows", type=int, default=None, help="row count D (default: all remaining)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vlident",
        description="Volterra-Laguerre system identification from CSV time series.",
        epilog="VL_IDENT_THREADS caps worker threads for tune and experiment (default 1). "
               "Errors print one line 'error: <Class>: <message>' and exit 1.")
    parser.add_argument("--version", action="version", version=f"vlident {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("laguerre", help="sample the Laguerre basis as CSV")
    p.add_argument("--order", type=int, required=True, help="number of basis functions R")
    p.add_argument("--time-scale", type=float, required=True, help="time scale a (per sample)")
    p.add_argument("--memory", type=float, required=True, help="last time sample M")
    p.add_argument("--dt", type=float, default=1.0)
    p.add_argument("--out", default=None, help="output CSV (default: stdout)")
    p.set_defaults(func=cmd_laguerre)

    p = sub.add_parser("count", help="print coefficient counts for a structure file")
    p.add_argument("--structure", required=True)
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("fit", help="fit a VL model by least squares")
    p.add_argument("--data", required=True)
    p.add_argument("--structure", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ridge", type=float, default=None)
    p.add_argument("--difference", action="append", default=[], metavar="COLUMN",
                   help="difference this column before fitting (repeatable)")
    _window_args(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predict with a fitted model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    _window_args(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="SSE metrics of a model on data")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    _window_args(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("tune", help="optimize Laguerre time scales")
    p.add_argument("--data", required=True)
    p.add_argument("--structure", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--bounds", default="0.005,100")
    p.add_argument("--starts", type=int, default=8)
    p.add_argument("--budget", type=int, default=2000)
    p.add_argument("--tolerance", type=float, default=1e-8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--val-split", type=float, default=0.0)
    p.add_argument("--ridge", type=float, default=None)
    p.add_argument("--trace", default=None, help="trace CSV (default: <out>.trace.csv)")
    _window_args(p)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("simulate", help="run a synthetic plant on input data")
    p.add_argument("--plant", required=True)
    p.add_argument("--inputs", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("excite", help="generate excitation signals as CSV")
    p.add_argument("--kind", choices=("two-level", "filtered-noise", "multisine"), default="two-level")
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--names", default="u1")
    p.add_argument("--dwell", type=int, default=5)
    p.add_argument("--gain", type=float, default=1.0)
    p.add_argument("--pole", type=float, default=0.9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_excite)

    p = sub.add_parser("experiment", help="fixed vs variable parameter trials")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--summary", default=None)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (VLError, OSError, KeyError, ValueError) as exc:
        msg = " ".join(str(exc).split())
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
