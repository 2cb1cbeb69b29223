"""Command-line experiment runner.

Every command writes its data files plus a JSON run manifest recording the
exact argument vector, resolved settings, seeds and SHA-256 digests of all
inputs and outputs. ``qclsense rerun MANIFEST`` replays a run and checks the
regenerated outputs against the recorded digests.

Exit codes: 0 success, 1 runtime or convergence failure, 2 argument error.
"""

from __future__ import annotations

import argparse
import datetime
import json
import logging
import os
import platform
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__, fileio
from .analysis import (
    ResponseCurve,
    default_tie_tol,
    delta_I_sweep,
    make_grid,
    range_summary,
    response_curve,
)
from .ansatz import (
    AnsatzConfig,
    CompiledAnsatz,
    load_params,
    random_params,
    save_params,
    zero_params,
)
from .errors import TrainingError
from .experiments import FIG2_QUBITS, default_depth, overlay_table, untrained_response
from .sensing import GradientFieldSpec, load_model, sample_model, save_model
from .svgplot import plot_csv
from .training import TargetSpec, TrainConfig, TrainingSet, make_dataset, train

logger = logging.getLogger("qclsense")

CONVENTIONS = {
    "interaction_pairs": "each unordered pair i<j counted once",
    "basis": "qubit 1 is the most significant bit; sigma_z = |1><1| - |0><0|",
    "sigma_y": "[[0, i], [-i, 0]] in the (|0>, |1>) basis",
    "delta_I_theory": "closed form for the non-interacting ensemble, no re-derivation",
    "cost": "sum (not mean) of squared residuals",
}


class UsageError(ValueError):
    """Invalid command-line arguments (exit code 2)."""


def parse_grid(text: str) -> np.ndarray:
    try:
        start, stop, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must be from:to:step, got {text!r}") from None
    try:
        return make_grid(start, stop, step)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def parse_int_list(text: str) -> list:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return f"{fileio.fmt_float(value[0])}:{fileio.fmt_float(value[-1])}:{value.size}pts" if value.size else []
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    return str(value)


class Run:
    """Collects provenance while a command runs, then writes the manifest."""

    def __init__(self, args, argv):
        self.args = args
        self.argv = list(argv)
        self.inputs = {}
        self.outputs = []
        self.seeds = {}
        self.extra = {}
        self.started = time.perf_counter()

    def input(self, path):
        path = Path(path)
        self.inputs[str(path)] = fileio.file_digest(path)
        return path

    def output(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.outputs.append(path)
        return path

    def write_manifest(self, path) -> Path:
        path = Path(path)
        settings = {k: _jsonable(v) for k, v in sorted(vars(self.args).items()) if k != "func"}
        manifest = {
            "tool": "qclsense",
            "version": __version__,
            "command": self.args.command,
            "argv": self.argv,
            "cwd": os.getcwd(),
            "settings": settings,
            "seeds": self.seeds,
            "conventions": CONVENTIONS,
            "inputs": self.inputs,
            "outputs": {str(p): fileio.file_digest(p) for p in self.outputs},
            "results": self.extra,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "wall_time": time.perf_counter() - self.started,
        }
        path.parent.mkdir(parents=True, exist_ok=True)
        fileio.write_json(path, manifest)
        print(f"manifest: {path}")
        return path


def _sibling_manifest(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".manifest.json")


def _config_from_args(args) -> AnsatzConfig:
    return AnsatzConfig(D=args.depth, t_gate=args.t_gate, grad=GradientFieldSpec(args.B0),
                        sharing=args.sharing)


# Commands


def cmd_gen_model(args, run: Run) -> int:
    if args.L is None or args.L < 1:
        raise UsageError(f"--L must be a positive integer, got {args.L}")
    model = sample_model(args.L, args.seed, t_sense=args.t_sense)
    out = run.output(args.out or "model.json")
    save_model(model, out)
    run.seeds["model"] = args.seed
    run.write_manifest(_sibling_manifest(out))
    return 0


def _resolve_params(args, run: Run, model):
    if args.params:
        theta, config = load_params(run.input(args.params))
        return theta, config
    config = _config_from_args(args)
    if args.random_init is not None:
        run.seeds["random_init"] = args.random_init
        return random_params(model, config, args.random_init), config
    return zero_params(model, config), config


def cmd_response(args, run: Run) -> int:
    model = load_model(run.input(args.model))
    theta, config = _resolve_params(args, run, model)
    curve = response_curve(theta, model, config, args.grid, workers=args.workers)
    out = run.output(args.out or "response.csv")
    curve.save(out)
    range_out = run.output(args.range_out or out.with_name(out.stem + ".range.json"))
    summary = range_summary(curve, args.tie_tol if args.tie_tol is not None else default_tie_tol(model.L))
    fileio.write_json(range_out, summary)
    run.extra["dynamic_range"] = summary
    run.write_manifest(_sibling_manifest(out))
    return 0


def cmd_train(args, run: Run) -> int:
    model = load_model(run.input(args.model))
    if args.depth is None:
        args.depth = default_depth(model.L)
    config = _config_from_args(args)
    if args.dataset:
        ts = TrainingSet.load(run.input(args.dataset))
    else:
        ts = make_dataset(model, TargetSpec(args.A, args.B), args.N, seed=args.data_seed)
        run.seeds["dataset"] = args.data_seed
    tc = TrainConfig(
        restarts=args.restarts,
        max_iterations=args.max_iter,
        cost_tolerance=args.cost_tol,
        fd_step=args.fd_step,
        init_seed=args.seed,
        angle_bounds=(args.angle_lo, args.angle_hi),
        target_cost=args.target_cost,
        stop_at_target=args.stop_at_target,
    )
    run.seeds["init"] = args.seed
    result = train(model, config, ts, tc)
    out = Path(args.out or "train_out")
    ts.save(run.output(out / "dataset.csv"))
    save_params(run.output(out / "params.json"), result.best_params, config)
    save_params(run.output(out / "params_init.json"), result.initial_params, config)
    result.save_log(run.output(out / "train_log.csv"))
    run.extra.update({
        "train_config": tc.to_dict(),
        "final_cost": result.final_cost,
        "restart_index": result.restart_index,
        "restart_costs": [c if np.isfinite(c) else "inf" for c in result.restart_costs],
        "iterations": result.iterations,
        "optimizer_message": result.message,
        "train_wall_time": result.wall_time,
        "params": fileio.read_json(out / "params.json"),
    })
    run.write_manifest(out / "manifest.json")
    print(f"final cost {result.final_cost:.3e} (restart {result.restart_index}, "
          f"{result.iterations} iterations)")
    if result.final_cost <= tc.target_cost:
        return 0
    logger.error("final cost %.3e above target %.1e", result.final_cost, tc.target_cost)
    return 1


def cmd_fig2(args, run: Run) -> int:
    out = Path(args.out or "fig2_out")
    seeds = list(range(args.seed, args.seed + args.n_seeds))
    run.seeds["models"] = seeds
    config = AnsatzConfig(D=args.depth, t_gate=args.t_gate, grad=GradientFieldSpec(args.B0))
    results, rows, failures = [], [], []
    for L in args.L_list:
        for seed in seeds:
            try:
                r = untrained_response(L, seed, grid=args.grid, workers=args.workers, config=config)
            except Exception as exc:  # one bad qubit count must not sink the sweep
                logger.error("L=%d seed=%d failed: %s", L, seed, exc)
                failures.append(f"L={L} seed={seed}: {exc}")
                continue
            results.append(r)
            r.curve.save(run.output(out / f"response_L{L}_seed{seed}.csv"))
            fileio.write_json(run.output(out / f"range_L{L}_seed{seed}.json"), r.summary)
            rows.append((L, seed, r.summary["I_lo"], r.summary["I_hi"], r.width, r.summary["violations"]))
            logger.info("L=%d seed=%d width=%.2f", L, seed, r.width)
    fileio.write_csv(run.output(out / "summary.csv"),
                     ["L", "seed", "I_lo", "I_hi", "width", "violations"], rows)
    medians = {}
    for L in args.L_list:
        w = [row[4] for row in rows if row[0] == L]
        if w:
            medians[str(L)] = float(np.median(w))
            print(f"L={L:2d}  median dynamic-range width {medians[str(L)]:.3f} over {len(w)} seed(s)")
    run.extra["median_width"] = medians
    run.extra["failures"] = failures
    run.write_manifest(out / "manifest.json")
    return 1 if failures else 0


def cmd_fig3(args, run: Run) -> int:
    model = load_model(run.input(args.model))
    trained, config = load_params(run.input(args.params))
    init_path = Path(args.init_params) if args.init_params else Path(args.params).with_name("params_init.json")
    if init_path.exists():
        untrained, _ = load_params(run.input(init_path))
    else:
        run.seeds["random_init"] = args.seed
        untrained = random_params(model, config, args.seed)
    ts = TrainingSet.load(run.input(args.dataset))
    compiled = CompiledAnsatz(model, config)
    table = overlay_table(model, config, trained, untrained, args.grid,
                          TargetSpec(args.A, args.B), compiled=compiled)
    out = Path(args.out or "fig3_out")
    fileio.write_csv(run.output(out / "overlay.csv"), ["I", "target", "untrained", "trained"],
                     [tuple(map(float, row)) for row in table])
    order = np.argsort(ts.currents, kind="stable")
    fitted = compiled.expectations(trained, ts.currents[order])
    fileio.write_csv(run.output(out / "training_points.csv"), ["I", "target", "trained"],
                     zip(ts.currents[order], ts.targets[order], fitted))
    run.write_manifest(out / "manifest.json")
    return 0


def cmd_fig4(args, run: Run) -> int:
    model = load_model(run.input(args.model))
    theta, config = load_params(run.input(args.params))
    if args.M < 1:
        raise UsageError(f"--M must be >= 1, got {args.M}")
    result = delta_I_sweep(theta, model, config, args.start, args.stop, args.step, M=args.M, dI=args.dI)
    out = run.output(args.out or "delta_i.csv")
    result.save(out)
    flags = result.flags
    run.extra["divergent_points"] = int(sum(f != "ok" for f in flags))
    run.write_manifest(_sibling_manifest(out))
    return 0


def cmd_plot(args, run: Run) -> int:
    csv_path = run.input(args.csv)
    out = run.output(args.out or Path(args.csv).with_suffix(".svg"))
    plot_csv(csv_path, out)
    run.write_manifest(_sibling_manifest(out))
    return 0


@contextmanager
def _working_directory(path):
    previous = os.getcwd()
    os.chdir(path)
    try:
        yield
    finally:
        os.chdir(previous)


def cmd_rerun(args, run: Run) -> int:
    manifest = fileio.read_json(args.manifest)
    argv = manifest["argv"]
    if argv and argv[0] == "rerun":
        raise UsageError("refusing to replay a rerun manifest")
    with _working_directory(manifest.get("cwd", os.getcwd())):
        code = main(argv)
        if code != 0:
            return code
        mismatched = [p for p, digest in manifest["outputs"].items()
                      if not Path(p).exists() or fileio.file_digest(p) != digest]
    if mismatched:
        for p in mismatched:
            print(f"differs: {p}")
        return 1
    print(f"all {len(manifest['outputs'])} outputs reproduced bit-identically")
    return 0


# Parser


def _common(parser):
    parser.add_argument("--seed", type=int, default=0, help="random seed for this command")
    parser.add_argument("--out", help="output file or directory")
    parser.add_argument("--workers", type=int, default=1, help="threads for grid evaluation")
    parser.add_argument("--grid", type=parse_grid, default=make_grid(-1.0, 1.0, 0.01),
                        help="current grid as from:to:step (default -1:1:0.01)")
    parser.add_argument("--config", help="JSON file of option defaults")
    parser.add_argument("-v", "--verbose", action="store_true")


def _ansatz_options(parser, depth_default=20):
    parser.add_argument("--depth", "-D", type=int, default=depth_default)
    parser.add_argument("--sharing", choices=("shared", "per_qubit"), default="shared")
    parser.add_argument("--t-gate", dest="t_gate", type=float, default=1.0)
    parser.add_argument("--B0", type=float, default=1.0)


def _target_options(parser):
    parser.add_argument("--A", type=float, default=1.0, help="target amplitude")
    parser.add_argument("--B", type=float, default=1.0, help="target range")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qclsense", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-model", help="sample a random sensor and write it as JSON")
    _common(p)
    p.add_argument("--L", type=int, required=True, help="number of qubits")
    p.add_argument("--t-sense", dest="t_sense", type=float, default=1.0)
    p.set_defaults(func=cmd_gen_model)

    p = sub.add_parser("response", help="sensor response on a current grid")
    _common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--params", help="parameter JSON; default all angles zero")
    p.add_argument("--random-init", dest="random_init", type=int,
                   help="use uniformly random angles from this seed instead of zeros")
    p.add_argument("--range-out", dest="range_out")
    p.add_argument("--tie-tol", dest="tie_tol", type=float)
    _ansatz_options(p)
    p.set_defaults(func=cmd_response)

    p = sub.add_parser("train", help="fit circuit angles to the monotone target")
    _common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", help="existing I,target CSV; otherwise sampled")
    p.add_argument("--N", type=int, default=200)
    p.add_argument("--data-seed", dest="data_seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--max-iter", dest="max_iter", type=int, default=500)
    p.add_argument("--cost-tol", dest="cost_tol", type=float, default=1e-10)
    p.add_argument("--target-cost", dest="target_cost", type=float, default=1e-5,
                   help="exit 0 only if the final cost is at or below this value")
    p.add_argument("--fd-step", dest="fd_step", type=float, default=1e-6)
    p.add_argument("--angle-lo", dest="angle_lo", type=float, default=-2 * np.pi)
    p.add_argument("--angle-hi", dest="angle_hi", type=float, default=2 * np.pi)
    p.add_argument("--stop-at-target", dest="stop_at_target", action="store_true")
    _ansatz_options(p, depth_default=None)
    _target_options(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("fig2", help="untrained dynamic range versus qubit count")
    _common(p)
    p.add_argument("--L-list", dest="L_list", type=parse_int_list, default=list(FIG2_QUBITS))
    p.add_argument("--n-seeds", dest="n_seeds", type=int, default=1)
    _ansatz_options(p)
    p.set_defaults(func=cmd_fig2)

    p = sub.add_parser("fig3", help="target, untrained and trained responses")
    _common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--init-params", dest="init_params")
    p.add_argument("--dataset", required=True)
    _target_options(p)
    p.set_defaults(func=cmd_fig3)

    for name in ("fig4", "delta-i"):
        p = sub.add_parser(name, help="current uncertainty of a trained sensor vs. closed form")
        _common(p)
        p.add_argument("--model", required=True)
        p.add_argument("--params", required=True)
        p.add_argument("--from", dest="start", type=float, default=-0.8)
        p.add_argument("--to", dest="stop", type=float, default=0.8)
        p.add_argument("--step", type=float, default=0.05)
        p.add_argument("--M", type=int, default=1)
        p.add_argument("--dI", type=float, default=1e-4, help="derivative step")
        p.set_defaults(func=cmd_fig4)

    p = sub.add_parser("plot", help="render a CSV as an SVG line chart")
    _common(p)
    p.add_argument("csv")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("rerun", help="replay a run manifest and verify its outputs")
    p.add_argument("manifest")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_rerun)
    return parser


def _apply_config(parser, argv):
    """Re-parse with defaults taken from ``--config`` if one was given."""
    args = parser.parse_args(argv)
    path = getattr(args, "config", None)
    if not path:
        return args
    try:
        overrides = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        parser.error(f"cannot read config {path}: {exc}")
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in subparser._actions}
    unknown = set(overrides) - known
    if unknown:
        parser.error(f"unknown config keys: {', '.join(sorted(unknown))}")
    if "grid" in overrides and isinstance(overrides["grid"], str):
        overrides["grid"] = parse_grid(overrides["grid"])
    if "L_list" in overrides and isinstance(overrides["L_list"], str):
        overrides["L_list"] = parse_int_list(overrides["L_list"])
    subparser.set_defaults(**overrides)
    return parser.parse_args(argv)


NEGATIVE_VALUE_OPTIONS = ("--grid", "--from", "--to")


def _glue_negative_values(argv):
    """Let ``--grid -1:1:0.01`` through argparse, which would read the value as an option."""
    out, k = [], 0
    while k < len(argv):
        if argv[k] in NEGATIVE_VALUE_OPTIONS and k + 1 < len(argv) and argv[k + 1].startswith("-"):
            out.append(f"{argv[k]}={argv[k + 1]}")
            k += 2
        else:
            out.append(argv[k])
            k += 1
    return out


def main(argv=None) -> int:
    argv = _glue_negative_values(sys.argv[1:] if argv is None else list(argv))
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    run = Run(args, argv)
    try:
        return args.func(args, run)
    except (OSError, fileio.CSVParseError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (TrainingError, ArithmeticError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, TypeError, KeyError) as exc:
        print(f"argument error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
