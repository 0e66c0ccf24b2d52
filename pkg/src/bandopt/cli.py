"""Command-line entry point.

Subcommands:
    gen-data   render synthetic scenes to raster files plus a manifest
    train      train a single method over the configured seeds
    optimize   run the Bayesian band search, writing its trace
    compare    run all methods and write results + table (+ BO trace)
    report     render the summary table from a results file
    gradcheck  run the finite-difference suite over every op

Exit codes: 0 success, 1 validation/usage error, 2 runtime failure.
"""

import argparse
import os
import sys

from .checkpoint import CheckpointError
from .experiment import (ConfigError, build_experiment_dataset, load_config,
                         read_results, report, results_checksum, run_compare,
                         run_method, scene_specs, write_results)
from .gradcheck import gradient_suite
from .raster import RasterFormatError, save_raster, write_manifest
from .synth import generate_scene


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{message}\n{self.format_usage()}")


def _build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="experiment config file")
    common.add_argument("--seed", type=int, metavar="N", help="override the seed list")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--threads", type=int, default=1, metavar="N",
                        help="parallel training slots (default 1)")
    parser = _Parser(prog="bandopt",
                     description="band-selection benchmark toolkit")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.add_parser("gen-data", parents=[common],
                   help="write synthetic scene rasters and a manifest")
    sub.add_parser("train", parents=[common],
                   help="train the configured method over its seeds")
    opt = sub.add_parser("optimize", parents=[common],
                         help="run the Bayesian band search")
    opt.add_argument("--resume", action="store_true",
                     help="continue from a truncated trace in --out")
    sub.add_parser("compare", parents=[common],
                   help="run all methods and write results + table")
    rep = sub.add_parser("report", parents=[common],
                         help="render the table for an existing results file")
    rep.add_argument("results", metavar="RESULTS", help="results file path")
    sub.add_parser("gradcheck", parents=[common],
                   help="finite-difference check of every op")
    return parser


def _require(value, flag, command):
    if not value:
        raise UsageError(f"{command} requires {flag}")
    return value


def _load(args, command):
    cfg = load_config(_require(args.config, "--config", command))
    if args.seed is not None:
        cfg.seeds = (args.seed,)
        cfg.bo_seed = args.seed
    return cfg.validate()


def _outdir(args, command):
    out = _require(args.out, "--out", command)
    os.makedirs(out, exist_ok=True)
    return out


def _cmd_gen_data(args):
    cfg = _load(args, "gen-data")
    out = _outdir(args, "gen-data")
    trains, tests = scene_specs(cfg)
    entries = []
    for role, specs in (("train", trains), ("test", tests)):
        for i, spec in enumerate(specs):
            name = f"{role}-{i:03d}.rst"
            save_raster(generate_scene(spec), os.path.join(out, name))
            entries.append((role, name))
    manifest = os.path.join(out, "manifest.txt")
    write_manifest(entries, manifest)
    print(f"wrote {len(trains)} train + {len(tests)} test rasters and {manifest}")
    return 0


def _cmd_train(args):
    cfg = _load(args, "train")
    if cfg.method == "bayes_opt":
        raise ConfigError("use the optimize subcommand for method=bayes_opt")
    out = _outdir(args, "train")
    dataset = build_experiment_dataset(cfg)
    rows = run_method(cfg, dataset, out_dir=out, threads=args.threads)
    path = os.path.join(out, "results.tsv")
    write_results(rows, path)
    print(report(rows), end="")
    print(f"results: {path}")
    return 0


def _cmd_optimize(args):
    cfg = _load(args, "optimize")
    out = _outdir(args, "optimize")
    dataset = build_experiment_dataset(cfg)
    rows = run_method(cfg, dataset, method="bayes_opt", out_dir=out,
                      resume=args.resume)
    path = os.path.join(out, "results.tsv")
    write_results(rows, path)
    best = max(rows, key=lambda r: r.dice)
    print(f"best mask {best.mask_bits} dice {best.dice:.4f}")
    print(f"results: {path}  trace: {os.path.join(out, 'bo-trace.tsv')}")
    return 0


def _cmd_compare(args):
    cfg = _load(args, "compare")
    out = _outdir(args, "compare")
    dataset = build_experiment_dataset(cfg)
    rows = run_compare(cfg, dataset, out_dir=out, threads=args.threads)
    results_path = os.path.join(out, "results.tsv")
    write_results(rows, results_path)
    table = report(rows)
    with open(os.path.join(out, "table.txt"), "w", encoding="utf-8") as f:
        f.write(table)
    print(table, end="")
    print(f"results: {results_path}  checksum: {results_checksum(results_path)}")
    return 0


def _cmd_report(args):
    rows = read_results(args.results)
    table = report(rows)
    print(table, end="")
    if args.out:
        out = _outdir(args, "report")
        with open(os.path.join(out, "table.txt"), "w", encoding="utf-8") as f:
            f.write(table)
    return 0


def _cmd_gradcheck(args):
    results = gradient_suite(seed=0 if args.seed is None else args.seed)
    for res in results:
        print(res)
    failed = [r for r in results if not r.passed]
    if failed:
        print(f"{len(failed)} of {len(results)} checks failed")
        return 2
    print(f"all {len(results)} gradient checks passed")
    return 0


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "train": _cmd_train,
    "optimize": _cmd_optimize,
    "compare": _cmd_compare,
    "report": _cmd_report,
    "gradcheck": _cmd_gradcheck,
}


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage()
            return 1
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except (ConfigError, RasterFormatError, CheckpointError, ValueError,
            FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (RuntimeError, OSError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
