"""Command-line entry point: ``zonofusion {run,bench,fuse,stability}``.

Exit codes: 0 success, 1 usage or input error, 2 invariant violation.
"""

import argparse
import json
import sys

from .errors import InclusionViolationError, ZonoFusionError
from .fusion import METHODS, FusionProblem, fuse
from .sim import (
    bench_csv,
    bench_fusion,
    config_from_mapping,
    load_config,
    load_zono2d_fixture,
    run_scenario,
)
from .stability import analyze_sensor
from .zonotope import Zonotope

EXIT_OK, EXIT_USAGE, EXIT_VIOLATION = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _methods(text):
    names = tuple(m.strip() for m in text.split(",") if m.strip())
    bad = [m for m in names if m not in METHODS]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"methods must be a comma list from {', '.join(METHODS)}")
    return names


def _int_list(text):
    try:
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError("expected a comma list of integers") from None


def build_parser():
    p = _Parser(prog="zonofusion", description="Distributed zonotopic fusion estimation toolkit.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="TOML scenario file (default: tracking preset)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output file (default: stdout)")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")

    run = sub.add_parser("run", help="simulate a scenario and write per-step metrics")
    common(run)
    run.add_argument("--horizon", type=int)
    run.add_argument("--methods", type=_methods)
    run.add_argument("--dat", help="also write gnuplot blocks to this file")
    run.add_argument("--no-strict", action="store_true", help="record violations instead of stopping")

    bench = sub.add_parser("bench", help="time fusion methods on random planar instances")
    bench.add_argument("--orders", type=_int_list, default=[4, 8, 16, 32])
    bench.add_argument("--L", type=_int_list, default=[3], dest="Ls")
    bench.add_argument("--repetitions", type=int, default=5)
    bench.add_argument("--methods", type=_methods, default=("batch_opt", "sequential", "volume_opt"))
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--out")
    bench.add_argument("--format", choices=("csv", "json"), default="csv")

    fz = sub.add_parser("fuse", help="fuse zonotopes read from JSON records")
    fz.add_argument("inputs", nargs="*", help="JSON files holding one record or a list of records")
    fz.add_argument("--preset", choices=("zono2d",), help="use the bundled planar fixture")
    fz.add_argument("--methods", type=_methods, default=("batch_opt", "improved", "sequential", "box"))
    fz.add_argument("--out")
    fz.add_argument("--format", choices=("csv", "json"), default="json")

    st = sub.add_parser("stability", help="boundedness report per sensor")
    common(st)
    return p


def _write(text, out):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _config(args, **overrides):
    if args.config:
        return load_config(args.config, seed=args.seed, **overrides)
    return config_from_mapping({}, seed=args.seed, **overrides)


def _read_zonotopes(paths):
    zs = []
    for path in paths:
        with open(path) as fh:
            doc = json.load(fh)
        if isinstance(doc, dict) and "zonotopes" in doc:
            doc = doc["zonotopes"]
        recs = doc if isinstance(doc, list) else [doc]
        zs += [Zonotope.from_record(r) for r in recs]
    return zs


def cmd_run(args):
    cfg = _config(args, horizon=args.horizon, methods=args.methods,
                  strict=False if args.no_strict else None)
    try:
        run = run_scenario(cfg)
    except InclusionViolationError as exc:
        print(f"invariant violation at step {exc.step}: {exc.what}", file=sys.stderr)
        return EXIT_VIOLATION
    if args.format == "csv":
        _write(run.csv_text(), args.out)
    else:
        recs = [{"k": r.k, "truth": r.truth.tolist(), "locals": r.locals, "methods": r.methods}
                for r in run.records]
        _write(json.dumps({"digest": run.digest(), "steps": recs}, indent=1) + "\n", args.out)
    if args.dat:
        _write(run.dat_text(), args.dat)
    bad = run.violations()
    if bad:
        k, what = bad[0]
        print(f"{len(bad)} invariant violations; first at step {k}: {what}", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_bench(args):
    rows = bench_fusion(args.orders, args.Ls, args.repetitions, methods=args.methods, seed=args.seed)
    text = bench_csv(rows) if args.format == "csv" else json.dumps(rows, indent=1) + "\n"
    _write(text, args.out)
    return EXIT_OK


def cmd_fuse(args):
    if args.preset:
        zs = load_zono2d_fixture()
    elif args.inputs:
        zs = _read_zonotopes(args.inputs)
    else:
        print("fuse: give input files or --preset", file=sys.stderr)
        return EXIT_USAGE
    problem = FusionProblem(zs)
    results = [fuse(problem, m) for m in args.methods]
    if args.format == "json":
        _write(json.dumps([r.to_record() for r in results], indent=1) + "\n", args.out)
    else:
        lines = ["method,weighted_norm_sq,volume,generator_order,wall_time"]
        for r in results:
            m = r.metrics
            lines.append(f"{r.method},{m['weighted_norm_sq']:.17g},{m['volume']:.17g},"
                         f"{m['generator_order']},{m['wall_time']:.17g}")
        _write("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_stability(args):
    cfg = _config(args)
    plant = cfg.plant()
    reports = [(s.id, analyze_sensor(plant, s, cfg.r, cfg.W)) for s in cfg.sensor_models()]
    if args.format == "json":
        _write(json.dumps([dict(sensor=i, **rep.to_record()) for i, rep in reports], indent=1) + "\n", args.out)
    else:
        lines = ["sensor,gamma,mu,d,r,contraction,phi,ultimate_bound,bounded"]
        for i, rep in reports:
            lines.append(f"{i},{rep.gamma:.17g},{rep.mu:.17g},{rep.d},{rep.r},{rep.contraction:.17g},"
                         f"{rep.phi:.17g},{rep.ultimate_bound:.17g},{int(rep.bounded)}")
        _write("\n".join(lines) + "\n", args.out)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "bench": cmd_bench, "fuse": cmd_fuse, "stability": cmd_stability}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ValueError, OSError, ZonoFusionError) as exc:
        print(f"zonofusion {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
