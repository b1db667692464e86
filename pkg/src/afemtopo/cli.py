"""Command-line driver: ``afemtopo run|compare|verify``."""
import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import bench
from .adapt import STRATEGIES, AfemError, afem_drive
from .manufactured import convergence_study, fitted_rate


def _problem(args):
    if args.config:
        spec, cfg = bench.load_config(args.config)
        if args.preset and args.preset != spec.name:
            raise bench.ConfigError(f"preset: --preset {args.preset} conflicts with config preset {spec.name}")
    else:
        spec, cfg = bench.build_from_dict({"preset": args.preset or "left_inflow"})
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.levels is not None:
        overrides["K"] = args.levels
    if getattr(args, "strategy", None):
        overrides["strategy"] = args.strategy
    try:
        cfg = replace(cfg, **overrides)
    except ValueError as exc:
        raise bench.ConfigError(str(exc)) from None
    return spec, cfg


def cmd_run(args):
    spec, cfg = _problem(args)
    report = afem_drive(spec, cfg, log=lambda s: print(s, flush=True))
    prefix = f"{spec.name}_{cfg.strategy}"
    bench.write_report(report, args.out_dir, prefix)
    print(f"final augmented Lagrangian {report.final_objective:.4f} on {report.final.n_vertices} vertices")
    print(f"wrote {Path(args.out_dir) / prefix}_*")
    return 0


def cmd_compare(args):
    spec, cfg = _problem(args)
    adaptive = replace(cfg, strategy="adaptive")
    uniform = replace(cfg, strategy="uniform", K=args.uniform_levels)
    rows, reports = bench.compare_mode(spec, adaptive, uniform, log=lambda s: print(s, flush=True))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, rep in reports.items():
        bench.write_report(rep, out, f"{spec.name}_{name}")
    table = bench.format_table(rows)
    (out / f"{spec.name}_comparison.txt").write_text(table + "\n")
    print(table)
    return 0


def cmd_verify(args):
    levels = convergence_study(levels=args.levels or 5)
    h = [lv.h for lv in levels]
    print(f"{'elements':>9} {'L2 error':>12} {'energy error':>13} {'eta2':>12} {'max |div u|':>12}")
    for lv in levels:
        print(f"{lv.n_elements:>9d} {lv.l2:>12.4e} {lv.energy:>13.4e} {lv.eta2:>12.4e} {lv.max_div:>12.2e}")
    rates = {
        "l2": fitted_rate(h, [lv.l2 for lv in levels]),
        "energy": fitted_rate(h, [lv.energy for lv in levels]),
        "eta2": fitted_rate(h, [lv.eta2 for lv in levels]),
    }
    print("rates: " + ", ".join(f"{k} {v:.3f}" for k, v in rates.items()))
    ok = abs(rates["l2"] - 2) <= 0.15 and abs(rates["energy"] - 1) <= 0.15
    ok &= all(lv.max_div <= 1e-9 for lv in levels)
    return 0 if ok else 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        _error("usage", message)
        sys.exit(2)


def build_parser():
    p = _Parser(prog="afemtopo", description="Adaptive CR phase-field topology optimization for Stokes flow")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, strategy=True):
        sp.add_argument("--preset", help="one of " + ", ".join(sorted(bench.PRESETS)))
        sp.add_argument("--config", type=Path, help="key = value file (preset plus overrides)")
        sp.add_argument("--out-dir", type=Path, default=Path("results"))
        sp.add_argument("--seed", type=int)
        sp.add_argument("--levels", type=int, help="number of mesh levels K")
        if strategy:
            sp.add_argument("--strategy", choices=STRATEGIES)

    run = sub.add_parser("run", help="one adaptive or uniform run")
    common(run)
    run.set_defaults(func=cmd_run)
    cmp_ = sub.add_parser("compare", help="adaptive versus uniform refinement")
    common(cmp_, strategy=False)
    cmp_.add_argument("--uniform-levels", type=int, default=3)
    cmp_.set_defaults(func=cmd_compare)
    ver = sub.add_parser("verify", help="manufactured-solution convergence check")
    ver.add_argument("--levels", type=int)
    ver.set_defaults(func=cmd_verify)
    return p


def _error(kind, msg):
    print("error: " + json.dumps({"type": kind, "message": msg}), file=sys.stderr)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except bench.ConfigError as exc:
        _error("config", str(exc))
        return 2
    except AfemError as exc:
        _error("solver", str(exc))
        return 3
    except (OSError, ValueError) as exc:
        _error(type(exc).__name__, str(exc))
        return 1


if __name__ == "__main__":
    sys.exit(main())
