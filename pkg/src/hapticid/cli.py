"""Command line interface: train, identify, experiment, dump-table, plot."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from hapticid import fixtures
from hapticid.errors import HapticError
from hapticid.explore import POLICIES, build_predictions
from hapticid.features import METHODS, dump_table_csv, load_tables, save_tables
from hapticid.grasp import load_contact_file, save_contact_file
from hapticid.harness import (TrainedSystem, build_grids, emit_csv, emit_plots, emit_records_csv,
                              emit_traces_csv, load_config, load_records_csv, run_experiment,
                              run_trace, summarize, summarize_overall, train_system)

log = logging.getLogger("hapticid")


def _add_config_args(p):
    p.add_argument("--config", type=Path, help="key = value config file ([experiment] / [hand] sections)")
    p.add_argument("--objects", nargs="+", help=f"fixture names (default: {' '.join(fixtures.NAMES)})")
    p.add_argument("-L", "--n-poses", type=int, dest="n_poses")
    p.add_argument("-N", "--n-samples", type=int, dest="n_samples")
    p.add_argument("--sigma-distance", type=float)
    p.add_argument("--sigma-angle", type=float)
    p.add_argument("--noise-mode", choices=("contact", "feature"))
    p.add_argument("--distance-step", type=float)
    p.add_argument("--angle-step", type=float)
    p.add_argument("--weighting", choices=("count", "binary"))
    p.add_argument("--alpha", type=float)
    p.add_argument("--max-grasps", type=int)


def _config(args, **extra):
    keys = ("n_poses", "n_samples", "sigma_distance", "sigma_angle", "noise_mode", "distance_step",
            "angle_step", "weighting", "alpha", "max_grasps")
    over = {k: getattr(args, k, None) for k in keys}
    if getattr(args, "objects", None):
        over["objects"] = tuple(args.objects)
    over.update(extra)
    return load_config(args.config, **over)


def cmd_train(args):
    cfg = _config(args, seed=args.seed)
    out = args.out
    (out / "contacts").mkdir(parents=True, exist_ok=True)
    if args.contacts:
        grids = {}
        for path in args.contacts:
            g = load_contact_file(path)
            grids[g.object_name] = g
        cfg = _config(args, seed=args.seed, objects=tuple(grids),
                      n_poses=next(iter(grids.values())).n_poses)
    else:
        grids = build_grids(cfg)
    for name, g in grids.items():
        save_contact_file(g, out / "contacts" / f"{name}.txt")
    system = train_system(cfg, grids)
    for method, tables in system.tables.items():
        save_tables(tables, out / f"tables_{method}.htab")
    print(f"trained {len(grids)} objects x {len(system.tables)} methods into {out}")


def cmd_identify(args):
    tables = load_tables(args.tables / f"tables_{args.method}.htab", method=args.method)
    q = next(iter(tables.values())).quantizer
    grid = load_contact_file(args.contacts)
    cfg = _config(args, seed=args.seed, objects=tuple(tables), n_poses=grid.n_poses,
                  distance_step=q.distance_step, angle_step=q.angle_step,
                  methods=(args.method,), policies=(args.policy,), betas=(args.beta,))
    preds = {args.method: build_predictions(tables, cfg.weighting, cfg.alpha)} if args.policy == "active" else {}
    system = TrainedSystem(cfg, {}, {args.method: tables}, preds)
    rows = []
    rec = run_trace(system, grid.object_name, args.method, args.policy, args.trial,
                    trace_rows=rows, truth_grid=grid)[0]
    if args.trace:
        emit_traces_csv(rows, tuple(tables), args.trace)
    if rec.capped:
        print(f"undecided after {rec.grasps} grasps (cap reached)")
    else:
        print(f"decided {rec.decided} after {rec.grasps} grasps "
              f"({'correct' if rec.correct else 'wrong'}; truth {grid.object_name})")


def cmd_experiment(args):
    extra = {"seed": args.seed}
    if args.trials is not None:
        extra["trials"] = args.trials
    if args.methods:
        extra["methods"] = tuple(args.methods)
    if args.policies:
        extra["policies"] = tuple(args.policies)
    cfg = _config(args, **extra)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    res = run_experiment(cfg, workers=args.workers, keep_traces=args.traces)
    emit_csv(res.summaries, out / "summary.csv")
    emit_csv(summarize_overall(res.records), out / "summary_overall.csv")
    emit_records_csv(res.records, out / "records.csv")
    if args.traces:
        emit_traces_csv(res.traces, cfg.objects, out / "traces.csv")
    if not args.no_plots:
        emit_plots(res.summaries, res.records, out / "plots")
    log.info("experiment finished in %.1f s", time.perf_counter() - t0)
    print(f"{len(res.records)} trial records written to {out}")


def cmd_dump_table(args):
    tables = load_tables(args.tables)
    if args.object not in tables:
        raise HapticError(f"object {args.object!r} not in {args.tables}; have {', '.join(tables)}")
    if args.out:
        with open(args.out, "w") as fh:
            dump_table_csv(tables[args.object], fh)
    else:
        dump_table_csv(tables[args.object], sys.stdout)


def cmd_plot(args):
    records = load_records_csv(args.records)
    for p in emit_plots(summarize(records), records, args.out):
        print(p)


def build_parser():
    parser = argparse.ArgumentParser(prog="hapticid", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="simulate fixtures, write contact files and tables")
    _add_config_args(p)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--contacts", type=Path, nargs="+", help="train from existing contact files")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("identify", help="identify the object in a contact file")
    _add_config_args(p)
    p.add_argument("--tables", type=Path, required=True, help="directory written by 'train'")
    p.add_argument("--contacts", type=Path, required=True)
    p.add_argument("--method", choices=METHODS, default="PN")
    p.add_argument("--policy", choices=POLICIES, default="passive")
    p.add_argument("--beta", type=float, default=0.99)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--trace", type=Path, help="write the per-grasp trace CSV here")
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("experiment", help="full sweep over objects, methods, policies, thresholds")
    _add_config_args(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--trials", type=int)
    p.add_argument("--methods", nargs="+", choices=METHODS)
    p.add_argument("--policies", nargs="+", choices=POLICIES)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--traces", action="store_true", help="also write per-grasp traces.csv")
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("dump-table", help="print one object's table as sorted CSV")
    p.add_argument("--tables", type=Path, required=True, help="table file")
    p.add_argument("--object", required=True)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_dump_table)

    p = sub.add_parser("plot", help="regenerate SVG figures from records.csv")
    p.add_argument("--records", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (HapticError, OSError, ValueError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else str(exc)
        print("error: " + json.dumps({"type": type(exc).__name__, "message": str(msg)}), file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
