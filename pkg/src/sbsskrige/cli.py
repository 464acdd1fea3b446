"""Command-line interface.

Subcommands: simulate, sbss, krige, cokrige, sbsskrige, variogram, ilr,
bench.  Exit code 0 on success, 2 for configuration errors, 1 for runtime
failures.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .bench import ExperimentConfig, format_summary, run_bench, write_outputs
from .errors import SbssKrigeError
from .fieldio import (read_field_csv, read_locations_csv, read_table_csv,
                      split_coord_columns, write_field_csv, write_json,
                      write_matrix_csv, write_predictions_csv, write_rows_csv, _fmt)
from .ilr import ilr_forward, ilr_inverse
from .kriging import cok_build, cok_predict, ok_build, ok_predict, sbss_krige
from .models import Nugget, Spherical
from .sbss import Ball, Gauss, Ring, fit_sbss
from .simulate import CoordinateSampler, make_grid, sample_coordinates, simulate_joint
from .streams import child_seed
from .variogram import FAMILIES, SPHERICAL, empirical_variogram, fit_lmc, fit_wls
from .bench import SETTINGS, VARIANTS, _setting_model


def _parse_grid(text):
    parts = text.split(",")
    side = int(parts[0])
    offset = float(parts[1]) if len(parts) > 1 else 0.5
    return make_grid(side, offset)


def _targets_from_args(args):
    if args.targets is not None:
        return read_locations_csv(args.targets)
    if args.grid is not None:
        return _parse_grid(args.grid)
    raise SystemExit("either --targets or --grid is required")


def _add_target_flags(sub):
    sub.add_argument("--targets", help="CSV of target coordinates")
    sub.add_argument("--grid", metavar="SIDE[,OFFSET]",
                     help="regular prediction grid (default offset 0.5)")


def _kernels_from_args(args):
    kernels = [Ball(r) for r in args.ball or []]
    for spec in args.ring or []:
        inner, outer = (float(v) for v in spec.split(","))
        kernels.append(Ring(inner, outer))
    kernels += [Gauss(b) for b in args.gauss or []]
    if not kernels:
        raise SystemExit("at least one --ball/--ring/--gauss kernel is required")
    return tuple(kernels)


def _add_kernel_flags(sub):
    sub.add_argument("--ball", type=float, action="append", metavar="R",
                     help="ball kernel of radius R (repeatable)")
    sub.add_argument("--ring", action="append", metavar="INNER,OUTER",
                     help="ring kernel (repeatable)")
    sub.add_argument("--gauss", type=float, action="append", metavar="B",
                     help="Gaussian kernel of bandwidth B (repeatable)")


def _cmd_simulate(args):
    base = args.seed if args.seed is not None else 0
    seed = base if args.replicate is None else child_seed(base, args.replicate)
    sampler = CoordinateSampler(args.variant, args.scale, args.n_sites)
    train_locs = sample_coordinates(sampler, seed)
    grid = make_grid(args.grid_side, 0.5)
    cfg = ExperimentConfig(setting=args.setting, variant=args.variant,
                           n_sites=args.n_sites, grid_side=args.grid_side,
                           scale=args.scale, base_seed=base)
    sim = simulate_joint(_setting_model(cfg, seed), train_locs, grid, seed)
    os.makedirs(args.out, exist_ok=True)
    write_field_csv(os.path.join(args.out, "train.csv"), sim.train)
    write_field_csv(os.path.join(args.out, "test.csv"), sim.test)
    write_json(os.path.join(args.out, "manifest.json"), {
        "seed": seed, "base_seed": base, "replicate": args.replicate,
        "setting": args.setting, "variant": args.variant,
        "n_sites": args.n_sites, "grid_side": args.grid_side, "scale": args.scale,
    })
    print(f"wrote train/test CSVs and manifest to {args.out}")
    return 0


def _cmd_sbss(args):
    field, names = read_field_csv(args.input)
    fit = fit_sbss(field, _kernels_from_args(args))
    os.makedirs(args.out, exist_ok=True)
    write_field_csv(os.path.join(args.out, "latent.csv"), fit.latent,
                    [f"z{i + 1}" for i in range(field.p)])
    write_matrix_csv(os.path.join(args.out, "unmixing.csv"), fit.unmixing, names)
    write_json(os.path.join(args.out, "diagnostics.json"), {
        "columns": names,
        "mean": [float(v) for v in fit.mean],
        "diag_scores": [float(v) for v in fit.diag_scores],
        "kernels": [repr(k) for k in fit.kernels],
    })
    print(f"wrote latent field, unmixing matrix and diagnostics to {args.out}")
    return 0


def _cmd_krige(args):
    field, names = read_field_csv(args.input)
    if args.column is not None:
        if args.column not in names:
            raise SystemExit(f"column {args.column!r} not in {names}")
        col = names.index(args.column)
    elif field.p == 1:
        col = 0
    else:
        raise SystemExit(f"--column is required, input has value columns {names}")
    values = field.values[:, col]
    targets = _targets_from_args(args)
    emp = empirical_variogram(values, field.locations, bins=args.bins,
                              max_dist=args.max_dist)
    fitted = fit_wls(emp, family=args.family)
    system = ok_build(values, field.locations, fitted.model)
    preds, variances = ok_predict(system, targets)
    write_predictions_csv(args.out, targets, preds, [names[col]], variances)
    print(f"fitted {fitted.model!r}; wrote predictions to {args.out}")
    return 0


def _cmd_cokrige(args):
    field, names = read_field_csv(args.input)
    targets = _targets_from_args(args)
    # nugget + spherical structure; range set to max distance over six
    phi = float(field.locations.dist.max()) / 6.0
    model = fit_lmc(field, (Nugget(1.0), Spherical(1.0, phi)))
    system = cok_build(field, model)
    preds, variances = cok_predict(system, targets, with_variances=True)
    write_predictions_csv(args.out, targets, preds, names, variances)
    print(f"wrote cokriging predictions to {args.out}")
    return 0


def _cmd_sbsskrige(args):
    field, names = read_field_csv(args.input)
    targets = _targets_from_args(args)
    preds = sbss_krige(field, _kernels_from_args(args), family=args.family,
                       targets=targets)
    write_predictions_csv(args.out, targets, preds, names)
    print(f"wrote SBSS-kriging predictions to {args.out}")
    return 0


def _cmd_variogram(args):
    field, names = read_field_csv(args.input)
    def pick(name):
        if name not in names:
            raise SystemExit(f"column {name!r} not in {names}")
        return field.values[:, names.index(name)]
    if args.column is None and field.p == 1:
        values = field.values[:, 0]
    else:
        if args.column is None:
            raise SystemExit(f"--column is required, input has value columns {names}")
        values = pick(args.column)
    if args.cross is not None:
        values = (values, pick(args.cross))
    emp = empirical_variogram(values, field.locations, bins=args.bins,
                              max_dist=args.max_dist)
    os.makedirs(args.out, exist_ok=True)
    write_rows_csv(os.path.join(args.out, "empirical.csv"),
                   ["bin_center", "gamma", "count"],
                   ([_fmt(h), "" if not np.isfinite(g) else _fmt(g), str(int(c))]
                    for h, g, c in zip(emp.bin_centers, emp.gamma, emp.counts)))
    if args.family is not None:
        fitted = fit_wls(emp, family=args.family)
        grid = np.linspace(0.0, emp.max_dist, 200)
        curve = fitted.model.sill - fitted.model.evaluate(grid)
        write_rows_csv(os.path.join(args.out, "fitted.csv"), ["h", "gamma"],
                       ([_fmt(h), _fmt(g)] for h, g in zip(grid, curve)))
        print(f"fitted {fitted.model!r} (objective {fitted.objective_value:.6g})")
    print(f"wrote variogram CSVs to {args.out}")
    return 0


def _cmd_ilr(args):
    header, data = read_table_csv(args.input)
    try:
        ncoord = split_coord_columns(header)
    except ValueError:
        ncoord = 0
    coords, parts = data[:, :ncoord], data[:, ncoord:]
    if args.inverse:
        out = ilr_inverse(parts)
        names = [f"part{i + 1}" for i in range(out.shape[1])]
    else:
        out = ilr_forward(parts)
        names = [f"ilr{i + 1}" for i in range(out.shape[1])]
    full = np.hstack([coords, out]) if ncoord else out
    write_rows_csv(args.out, list(header[:ncoord]) + names,
                   ([_fmt(v) for v in row] for row in full))
    print(f"wrote {'inverse ' if args.inverse else ''}ilr coordinates to {args.out}")
    return 0


def _cmd_bench(args):
    cfg = ExperimentConfig.from_json(args.config)
    overrides = {}
    if args.replicates is not None:
        overrides["replicates"] = args.replicates
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.seed is not None:
        overrides["base_seed"] = args.seed
    if overrides:
        cfg = cfg.replace(**overrides)
    result = run_bench(cfg, jobs=args.jobs)
    summary = write_outputs(result, cfg.out_dir)
    print(format_summary(summary))
    print(f"wrote results.csv / summary.csv / manifest.json to {cfg.out_dir}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sbsskrige",
        description="Multivariate spatial prediction via blind source separation "
                    "and kriging")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--seed", type=int, default=None,
                        help="seed override for subcommands that draw randomness")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="simulate train/test fields to CSV")
    sim.add_argument("--setting", choices=SETTINGS, required=True)
    sim.add_argument("--variant", choices=VARIANTS, default="uniform")
    sim.add_argument("--n-sites", type=int, default=1225)
    sim.add_argument("--grid-side", type=int, default=35)
    sim.add_argument("--scale", type=float, default=35.0)
    sim.add_argument("--replicate", type=int, default=None,
                     help="derive the replicate's child seed from --seed")
    sim.add_argument("--out", required=True)
    sim.set_defaults(func=_cmd_simulate)

    sbss_p = sub.add_parser("sbss", help="estimate the latent field of a CSV")
    sbss_p.add_argument("input")
    _add_kernel_flags(sbss_p)
    sbss_p.add_argument("--out", required=True)
    sbss_p.set_defaults(func=_cmd_sbss)

    krige_p = sub.add_parser("krige", help="ordinary kriging of one column")
    krige_p.add_argument("input")
    krige_p.add_argument("--column")
    krige_p.add_argument("--family", choices=FAMILIES, default=SPHERICAL)
    krige_p.add_argument("--bins", type=int, default=15)
    krige_p.add_argument("--max-dist", type=float, default=None)
    _add_target_flags(krige_p)
    krige_p.add_argument("--out", required=True)
    krige_p.set_defaults(func=_cmd_krige)

    cok = sub.add_parser("cokrige", help="LMC cokriging of all columns")
    cok.add_argument("input")
    _add_target_flags(cok)
    cok.add_argument("--out", required=True)
    cok.set_defaults(func=_cmd_cokrige)

    sk = sub.add_parser("sbsskrige", help="SBSS pre-processing + per-component kriging")
    sk.add_argument("input")
    _add_kernel_flags(sk)
    sk.add_argument("--family", choices=FAMILIES, default=SPHERICAL)
    _add_target_flags(sk)
    sk.add_argument("--out", required=True)
    sk.set_defaults(func=_cmd_sbsskrige)

    vario = sub.add_parser("variogram", help="empirical (and fitted) variogram CSVs")
    vario.add_argument("input")
    vario.add_argument("--column")
    vario.add_argument("--cross", help="second column for a cross-variogram")
    vario.add_argument("--bins", type=int, default=15)
    vario.add_argument("--max-dist", type=float, default=None)
    vario.add_argument("--family", choices=FAMILIES, default=None,
                       help="also fit this model family")
    vario.add_argument("--out", required=True)
    vario.set_defaults(func=_cmd_variogram)

    ilr_p = sub.add_parser("ilr", help="pivot ilr transform of a compositional CSV")
    ilr_p.add_argument("input")
    ilr_p.add_argument("--inverse", action="store_true")
    ilr_p.add_argument("--out", required=True)
    ilr_p.set_defaults(func=_cmd_ilr)

    bench_p = sub.add_parser("bench", help="run the simulation benchmark")
    bench_p.add_argument("--config", required=True)
    bench_p.add_argument("--replicates", type=int, default=None)
    bench_p.add_argument("--jobs", type=int, default=None,
                         help="worker processes (default: available parallelism)")
    bench_p.add_argument("--out", default=None)
    bench_p.set_defaults(func=_cmd_bench)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SbssKrigeError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
