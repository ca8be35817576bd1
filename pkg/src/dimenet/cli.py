"""Command-line interface: ``dimenet <subcommand> ...``."""

import argparse
import csv
import logging
import os
import sys

import numpy as np
import torch

from . import _kernels
from .basis import BasisConfig, find_bessel_roots, radial_basis, spherical_basis_2d
from .checkpoint import load_checkpoint, save_checkpoint
from .checks import run_checks
from .config import RunConfig, load_config
from .data import apply_atomref, fit_atomref, parse_xyz, toy_dataset, write_xyz
from .elements import SYMBOLS
from .exceptions import CheckpointError, ConfigError, DimeNetError, ParseError
from .filters import export_filter_grid, write_filter_csv
from .geometry import build_graph
from .metrics import TargetStats, metrics_rows, write_metrics_csv
from .model import ModelConfig, batch_from_molecules, forward_batch
from .train import train_loop

FLOAT_FMT = ".17g"
EXIT_VIOLATION = 1
EXIT_USAGE = 2

log = logging.getLogger("dimenet")


def _f(x):
    return format(float(x), FLOAT_FMT)


def _open_out(path):
    if path in (None, "-"):
        return _Stdout()
    return open(path, "w", newline="", encoding="utf-8")


class _Stdout:
    def __enter__(self):
        return sys.stdout

    def __exit__(self, *exc):
        sys.stdout.flush()


# ----------------------------------------------------------------- commands

def cmd_train(args):
    run = load_config(args.config) if args.config else RunConfig()
    data = run.data
    train_set = parse_xyz(args.train, data.targets, data.unit_scale)
    if args.val:
        val_set = parse_xyz(args.val, data.targets, data.unit_scale)
    else:
        rng = np.random.default_rng(run.train.seed)
        order = rng.permutation(len(train_set))
        n_val = max(1, int(round(data.val_fraction * len(train_set))))
        if n_val >= len(train_set):
            raise ConfigError("dataset too small for a validation split")
        val_set = train_set.subset(order[:n_val])
        train_set = train_set.subset(order[n_val:])
    atomref = None
    if data.atomref == "fit":
        atomref = fit_atomref(train_set)
        train_set = apply_atomref(train_set, atomref)
        val_set = apply_atomref(val_set, atomref)
    elif data.atomref not in (None, "none"):
        raise ConfigError(f"atomref must be 'fit' or none, got {data.atomref!r}")

    def report(row):
        log.info("step %d lr %.3g train %.6g val %.6g", row["step"], row["lr"],
                 row["train_loss"], row["val_loss"])

    result = train_loop(train_set, val_set, run.model, run.train, log_path=args.log,
                        checkpoint_path=args.out, metrics_log=report)
    ckpt = result.checkpoint
    ckpt.meta["targets"] = list(data.targets)
    ckpt.meta["unit_scale"] = data.unit_scale
    if atomref is not None:
        ckpt.meta["atomref"] = {str(k): v for k, v in atomref.items()}
    stats = TargetStats.from_targets(train_set.targets(), split="train")
    ckpt.meta["sigma"] = stats.sigma.tolist()
    save_checkpoint(args.out, ckpt)
    if args.metrics:
        preds = _predict_dataset(ckpt.params, ckpt.config, val_set)
        rows = metrics_rows(preds, val_set.targets(), stats, list(data.targets),
                            {t: val_set.units.get("energy", "") for t in data.targets})
        write_metrics_csv(args.metrics, rows, stats)
    print(f"trained {result.history[-1]['step']} steps; best validation loss "
          f"{ckpt.meta['best_val_loss']:.6g} at step {ckpt.meta['best_step']}; wrote {args.out}")
    return 0


def _predict_dataset(params, config, dataset, chunk=64):
    out = []
    for start in range(0, len(dataset), chunk):
        mols = [f.molecule for f in dataset.frames[start:start + chunk]]
        batch = batch_from_molecules(mols, config.cutoff)
        pos = torch.from_numpy(np.concatenate([m.X for m in mols]))
        with torch.no_grad():
            out.append(forward_batch(pos, batch, params, config).numpy())
    return np.concatenate(out)


def _atomref_offset(ckpt, mol):
    table = ckpt.meta.get("atomref")
    if not table:
        return 0.0
    return sum(table[str(int(z))] for z in mol.z)


def _load_frames(ckpt, path):
    targets = tuple(ckpt.meta.get("targets", ["energy"]))
    try:
        return parse_xyz(path, target_keys=targets, unit_scale=ckpt.meta.get("unit_scale", 1.0))
    except ParseError:
        # prediction inputs need not carry labels
        return parse_xyz(path, target_keys=(), unit_scale=ckpt.meta.get("unit_scale", 1.0))


def cmd_predict(args):
    ckpt = load_checkpoint(args.checkpoint)
    ds = _load_frames(ckpt, args.xyz)
    preds = _predict_dataset(ckpt.params, ckpt.config, ds)
    names = ckpt.meta.get("targets", [f"target_{t}" for t in range(ckpt.config.num_targets)])
    with _open_out(args.out) as fh:
        w = csv.writer(fh)
        w.writerow(["frame"] + list(names))
        for i, (fr, p) in enumerate(zip(ds.frames, preds)):
            p = p.copy()
            p[0] += _atomref_offset(ckpt, fr.molecule)
            w.writerow([i] + [_f(v) for v in p])
    return 0


def cmd_forces(args):
    from .model import energy_and_forces

    ckpt = load_checkpoint(args.checkpoint)
    ds = _load_frames(ckpt, args.xyz)
    with _open_out(args.out) as fh:
        w = csv.writer(fh)
        w.writerow(["frame", "atom", "element", "fx", "fy", "fz"])
        for i, fr in enumerate(ds.frames):
            _, F = energy_and_forces(fr.molecule, ckpt.params, ckpt.config)
            for a, (z, f) in enumerate(zip(fr.molecule.z, F)):
                w.writerow([i, a, SYMBOLS[int(z)]] + [_f(v) for v in f])
    return 0


def cmd_check(args):
    params = None
    if args.checkpoint:
        ckpt = load_checkpoint(args.checkpoint)
        config, params = ckpt.config, ckpt.params
    elif args.config:
        config = load_config(args.config).model
    else:
        config = ModelConfig(F=args.features, L=args.blocks)
    molecules = None
    if args.xyz:
        molecules = [f.molecule for f in parse_xyz(args.xyz, target_keys=()).frames]
    report = run_checks(config, seed=args.seed, n_molecules=args.molecules, params=params,
                        molecules=molecules)
    print(f"molecules: {report.n_molecules}")
    for k, v in report.invariance.items():
        print(f"invariance {k}: {v:.3e}")
    for k, v in report.forces.items():
        print(f"forces {k}: {v:.3e}")
    if report.smoothness is not None:
        for k, v in report.smoothness.jumps.items():
            print(f"cutoff jump {k}: {v:.3e}")
        print(f"energy spread beyond cutoff: {report.smoothness.beyond_cutoff_spread:.3e}")
    for msg in report.failures:
        print(f"FAIL {msg}", file=sys.stderr)
    print("OK" if report.ok else "VIOLATION")
    return 0 if report.ok else EXIT_VIOLATION


def cmd_export_basis(args):
    cfg = BasisConfig(c=args.cutoff, n_rbf=args.n_rbf, n_srbf=args.n_srbf, n_shbf=args.n_shbf,
                      p=args.p)
    R = args.resolution
    d = np.linspace(cfg.c / R, cfg.c, R)
    with _open_out(args.out) as fh:
        w = csv.writer(fh)
        if args.kind == "rbf":
            vals = radial_basis(d, cfg)
            w.writerow(["d"] + [f"rbf_{n}" for n in range(1, cfg.n_rbf + 1)])
            for di, row in zip(d, vals):
                w.writerow([_f(di)] + [_f(v) for v in row])
        else:
            roots = find_bessel_roots(cfg.n_shbf - 1, cfg.n_srbf)
            alpha = np.linspace(0.0, np.pi, R)
            D, A = np.meshgrid(d, alpha, indexing="ij")
            vals = spherical_basis_2d(D.ravel(), A.ravel(), cfg, roots)
            cols = [f"sbf_{l}_{n}" for l in range(cfg.n_shbf) for n in range(1, cfg.n_srbf + 1)]
            w.writerow(["d", "alpha"] + cols)
            for di, ai, row in zip(D.ravel(), A.ravel(), vals):
                w.writerow([_f(di), _f(ai)] + [_f(v) for v in row])
    return 0


def cmd_export_filters(args):
    ckpt = load_checkpoint(args.checkpoint)
    params = ckpt.ema if args.ema and ckpt.ema is not None else ckpt.params
    grid = export_filter_grid(params, ckpt.config, args.slice, args.resolution,
                              args.elements, args.block)
    write_filter_csv(args.out, grid)
    return 0


def cmd_graph(args):
    ds = parse_xyz(args.xyz, target_keys=())
    with _open_out(args.out) as fh:
        w = csv.writer(fh)
        w.writerow(["frame", "atoms", "edges", "triplets", "mean_degree", "min_distance"])
        for i, fr in enumerate(ds.frames):
            g = build_graph(fr.molecule, args.cutoff)
            dmin = _f(g.d.min()) if g.n_edges else ""
            w.writerow([i, g.n_atoms, g.n_edges, g.n_triplets, _f(g.n_edges / g.n_atoms), dmin])
    return 0


def cmd_make_toy(args):
    write_xyz(args.out, toy_dataset(args.frames, seed=args.seed, noise=args.noise))
    return 0


# ------------------------------------------------------------------- parser

def build_parser():
    p = argparse.ArgumentParser(prog="dimenet", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("train", help="train a model")
    s.add_argument("--config", help="key = value configuration file")
    s.add_argument("--train", required=True, help="training extended XYZ file")
    s.add_argument("--val", help="validation XYZ (default: split off val_fraction)")
    s.add_argument("--out", required=True, help="checkpoint path")
    s.add_argument("--log", help="plain-text training log")
    s.add_argument("--metrics", help="validation metrics CSV")
    s.set_defaults(func=cmd_train)

    for name, func, help_ in (("predict", cmd_predict, "per-frame predictions CSV"),
                              ("forces", cmd_forces, "per-atom forces CSV")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--checkpoint", required=True)
        s.add_argument("--xyz", required=True)
        s.add_argument("--out", default="-")
        s.set_defaults(func=func)

    s = sub.add_parser("check", help="invariance, force and cutoff checks")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--molecules", type=int, default=10)
    s.add_argument("--checkpoint")
    s.add_argument("--config")
    s.add_argument("--xyz", help="check these molecules instead of random ones")
    s.add_argument("--features", type=int, default=32, help="F for random-parameter models")
    s.add_argument("--blocks", type=int, default=3, help="L for random-parameter models")
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("export-basis", help="tabulate the radial or 2D basis")
    s.add_argument("--kind", choices=("rbf", "sbf"), default="rbf")
    s.add_argument("--cutoff", type=float, default=5.0)
    s.add_argument("--n-rbf", type=int, default=6)
    s.add_argument("--n-srbf", type=int, default=6)
    s.add_argument("--n-shbf", type=int, default=7)
    s.add_argument("--p", type=int, default=6)
    s.add_argument("--resolution", type=int, default=64)
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_export_basis)

    s = sub.add_parser("export-filters", help="tabulate learned angular filters")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--slice", type=int, default=0, help="0-based input-feature slice n")
    s.add_argument("--resolution", type=int, default=64)
    s.add_argument("--elements", type=int, default=15)
    s.add_argument("--block", type=int, default=0)
    s.add_argument("--ema", action="store_true", help="use the EMA weights")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_export_filters)

    s = sub.add_parser("graph", help="edge and triplet statistics")
    s.add_argument("--xyz", required=True)
    s.add_argument("--cutoff", type=float, default=5.0)
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_graph)

    s = sub.add_parser("make-toy", help="write a toy conformer dataset")
    s.add_argument("--out", required=True)
    s.add_argument("--frames", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--noise", type=float, default=0.08)
    s.set_defaults(func=cmd_make_toy)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    log.debug("graph kernels: %s", _kernels.BACKEND)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, IsADirectoryError, ParseError, CheckpointError) as exc:
        print(f"dimenet: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DimeNetError as exc:
        print(f"dimenet: error: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    except BrokenPipeError:
        # downstream reader (e.g. head) closed early
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0


if __name__ == "__main__":
    sys.exit(main())
