"""Command-line interface: ``gakpain {generate,kernel,evaluate,diagnose}``.

Every subcommand accepts ``--config FILE`` with ``key = value`` lines using
the long flag names (dashes or underscores). Explicit flags override the
file, which overrides the defaults.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import gak, manifold
from .evaluation import PROTOCOLS, ProtocolSpec, compute_kernel, export_predictions, permutation_control, prepare_trajectories, run_protocol, summary_table
from .fitting import DEFAULT_LAMBDA, FittingConfig
from .landmark_io import GeneratorConfig, ParseError, generate_synthetic, load_dataset, read_keyvalue, serialize
from .representation import build_trajectory

log = logging.getLogger("gakpain")

BOOL_KEYS = {"grid", "normalize_kernel", "permutation_control", "verbose"}


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return v


def _nonneg_float(text):
    v = float(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return v


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return v


def _landmark_count(text):
    v = int(text)
    if v < 3:
        raise argparse.ArgumentTypeError(f"must be >= 3, got {text}")
    return v


def _strides(text):
    try:
        vals = [int(t) for t in str(text).replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid stride list {text!r}") from None
    if not vals or any(v < 1 for v in vals):
        raise argparse.ArgumentTypeError("strides must be >= 1")
    return vals


def _protocol(text):
    if text not in PROTOCOLS:
        raise argparse.ArgumentTypeError(f"invalid protocol {text!r} (choose from {', '.join(PROTOCOLS)})")
    return text


def _common(p):
    p.add_argument("--config", help="key = value file; flags take precedence")
    p.add_argument("--out", default="out", help="output directory (default: %(default)s)")
    p.add_argument("--seed", type=int, default=0, help="seed for every random choice (default: %(default)s)")
    p.add_argument("--workers", type=_positive_int, default=1, help="worker threads (default: %(default)s)")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")


def _data_args(p):
    p.add_argument("--landmarks", help="landmark CSV (default: OUT/landmarks.csv)")
    p.add_argument("--labels", help="label CSV (default: OUT/labels.csv)")


def _pipeline_args(p):
    p.add_argument("--lambda", dest="lam", type=_positive_float, default=DEFAULT_LAMBDA,
                   help="curve-fitting proximity weight (default: %(default)s)")
    p.add_argument("--sigma", type=_positive_float, default=gak.DEFAULT_SIGMA,
                   help="local alignment kernel width (default: %(default)s)")
    p.add_argument("--stride", type=_strides, default=[4],
                   help="keep one frame in STRIDE; comma list allowed, e.g. 1,4 (default: 4)")
    p.add_argument("--group", choices=("SO", "O"), default=manifold.DEFAULT_GROUP,
                   help="alignment group for distances (default: %(default)s)")
    p.add_argument("--normalize-distances", nargs="?", const="median", default="none",
                   choices=("none", "median", "median-length"),
                   help="divide distances by a dataset scale before the local kernel (default: none; bare flag: median)")
    p.add_argument("--normalize-kernel", action="store_true",
                   help="cosine-normalise the GAK matrix (unit diagonal)")


def build_parser():
    parser = argparse.ArgumentParser(prog="gakpain", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic landmark dataset")
    _common(g)
    g.add_argument("--subjects", type=_positive_int, default=25, help="number of subjects (default: %(default)s)")
    g.add_argument("--seqs", type=_positive_int, default=8, help="sequences per subject (default: %(default)s)")
    g.add_argument("--frames-min", type=_positive_int, default=60, help="shortest sequence (default: %(default)s)")
    g.add_argument("--frames-max", type=_positive_int, default=160, help="longest sequence (default: %(default)s)")
    g.add_argument("--n", type=_landmark_count, default=10, help="landmarks per frame (default: %(default)s)")
    g.add_argument("--noise", type=_nonneg_float, default=0.05, help="coordinate noise sigma (default: %(default)s)")

    k = sub.add_parser("kernel", help="build and cache the GAK matrix")
    _common(k)
    _data_args(k)
    _pipeline_args(k)
    k.add_argument("--csv", action="store_true", help="also export the kernel as CSV")

    e = sub.add_parser("evaluate", help="run a cross-validation protocol")
    _common(e)
    _data_args(e)
    _pipeline_args(e)
    e.add_argument("--protocol", type=_protocol, default="5fold",
                   help=f"one of {', '.join(PROTOCOLS)} (default: %(default)s)")
    e.add_argument("--kernel", help="cached kernel file to reuse (must match the settings)")
    e.add_argument("--svr-c", type=_positive_float, default=1.0, help="SVR box constraint (default: %(default)s)")
    e.add_argument("--svr-eps", type=_nonneg_float, default=0.1, help="SVR tube width (default: %(default)s)")
    e.add_argument("--grid", action="store_true", help="choose C and epsilon on an inner split of each training fold")
    e.add_argument("--aggregate", choices=("pooled", "macro"), default="pooled",
                   help="pool test predictions or average per fold (default: %(default)s)")
    e.add_argument("--permutation-control", action="store_true", help="also run with shuffled labels")

    d = sub.add_parser("diagnose", help="print dataset, fitting and kernel diagnostics")
    _common(d)
    _data_args(d)
    _pipeline_args(d)
    d.add_argument("--kernel", help="cached kernel file to inspect")
    d.add_argument("--dump-sequence", help="write the configuration factors of this sequence as CSV")
    return parser, sub.choices


def parse_args(argv=None):
    parser, subparsers = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            values = read_keyvalue(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            parser.error(f"cannot read config {args.config}: {exc}")
        except ParseError as exc:
            parser.error(f"config {args.config}: {exc}")
        sp = subparsers[args.command]
        known = {a.dest for a in sp._actions}
        aliases = {"lambda": "lam"}
        defaults = {}
        for key, val in values.items():
            dest = aliases.get(key, key)
            if dest not in known or dest in ("config", "help"):
                parser.error(f"config {args.config}: unknown key {key!r}")
            if dest in BOOL_KEYS:
                defaults[dest] = val.lower() in ("1", "true", "yes", "on")
            else:
                defaults[dest] = val
        sp.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def _dataset(args):
    out = Path(args.out)
    lm = args.landmarks or out / "landmarks.csv"
    lb = args.labels or out / "labels.csv"
    return load_dataset(lm, lb)


def _spec(args, stride, **extra):
    return ProtocolSpec(
        frame_stride=stride,
        fitting=FittingConfig(lam=args.lam, group=args.group),
        sigma=args.sigma,
        normalize_distances=None if args.normalize_distances == "none" else args.normalize_distances,
        normalize_kernel=args.normalize_kernel,
        seed=args.seed,
        workers=args.workers,
        group=args.group,
        **extra,
    )


def _write_text(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _kernel_path(out, stride):
    return Path(out) / f"kernel_stride{stride}.bin"


def cmd_generate(args):
    cfg = GeneratorConfig(
        subjects=args.subjects, seqs_per_subject=args.seqs, frames_min=args.frames_min,
        frames_max=args.frames_max, n=args.n, noise_sigma=args.noise, seed=args.seed,
    )
    try:
        cfg.validate()
    except ValueError as exc:
        print(f"gakpain generate: usage error: {exc}", file=sys.stderr)
        return 2
    ds = generate_synthetic(cfg)
    lm, lb = serialize(ds)
    out = Path(args.out)
    try:
        _write_text(out / "landmarks.csv", lm)
        _write_text(out / "labels.csv", lb)
    except OSError as exc:
        print(f"gakpain generate: cannot write to {out}: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {len(ds)} sequences from {len(ds.subjects)} subjects to {out}")
    return 0


def cmd_kernel(args):
    ds = _dataset(args)
    for stride in args.stride:
        ker = compute_kernel(ds, _spec(args, stride))
        path = _kernel_path(args.out, stride)
        path.parent.mkdir(parents=True, exist_ok=True)
        gak.save_kernel(ker, path)
        if args.csv:
            with open(path.with_suffix(".csv"), "w", encoding="utf-8") as fh:
                gak.export_kernel_csv(ker, fh)
        print(f"{path}: n_seq={len(ker.K)} sigma={ker.sigma} distance_scale={ker.distance_scale:.6g} "
              f"min_eig={ker.min_eigenvalue:.6e} max_eig={ker.max_eigenvalue:.6e} jitter={ker.jitter:.3e}")
    return 0


def cmd_evaluate(args):
    ds = _dataset(args)
    out = Path(args.out)
    results = []
    for stride in args.stride:
        spec = _spec(args, stride, kind=args.protocol, C=args.svr_c, epsilon=args.svr_eps,
                     grid=args.grid, aggregate=args.aggregate)
        kernel = gak.load_kernel(args.kernel) if args.kernel and len(args.stride) == 1 else None
        res = run_protocol(ds, spec, kernel)
        print(f"{PROTOCOLS[args.protocol]}: {len(res.folds)} folds, stride {stride}")
        tag = f"{args.protocol}_{res.spec.percent_frames:g}pct"
        _write_text(out / f"predictions_{tag}.csv", export_predictions(res.report))
        results.append(res)
        print(f"  MAE {res.mae:.4f}  RMSE {res.rmse:.4f}  baseline MAE {res.baseline_mae:.4f}  "
              f"clipped MAE {res.report.mae_clipped:.4f}  rounded MAE {res.report.mae_rounded:.4f}")
        if args.permutation_control:
            ctl = permutation_control(ds, spec, res.kernel, seed=args.seed)
            print(f"  permuted labels: MAE {ctl.mae:.4f}  baseline MAE {ctl.baseline_mae:.4f}")
    table = summary_table(results)
    _write_text(out / f"summary_{args.protocol}.txt", table)
    print(table, end="")
    return 0


def cmd_diagnose(args):
    ds = _dataset(args)
    lengths = [s.n_frames for s in ds]
    print(f"dataset: {len(ds)} sequences, {len(ds.subjects)} subjects, n={ds[0].n}, "
          f"frames {min(lengths)}..{max(lengths)}, VAS mean {ds.labels.mean():.3f}")
    for stride in args.stride:
        spec = _spec(args, stride)
        trajs, diag = prepare_trajectories(ds, spec)
        scale = gak.distance_scale(trajs, spec.normalize_distances, spec.group)
        print(f"stride {stride}: trajectory length {min(map(len, trajs))}..{max(map(len, trajs))}, "
              f"mean proximity error {diag[:, 0].mean():.4g}, mean msa {diag[:, 1].mean():.4g}, "
              f"median frame distance {gak.median_frame_distance(trajs, spec.group):.4g}, distance scale {scale:.4g}")
    if args.kernel:
        ker = gak.load_kernel(args.kernel)
        asym = float(np.abs(ker.K - ker.K.T).max())
        print(f"kernel {args.kernel}: n_seq={len(ker.K)} sigma={ker.sigma} min_eig={ker.min_eigenvalue:.6e} "
              f"max_eig={ker.max_eigenvalue:.6e} psd={ker.is_psd()} max_asymmetry={asym:.3e} jitter={ker.jitter:.3e}")
    if args.dump_sequence:
        seq = next((s for s in ds if s.sequence_id == args.dump_sequence), None)
        if seq is None:
            print(f"gakpain diagnose: unknown sequence {args.dump_sequence!r}", file=sys.stderr)
            return 1
        traj = build_trajectory(seq)
        rows = ["frame,row,a0,a1"]
        for f, A in enumerate(traj.factors):
            rows.extend(f"{f},{r},{A[r, 0]!r},{A[r, 1]!r}" for r in range(len(A)))
        path = Path(args.out) / f"factors_{seq.sequence_id}.csv"
        _write_text(path, "\n".join(rows) + "\n")
        print(f"wrote {path}")
    return 0


COMMANDS = {"generate": cmd_generate, "kernel": cmd_kernel, "evaluate": cmd_evaluate, "diagnose": cmd_diagnose}


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (OSError, ValueError, ArithmeticError, RuntimeError, AssertionError) as exc:
        print(f"gakpain {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
