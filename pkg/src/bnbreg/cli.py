"""Command-line entry point: ``bnbreg {register,synth,bench,diag-psd}``.

Exit status is 0 on success, 1 for bad input (unreadable or malformed
files, inconsistent dimensions, infeasible ``--np``) and 2 when the solver
meets a degenerate configuration.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .pointio import read_points, write_csv, write_json, write_points
from .problem import DegenerateConfigurationError, build_matrices
from .registration import box_around, normalize_pair, register, resolve_n_p, truth_branch_point
from .relaxation import compute_fixed_ranges, qp_matrix
from .synth import Disturbance, GroundTruth, fish_2d, helix_3d, synthesize
from .transforms import get_model

EXIT_OK, EXIT_INPUT, EXIT_DEGENERATE = 0, 1, 2

BUILTIN_SHAPES = {"fish": fish_2d, "helix": helix_3d}
TRANSFORMS = ("sim2d", "aff2d", "aff3d", "rigid3d")
DEFAULT_SWEEP = (0.5, 0.6, 0.7, 0.8, 0.9, 1.0)


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # usage errors are input errors; status 2 is reserved for degenerate solves
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def parse_np(text: str):
    """``"12"`` is an absolute count, ``"0.9"`` a fraction of ``min(n_x, n_y)``."""
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if "." in text or "e" in text.lower():
        if not 0 < value <= 1:
            raise argparse.ArgumentTypeError("a fractional --np must lie in (0, 1]")
        return value
    if value < 1:
        raise argparse.ArgumentTypeError("--np must be at least 1")
    return int(value)


def parse_vector(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.replace(",", " ").split()])
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from None


def load_shape(source: str) -> np.ndarray:
    if source in BUILTIN_SHAPES:
        return BUILTIN_SHAPES[source]()
    return read_points(source)


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--transform", choices=TRANSFORMS, default="sim2d")
    p.add_argument("--np", dest="n_p", type=parse_np, default=None,
                   help="match count, absolute or fraction of min(n_x, n_y)")
    p.add_argument("--eps", type=float, default=1e-6, help="gap tolerance, relative to the scene's mean squared norm")
    p.add_argument("--max-depth", type=int, default=12)
    p.add_argument("--grid-res", type=int, default=21)
    p.add_argument("--time-limit", type=float, default=None, help="wall-clock cap per run in seconds")
    p.add_argument("--box-delta", type=float, default=None,
                   help="search box half-width around the ground truth (normalised frame)")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="bnbreg", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("register", help="register a model point file onto a scene point file")
    r.add_argument("--model", required=True)
    r.add_argument("--scene", required=True)
    _add_solver_flags(r)
    r.add_argument("--truth", help="ground-truth JSON from `synth`, used for matching_error and --box-delta")
    r.add_argument("--box-lo", type=parse_vector, help="explicit box in the normalised branching space")
    r.add_argument("--box-hi", type=parse_vector)
    r.add_argument("--out", help="JSON report path (stdout if omitted)")
    r.add_argument("--pairs-out", help="CSV of matched index pairs")
    r.add_argument("--trace-out", help="CSV of the bounds trace")

    s = sub.add_parser("synth", help="generate a disturbed model/scene pair with ground truth")
    s.add_argument("--shape", default="fish", help="prototype point file, or 'fish' / 'helix'")
    s.add_argument("--test", choices=[d.value for d in Disturbance], required=True)
    s.add_argument("--level", type=float, required=True)
    s.add_argument("--noise", type=float, default=0.0, help="extra Gaussian noise on scene inliers")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="prefix for <out>_model.txt, <out>_scene.txt, <out>_truth.json")

    b = sub.add_parser("bench", help="seeded synthetic trials, per-trial and aggregate CSV")
    b.add_argument("--shape", default="fish")
    b.add_argument("--test", choices=[d.value for d in Disturbance], default="separate_outliers")
    b.add_argument("--level", type=float, default=0.3)
    b.add_argument("--noise", type=float, default=0.0)
    b.add_argument("--trials", type=int, default=10)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--sweep", action="store_true", help="sweep n_p over fractions of the true inlier count")
    _add_solver_flags(b)
    b.add_argument("--out", required=True)

    d = sub.add_parser("diag-psd", help="smallest eigenvalue of the root QP matrix per instance")
    d.add_argument("--model")
    d.add_argument("--scene")
    d.add_argument("--shape", default="fish")
    d.add_argument("--test", choices=[t.value for t in Disturbance], default="separate_outliers")
    d.add_argument("--level", type=float, default=0.3)
    d.add_argument("--instances", type=int, default=100)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--transform", choices=TRANSFORMS, default="sim2d")
    d.add_argument("--np", dest="n_p", type=parse_np, default=None)
    d.add_argument("--out", required=True)
    return ap


def _check_dims(model, X, Y):
    if X.shape[1] != model.point_dim or Y.shape[1] != model.point_dim:
        raise InputError(f"{model.kind.value} needs {model.point_dim}D points, got {X.shape[1]}D and {Y.shape[1]}D")


def _box_from_args(args, model, X, Y, truth: GroundTruth | None):
    if args.box_lo is not None or getattr(args, "box_hi", None) is not None:
        if args.box_lo is None or args.box_hi is None:
            raise InputError("--box-lo and --box-hi must be given together")
        if len(args.box_lo) != model.branch_dim or len(args.box_hi) != model.branch_dim:
            raise InputError(f"box needs {model.branch_dim} entries")
        return args.box_lo, args.box_hi
    if args.box_delta is not None:
        if truth is None:
            raise InputError("--box-delta needs --truth")
        center = truth_branch_point(model, truth.rotation, truth.scale, truth.translation,
                                    normalize_pair(X, Y), truth.angle_axis)
        return box_around(center, args.box_delta)
    return None


def cmd_register(args) -> int:
    model = get_model(args.transform)
    X, Y = read_points(args.model), read_points(args.scene)
    _check_dims(model, X, Y)
    truth = None
    if args.truth:
        truth = GroundTruth.from_dict(json.loads(Path(args.truth).read_text()))
    n_p = args.n_p if args.n_p is not None else (truth.n_inliers if truth else min(len(X), len(Y)))
    try:
        n_p = resolve_n_p(n_p, len(X), len(Y))
    except ValueError as exc:
        raise InputError(str(exc)) from None
    report = register(X, Y, model, n_p, box=_box_from_args(args, model, X, Y, truth), epsilon=args.eps,
                      max_depth=args.max_depth, grid_resolution=args.grid_res, time_limit=args.time_limit,
                      ground_truth_pairs=None if truth is None else truth.pairs)
    if args.out:
        write_json(args.out, report.to_dict())
    else:
        json.dump(report.to_dict(), sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    if args.pairs_out:
        write_csv(args.pairs_out, ["model_index", "scene_index"], report.pairs.tolist())
    if args.trace_out:
        s2 = report.normalization.scale ** 2
        write_csv(args.trace_out, ["iteration", "global_lb", "e_best", "active", "depth"],
                  [[r.iteration, r.global_lb * s2, r.e_best * s2, r.active, r.depth] for r in report.trace])
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        inst = synthesize(load_shape(args.shape), args.test, args.level, args.seed, noise=args.noise)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    write_points(f"{args.out}_model.txt", inst.model)
    write_points(f"{args.out}_scene.txt", inst.scene)
    write_json(f"{args.out}_truth.json", inst.truth.to_dict())
    return EXIT_OK


BENCH_HEADER = ["trial", "seed", "np_fraction", "n_p", "matching_error", "energy", "global_lb", "gap",
                "iterations", "termination", "wall_time"]


def run_trial(job: dict) -> list[list]:
    """One seeded instance, registered once per ``n_p`` fraction. Module level so it pickles."""
    inst = synthesize(job["shape"], job["test"], job["level"], job["seed"], noise=job["noise"])
    X, Y, truth = inst.model, inst.scene, inst.truth
    model = get_model(job["transform"])
    box = None
    if job["box_delta"] is not None:
        center = truth_branch_point(model, truth.rotation, truth.scale, truth.translation,
                                    normalize_pair(X, Y), truth.angle_axis)
        box = box_around(center, job["box_delta"])
    rows = []
    for frac in job["fractions"]:
        n_p = max(1, int(round(frac * truth.n_inliers)))
        rep = register(X, Y, model, n_p, box=box, epsilon=job["eps"], max_depth=job["max_depth"],
                       grid_resolution=job["grid_res"], time_limit=job["time_limit"],
                       ground_truth_pairs=truth.pairs)
        rows.append([job["trial"], job["seed"], frac, n_p, rep.matching_error, rep.energy, rep.global_lb,
                     rep.gap, rep.iterations, rep.termination, rep.wall_time])
    return rows


def aggregate_bench(rows: list[list]) -> list[list]:
    out = []
    for frac in sorted({r[2] for r in rows}):
        sel = np.array([[r[4], r[5], r[6], r[7], r[8], r[10]] for r in rows if r[2] == frac], dtype=float)
        m = sel.mean(axis=0)
        n_p = np.mean([r[3] for r in rows if r[2] == frac])
        out.append(["mean", "", frac, n_p, m[0], m[1], m[2], m[3], m[4], "", m[5]])
    return out


def cmd_bench(args) -> int:
    if args.trials < 1 or args.workers < 1:
        raise InputError("--trials and --workers must be positive")
    shape = load_shape(args.shape)
    jobs = [dict(trial=k, seed=args.seed + k, shape=shape, test=args.test, level=args.level, noise=args.noise,
                 transform=args.transform, fractions=DEFAULT_SWEEP if args.sweep else (args.n_p or 1.0,),
                 box_delta=args.box_delta, eps=args.eps, max_depth=args.max_depth, grid_res=args.grid_res,
                 time_limit=args.time_limit) for k in range(args.trials)]
    if args.workers == 1:
        results = [run_trial(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(run_trial, jobs))
    rows = [row for trial in results for row in trial]
    write_csv(args.out, BENCH_HEADER, rows + aggregate_bench(rows))
    return EXIT_OK


def root_min_eig(X, Y, model, n_p) -> tuple[float, float]:
    norm = normalize_pair(X, Y)
    pm = build_matrices(*norm.apply(X, Y), model, n_p)
    qp = qp_matrix(pm, compute_fixed_ranges(pm))
    return qp.min_eig, qp.clamp


def cmd_diag_psd(args) -> int:
    model = get_model(args.transform)
    rows = []
    if args.model or args.scene:
        if not (args.model and args.scene):
            raise InputError("--model and --scene must be given together")
        X, Y = read_points(args.model), read_points(args.scene)
        _check_dims(model, X, Y)
        n_p = resolve_n_p(args.n_p or min(len(X), len(Y)), len(X), len(Y))
        rows.append([0, "", n_p, *root_min_eig(X, Y, model, n_p)])
    else:
        shape = load_shape(args.shape)
        for k in range(args.instances):
            inst = synthesize(shape, args.test, args.level, args.seed + k)
            X, Y = inst.model, inst.scene
            _check_dims(model, X, Y)
            n_p = resolve_n_p(args.n_p or inst.truth.n_inliers, len(X), len(Y))
            rows.append([k, args.seed + k, n_p, *root_min_eig(X, Y, model, n_p)])
    write_csv(args.out, ["instance", "seed", "n_p", "min_eig", "clamp"], rows)
    eig = np.array([r[3] for r in rows])
    print(f"{len(rows)} instances, smallest eigenvalue {eig.min():.3e}, clamped {sum(r[4] > 0 for r in rows)}")
    return EXIT_OK


COMMANDS = {"register": cmd_register, "synth": cmd_synth, "bench": cmd_bench, "diag-psd": cmd_diag_psd}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code
    try:
        return COMMANDS[args.command](args)
    except DegenerateConfigurationError as exc:
        print(f"bnbreg: degenerate configuration: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (InputError, OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"bnbreg: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
