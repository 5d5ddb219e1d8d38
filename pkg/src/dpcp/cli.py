"""Command-line surface: reproducible experiment runs over the library.

Every subcommand writes a ``<out>.manifest.json`` holding the fully resolved
configuration and library versions; ``dpcp replay MANIFEST`` re-runs it and,
in deterministic mode, reproduces the outputs bit-for-bit. Exit codes:
0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import io as dio
from .altsolvers import alp_solve, irls_solve
from .core import Dataset, SubspaceModel, grid_oracle, principal_angle
from .evaluation import (condition_grid, phase_transition, write_grid_csv,
                         write_manifest)
from .initializers import random_init, spectral_init
from .pointcloud import DEFAULT_BOX, detect_plane, homogenize, load_cloud, load_labels
from .psgm import SolveOptions, StepSchedule, auto_mu0, solve, solve_mbls
from .quantities import (check_alp_angles, check_global_optimality,
                         check_psgm_preconditions, estimate_stats)
from .synth import SphericalModelSpec, outlier_ratio_to_M, sample_spherical


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v]


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v]


def build_parser() -> _Parser:
    p = _Parser(prog="dpcp", description=__doc__)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int,
                   default=int(os.environ.get("DPCP_THREADS", "1")))
    p.add_argument("--deterministic", action="store_true",
                   help="force single-threaded fixed-order execution")
    p.add_argument("--out", default=None, help="output path prefix (default dpcp_out)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="sample a spherical-model dataset")
    s.add_argument("--D", type=int, required=True)
    s.add_argument("--d", type=int, required=True)
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--M", type=int, default=None)
    s.add_argument("--ratio", type=float, default=None)
    s.add_argument("--format", choices=("csv", "bin"), default="csv")

    f = sub.add_parser("fit", help="fit one normal vector to a dataset file")
    f.add_argument("--data", required=True)
    f.add_argument("--method", choices=("psgm", "psgm-mbls", "alp", "irls"), default="psgm")
    f.add_argument("--schedule", choices=("pgd", "constant", "harmonic"), default="pgd")
    f.add_argument("--mu0", default="auto")
    f.add_argument("--K0", type=int, default=30)
    f.add_argument("--K", type=int, default=4)
    f.add_argument("--beta", type=float, default=0.5)
    f.add_argument("--max-iters", type=int, default=300)
    f.add_argument("--grad-tol", type=float, default=1e-10)
    f.add_argument("--angle-tol", type=float, default=None)
    f.add_argument("--init", choices=("spectral", "random"), default="spectral")

    q = sub.add_parser("quantities", help="estimate geometric stats and conditions")
    q.add_argument("--data", required=True)
    q.add_argument("--budget", type=int, default=20000)

    ph = sub.add_parser("phase", help="M-versus-N phase transition grid")
    ph.add_argument("--D", type=int, required=True)
    ph.add_argument("--d", type=int, required=True)
    ph.add_argument("--Ms", type=_int_list, required=True)
    ph.add_argument("--Ns", type=_int_list, required=True)
    ph.add_argument("--trials", type=int, default=10)
    ph.add_argument("--theta-star", type=float, default=0.01)
    ph.add_argument("--max-iters", type=int, default=200)

    ga = sub.add_parser("grid-alp", help="condition grid for the tangent recursion")
    ga.add_argument("--D", type=int, required=True)
    ga.add_argument("--N", type=int, required=True)
    ga.add_argument("--ratios", type=_float_list, required=True)
    ga.add_argument("--rel-dims", type=_float_list, required=True)
    ga.add_argument("--trials", type=int, default=10)
    ga.add_argument("--budget", type=int, default=4000)
    ga.add_argument("--alp-steps", type=int, default=3)

    r = sub.add_parser("roc", help="plane detection on a point cloud")
    r.add_argument("--cloud", required=True)
    r.add_argument("--format", choices=("ascii_xyz", "bin_f32x4"), default="ascii_xyz")
    r.add_argument("--labels", default=None)
    r.add_argument("--method", choices=("psgm", "alp", "irls", "ransac"), default="psgm")
    r.add_argument("--threshold", type=float, default=0.003)
    r.add_argument("--box", default="default",
                   help="'default', 'none', or xlo,xhi,ylo,yhi,zlo,zhi")
    r.add_argument("--weight", type=float, default=1.0)
    r.add_argument("--max-iters", type=int, default=200)

    o = sub.add_parser("oracle", help="brute-force minimum on a tiny instance")
    o.add_argument("--data", required=True)
    o.add_argument("--resolution", type=int, default=10**6)

    rp = sub.add_parser("replay", help="re-run a recorded manifest")
    rp.add_argument("manifest")
    return p


def _truth_from_labels(data: Dataset) -> SubspaceModel | None:
    if not data.labeled or data.inlier_count == 0:
        return None
    u, s, _ = np.linalg.svd(data.inliers, full_matrices=False)
    rank = max(1, int((s > 1e-8 * s[0]).sum()))
    return SubspaceModel(basis=u[:, :rank])


def _cmd_synth(cfg: dict) -> list[str]:
    if (cfg["M"] is None) == (cfg["ratio"] is None):
        raise UsageError("synth needs exactly one of --M / --ratio")
    M = cfg["M"] if cfg["M"] is not None else outlier_ratio_to_M(cfg["N"], cfg["ratio"])
    spec = SphericalModelSpec(D=cfg["D"], d=cfg["d"], N=cfg["N"], M=M, seed=cfg["seed"])
    data, _ = sample_spherical(spec)
    path = cfg["out"] + (".csv" if cfg["format"] == "csv" else ".dpcp")
    dio.write_dataset(data, path)
    return [path]


def _make_report_dict(report, wall_total: int) -> dict:
    return {
        "final_b": [float(v) for v in report.final_b],
        "iters": report.iters,
        "termination": report.termination,
        "objective": report.final_objective,
        "theta": None if math.isnan(report.final_theta) else report.final_theta,
        "flags": list(report.flags),
        "wall_nanos": wall_total,
    }


def _cmd_fit(cfg: dict) -> list[str]:
    data = dio.read_dataset(cfg["data"])
    truth = _truth_from_labels(data)
    b0 = spectral_init(data) if cfg["init"] == "spectral" else random_init(
        data.ambient_dim, cfg["seed"])
    mu0 = auto_mu0(data, b0) if cfg["mu0"] == "auto" else float(cfg["mu0"])
    if cfg["schedule"] == "pgd":
        sched = StepSchedule.piecewise_geometric(mu0, K0=cfg["K0"], K=cfg["K"],
                                                 beta=cfg["beta"])
    elif cfg["schedule"] == "constant":
        sched = StepSchedule.constant(mu0)
    else:
        sched = StepSchedule.harmonic(mu0)
    opts = SolveOptions(sched, max_iters=cfg["max_iters"], grad_tol=cfg["grad_tol"],
                        angle_tol=cfg["angle_tol"], seed=cfg["seed"])
    if cfg["method"] == "psgm":
        report = solve(data, b0, opts, truth)
    elif cfg["method"] == "psgm-mbls":
        mbls_opts = SolveOptions(StepSchedule.mbls(mu0), max_iters=cfg["max_iters"],
                                 grad_tol=cfg["grad_tol"], angle_tol=cfg["angle_tol"],
                                 seed=cfg["seed"])
        report = solve_mbls(data, b0, mbls_opts, truth)
    elif cfg["method"] == "alp":
        report = alp_solve(data, b0, max_iters=cfg["max_iters"], truth=truth)
    else:
        report = irls_solve(data, b0, max_iters=cfg["max_iters"], truth=truth)
    wall = report.trace[-1].wall_nanos if report.trace else 0
    report_path = cfg["out"] + ".report.json"
    trace_path = cfg["out"] + ".trace.csv"
    with open(report_path, "w") as fh:
        json.dump({**_make_report_dict(report, wall), "mu0": mu0}, fh, indent=2)
        fh.write("\n")
    report.trace_to_csv(trace_path)
    return [report_path, trace_path]


def _cmd_quantities(cfg: dict) -> list[str]:
    data = dio.read_dataset(cfg["data"])
    if not data.labeled:
        raise ValueError("quantities needs a labeled dataset")
    truth = _truth_from_labels(data)
    stats = estimate_stats(data, truth, budget=cfg["budget"], seed=cfg["seed"])
    N, M = data.inlier_count, data.outlier_count
    b0 = spectral_init(data)
    theta0 = principal_angle(truth, b0).theta_from_complement
    doc = {
        "stats": stats.to_dict(),
        "conditions": [
            check_global_optimality(stats, N, M).to_dict(),
            check_psgm_preconditions(stats, N, M, theta0).to_dict(),
        ],
        "alp_angles": check_alp_angles(stats, N, M, stats.c_X_max).to_dict(),
    }
    path = cfg["out"] + ".quantities.json"
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    return [path]


def _cmd_phase(cfg: dict) -> list[str]:
    threads = 1 if cfg["deterministic"] else cfg["threads"]
    result = phase_transition(cfg["Ms"], cfg["Ns"], cfg["D"], cfg["d"],
                              theta_star=cfg["theta_star"], trials=cfg["trials"],
                              seed=cfg["seed"], max_iters=cfg["max_iters"],
                              threads=threads)
    csv_path = cfg["out"] + ".phase.csv"
    result.to_csv(csv_path, cfg["D"], cfg["d"])
    fit_path = cfg["out"] + ".fit.json"
    with open(fit_path, "w") as fh:
        json.dump({"boundary": result.boundary, "sqrt_fit_a": result.sqrt_fit_a,
                   "loglog_slope": result.loglog_slope, "flags": result.flags},
                  fh, indent=2)
        fh.write("\n")
    return [csv_path, fit_path]


def _cmd_grid_alp(cfg: dict) -> list[str]:
    cells = condition_grid(cfg["N"], cfg["D"], cfg["ratios"], cfg["rel_dims"],
                           trials=cfg["trials"], seed=cfg["seed"],
                           budget=cfg["budget"], alp_steps=cfg["alp_steps"])
    path = cfg["out"] + ".grid.csv"
    write_grid_csv(path, [c.flat() for c in cells])
    return [path]


def _cmd_roc(cfg: dict) -> list[str]:
    cloud = load_cloud(cfg["cloud"], cfg["format"])
    if cfg["labels"]:
        labels = load_labels(cfg["labels"], cloud.n_points)
        cloud = type(cloud)(cloud.points, cloud.reflectance, labels)
    if cfg["box"] == "default":
        box = DEFAULT_BOX
    elif cfg["box"] == "none":
        box = None
    else:
        vals = _float_list(cfg["box"])
        if len(vals) != 6:
            raise UsageError("--box needs 6 comma-separated numbers")
        box = ((vals[0], vals[1]), (vals[2], vals[3]), (vals[4], vals[5]))
    data = homogenize(cloud, prefilter=box, weight=cfg["weight"])
    detection = detect_plane(data, cfg["method"], cfg["threshold"], seed=cfg["seed"],
                             max_iters=cfg["max_iters"])
    path = cfg["out"] + ".detection.json"
    with open(path, "w") as fh:
        fh.write(detection.to_json())
        fh.write("\n")
    return [path]


def _cmd_oracle(cfg: dict) -> list[str]:
    data = dio.read_dataset(cfg["data"])
    b, value = grid_oracle(data, cfg["resolution"])
    path = cfg["out"] + ".oracle.json"
    with open(path, "w") as fh:
        json.dump({"b": [float(v) for v in b], "objective": value,
                   "resolution": cfg["resolution"]}, fh, indent=2)
        fh.write("\n")
    return [path]


_HANDLERS = {
    "synth": _cmd_synth,
    "fit": _cmd_fit,
    "quantities": _cmd_quantities,
    "phase": _cmd_phase,
    "grid-alp": _cmd_grid_alp,
    "roc": _cmd_roc,
    "oracle": _cmd_oracle,
}


def _config_from_args(args: argparse.Namespace) -> dict:
    cfg = vars(args).copy()
    cfg.pop("command", None)
    return cfg


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    try:
        if args.command == "replay":
            with open(args.manifest) as fh:
                doc = json.load(fh)
            command, cfg = doc["command"], doc["config"]
            if args.out is not None:
                cfg = {**cfg, "out": args.out}
            outputs = _HANDLERS[command](cfg)
            write_manifest(cfg["out"] + ".manifest.json", command, cfg)
        else:
            if args.out is None:
                args.out = "dpcp_out"
            cfg = _config_from_args(args)
            outputs = _HANDLERS[args.command](cfg)
            write_manifest(cfg["out"] + ".manifest.json", args.command, cfg)
        for path in outputs:
            print(path)
        return 0
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    raise SystemExit(run())


if __name__ == "__main__":
    main()
