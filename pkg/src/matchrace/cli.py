"""Command-line front end.

    matchrace solve-1d --scenario symmetric.cfg --out out/
    matchrace solve    --scenario symmetric.cfg --out out/ --mode jacobi
    matchrace simulate --scenario symmetric.cfg --field out/field.mrvf --seeds 0..49 --out out/
    matchrace maps     --scenario symmetric.cfg --field out/field.mrvf --theta 0.1 --out out/

Exit codes: 0 ok, 1 solver error, 2 scenario parse error, 3 unconverged,
4 artifact mismatch.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import dataclasses
import json
import logging
import os
import sys

import numpy as np

from . import io
from .errors import ArtifactMismatch, ConvergenceError, ObstacleNotReached, ScenarioError
from .model import PlayerId
from .qvi1d import boundary_field, solve_both, theta_star, write_1d_csv
from .solver3d import value_iteration
from .strategy import race_statistics, simulate

EXIT_OK = 0
EXIT_SOLVER = 1
EXIT_PARSE = 2
EXIT_UNCONVERGED = 3
EXIT_MISMATCH = 4

FIELD_FILE = "field.mrvf"

log = logging.getLogger("matchrace")


def parse_seeds(text: str):
    """``"3"``, ``"0..49"`` (inclusive) or ``"1,5,9"``."""
    text = text.strip()
    if ".." in text:
        a, b = text.split("..", 1)
        a, b = int(a), int(b)
        if b < a:
            raise argparse.ArgumentTypeError(f"empty seed range {text!r}")
        return list(range(a, b + 1))
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from None


def _load(args):
    scen = io.load_scenario(args.scenario)
    return scen


def cmd_solve_1d(args):
    scen = _load(args)
    cfg = scen.game
    os.makedirs(args.out, exist_ok=True)
    ts = theta_star(cfg) if cfg.is_symmetric else None
    va, vb = solve_both(cfg)
    write_1d_csv(os.path.join(args.out, "values_1d_A.csv"), va, eps=10 * cfg.tol_1d)
    write_1d_csv(os.path.join(args.out, "values_1d_B.csv"), vb, eps=10 * cfg.tol_1d)
    print(f"1-D solves: A {va.iterations} sweeps, B {vb.iterations} sweeps, m_cells={va.m_cells}")
    if ts is not None:
        print(f"theta_star = {ts:.6f}")
    else:
        gap = float(np.max(np.abs(va.values - vb.values)))
        print(f"asymmetric game: no closed form; max |v_A - v_B| = {gap:.6g}")
    return EXIT_OK


def cmd_solve(args):
    scen = _load(args)
    cfg = scen.game
    mode = args.mode or scen.mode
    max_iters = args.max_iters if args.max_iters is not None else scen.max_iters
    os.makedirs(args.out, exist_ok=True)
    table = boundary_field(cfg)
    v, maps, rep = value_iteration(cfg, table, mode=mode, max_iters=max_iters,
                                   threads=args.threads)
    path = os.path.join(args.out, FIELD_FILE)
    io.save_field(path, v, maps, cfg, converged=rep.converged, iterations=rep.iterations,
                  residual=rep.residual, mode=mode)
    report = dict(rep.to_dict(), parameter_hash=cfg.solver_hash(), n_cells=cfg.n_cells,
                  field=path)
    with open(os.path.join(args.out, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    status = "converged" if rep.converged else "UNCONVERGED"
    print(f"{status}: {rep.iterations} sweeps, residual {rep.residual:.3e}, "
          f"wall time {rep.wall_time:.2f} s -> {path}")
    return EXIT_OK if rep.converged else EXIT_UNCONVERGED


_WORKER = {}


def _init_worker(maps, cfg):
    _WORKER["maps"] = maps
    _WORKER["cfg"] = cfg


def _run_seed(sim):
    return simulate(_WORKER["maps"], sim, _WORKER["cfg"])


def cmd_simulate(args):
    scen = _load(args)
    cfg = scen.game
    _, maps, header = io.load_field(args.field, expected_hash=cfg.solver_hash())
    if not header.get("converged", True):
        log.warning("field %s is flagged unconverged", args.field)
    sim = scen.sim
    if args.steps is not None:
        sim = dataclasses.replace(sim, steps=args.steps)
    seeds = args.seeds if args.seeds is not None else [cfg.seed]
    sims = [dataclasses.replace(sim, seed=s) for s in seeds]
    os.makedirs(args.out, exist_ok=True)

    threads = max(1, args.threads or 1)
    if threads > 1 and len(sims) > 1:
        with concurrent.futures.ProcessPoolExecutor(
                threads, initializer=_init_worker, initargs=(maps, cfg)) as pool:
            traces = list(pool.map(_run_seed, sims))
    else:
        traces = [simulate(maps, s, cfg) for s in sims]

    for seed, tr in zip(seeds, traces):
        io.write_trace_csv(os.path.join(args.out, f"trace_{seed}.csv"), tr)
        if args.plot_data:
            io.write_plot_data(os.path.join(args.out, "plot"), tr, prefix=f"seed{seed}")
    stats = race_statistics(traces, cfg)
    io.write_statistics_csv(os.path.join(args.out, "statistics.csv"), stats, seeds)
    print(f"{stats.n_traces} races: mean final x2A-x2B = {stats.mean_final_dx2:+.5f}, "
          f"A wins {stats.win_fraction_A:.1%}, B wins {stats.win_fraction_B:.1%}")
    return EXIT_OK


def cmd_maps(args):
    scen = _load(args)
    cfg = scen.game
    v, maps, _ = io.load_field(args.field, expected_hash=cfg.solver_hash())
    g = v.grid
    k = int(np.argmin(np.abs(g.theta - args.theta)))
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, f"maps_k{k}.csv")
    with open(path, "w", newline="") as fh:
        fh.write(f"# theta = {g.theta[k]!r} (k = {k})\n")
        w = csv.writer(fh, lineterminator="\n")
        cols = ["i", "j", "x1", "x2"]
        for q in (1, 2):
            for r in (1, 2):
                cols += [f"v_{q}{r}", f"sA_{q}{r}", f"sB_{q}{r}"]
        w.writerow(cols)
        x1, x2 = g.x1, g.x2
        for i in range(g.n_cells + 1):
            for j in range(g.n_cells + 1):
                row = [i, j, repr(float(x1[i])), repr(float(x2[j]))]
                for q in (1, 2):
                    for r in (1, 2):
                        row += [repr(float(v.values[q - 1, r - 1, i, j, k])),
                                int(maps.s_A[q - 1, r - 1, i, j, k]),
                                int(maps.s_B[q - 1, r - 1, i, j, k])]
                w.writerow(row)
    print(f"switching maps at theta={g.theta[k]:.6f} -> {path}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="matchrace", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--scenario", required=True, help="scenario file (INI)")
        sp.add_argument("--out", default=".", help="output directory")

    sp = sub.add_parser("solve-1d", help="far-field single-player problems")
    common(sp)
    sp.set_defaults(func=cmd_solve_1d)

    sp = sub.add_parser("solve", help="value iteration on the 3-D grid")
    common(sp)
    sp.add_argument("--mode", choices=["jacobi", "gauss-seidel"], default=None)
    sp.add_argument("--max-iters", type=int, default=None)
    sp.add_argument("--threads", type=int, default=None)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("simulate", help="simulate races from a solved field")
    common(sp)
    sp.add_argument("--field", required=True, help=f"artifact written by solve ({FIELD_FILE})")
    sp.add_argument("--seeds", type=parse_seeds, default=None, help="e.g. 0..49 or 1,2,3")
    sp.add_argument("--steps", type=int, default=None, help="override the horizon")
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--plot-data", action="store_true",
                    help="also write wind/trajectory/distance/speed series")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("maps", help="dump switching maps at a fixed wind angle")
    common(sp)
    sp.add_argument("--field", required=True)
    sp.add_argument("--theta", type=float, default=0.0)
    sp.set_defaults(func=cmd_maps)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ArtifactMismatch as exc:
        print(f"artifact mismatch: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except ConvergenceError as exc:
        print(f"not converged: {exc}", file=sys.stderr)
        return EXIT_UNCONVERGED
    except ObstacleNotReached as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
