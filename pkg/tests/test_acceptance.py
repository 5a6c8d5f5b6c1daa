"""Acceptance criteria, one test each.

Every test prints a ``[PASS]``/``[FAIL] criterion N: ...`` line; the lines are
repeated in the pytest terminal summary.  Run on its own with

    python tests/test_acceptance.py
"""

import dataclasses
import math
import os
import subprocess
import sys
import time
import timeit

import numpy as np
import pytest

from conftest import record
from matchrace import (GameConfig, PlayerId, SimConfig, SinglePlayerPolicy, boundary_field,
                       obstacle_solution, operator_T, race_statistics, simulate, solve_1d,
                       theta_star, value_iteration)
from matchrace import io
from matchrace.model import Grid3, ValueField
from matchrace.qvi1d import solve_both
from matchrace.solver3d import apply_T, drift_tables, initial_field

PAPER = GameConfig()


def test_criterion_1_theta_star():
    ts = theta_star(PAPER)
    per_call = min(timeit.repeat(lambda: theta_star(PAPER), number=100, repeat=5)) / 100
    ok = abs(ts - 0.085722) <= 1e-4 and per_call < 1e-3
    record(1, ok, f"theta* = {ts:.6f} (target 0.085722 +- 1e-4), {per_call * 1e6:.1f} us per call")
    assert ok


def test_criterion_2_closed_form_vs_numerical():
    t0 = time.perf_counter()
    sol = obstacle_solution(PAPER)
    ladder = [250, 500, 1000, 2000, 4000]
    errs = []
    for m in ladder:
        v = solve_1d(PlayerId.A, PAPER, m_cells=m)
        th = v.theta
        band = np.abs(th) <= math.pi / 4 + 1e-12
        # v(2) - v(1) is the mirror of the tack-1 advantage profile
        diff = v.values[1] - v.values[0]
        errs.append(float(np.max(np.abs(diff[band] + sol(th[band])))))
    elapsed = time.perf_counter() - t0
    err2000 = errs[ladder.index(2000)]
    pair_orders = [math.log2(errs[n] / errs[n + 1]) for n in range(len(errs) - 1)]
    # least-squares slope of log(error) against log(dtheta)
    slope = np.polyfit(np.log(2 * math.pi / np.array(ladder)), np.log(errs), 1)[0]
    ok = err2000 <= 2e-3 and slope >= 1.5 and elapsed < 10
    record(2, ok, f"max error at m=2000 {err2000:.2e} (<= 2e-3); fitted order {slope:.2f} (>= 1.5) "
                  f"over m={ladder}, pairwise {['%.2f' % p for p in pair_orders]}; "
                  f"{elapsed:.2f} s")
    assert ok


def bound_violation(values, c_a, c_b):
    flip_q = values[::-1]
    flip_r = values[:, ::-1]
    low = np.max(flip_q - c_a - values)
    high = np.max(values - flip_r - c_b)
    return float(max(low, high))


def test_criterion_3_obstacle_bounds(cfg61):
    t0 = time.perf_counter()
    va, vb = solve_both(cfg61)
    worst_1d = 0.0
    for sol in (va, vb):
        v1, v2 = sol.values
        worst_1d = max(worst_1d, float(np.max(v2 - sol.cost - v1)), float(np.max(v1 - sol.cost - v2)))
    v, _, rep = value_iteration(cfg61, boundary_field(cfg61, solutions=(va, vb)))
    worst_3d = bound_violation(v.values, cfg61.c_A, cfg61.c_B)
    elapsed = time.perf_counter() - t0
    ok = (rep.converged and worst_1d <= cfg61.tol_1d and worst_3d <= cfg61.tol
          and elapsed < 300)
    record(3, ok, f"1-D worst excess {worst_1d:.1e} (<= tol_1d), 3-D 61^3 worst excess "
                  f"{worst_3d:.1e} (<= tol {cfg61.tol:g}) at {v.values.size} nodes; {elapsed:.1f} s")
    assert ok


def test_criterion_4_far_field(cfg61, gs61, table61):
    v = gs61[0].values
    g = gs61[0].grid
    n = g.n_cells
    dec = initial_field(table61, g)
    allowed = 5 * max(g.dx1, g.dx2) * (cfg61.s_bar_A + cfg61.s_bar_B) / cfg61.lam
    layers = [(slice(None), slice(None), 1), (slice(None), slice(None), n - 1),
              (slice(None), slice(None), slice(None), 1), (slice(None), slice(None), slice(None), n - 1)]
    gap = max(float(np.abs(v[s] - dec[s]).max()) for s in layers)
    same = max(float(np.abs(v[(q, q) + s[2:]]).max()) for s in layers for q in (0, 1))
    ok = gap <= allowed and same <= 1e-2
    record(4, ok, f"face-adjacent layers: max |v - (vA - vB)| = {gap:.2e} (<= {allowed:.3f}); "
                  f"max |v(1,1)|,|v(2,2)| = {same:.1e} (<= 1e-2)")
    assert ok


def test_criterion_5_monotone_contraction(cfg61, gs61, jacobi61):
    rng = np.random.default_rng(2024)
    cfgs = [GameConfig(n_cells=10), GameConfig(n_cells=10, c_B=0.04, s_bar_B=0.045, nu1=0.3)]
    tables = [drift_tables(c) for c in cfgs]
    violations = 0
    point_violations = 0
    for p in range(1000):
        c = cfgs[p % 2]
        g = Grid3.from_config(c)
        u = 0.05 * rng.standard_normal((2, 2) + g.shape)
        bump = np.abs(rng.standard_normal(u.shape)) * (rng.random(u.shape) < 0.5)
        w = u + 0.05 * bump
        tu, tw = apply_T(u, c, tables[p % 2]), apply_T(w, c, tables[p % 2])
        violations += int(np.any(tu > tw))
        i, j, k = rng.integers(1, g.n_cells, size=3)
        q, r = rng.integers(1, 3, size=2)
        if operator_T(ValueField(g, u), i, j, k, q, r, c) > operator_T(ValueField(g, w), i, j, k, q, r, c):
            point_violations += 1
    rises = []
    norm_excess = []
    bound = cfg61.value_bound()
    for _, _, rep in (gs61, jacobi61):
        h = np.array(rep.residual_history)
        rises.append(float(np.max(np.diff(h))) if len(h) > 1 else -np.inf)
        norm_excess.append(max(rep.norm_history) - bound)
    ok = (violations == 0 and point_violations == 0 and max(rises) <= 1e-12
          and max(norm_excess) <= 0)
    record(5, ok, f"order violations {violations}/1000 fields, {point_violations}/1000 nodes; "
                  f"largest residual rise after sweep 1 {max(rises):.1e} (<= 1e-12); "
                  f"max ||v|| {bound + max(norm_excess):.4f} (<= {bound:.2f})")
    assert ok


def hysteresis_errors(tr, ts, slack):
    """Switches away from a threshold crossing, plus crossings without a switch."""
    th, q = tr.theta, tr.q
    bad = 0
    for n in range(1, len(tr)):
        if q[n - 1] == 1:
            at_crossing = th[n] <= -ts + slack and th[n - 1] > -ts - slack
            missed = q[n] == 1 and th[n] <= -ts - slack
        else:
            at_crossing = th[n] >= ts - slack and th[n - 1] < ts + slack
            missed = q[n] == 2 and th[n] >= ts + slack
        if (q[n] != q[n - 1] and not at_crossing) or missed:
            bad += 1
    return bad


def test_criterion_6_hysteresis():
    ts = theta_star(PAPER)
    sim = SimConfig(steps=100_000, seed=7, strategy_A="single", strategy_B="fixed")
    exact = simulate(None, sim, PAPER)
    sol = solve_1d(PlayerId.A, PAPER)
    mapped = simulate(None, sim, PAPER,
                      policies={PlayerId.A: SinglePlayerPolicy.for_player(PlayerId.A, PAPER,
                                                                         solution=sol)})
    bad_exact = hysteresis_errors(exact, ts, 0.0)
    bad_map = hysteresis_errors(mapped, ts, sol.dtheta)
    n_sw = int(exact.switch_A.sum())
    ok = bad_exact == 0 and bad_map == 0 and n_sw >= 10 and int(mapped.switch_A.sum()) >= 10
    record(6, ok, f"10^5-step trace: {n_sw} switches, {bad_exact} off-threshold with +-theta* rule; "
                  f"{int(mapped.switch_A.sum())} switches, {bad_map} farther than one cell "
                  f"({sol.dtheta:.4f} rad) with the numerical 1-D map")
    assert ok


def scenario_batch(name, seeds):
    scen = io.bundled_scenario(name)
    cfg = scen.game.replace(n_cells=60)
    t0 = time.perf_counter()
    _, maps, rep = value_iteration(cfg, boundary_field(cfg), mode=scen.mode)
    assert rep.converged
    traces = [simulate(maps, dataclasses.replace(scen.sim, seed=s), cfg) for s in seeds]
    return race_statistics(traces, cfg), time.perf_counter() - t0


@pytest.mark.slow
def test_criterion_7_scenarios():
    s1, t1 = scenario_batch("symmetric", range(50))
    s2, t2 = scenario_batch("test2", range(200))
    s3, t3 = scenario_batch("asymmetric", range(200))
    finals2 = np.array([p.final_dx2 for p in s2.per_trace])
    se2 = finals2.std(ddof=1) / math.sqrt(len(finals2))
    ok_a = s1.win_fraction_A > 0 and s1.win_fraction_B > 0
    ok_b = s2.mean_final_dx2 > 0
    ok_c = s3.win_fraction_A > 0.5
    ok_t = max(t1, t2, t3) < 900
    ok = ok_a and ok_b and ok_c and ok_t
    record(7, ok, f"(a) 50 symmetric races: A wins {s1.win_fraction_A:.0%}, B wins "
                  f"{s1.win_fraction_B:.0%}; (b) 200 races game vs single: mean final "
                  f"x2A-x2B = {s2.mean_final_dx2:+.4f} (s.e. {se2:.4f}); (c) 200 races "
                  f"c_B=0.04: A wins {s3.win_fraction_A:.1%}; batch times "
                  f"{t1:.0f}/{t2:.0f}/{t3:.0f} s on 61^3")
    assert ok


SOLVE_SNIPPET = """
import sys
from matchrace import io
from matchrace.cli import main
sys.exit(main(["solve", "--scenario", sys.argv[1], "--out", sys.argv[2], "--mode", "jacobi",
               "--threads", sys.argv[3]]))
"""

TRACE_SNIPPET = """
import sys
from matchrace import GameConfig, SimConfig, simulate, io
tr = simulate(None, SimConfig(steps=2000, seed=42, strategy_A="single", strategy_B="single"),
              GameConfig())
io.write_trace_csv(sys.argv[1], tr)
"""


def test_criterion_8_determinism(tmp_path, cfg61, gs61):
    _, maps, _ = gs61
    sim = SimConfig(steps=2000, seed=42)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    io.write_trace_csv(a, simulate(maps, sim, cfg61))
    io.write_trace_csv(b, simulate(maps, sim, cfg61))
    same_trace = a.read_bytes() == b.read_bytes()

    single = SimConfig(steps=2000, seed=42, strategy_A="single", strategy_B="single")
    c = tmp_path / "c.csv"
    io.write_trace_csv(c, simulate(None, single, GameConfig()))
    d = tmp_path / "d.csv"
    subprocess.run([sys.executable, "-c", TRACE_SNIPPET, str(d)], check=True)
    same_process = c.read_bytes() == d.read_bytes()

    scen = tmp_path / "s.cfg"
    src = open(os.path.join(os.path.dirname(io.__file__), "scenarios", "symmetric.cfg")).read()
    scen.write_text(src.replace("n_cells = 200", "n_cells = 30"))
    blobs = []
    for threads in (1, 2, 4):
        out = tmp_path / f"t{threads}"
        env = dict(os.environ, NUMBA_NUM_THREADS=str(threads))
        subprocess.run([sys.executable, "-c", SOLVE_SNIPPET, str(scen), str(out), str(threads)],
                       check=True, env=env)
        blobs.append((out / "field.mrvf").read_bytes())
    same_field = all(bl == blobs[0] for bl in blobs)
    ok = same_trace and same_process and same_field
    record(8, ok, f"repeat trace identical: {same_trace}; across processes: {same_process}; "
                  f"Jacobi field identical for 1/2/4 threads: {same_field}")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
