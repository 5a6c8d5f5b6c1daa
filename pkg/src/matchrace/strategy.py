"""Switching maps and closed-loop race simulation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import (GameConfig, Grid3, PlayerId, RaceTrace, SwitchingMaps, ValueField,
                    speed_scalar)
from .qvi1d import Value1D, solve_1d, theta_star

__all__ = [
    "STRATEGIES",
    "SimConfig",
    "SinglePlayerPolicy",
    "extract_switching_maps",
    "simulate",
    "TraceStats",
    "RaceStatistics",
    "race_statistics",
]

STRATEGIES = ("game", "single", "fixed")


def extract_switching_maps(v: ValueField, cfg: GameConfig, eps=None) -> SwitchingMaps:
    """Read the optimal tack changes off a converged value field.

    A switches from ``q`` when ``v(q, r)`` sits on its lower obstacle
    ``v(3-q, r) - c_A``, B when ``v(q, r)`` sits on the upper one
    ``v(q, 3-r) + c_B``; contact is tested to within ``eps`` (``10 * tol``
    by default).
    """
    eps = 10 * cfg.tol if eps is None else eps
    vals = v.values
    flip_q = vals[::-1]          # flip_q[q-1, r-1] = v(3-q, r)
    flip_r = vals[:, ::-1]       # flip_r[q-1, r-1] = v(q, 3-r)
    mode_q = np.array([1, 2], dtype=np.int8)[:, None, None, None, None]
    mode_r = np.array([1, 2], dtype=np.int8)[None, :, None, None, None]
    s_A = np.where(vals <= flip_q - cfg.c_A + eps, 3 - mode_q, mode_q).astype(np.int8)
    s_B = np.where(vals >= flip_r + cfg.c_B - eps, 3 - mode_r, mode_r).astype(np.int8)
    return SwitchingMaps(v.grid, s_A, s_B)


class SinglePlayerPolicy:
    """Far-field optimal tack choice of one player, ignoring the opponent.

    With symmetric costs and speeds the policy is the hysteresis loop with
    thresholds ``+-theta_star``: leave tack 1 once the wind backs to
    ``-theta_star`` or below, leave tack 2 once it veers to ``+theta_star``
    or above.  Otherwise the numerical 1-D switching map is used.
    """

    def __init__(self, threshold=None, solution: Value1D = None, eps=0.0):
        if (threshold is None) == (solution is None):
            raise ValueError("give exactly one of threshold or solution")
        self.threshold = threshold
        self.solution = solution
        self._map = None if solution is None else solution.switch_map(eps)

    @classmethod
    def for_player(cls, player, cfg: GameConfig, use_map=False, solution=None):
        if cfg.is_symmetric and not use_map and solution is None:
            return cls(threshold=theta_star(cfg))
        if solution is None:
            solution = solve_1d(player, cfg)
        return cls(solution=solution, eps=10 * cfg.tol_1d)

    def next_mode(self, mode: int, theta: float) -> int:
        if self.threshold is not None:
            if mode == 1 and theta <= -self.threshold:
                return 2
            if mode == 2 and theta >= self.threshold:
                return 1
            return mode
        sol = self.solution
        # nearest 1-D node; rounding up would bias both thresholds by up to a cell
        k = round((theta + math.pi) / sol.dtheta) % sol.m_cells
        return int(self._map[mode - 1, k])


@dataclass
class SimConfig:
    """Initial state, horizon and per-player strategies of one race."""

    xA: tuple = (-0.025, 0.0)
    xB: tuple = (0.025, 0.0)
    theta0: float = 0.0
    q0: int = 1
    r0: int = 1
    steps: int = 5000
    seed: int = None
    strategy_A: str = "game"
    strategy_B: str = "game"

    def validate(self, cfg: GameConfig) -> None:
        for name in ("xA", "xB"):
            x = np.asarray(getattr(self, name), float)
            if x.shape != (2,):
                raise ValueError(f"{name} must be a 2-vector")
            if not np.all(np.isfinite(x)):
                raise ValueError(f"{name} must be finite")
        if not math.isfinite(self.theta0) or abs(self.theta0) > cfg.b3:
            raise ValueError(f"theta0={self.theta0} lies outside [-b3, b3]")
        rel = np.asarray(self.xA, float) - np.asarray(self.xB, float)
        if abs(rel[0]) > cfg.b1 or abs(rel[1]) > cfg.b2:
            raise ValueError(f"relative position xA - xB = {tuple(rel)} lies outside the box")
        for name in ("q0", "r0"):
            if getattr(self, name) not in (1, 2):
                raise ValueError(f"{name} must be 1 or 2")
        if int(self.steps) != self.steps or self.steps < 0:
            raise ValueError("steps must be a non-negative integer")
        for name in ("strategy_A", "strategy_B"):
            if getattr(self, name) not in STRATEGIES:
                raise ValueError(f"unknown {name} {getattr(self, name)!r}; "
                                 f"expected one of {STRATEGIES}")


def _empty_trace(seed, cfg):
    z = np.zeros(0)
    zi = np.zeros(0, dtype=np.int8)
    return RaceTrace(z, np.zeros((0, 2)), np.zeros((0, 2)), z, zi, zi, z, z,
                     np.zeros(0, bool), np.zeros(0, bool), seed=seed,
                     config_hash=cfg.solver_hash())


def simulate(maps, sim: SimConfig, cfg: GameConfig, policies=None) -> RaceTrace:
    """Forward-Euler race under Brownian wind with closed-loop tack changes.

    Parameters
    ----------
    maps : SwitchingMaps, ValueField or None
        Game switching maps (extracted from a value field if needed).  Only
        required when a player uses the ``"game"`` strategy.
    sim : SimConfig
    cfg : GameConfig
    policies : dict, optional
        ``{PlayerId: SinglePlayerPolicy}`` overriding the default
        single-player policies.

    Wind increments are ``sigma * sqrt(dt) * W`` with ``W`` drawn from
    ``numpy.random.Generator(PCG64(seed))``; the wind is clipped to
    ``[-b3, b3]``.  A chooses its new tack from ``(Q_n, R_n)`` at the
    projected new state, then B from ``(Q_{n+1}, R_n)``.
    """
    sim.validate(cfg)
    seed = cfg.seed if sim.seed is None else int(sim.seed)
    if isinstance(maps, ValueField):
        maps = extract_switching_maps(maps, cfg)
    strategies = {PlayerId.A: sim.strategy_A, PlayerId.B: sim.strategy_B}
    if "game" in strategies.values() and maps is None:
        raise ValueError("a game-optimal strategy needs switching maps")
    grid = maps.grid if maps is not None else Grid3.from_config(cfg)
    policies = dict(policies or {})
    for p, s in strategies.items():
        if s == "single" and p not in policies:
            policies[p] = SinglePlayerPolicy.for_player(p, cfg)

    steps = int(sim.steps)
    if steps == 0:
        return _empty_trace(seed, cfg)

    s_A = maps.s_A if maps is not None else None
    s_B = maps.s_B if maps is not None else None
    rng = np.random.Generator(np.random.PCG64(seed))
    w = rng.standard_normal(steps)
    dt, b3 = cfg.dt, cfg.b3
    dtheta = cfg.sigma * math.sqrt(dt)

    rows = steps + 1
    t = dt * np.arange(rows)
    XA = np.empty((rows, 2))
    XB = np.empty((rows, 2))
    TH = np.empty(rows)
    Q = np.empty(rows, dtype=np.int8)
    R = np.empty(rows, dtype=np.int8)
    SA = np.empty(rows)
    SB = np.empty(rows)
    swA = np.zeros(rows, dtype=bool)
    swB = np.zeros(rows, dtype=bool)

    xa1, xa2 = (float(c) for c in sim.xA)
    xb1, xb2 = (float(c) for c in sim.xB)
    th, q, r = float(sim.theta0), int(sim.q0), int(sim.r0)
    s_bar_A, s_bar_B, a_star = cfg.s_bar_A, cfg.s_bar_B, cfg.a_star
    sa_kind, sb_kind = strategies[PlayerId.A], strategies[PlayerId.B]
    for n in range(rows):
        XA[n, 0], XA[n, 1], XB[n, 0], XB[n, 1] = xa1, xa2, xb1, xb2
        TH[n], Q[n], R[n] = th, q, r
        d1, d2 = xa1 - xb1, xa2 - xb2
        if not (math.isfinite(d1) and math.isfinite(d2) and math.isfinite(th)):
            raise FloatingPointError(f"non-finite state at step {n}")
        spa = speed_scalar(s_bar_A, d1, d2, th, q, cfg)
        spb = speed_scalar(s_bar_B, -d1, -d2, th, r, cfg)
        SA[n], SB[n] = spa, spb
        if n == steps:
            break
        ha = th + (-1) ** q * a_star
        hb = th + (-1) ** r * a_star
        xa1 += spa * math.sin(ha) * dt
        xa2 += spa * math.cos(ha) * dt
        xb1 += spb * math.sin(hb) * dt
        xb2 += spb * math.cos(hb) * dt
        th = min(max(th + dtheta * w[n], -b3), b3)
        i, j, k = grid.project(xa1 - xb1, xa2 - xb2, th)

        if sa_kind == "game":
            q_new = int(s_A[q - 1, r - 1, i, j, k])
        elif sa_kind == "single":
            q_new = policies[PlayerId.A].next_mode(q, th)
        else:
            q_new = q
        if sb_kind == "game":
            r_new = int(s_B[q_new - 1, r - 1, i, j, k])
        elif sb_kind == "single":
            r_new = policies[PlayerId.B].next_mode(r, th)
        else:
            r_new = r
        swA[n + 1] = q_new != q
        swB[n + 1] = r_new != r
        q, r = q_new, r_new

    return RaceTrace(t, XA, XB, TH, Q, R, SA, SB, swA, swB, seed=seed,
                     config_hash=cfg.solver_hash(),
                     meta={"strategy_A": sim.strategy_A, "strategy_B": sim.strategy_B,
                           "dt": dt})


@dataclass
class TraceStats:
    final_dx2: float = 0.0
    winner: int = 0
    switches_A: int = 0
    switches_B: int = 0
    mean_speed_A: float = 0.0
    mean_speed_B: float = 0.0
    shadowed_A: float = 0.0
    shadowed_B: float = 0.0


@dataclass
class RaceStatistics:
    per_trace: list = field(default_factory=list)
    n_traces: int = 0
    mean_final_dx2: float = 0.0
    win_fraction_A: float = 0.0
    win_fraction_B: float = 0.0
    mean_switches_A: float = 0.0
    mean_switches_B: float = 0.0
    mean_speed_A: float = 0.0
    mean_speed_B: float = 0.0
    shadowed_A: float = 0.0
    shadowed_B: float = 0.0


def _trace_stats(tr: RaceTrace, s_bar_A, s_bar_B, slack=1e-12) -> TraceStats:
    if len(tr) == 0:
        return TraceStats()
    d = float(tr.xA[-1, 1] - tr.xB[-1, 1])
    return TraceStats(
        final_dx2=d,
        winner=int(np.sign(d)),
        switches_A=int(tr.switch_A.sum()),
        switches_B=int(tr.switch_B.sum()),
        mean_speed_A=float(tr.speed_A.mean()),
        mean_speed_B=float(tr.speed_B.mean()),
        shadowed_A=float(np.mean(tr.speed_A < s_bar_A - slack)),
        shadowed_B=float(np.mean(tr.speed_B < s_bar_B - slack)),
    )


def race_statistics(traces, cfg: GameConfig = None) -> RaceStatistics:
    """Per-trace outcomes and their averages.

    ``winner`` is the sign of ``x2_A - x2_B`` at the horizon (+1 means A
    leads).  ``shadowed_*`` is the fraction of steps sailed below full speed;
    it needs ``cfg`` for the speed ceilings and is left at 0 without it.
    """
    traces = list(traces)
    if not traces:
        raise ValueError("race_statistics needs at least one trace")
    sa = cfg.s_bar_A if cfg is not None else math.inf
    sb = cfg.s_bar_B if cfg is not None else math.inf
    per = [_trace_stats(tr, sa, sb) for tr in traces]
    if cfg is None:
        for s in per:
            s.shadowed_A = s.shadowed_B = 0.0
    n = len(per)

    def mean(attr):
        return float(np.mean([getattr(s, attr) for s in per]))

    return RaceStatistics(
        per_trace=per,
        n_traces=n,
        mean_final_dx2=mean("final_dx2"),
        win_fraction_A=float(np.mean([s.winner > 0 for s in per])),
        win_fraction_B=float(np.mean([s.winner < 0 for s in per])),
        mean_switches_A=mean("switches_A"),
        mean_switches_B=mean("switches_B"),
        mean_speed_A=mean("mean_speed_A"),
        mean_speed_B=mean("mean_speed_B"),
        shadowed_A=mean("shadowed_A"),
        shadowed_B=mean("shadowed_B"),
    )
