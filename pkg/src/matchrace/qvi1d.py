"""Single-player far-field switching problem on the wind angle.

When the boats are far apart the game splits into two independent optimal
switching problems, one per player, whose state is the wind angle alone.
This module solves them numerically on the periodic interval [-pi, pi],
gives the closed-form double-obstacle solution of the symmetric case, and
assembles the boundary table of the 3-D game.

Sign convention: tack 1 heads ``theta - a_star`` and is the faster tack for
``theta > 0``, so the closed-form profile returned by
:func:`obstacle_solution` describes ``v(1, theta) - v(2, theta)`` (the
advantage of being on tack 1), which reaches ``+c_bar`` for
``theta >= theta_star``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from ._kernels import gs_sweeps_1d
from .errors import ConvergenceError, ObstacleNotReached
from .model import GameConfig, Grid3, PlayerId

__all__ = [
    "Value1D",
    "ObstacleSolution",
    "solve_1d",
    "theta_star",
    "contact_point",
    "obstacle_solution",
    "boundary_field",
    "write_1d_csv",
]


@dataclass
class Value1D:
    """Converged single-player values ``values[p-1, k]`` on a periodic grid.

    Node ``k`` sits at ``-pi + k * 2*pi/m_cells``; node ``m_cells`` is node 0.
    """

    player: PlayerId
    m_cells: int
    values: np.ndarray
    cost: float
    iterations: int = 0
    residual: float = 0.0

    @property
    def dtheta(self) -> float:
        return 2 * math.pi / self.m_cells

    @property
    def theta(self) -> np.ndarray:
        return -math.pi + self.dtheta * np.arange(self.m_cells)

    def interp(self, mode: int, theta):
        """Periodic linear interpolation of ``v(mode, .)``."""
        return np.interp(theta, self.theta, self.values[mode - 1], period=2 * math.pi)

    def switch_map(self, eps: float = 0.0) -> np.ndarray:
        """Optimal next mode from each current mode, ``out[p-1, k]``."""
        v1, v2 = self.values
        out = np.empty((2, self.m_cells), dtype=np.int8)
        out[0] = np.where(v1 <= v2 - self.cost + eps, 2, 1)
        out[1] = np.where(v2 <= v1 - self.cost + eps, 1, 2)
        return out


def solve_1d(player, cfg: GameConfig, m_cells=None, tol=None, max_iters=1_000_000,
             initial=None) -> Value1D:
    """Solve ``v_p = max(v_{3-p} - c_P, S1[v_p])`` by Gauss-Seidel sweeps.

    ``S1`` is the centred diffusion step with the windward speed
    ``s_bar_P * cos(theta + (pi/4) * (-1)**p)`` as source.  Sweeps stop once
    the largest update falls below ``tol`` (default ``cfg.tol_1d``).

    Raises
    ------
    ConvergenceError
        If ``max_iters`` sweeps do not reach the tolerance.
    """
    player = PlayerId(player)
    m = int(cfg.m_cells if m_cells is None else m_cells)
    if m < 8:
        raise ValueError(f"m_cells must be >= 8, got {m}")
    tol = cfg.tol_1d if tol is None else tol
    s_bar = cfg.s_bar(player)
    cost = cfg.cost(player)
    dth = 2 * math.pi / m
    theta = -math.pi + dth * np.arange(m)
    src = np.stack([s_bar * np.cos(theta + (math.pi / 4) * (-1) ** p) for p in (1, 2)])
    a4 = cfg.sigma ** 2 / dth ** 2
    if initial is None:
        # exact discrete solution without switching
        v = src / (cfg.lam + a4 * (1 - math.cos(dth)))
    else:
        v = np.array(initial, dtype=float, copy=True)
        if v.shape != (2, m):
            raise ValueError(f"initial guess must have shape (2, {m})")
    its, res = gs_sweeps_1d(v, src, cost, cfg.lam, a4, tol, max_iters)
    if not res < tol:
        raise ConvergenceError(
            f"1-D solve for player {player.value} did not converge in {its} sweeps "
            f"(residual {res:.3e})", residual=res, iterations=its)
    return Value1D(player, m, v, cost, its, res)


def contact_point(s_bar, sigma, lam, c_bar, atol=1e-10):
    """Contact point of the symmetric double-obstacle problem, by bisection."""
    if not (sigma > 0 and lam > 0):
        raise ValueError("the closed form needs sigma > 0 and lam > 0")
    omega = math.sqrt(2 * lam) / sigma
    big_omega = 2 * math.sqrt(2) * s_bar / (2 * lam + sigma ** 2)

    def g(t):
        return big_omega * math.sin(t) - big_omega / omega * math.tanh(omega * t) * math.cos(t) - c_bar

    lo, hi = 0.0, math.pi / 2
    if not g(hi) > 0:
        raise ObstacleNotReached(
            f"obstacle never reached: switching cost {c_bar} exceeds the largest "
            f"attainable advantage {g(hi) + c_bar:.6g}")
    if not c_bar > 0:
        return 0.0
    while hi - lo > atol:
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _symmetric_constants(cfg: GameConfig):
    if not cfg.is_symmetric:
        raise ValueError("closed form needs c_A == c_B and s_bar_A == s_bar_B")
    return cfg.s_bar_A, cfg.sigma, cfg.lam, cfg.c_A


def theta_star(cfg: GameConfig) -> float:
    """Optimal switching threshold of the symmetric far-field problem."""
    return contact_point(*_symmetric_constants(cfg))


@dataclass(frozen=True)
class ObstacleSolution:
    """Closed-form solution of the symmetric double-obstacle problem.

    Calling the object evaluates the tack-1 advantage
    ``v(1, theta) - v(2, theta)``: ``-c_bar`` below ``-theta_star``, the odd
    profile ``2*c2*sinh(omega_star*theta) + Omega_star*sin(theta)`` in between
    and ``+c_bar`` above ``theta_star``.
    """

    omega_star: float
    Omega_star: float
    theta_star: float
    c_bar: float
    c2: float

    def inner(self, theta):
        theta = np.asarray(theta, dtype=float)
        return 2 * self.c2 * np.sinh(self.omega_star * theta) + self.Omega_star * np.sin(theta)

    def inner_derivative(self, theta):
        theta = np.asarray(theta, dtype=float)
        w = self.omega_star
        return 2 * self.c2 * w * np.cosh(w * theta) + self.Omega_star * np.cos(theta)

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        out = np.where(theta > self.theta_star, self.c_bar,
                       np.where(theta < -self.theta_star, -self.c_bar, self.inner(theta)))
        return float(out) if out.ndim == 0 else out


def obstacle_solution(cfg: GameConfig) -> ObstacleSolution:
    s_bar, sigma, lam, c_bar = _symmetric_constants(cfg)
    ts = contact_point(s_bar, sigma, lam, c_bar)
    omega = math.sqrt(2 * lam) / sigma
    big_omega = 2 * math.sqrt(2) * s_bar / (2 * lam + sigma ** 2)
    # v(0) = 0 forces an odd homogeneous part; v'(theta*) = 0 fixes its size
    c2 = -big_omega * math.cos(ts) / (2 * omega * math.cosh(omega * ts))
    return ObstacleSolution(omega, big_omega, ts, c_bar, c2)


def solve_both(cfg: GameConfig, m_cells=None):
    """Single-player solutions for A and B (shared when the game is symmetric)."""
    va = solve_1d(PlayerId.A, cfg, m_cells)
    if cfg.is_symmetric:
        vb = Value1D(PlayerId.B, va.m_cells, va.values, va.cost, va.iterations, va.residual)
    else:
        vb = solve_1d(PlayerId.B, cfg, m_cells)
    return va, vb


def boundary_field(cfg: GameConfig, grid: Grid3 = None, m_cells=None, solutions=None):
    """Far-field table ``table[k, q-1, r-1] = v_A(q, theta_k) - v_B(r, theta_k)``.

    The 1-D solutions are interpolated linearly onto the theta nodes of the
    3-D grid.  ``solutions`` may carry a precomputed ``(v_A, v_B)`` pair.
    """
    grid = Grid3.from_config(cfg) if grid is None else grid
    if grid.b3 > math.pi:
        raise ValueError("b3 must not exceed pi")
    va, vb = solve_both(cfg, m_cells) if solutions is None else solutions
    th = grid.theta
    table = np.empty((grid.n_cells + 1, 2, 2))
    for q in (1, 2):
        a = va.interp(q, th)
        for r in (1, 2):
            table[:, q - 1, r - 1] = a - vb.interp(r, th)
    return table


def write_1d_csv(path, sol: Value1D, eps=None):
    """Dump ``theta, v1, v2, diff, switch1, switch2`` with ``diff = v2 - v1``."""
    eps = 0.0 if eps is None else eps
    smap = sol.switch_map(eps)
    v1, v2 = sol.values
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta", "v1", "v2", "diff", "switch1", "switch2"])
        for k, th in enumerate(sol.theta):
            w.writerow([repr(float(th)), repr(float(v1[k])), repr(float(v2[k])),
                        repr(float(v2[k] - v1[k])), int(smap[0, k]), int(smap[1, k])])
