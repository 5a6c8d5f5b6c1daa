"""Monotone finite-difference scheme and value iteration for the 3-D game.

The stationary advection-diffusion part of each quasi-variational
inequality is discretised with upwind differences in ``x`` (following the
sign of the drift) and centred second differences in ``theta``.  Writing the
result in fixed-point form gives the operator

    T[v] = max(v(3-q, r) - c_A, min(v(q, 3-r) + c_B, S[v]))

which is monotone and non-expansive in the sup norm; value iteration applies
it at interior nodes while the box faces keep the far-field values.

T is not a contraction once switching loops are free (``c_A == c_B``), and
plain sweeps can then settle into a period-2 orbit near ``x = 0``.  The
averaged update ``v + omega * (T[v] - v)`` has the same fixed points, stays
monotone for ``omega <= 1`` and does converge, so the solver falls back to it
when the residual stops improving.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numba
import numpy as np

from . import _kernels
from .model import (GameConfig, Grid3, PlayerId, SwitchingMaps, ValueField,
                    coupled_drift, heading, running_cost, speed)

__all__ = [
    "DriftTables",
    "SchemeCoefficients",
    "SolveReport",
    "drift_tables",
    "scheme_coefficients",
    "scheme_update",
    "operator_T",
    "apply_T",
    "initial_field",
    "value_iteration",
]

log = logging.getLogger(__name__)

# auto relaxation: switch to omega=RELAX_OMEGA after STALL_SWEEPS sweeps
# without a 1% improvement of the best residual
STALL_SWEEPS = 25
RELAX_OMEGA = 0.5

MODES = ("gauss-seidel", "jacobi")


@dataclass
class DriftTables:
    """Per-player speeds on the grid and per-tack headings on the theta axis."""

    grid: Grid3
    spd_A: np.ndarray
    spd_B: np.ndarray
    hx_A: np.ndarray
    hy_A: np.ndarray
    hx_B: np.ndarray
    hy_B: np.ndarray


def drift_tables(cfg: GameConfig, grid: Grid3 = None) -> DriftTables:
    grid = Grid3.from_config(cfg) if grid is None else grid
    x1, x2, th = grid.x1, grid.x2, grid.theta
    X1, X2, TH = np.meshgrid(x1, x2, th, indexing="ij")
    xa = np.stack([X1, X2], axis=-1)
    spd_A = np.stack([speed(PlayerId.A, xa, TH, m, cfg) for m in (1, 2)])
    spd_B = np.stack([speed(PlayerId.B, -xa, TH, m, cfg) for m in (1, 2)])
    hA = [heading(th, m, cfg.a_star) for m in (1, 2)]
    hx = np.ascontiguousarray(np.stack([h[0] for h in hA]))
    hy = np.ascontiguousarray(np.stack([h[1] for h in hA]))
    # both boats share a_star
    return DriftTables(grid, spd_A, spd_B, hx, hy, hx.copy(), hy.copy())


@dataclass
class SchemeCoefficients:
    """Scheme weights per ``(q-1, r-1, i, j, k)``.

    ``step1``/``step2``/``step3`` are the upwind offsets ``sgn(f)``, so the
    upwind neighbour along x1 is ``i + step1``.
    """

    alpha1: np.ndarray
    alpha2: np.ndarray
    alpha3: np.ndarray
    alpha4: float
    Lambda: np.ndarray
    ell: np.ndarray
    step1: np.ndarray
    step2: np.ndarray
    step3: np.ndarray


def scheme_coefficients(cfg: GameConfig, grid: Grid3 = None) -> SchemeCoefficients:
    grid = Grid3.from_config(cfg) if grid is None else grid
    X1, X2, TH = np.meshgrid(grid.x1, grid.x2, grid.theta, indexing="ij")
    x = np.stack([X1, X2], axis=-1)
    f = np.empty((2, 2) + grid.shape + (3,))
    for q in (1, 2):
        for r in (1, 2):
            f[q - 1, r - 1] = coupled_drift(x, TH, q, r, cfg)
    a1 = np.abs(f[..., 0]) / grid.dx1
    a2 = np.abs(f[..., 1]) / grid.dx2
    a3 = np.abs(f[..., 2]) / grid.dtheta
    a4 = cfg.sigma ** 2 / grid.dtheta ** 2
    lam_big = cfg.lam + a1 + a2 + a3 + a4
    sgn = np.sign(f).astype(np.int8)
    return SchemeCoefficients(a1, a2, a3, a4, lam_big, f[..., 1].copy(),
                              sgn[..., 0], sgn[..., 1], sgn[..., 2])


def _check_interior(grid: Grid3, i, j, k):
    n = grid.n_cells
    if not (1 <= i <= n - 1 and 1 <= j <= n - 1 and 1 <= k <= n - 1):
        raise IndexError(f"node ({i}, {j}, {k}) is not interior for n_cells={n}")


def _sgn(x):
    return int(x > 0) - int(x < 0)


def scheme_update(v: ValueField, i, j, k, q, r, cfg: GameConfig) -> float:
    """Advection-diffusion update ``S[v]`` at one interior node.

    Evaluates the drift and running cost directly from the model, so it is an
    independent check on the compiled sweep kernels.
    """
    g = v.grid
    _check_interior(g, i, j, k)
    x = np.array([g.x1[i], g.x2[j]])
    th = g.theta[k]
    f = coupled_drift(x, th, q, r, cfg)
    ell = running_cost(x, th, q, r, cfg)
    a1 = abs(f[0]) / g.dx1
    a2 = abs(f[1]) / g.dx2
    a3 = abs(f[2]) / g.dtheta
    a4 = cfg.sigma ** 2 / g.dtheta ** 2
    lam_big = cfg.lam + a1 + a2 + a3 + a4
    vv = v.values[q - 1, r - 1]
    total = (a1 * vv[i + _sgn(f[0]), j, k] + a2 * vv[i, j + _sgn(f[1]), k]
             + a3 * vv[i, j, k + _sgn(f[2])]
             + 0.5 * a4 * (vv[i, j, k - 1] + vv[i, j, k + 1]) + ell)
    return float(total / lam_big)


def operator_T(v: ValueField, i, j, k, q, r, cfg: GameConfig) -> float:
    """Fixed-point operator at one interior node (pointwise reference)."""
    s = scheme_update(v, i, j, k, q, r, cfg)
    vals = v.values
    a_switch = vals[2 - q, r - 1, i, j, k] - cfg.c_A
    b_switch = vals[q - 1, 2 - r, i, j, k] + cfg.c_B
    return float(max(a_switch, min(b_switch, s)))


def _kernel_args(tables: DriftTables, cfg: GameConfig):
    g = tables.grid
    return (tables.spd_A, tables.spd_B, tables.hx_A, tables.hy_A, tables.hx_B, tables.hy_B,
            1.0 / g.dx1, 1.0 / g.dx2, cfg.sigma ** 2 / g.dtheta ** 2, cfg.lam, cfg.c_A, cfg.c_B)


def apply_T(values: np.ndarray, cfg: GameConfig, tables: DriftTables = None) -> np.ndarray:
    """One Jacobi application of T on all interior nodes (faces copied)."""
    tables = drift_tables(cfg) if tables is None else tables
    v = np.ascontiguousarray(values, dtype=float)
    out = v.copy()
    _kernels.jacobi_sweep(v, out, *_kernel_args(tables, cfg), 1.0)
    return out


def initial_field(boundary: np.ndarray, grid: Grid3) -> np.ndarray:
    """Decoupled far-field values broadcast over every (i, j)."""
    n = grid.n_cells + 1
    if boundary.shape != (n, 2, 2):
        raise ValueError(f"boundary table must have shape ({n}, 2, 2), got {boundary.shape}")
    tab = np.transpose(boundary, (1, 2, 0))  # (q, r, k)
    return np.ascontiguousarray(np.broadcast_to(tab[:, :, None, None, :], (2, 2, n, n, n)))


def _impose_faces(v, boundary_values):
    ends = [0, -1]
    v[:, :, ends] = boundary_values[:, :, ends]
    v[:, :, :, ends] = boundary_values[:, :, :, ends]
    v[..., ends] = boundary_values[..., ends]


@dataclass
class SolveReport:
    iterations: int
    residual: float
    converged: bool
    wall_time: float
    mode: str = "gauss-seidel"
    residual_history: list = field(default_factory=list)
    norm_history: list = field(default_factory=list)
    omega: float = 1.0
    relaxed_at: int = None

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "residual": self.residual,
            "converged": self.converged,
            "wall_time": self.wall_time,
            "mode": self.mode,
            "omega": self.omega,
            "relaxed_at": self.relaxed_at,
        }


def value_iteration(cfg: GameConfig, boundary: np.ndarray, initial: ValueField = None,
                    mode="gauss-seidel", max_iters=None, threads=None, tables=None,
                    callback=None, relax=None):
    """Iterate T to a fixed point.

    Parameters
    ----------
    cfg : GameConfig
    boundary : ndarray, shape (n_cells+1, 2, 2)
        Far-field table from :func:`matchrace.qvi1d.boundary_field`; it fixes
        every face of the box (theta faces included) and seeds the interior
        unless ``initial`` is given.
    mode : {"gauss-seidel", "jacobi"}
        Gauss-Seidel updates in place; Jacobi keeps two buffers and gives the
        same bits for any thread count.
    max_iters : int, optional
        Sweep cap, ``100 * n_cells`` by default.
    callback : callable, optional
        Called as ``callback(sweep, residual, values)`` after each sweep.
    relax : float, optional
        Fixed relaxation weight in (0, 1].  By default sweeps start plain and
        switch to ``RELAX_OMEGA`` once the residual stalls.  The residual is
        always ``max |T[v] - v|`` over the sweep.

    Returns
    -------
    (ValueField, SwitchingMaps, SolveReport)
        An unconverged run still returns the last iterate, flagged in the
        report.
    """
    from .strategy import extract_switching_maps

    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if relax is not None and not 0.0 < relax <= 1.0:
        raise ValueError(f"relax must lie in (0, 1], got {relax!r}")
    grid = Grid3.from_config(cfg)
    tables = drift_tables(cfg, grid) if tables is None else tables
    max_iters = 100 * grid.n_cells if max_iters is None else int(max_iters)
    if threads is not None:
        numba.set_num_threads(max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS)))

    base = initial_field(boundary, grid)
    if initial is None:
        v = base.copy()
    else:
        v = np.array(initial.values, dtype=float, copy=True)
        _impose_faces(v, base)
    args = _kernel_args(tables, cfg)
    other = v.copy() if mode == "jacobi" else None

    res_hist, norm_hist = [], [float(np.abs(v).max())]
    res = np.inf
    omega = 1.0 if relax is None else float(relax)
    relaxed_at = None
    best, stall = np.inf, 0
    t0 = time.perf_counter()
    it = 0
    while it < max_iters:
        if mode == "jacobi":
            res = _kernels.jacobi_sweep(v, other, *args, omega)
            v, other = other, v
        else:
            res = _kernels.gauss_seidel_sweep(v, *args, omega)
        it += 1
        if res < 0.99 * best:
            best, stall = res, 0
        else:
            stall += 1
        if relax is None and relaxed_at is None and stall >= STALL_SWEEPS:
            omega, relaxed_at = RELAX_OMEGA, it
            log.info("residual stalled at %.3e after %d sweeps; relaxing with omega=%g",
                     res, it, omega)
        res_hist.append(float(res))
        norm_hist.append(float(np.abs(v).max()))
        if callback is not None:
            callback(it, res, v)
        if it % 50 == 0:
            log.info("sweep %d residual %.3e", it, res)
        if res < cfg.tol:
            break
    wall = time.perf_counter() - t0
    converged = bool(res < cfg.tol)
    if not converged:
        log.warning("value iteration stopped after %d sweeps, residual %.3e", it, res)
    field_ = ValueField(grid, v)
    maps = extract_switching_maps(field_, cfg)
    report = SolveReport(it, float(res), converged, wall, mode, res_hist, norm_hist,
                         omega, relaxed_at)
    return field_, maps, report
