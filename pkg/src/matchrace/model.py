"""Domain types and boat dynamics for the two-boat match race game.

Units follow the America's Cup setting: one length unit is 1000 m and one
time unit is 10 s.  Angles are in radians; the wind angle ``theta`` is
measured from the vertical (windward) axis.  Discrete modes are encoded as
``1`` (port tack) and ``2`` (starboard tack); the heading of a boat in mode
``q`` is ``theta + (-1)**q * a_star``.
"""

from __future__ import annotations

import dataclasses
import enum
import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PlayerId",
    "GameConfig",
    "Grid3",
    "ValueField",
    "SwitchingMaps",
    "RaceTrace",
    "speed",
    "boat_velocity",
    "coupled_drift",
    "running_cost",
    "heading",
]

MODES = (1, 2)


class PlayerId(str, enum.Enum):
    A = "A"
    B = "B"


def other_mode(mode: int) -> int:
    return 3 - mode


def _check_mode(mode) -> None:
    if mode not in MODES:
        raise ValueError(f"mode must be 1 or 2, got {mode!r}")


@dataclass(frozen=True)
class GameConfig:
    """Physical and numerical parameters of the game and of the schemes.

    ``lam`` is the discount rate (``lambda`` in scenario files).  ``m_cells``
    and ``tol_1d`` control the single-player far-field solve that provides
    the boundary data of the 3-D problem.
    """

    b1: float = 1.0
    b2: float = 1.0
    b3: float = math.pi / 4
    n_cells: int = 200
    s_bar_A: float = 0.05
    s_bar_B: float = 0.05
    s0: float = 20.0
    s1: float = 300.0
    nu1: float = 0.0
    nu2: float = 0.01
    c_A: float = 0.02
    c_B: float = 0.02
    a_star: float = math.pi / 4
    sigma: float = 0.03
    lam: float = 0.1
    tol: float = 1e-5
    dt: float = 0.2
    seed: int = 0
    m_cells: int = 2000
    tol_1d: float = 1e-9

    def __post_init__(self):
        for name in ("b1", "b2", "b3", "lam", "tol", "dt", "tol_1d"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be finite and > 0, got {val!r}")
        for name in ("s_bar_A", "s_bar_B", "s0", "s1", "nu1", "sigma"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {val!r}")
        if int(self.n_cells) != self.n_cells or self.n_cells < 2:
            raise ValueError(f"n_cells must be an integer >= 2, got {self.n_cells!r}")
        if int(self.m_cells) != self.m_cells or self.m_cells < 8:
            raise ValueError(f"m_cells must be an integer >= 8, got {self.m_cells!r}")
        if not (self.c_A > 0 and self.c_B > 0):
            raise ValueError("switching costs c_A and c_B must be strictly positive")
        if not (0 < self.a_star < math.pi / 2):
            raise ValueError(f"a_star must lie in (0, pi/2), got {self.a_star!r}")
        if self.nu1 >= 1:
            raise ValueError(f"nu1 must be < 1, got {self.nu1!r}")
        if self.nu1 > 0 and not self.nu2 > 0:
            raise ValueError("nu2 must be > 0 when the port-tack penalty is active")

    @property
    def is_symmetric(self) -> bool:
        return self.s_bar_A == self.s_bar_B and self.c_A == self.c_B

    @property
    def ell_max(self) -> float:
        return self.s_bar_A + self.s_bar_B

    def value_bound(self) -> float:
        """Sup-norm bound for any discounted value of the game."""
        return self.ell_max / self.lam + self.c_A + self.c_B

    def s_bar(self, player: PlayerId) -> float:
        return self.s_bar_A if PlayerId(player) is PlayerId.A else self.s_bar_B

    def cost(self, player: PlayerId) -> float:
        return self.c_A if PlayerId(player) is PlayerId.A else self.c_B

    def replace(self, **changes) -> "GameConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def solver_hash(self) -> str:
        """Hash of every field the value function depends on.

        Simulation-only settings (``dt``, ``seed``) are excluded so one solved
        field can serve many simulation runs.
        """
        d = self.to_dict()
        d.pop("dt")
        d.pop("seed")
        blob = json.dumps(d, sort_keys=True, default=repr).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class Grid3:
    """Uniform grid on the reduced box [-b1,b1] x [-b2,b2] x [-b3,b3]."""

    b1: float
    b2: float
    b3: float
    n_cells: int

    @classmethod
    def from_config(cls, cfg: GameConfig) -> "Grid3":
        return cls(cfg.b1, cfg.b2, cfg.b3, int(cfg.n_cells))

    @property
    def dx1(self) -> float:
        return 2 * self.b1 / self.n_cells

    @property
    def dx2(self) -> float:
        return 2 * self.b2 / self.n_cells

    @property
    def dtheta(self) -> float:
        return 2 * self.b3 / self.n_cells

    @property
    def shape(self) -> tuple:
        n = self.n_cells + 1
        return (n, n, n)

    def _axis(self, b, step):
        x = -b + step * np.arange(self.n_cells + 1)
        # pin the last node so node(N) == +b exactly
        x[-1] = b
        return x

    @property
    def x1(self) -> np.ndarray:
        return self._axis(self.b1, self.dx1)

    @property
    def x2(self) -> np.ndarray:
        return self._axis(self.b2, self.dx2)

    @property
    def theta(self) -> np.ndarray:
        return self._axis(self.b3, self.dtheta)

    def project(self, x1, x2, theta):
        """Upper-integer-part projection of a state onto grid indices.

        Indices are clamped to ``[0, n_cells]`` so states outside the box use
        the boundary (far-field) layer.
        """
        n = self.n_cells
        i = math.ceil((x1 + self.b1) / self.dx1)
        j = math.ceil((x2 + self.b2) / self.dx2)
        k = math.ceil((theta + self.b3) / self.dtheta)
        return (min(max(i, 0), n), min(max(j, 0), n), min(max(k, 0), n))


@dataclass
class ValueField:
    """Discrete value function, ``values[q-1, r-1, i, j, k]``."""

    grid: Grid3
    values: np.ndarray

    def __post_init__(self):
        expected = (2, 2) + self.grid.shape
        if self.values.shape != expected:
            raise ValueError(f"values must have shape {expected}, got {self.values.shape}")

    def __call__(self, i, j, k, q, r):
        return self.values[q - 1, r - 1, i, j, k]


@dataclass
class SwitchingMaps:
    """Optimal next mode for each player, ``s_A[q-1, r-1, i, j, k]``."""

    grid: Grid3
    s_A: np.ndarray
    s_B: np.ndarray


@dataclass
class RaceTrace:
    """One simulated race, sampled at ``t_n = n * dt``.

    Row ``n`` holds the state at ``t_n`` and the speeds realised on
    ``[t_n, t_{n+1})``.  ``switch_A[n]`` is true when A changed tack between
    rows ``n-1`` and ``n``.
    """

    t: np.ndarray
    xA: np.ndarray
    xB: np.ndarray
    theta: np.ndarray
    q: np.ndarray
    r: np.ndarray
    speed_A: np.ndarray
    speed_B: np.ndarray
    switch_A: np.ndarray
    switch_B: np.ndarray
    seed: int = 0
    rng: str = "PCG64"
    config_hash: str = ""
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.t)

    @property
    def relative_x2(self) -> np.ndarray:
        return self.xA[:, 1] - self.xB[:, 1]

    def switch_events(self):
        """List of ``(player, step)`` pairs, in step order."""
        events = []
        for n in range(len(self.t)):
            if self.switch_A[n]:
                events.append((PlayerId.A, n))
            if self.switch_B[n]:
                events.append((PlayerId.B, n))
        return events


def _as_xy(x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 2:
        raise ValueError("relative position must have a trailing dimension of 2")
    return x[..., 0], x[..., 1]


def speed_scalar(s_bar, x1, x2, theta, own_mode, cfg: GameConfig) -> float:
    """Scalar version of :func:`speed` for tight simulation loops."""
    r2 = x1 * x1 + x2 * x2
    along = x1 * math.sin(theta) + x2 * math.cos(theta)
    shadow = min(cfg.s0 * along * math.exp(-cfg.s1 * r2), 0.0)
    s = s_bar * max(1.0 + shadow, 0.0)
    if own_mode == 2 and cfg.nu1 > 0:
        s = s * (1.0 - cfg.nu1 * math.exp(-r2 / cfg.nu2))
    return s


def speed(player, x, theta, own_mode, cfg: GameConfig):
    """Boat speed under the wind-shadow profile and the port-tack penalty.

    ``x`` is the shadow argument of the player: ``xA - xB`` for A and
    ``xB - xA`` for B.  Accepts scalars or broadcastable arrays (trailing
    axis of ``x`` of length 2).  The result lies in ``[0, s_bar]``.
    """
    _check_mode(own_mode)
    x1, x2 = _as_xy(x)
    theta = np.asarray(theta, dtype=float)
    if not (np.all(np.isfinite(x1)) and np.all(np.isfinite(x2)) and np.all(np.isfinite(theta))):
        raise ValueError("speed requires finite inputs")
    r2 = x1 * x1 + x2 * x2
    along = x1 * np.sin(theta) + x2 * np.cos(theta)
    shadow = np.minimum(cfg.s0 * along * np.exp(-cfg.s1 * r2), 0.0)
    s = cfg.s_bar(player) * np.maximum(1.0 + shadow, 0.0)
    if own_mode == 2 and cfg.nu1 > 0:
        s = s * (1.0 - cfg.nu1 * np.exp(-r2 / cfg.nu2))
    if np.ndim(s) == 0:
        return float(s)
    return s


def heading(theta, mode, a_star):
    """Unit heading ``(sin, cos)`` of a boat on tack ``mode``."""
    _check_mode(mode)
    ang = np.asarray(theta, dtype=float) + (-1) ** mode * a_star
    return np.sin(ang), np.cos(ang)


def boat_velocity(player, x, theta, own_mode, cfg: GameConfig):
    """Planar velocity of one boat; ``x`` is its shadow argument (see :func:`speed`)."""
    s = speed(player, x, theta, own_mode, cfg)
    hx, hy = heading(theta, own_mode, cfg.a_star)
    return np.stack([s * hx, s * hy], axis=-1)


def coupled_drift(x, theta, q, r, cfg: GameConfig):
    """Drift of the reduced state ``(x1, x2, theta)``; the last entry is zero."""
    x = np.asarray(x, dtype=float)
    fa = boat_velocity(PlayerId.A, x, theta, q, cfg)
    fb = boat_velocity(PlayerId.B, -x, theta, r, cfg)
    d = fa - fb
    return np.concatenate([d, np.zeros(d.shape[:-1] + (1,))], axis=-1)


def running_cost(x, theta, q, r, cfg: GameConfig):
    """Windward component of the relative velocity of A with respect to B."""
    x = np.asarray(x, dtype=float)
    fa = boat_velocity(PlayerId.A, x, theta, q, cfg)
    fb = boat_velocity(PlayerId.B, -x, theta, r, cfg)
    out = fa[..., 1] - fb[..., 1]
    if np.ndim(out) == 0:
        return float(out)
    return out
