"""Scenario files, value-field artifacts and CSV exports.

Scenario files are INI documents with sections ``[game]``, ``[grid]``,
``[solver]`` and ``[simulation]``.  Keys mirror the fields of
:class:`~matchrace.model.GameConfig` and :class:`~matchrace.strategy.SimConfig`
(``lambda`` stands for ``GameConfig.lam``).  Unknown keys are rejected with
their line number.
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import json
import math
import os
import re
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import ArtifactMismatch, ScenarioError
from .model import GameConfig, Grid3, RaceTrace, SwitchingMaps, ValueField
from .strategy import RaceStatistics, SimConfig

__all__ = [
    "Scenario",
    "load_scenario",
    "parse_scenario",
    "bundled_scenario",
    "save_field",
    "load_field",
    "write_trace_csv",
    "read_trace_csv",
    "write_plot_data",
    "write_statistics_csv",
]

UNITS = "length unit = 1000 m; time unit = 10 s; angles in radians"

_GAME_KEYS = {
    "s_bar_A": float, "s_bar_B": float, "s0": float, "s1": float, "nu1": float,
    "nu2": float, "c_A": float, "c_B": float, "a_star": float, "sigma": float,
    "lambda": float,
}
_GRID_KEYS = {"b1": float, "b2": float, "b3": float, "n_cells": int, "m_cells": int}
_SOLVER_KEYS = {"tol": float, "tol_1d": float, "mode": str, "max_iters": int}
_SIM_KEYS = {
    "dt": float, "seed": int, "xA": "vec2", "xB": "vec2", "theta0": float, "q0": int,
    "r0": int, "steps": int, "strategy_A": str, "strategy_B": str,
}
SECTIONS = {"game": _GAME_KEYS, "grid": _GRID_KEYS, "solver": _SOLVER_KEYS,
            "simulation": _SIM_KEYS}
_GAME_FIELDS = {"lambda": "lam"}
_SIM_ONLY = {"xA", "xB", "theta0", "q0", "r0", "steps", "strategy_A", "strategy_B"}
_SIM_SEED = "seed"


@dataclass
class Scenario:
    game: GameConfig
    sim: SimConfig
    mode: str = "gauss-seidel"
    max_iters: int = None
    source: str = None
    extra: dict = field(default_factory=dict)


def _locate(text, section, key):
    """1-based line of ``key`` inside ``[section]``, or None."""
    current = None
    key_re = re.compile(r"^\s*" + re.escape(key) + r"\s*[=:]", re.IGNORECASE)
    for n, line in enumerate(text.splitlines(), 1):
        m = re.match(r"^\s*\[([^\]]+)\]", line)
        if m:
            current = m.group(1).strip()
            continue
        if (section is None or current == section) and key_re.match(line):
            return n
    return None


def _locate_section(text, section):
    for n, line in enumerate(text.splitlines(), 1):
        m = re.match(r"^\s*\[([^\]]+)\]", line)
        if m and m.group(1).strip() == section:
            return n
    return None


def _convert(kind, raw):
    raw = raw.strip()
    if kind is float:
        val = float(raw)
        if not math.isfinite(val):
            raise ValueError("not finite")
        return val
    if kind is int:
        return int(raw)
    if kind == "vec2":
        parts = [p for p in re.split(r"[,\s]+", raw) if p]
        if len(parts) != 2:
            raise ValueError("expected two comma-separated numbers")
        return (float(parts[0]), float(parts[1]))
    return raw


def parse_scenario(text: str, source=None) -> Scenario:
    """Parse scenario text into validated configurations.

    Raises
    ------
    ScenarioError
        Naming the offending key and its line.
    """
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source or "<scenario>")
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ScenarioError(f"malformed scenario: {exc.message}", line=line) from None

    game, sim, solver = {}, {}, {}
    for section in cp.sections():
        if section not in SECTIONS:
            raise ScenarioError("unknown section", key=f"[{section}]",
                                line=_locate_section(text, section))
        allowed = SECTIONS[section]
        for key, raw in cp.items(section):
            line = _locate(text, section, key)
            if key not in allowed:
                raise ScenarioError(f"unknown key in [{section}]", key=key, line=line)
            try:
                val = _convert(allowed[key], raw)
            except ValueError as exc:
                raise ScenarioError(f"bad value {raw!r} ({exc})", key=key, line=line) from None
            if section == "solver" and key in ("mode", "max_iters"):
                solver[key] = val
            elif section == "simulation" and key in _SIM_ONLY:
                sim[key] = val
            else:
                game[_GAME_FIELDS.get(key, key)] = val

    def locate_field(name):
        key = {v: k for k, v in _GAME_FIELDS.items()}.get(name, name)
        for sec, keys in SECTIONS.items():
            if key in keys:
                return key, _locate(text, sec, key)
        return name, None

    try:
        cfg = GameConfig(**game)
    except ValueError as exc:
        name = next((f for f in game if f in str(exc)), None)
        key, line = locate_field(name) if name else (None, None)
        raise ScenarioError(f"invalid game parameters ({exc})", key=key, line=line) from None
    try:
        sim_cfg = SimConfig(**sim)
        sim_cfg.validate(cfg)
    except ValueError as exc:
        # first simulation key named in the message, preferring keys set in the file
        named = [k for k in _SIM_KEYS if re.search(rf"\b{k}\b", str(exc))]
        name = next((k for k in named if k in sim), named[0] if named else None)
        line = _locate(text, "simulation", name) if name else None
        raise ScenarioError(f"invalid simulation settings ({exc})", key=name, line=line) from None
    mode = solver.get("mode", "gauss-seidel")
    if mode not in ("gauss-seidel", "jacobi"):
        raise ScenarioError("mode must be 'gauss-seidel' or 'jacobi'", key="mode",
                            line=_locate(text, "solver", "mode"))
    return Scenario(cfg, sim_cfg, mode, solver.get("max_iters"), source)


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        return parse_scenario(fh.read(), source=str(path))


def bundled_scenario(name: str) -> Scenario:
    """One of the shipped scenarios: ``symmetric``, ``test2`` or ``asymmetric``."""
    fname = name if name.endswith(".cfg") else name + ".cfg"
    text = resources.files("matchrace").joinpath("scenarios", fname).read_text()
    return parse_scenario(text, source=fname)


# value-field artifact ------------------------------------------------------

MAGIC = b"MRVF1\n"


def save_field(path, v: ValueField, maps: SwitchingMaps, cfg: GameConfig, converged=True,
               iterations=0, residual=0.0, mode="gauss-seidel"):
    """Write a value field and its switching maps.

    Layout: magic line, one JSON header line, then ``float64`` little-endian
    values in row-major ``(q, r, i, j, k)`` order, then the two ``int8`` maps in
    the same order.  Nothing time-dependent is stored, so identical solves give
    identical files.
    """
    g = v.grid
    header = {
        "format": 1,
        "b1": g.b1, "b2": g.b2, "b3": g.b3, "n_cells": g.n_cells,
        "parameter_hash": cfg.solver_hash(),
        "game": cfg.to_dict(),
        "converged": bool(converged),
        "iterations": int(iterations),
        "residual": float(residual),
        "mode": mode,
        "units": UNITS,
        "layout": "values <f8 (q,r,i,j,k); s_A i1; s_B i1",
    }
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(np.ascontiguousarray(v.values, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(maps.s_A, dtype=np.int8).tobytes())
        fh.write(np.ascontiguousarray(maps.s_B, dtype=np.int8).tobytes())


def load_field(path, expected_hash=None):
    """Read an artifact written by :func:`save_field`.

    Returns ``(ValueField, SwitchingMaps, header)``.  Raises
    :class:`ArtifactMismatch` when ``expected_hash`` differs from the stored
    parameter hash.
    """
    with open(path, "rb") as fh:
        if fh.readline() != MAGIC:
            raise ArtifactMismatch(f"{path} is not a value-field file")
        header = json.loads(fh.readline())
        payload = fh.read()
    if expected_hash is not None and header["parameter_hash"] != expected_hash:
        raise ArtifactMismatch(
            f"field {path} was solved with parameter hash {header['parameter_hash']}, "
            f"scenario has {expected_hash}")
    grid = Grid3(header["b1"], header["b2"], header["b3"], header["n_cells"])
    shape = (2, 2) + grid.shape
    nv = int(np.prod(shape))
    if len(payload) != nv * 8 + 2 * nv:
        raise ArtifactMismatch(f"{path} is truncated or corrupt")
    vals = np.frombuffer(payload, dtype="<f8", count=nv).reshape(shape).astype(float)
    s_A = np.frombuffer(payload, dtype=np.int8, count=nv, offset=8 * nv).reshape(shape).copy()
    s_B = np.frombuffer(payload, dtype=np.int8, count=nv, offset=9 * nv).reshape(shape).copy()
    return ValueField(grid, vals), SwitchingMaps(grid, s_A, s_B), header


# traces ----------------------------------------------------------------------

TRACE_COLUMNS = ["t", "xA1", "xA2", "xB1", "xB2", "theta", "q", "r",
                 "speedA", "speedB", "switchA", "switchB"]


def _f(x):
    return repr(float(x))


def write_trace_csv(path, tr: RaceTrace):
    with open(path, "w", newline="") as fh:
        fh.write(f"# units: {UNITS}\n")
        fh.write(f"# config_hash: {tr.config_hash}\n")
        fh.write(f"# rng: {tr.rng}\n")
        fh.write(f"# seed: {tr.seed}\n")
        for key in sorted(tr.meta):
            fh.write(f"# {key}: {tr.meta[key]}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for n in range(len(tr)):
            w.writerow([_f(tr.t[n]), _f(tr.xA[n, 0]), _f(tr.xA[n, 1]), _f(tr.xB[n, 0]),
                        _f(tr.xB[n, 1]), _f(tr.theta[n]), int(tr.q[n]), int(tr.r[n]),
                        _f(tr.speed_A[n]), _f(tr.speed_B[n]), int(tr.switch_A[n]),
                        int(tr.switch_B[n])])


def read_trace_csv(path) -> RaceTrace:
    meta = {}
    with open(path) as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            key, _, val = line[1:].partition(":")
            meta[key.strip()] = val.strip()
        else:
            body.append(line)
    rows = list(csv.reader(body))[1:]
    a = np.array(rows, dtype=float).reshape(-1, len(TRACE_COLUMNS))
    seed = int(meta.pop("seed", 0))
    rng = meta.pop("rng", "PCG64")
    chash = meta.pop("config_hash", "")
    meta.pop("units", None)
    return RaceTrace(a[:, 0], a[:, 1:3].copy(), a[:, 3:5].copy(), a[:, 5],
                     a[:, 6].astype(np.int8), a[:, 7].astype(np.int8), a[:, 8], a[:, 9],
                     a[:, 10].astype(bool), a[:, 11].astype(bool), seed=seed, rng=rng,
                     config_hash=chash, meta=meta)


def write_plot_data(outdir, tr: RaceTrace, prefix="race"):
    """Write the wind, trajectory, relative-distance and speed series."""
    os.makedirs(outdir, exist_ok=True)
    series = {
        "wind": (["t", "theta"], [tr.t, tr.theta]),
        "trajectories": (["t", "xA1", "xA2", "xB1", "xB2"],
                         [tr.t, tr.xA[:, 0], tr.xA[:, 1], tr.xB[:, 0], tr.xB[:, 1]]),
        "distance": (["t", "x2A_minus_x2B"], [tr.t, tr.relative_x2]),
        "speeds": (["t", "speedA", "speedB"], [tr.t, tr.speed_A, tr.speed_B]),
    }
    paths = []
    for name, (cols, data) in series.items():
        p = os.path.join(outdir, f"{prefix}_{name}.csv")
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for row in zip(*data):
                w.writerow([_f(x) for x in row])
        paths.append(p)
    return paths


def write_statistics_csv(path, stats: RaceStatistics, seeds=None):
    seeds = list(range(stats.n_traces)) if seeds is None else list(seeds)
    fields = [f.name for f in dataclasses.fields(stats.per_trace[0])] if stats.per_trace else []
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["seed"] + fields)
        for seed, s in zip(seeds, stats.per_trace):
            w.writerow([seed] + [getattr(s, f) for f in fields])
        fh.write("\n")
        w.writerow(["aggregate", "value"])
        for key in ("n_traces", "mean_final_dx2", "win_fraction_A", "win_fraction_B",
                    "mean_switches_A", "mean_switches_B", "mean_speed_A", "mean_speed_B",
                    "shadowed_A", "shadowed_B"):
            w.writerow([key, getattr(stats, key)])
