import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from matchrace import ArtifactMismatch, GameConfig, ScenarioError, SimConfig, simulate
from matchrace import io
from matchrace.strategy import race_statistics

BASE = io.bundled_scenario("symmetric")


def test_bundled_scenarios_encode_the_experiments():
    g = BASE.game
    assert (g.b1, g.b2, g.n_cells) == (1, 1, 200)
    assert g.b3 == pytest.approx(math.pi / 4)
    assert (g.s_bar_A, g.s0, g.s1, g.sigma, g.lam, g.c_A, g.c_B, g.tol, g.dt) == \
        (0.05, 20, 300, 0.03, 0.1, 0.02, 0.02, 1e-5, 0.2)
    t2 = io.bundled_scenario("test2")
    assert t2.sim.strategy_A == "game" and t2.sim.strategy_B == "single"
    assert t2.game == g
    asym = io.bundled_scenario("asymmetric.cfg")
    assert asym.game == g.replace(c_B=0.04)
    for s in (BASE, t2, asym):
        assert s.sim.xA == (-0.025, 0.0) and s.sim.xB == (0.025, 0.0)


MINI = """\
[game]
c_A = 0.02
lambda = 0.2

[grid]
n_cells = 10

[simulation]
xA = -0.1, 0.05
steps = 7
"""


def test_parse_minimal():
    s = io.parse_scenario(MINI)
    assert s.game.lam == 0.2 and s.game.n_cells == 10
    assert s.sim.xA == (-0.1, 0.05) and s.sim.steps == 7
    assert s.mode == "gauss-seidel" and s.max_iters is None


@pytest.mark.parametrize("text,key,line", [
    (MINI.replace("c_A = 0.02", "c_C = 0.02"), "c_C", 2),
    (MINI.replace("lambda = 0.2", "lambda = -1"), "lambda", 3),
    (MINI.replace("n_cells = 10", "n_cells = ten"), "n_cells", 6),
    (MINI.replace("xA = -0.1, 0.05", "xA = 4, 0"), "xA", 9),
    (MINI + "\n[solver]\nmode = sor\n", "mode", 13),
    (MINI + "\n[plot]\ncolor = red\n", "[plot]", 12),
])
def test_errors_name_key_and_line(text, key, line):
    with pytest.raises(ScenarioError) as exc:
        io.parse_scenario(text)
    assert exc.value.key == key
    assert exc.value.line == line
    assert key in str(exc.value) and f"line {line}" in str(exc.value)


def test_malformed_text():
    with pytest.raises(ScenarioError):
        io.parse_scenario("no section header\n")


KEYS = [k for sec in io.SECTIONS.values() for k in sec] + ["bogus", "s_bar"]
VALUES = st.one_of(st.floats(allow_nan=True, allow_infinity=True).map(repr),
                   st.integers(-5, 500).map(str), st.sampled_from(["", "abc", "1, 2", "jacobi"]))


@settings(max_examples=300, deadline=None)
@given(st.sampled_from(list(io.SECTIONS)), st.sampled_from(KEYS), VALUES)
def test_parsing_is_total(section, key, value):
    text = f"[{section}]\n{key} = {value}\n"
    try:
        s = io.parse_scenario(text)
    except ScenarioError as exc:
        assert exc.key is not None or exc.line is not None or "malformed" in str(exc)
    else:
        assert isinstance(s.game, GameConfig) and isinstance(s.sim, SimConfig)
        s.sim.validate(s.game)


@pytest.fixture(scope="module")
def small_solve():
    from matchrace import boundary_field, value_iteration
    cfg = GameConfig(n_cells=10)
    v, maps, rep = value_iteration(cfg, boundary_field(cfg, m_cells=256))
    return cfg, v, maps, rep


def test_field_round_trip(tmp_path, small_solve):
    cfg, v, maps, rep = small_solve
    p = tmp_path / "f.mrvf"
    io.save_field(p, v, maps, cfg, iterations=rep.iterations, residual=rep.residual)
    v2, maps2, header = io.load_field(p, expected_hash=cfg.solver_hash())
    assert v2.values.tobytes() == v.values.tobytes()
    assert np.array_equal(maps2.s_A, maps.s_A) and np.array_equal(maps2.s_B, maps.s_B)
    assert header["n_cells"] == 10 and header["converged"] is True
    p2 = tmp_path / "g.mrvf"
    io.save_field(p2, v2, maps2, cfg, iterations=rep.iterations, residual=rep.residual)
    assert p.read_bytes() == p2.read_bytes()


def test_field_mismatch_and_corruption(tmp_path, small_solve):
    cfg, v, maps, _ = small_solve
    p = tmp_path / "f.mrvf"
    io.save_field(p, v, maps, cfg)
    with pytest.raises(ArtifactMismatch):
        io.load_field(p, expected_hash=cfg.replace(c_B=0.04).solver_hash())
    p.write_bytes(p.read_bytes()[:-5])
    with pytest.raises(ArtifactMismatch):
        io.load_field(p)
    p.write_bytes(b"hello\n")
    with pytest.raises(ArtifactMismatch):
        io.load_field(p)


def test_trace_csv_round_trip(tmp_path, small_solve):
    cfg, v, maps, _ = small_solve
    tr = simulate(maps, SimConfig(steps=50, seed=9), cfg)
    p = tmp_path / "t.csv"
    io.write_trace_csv(p, tr)
    text = p.read_text()
    assert f"# config_hash: {cfg.solver_hash()}" in text and "# seed: 9" in text
    assert "t,xA1,xA2,xB1,xB2,theta,q,r,speedA,speedB,switchA,switchB" in text
    back = io.read_trace_csv(p)
    assert back.seed == 9 and back.config_hash == cfg.solver_hash()
    for name in ("t", "xA", "xB", "theta", "q", "r", "speed_A", "speed_B", "switch_A", "switch_B"):
        assert np.array_equal(getattr(back, name), getattr(tr, name))


def test_plot_and_statistics_files(tmp_path, small_solve):
    cfg, v, maps, _ = small_solve
    trs = [simulate(maps, SimConfig(steps=20, seed=s), cfg) for s in (1, 2)]
    paths = io.write_plot_data(tmp_path, trs[0], prefix="r")
    heads = {p.split("_")[-1]: open(p).readline().strip() for p in paths}
    assert heads == {"wind.csv": "t,theta", "trajectories.csv": "t,xA1,xA2,xB1,xB2",
                     "distance.csv": "t,x2A_minus_x2B", "speeds.csv": "t,speedA,speedB"}
    rows = open(paths[2]).read().splitlines()
    assert len(rows) == 22
    io.write_statistics_csv(tmp_path / "s.csv", race_statistics(trs, cfg), seeds=[1, 2])
    text = (tmp_path / "s.csv").read_text()
    assert text.startswith("seed,final_dx2,winner") and "win_fraction_A" in text
