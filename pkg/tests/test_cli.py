import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from iohoem.cli import (COLUMNS, EXIT_CONFIG, EXIT_OK, EXIT_TOLERANCE, ConfigError, ResultTable,
                        config_from_dict, emit, main, parse_config, read_table, run_scenario)


def write(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


MARKOV_SMALL = """
scenario = "markov-scatter"

[markov]
x_in_length = -1.0
c_length_per_time = 1.0

[grid]
t_time = [0.5, 1.0]
x_length = [-0.5, 0.0, 0.5]
"""

ZERO_COUPLING = """
scenario = "heom"

[heom]
splitting_per_time = 1.0
n_max = 3
initial_state = "plus"
coupling_operator = "sigma_z"

[[heom.modes]]
coupling_per_time = 0.0
frequency_per_time = 1.0
decay_per_time = 1.0

[grid]
t_start_time = 0.0
t_stop_time = 2.0
t_points = 5
"""

PSEUDOMODE_STRICT = """
scenario = "oracle-compare"

[heom]
n_max = 2

[oracle]
kind = "pseudomode"
tolerance = 1e-14
fock_cut = 4

[grid]
t_time = [0.0, 1.0]
"""


def test_minimal_markov_config_fills_defaults(tmp_path):
    cfg = parse_config(write(tmp_path, 'scenario = "markov-scatter"\n'))
    mp = cfg.markov.resolved()
    assert mp.omega_s_per_time == pytest.approx(4.5)
    assert mp.gamma_per_time == pytest.approx(1.8)
    assert mp.p_in_per_length == pytest.approx(4.5)
    assert mp.sigma_in_per_length == pytest.approx(2.25)
    assert len(cfg.t_grid) == 8 and cfg.t_grid[-1] == pytest.approx(2.0)
    assert len(cfg.x_grid) == 81 and cfg.x_grid[0] == pytest.approx(-2.0)


def test_negative_gamma_rejected():
    with pytest.raises(ConfigError, match="gamma"):
        config_from_dict({"scenario": "markov-scatter", "markov": {"gamma_per_time": -1.0}})


def test_missing_scenario_named():
    with pytest.raises(ConfigError, match="scenario"):
        config_from_dict({"heom": {}})


def test_unknown_key_named():
    with pytest.raises(ConfigError, match="splitting"):
        config_from_dict({"scenario": "heom", "heom": {"splitting": 1.0}})


def test_parse_error_reports_line(tmp_path):
    with pytest.raises(ConfigError, match="line 2"):
        parse_config(write(tmp_path, 'scenario = "heom"\nthis is = = broken\n'))


def test_grid_must_increase():
    with pytest.raises(ConfigError, match="grid"):
        config_from_dict({"scenario": "heom", "grid": {"t_time": [1.0, 0.5]}})


def test_zero_coupling_gives_constant_populations(tmp_path):
    table = run_scenario(parse_config(write(tmp_path, ZERO_COUPLING)))
    for name in ("rho_00", "rho_11"):
        vals = [r[3] for r in table.rows if r[2] == name]
        assert len(vals) == 5
        assert np.allclose(vals, 0.5, atol=1e-12)
    # the coherence only rotates
    coh = [complex(r[3], r[4]) for r in table.rows if r[2] == "rho_01"]
    assert np.allclose(np.abs(coh), 0.5, atol=1e-10)


def test_markov_rows_per_grid_point(tmp_path):
    table = run_scenario(parse_config(write(tmp_path, MARKOV_SMALL)))
    assert len(table.rows) == 6
    assert [(r[0], r[1]) for r in table.rows] == [(t, x) for t in (0.5, 1.0) for x in (-0.5, 0.0, 0.5)]
    assert all(r[2] == "density" for r in table.rows)


def test_output_is_deterministic(tmp_path):
    cfg = write(tmp_path, MARKOV_SMALL)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["run", str(cfg), "--out", str(a)]) == EXIT_OK
    assert main(["run", str(cfg), "--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    table = read_table(a)
    assert table.metadata["config_hash"] == parse_config(cfg).digest()


def test_json_output_embeds_hash(tmp_path):
    cfg = write(tmp_path, ZERO_COUPLING)
    out = tmp_path / "out.json"
    assert main(["run", str(cfg), "--out", str(out), "--format", "json"]) == EXIT_OK
    doc = json.loads(out.read_text())
    assert doc["columns"] == list(COLUMNS)
    assert doc["metadata"]["config_hash"] == parse_config(cfg).digest()


def test_hash_ignores_output_location():
    a = config_from_dict({"scenario": "heom", "output": {"path": "a.csv"}})
    b = config_from_dict({"scenario": "heom", "output": {"path": "b.csv"}})
    c = config_from_dict({"scenario": "heom", "heom": {"n_max": 4}})
    assert a.digest() == b.digest() != c.digest()


def test_nmax_override(tmp_path):
    assert parse_config(write(tmp_path, ZERO_COUPLING), nmax=6).heom.n_max == 6


def test_exit_codes(tmp_path, capsys):
    assert main(["run", str(tmp_path / "missing.toml")]) == EXIT_CONFIG
    assert main(["run", str(write(tmp_path, "scenario = 'nope'\n", "bad.toml"))]) == EXIT_CONFIG
    out = tmp_path / "strict.csv"
    assert main(["run", str(write(tmp_path, PSEUDOMODE_STRICT, "strict.toml")), "--out", str(out)]) == EXIT_TOLERANCE
    assert "tolerance" in capsys.readouterr().err
    # the comparison table is still written
    table = read_table(out)
    assert table.metadata["max_abs_diff"] > 1e-14


def test_empty_table_is_header_only(tmp_path):
    path = tmp_path / "empty.csv"
    emit(ResultTable(), path)
    assert path.read_text() == ",".join(COLUMNS) + "\n"
    assert read_table(path).rows == []


finite = st.floats(allow_nan=False, allow_infinity=False)
rows = st.lists(st.tuples(finite, st.one_of(finite, st.just(math.nan)),
                          st.sampled_from(["rho_00", "density", "hierarchy:rho_01"]), finite, finite),
                max_size=8)


@pytest.mark.parametrize("fmt", ["csv", "json"])
@given(rows=rows)
def test_round_trip(tmp_path_factory, fmt, rows):
    path = tmp_path_factory.mktemp("rt") / f"t.{fmt}"
    table = ResultTable(metadata={"config_hash": "abc", "diagnostics": {"n": 3}})
    for t, x, obs, re, im in rows:
        table.add(t, x, obs, complex(re, im))
    emit(table, path, fmt)
    back = read_table(path)
    assert back.metadata == table.metadata
    assert len(back.rows) == len(table.rows)
    for got, want in zip(back.rows, table.rows):
        assert got[2] == want[2]
        for g, w in zip(got[:2] + got[3:], want[:2] + want[3:]):
            assert (math.isnan(g) and math.isnan(w)) or g == w
