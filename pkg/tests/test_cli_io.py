import json

import numpy as np
import pytest

from qthermo.cli import main
from qthermo.config import parse_config, serialize_config
from qthermo.errors import ConfigError
from qthermo.function_space import GridFunction
from qthermo.serialize import read_field, write_field

MINIMAL = """
command: solve-triple
model: {family: doubling}
base: {kind: rotation, seed: 3}
numerics: {grid_n: 128, burn_in: 16, window: 4}
"""

PAIR_BAD_H3 = """
command: check-hypotheses
model: {family: expanding_pair, L: 1.5}
base: {kind: bernoulli, probs: [0.5, 0.5], seed: 5}
count: 4000
"""


def test_parse_minimal_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.model.family == "doubling"
    assert cfg.numerics.eps == 0.02          # documented default
    assert cfg.numerics.grid_n == 128
    assert cfg.base.kind == "rotation"


def test_parse_range_violation_names_key():
    with pytest.raises(ConfigError) as exc:
        parse_config(MINIMAL.replace("window: 4", "window: 4, eps: 0.5"))
    assert "numerics.eps" in str(exc.value)


def test_parse_unknown_key_suggests():
    with pytest.raises(ConfigError) as exc:
        parse_config(MINIMAL.replace("model:", "modle:"))
    msg = str(exc.value)
    assert "modle" in msg and "model" in msg


def test_config_roundtrip():
    cfg = parse_config(MINIMAL)
    assert parse_config(serialize_config(cfg)) == cfg


def test_field_file_roundtrip(tmp_path):
    g = GridFunction(1.0 + 0.25 * np.sin(2 * np.pi * np.arange(64) / 64))
    p = write_field(tmp_path / "g.qtf", g)
    back = read_field(p)
    assert back.boundary == g.boundary
    assert np.array_equal(back.values, g.values)


def test_solve_triple_command(tmp_path):
    cfgfile = tmp_path / "c.yaml"
    cfgfile.write_text(MINIMAL)
    out = tmp_path / "run"
    code = main(["solve-triple", "--config", str(cfgfile), "--out", str(out)])
    assert code == 0
    lam = (out / "lambda.csv").read_text().strip().splitlines()
    assert lam[0] == "j,lambda"
    for line in lam[1:]:
        assert abs(float(line.split(",")[1]) - 2.0) <= 1e-8
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "solve-triple"
    assert manifest["seed"] == 3
    assert any(o.endswith("lambda.csv") for o in manifest["outputs"])
    # field files round-trip through the reader
    h0 = read_field(out / "h_000.qtf")
    assert np.allclose(h0.values, 1.0)


def test_check_hypotheses_reports_false_without_failing(tmp_path):
    cfgfile = tmp_path / "c.yaml"
    cfgfile.write_text(PAIR_BAD_H3)
    out = tmp_path / "run"
    code = main(["check-hypotheses", "--config", str(cfgfile), "--out", str(out)])
    assert code == 0          # reporting, not failing
    rows = (out / "hypotheses.csv").read_text().splitlines()
    h3 = [r for r in rows if r.startswith("H3")][0]
    assert ",False," in h3


def test_tolerance_violation_exit_code(tmp_path):
    text = MINIMAL.replace("burn_in: 16", "burn_in: 2").replace(
        "family: doubling", "family: manneville_pomeau, gamma_winding: 1")
    text = text.replace("window: 4", "window: 4, burnin_tol: 1.0e-14")
    cfgfile = tmp_path / "c.yaml"
    cfgfile.write_text(text)
    out = tmp_path / "run"
    code = main(["solve-triple", "--config", str(cfgfile), "--out", str(out)])
    assert code == 1
    err = json.loads((out / "error.json").read_text())
    assert err["error"] == "BurnInError"


def test_config_error_exit_code(tmp_path):
    cfgfile = tmp_path / "c.yaml"
    cfgfile.write_text("modle: {family: doubling}\n")
    assert main(["solve-triple", "--config", str(cfgfile)]) == 2


def test_missing_config_exit_code(tmp_path):
    assert main(["solve-triple", "--config", str(tmp_path / "none.yaml")]) == 2


def test_gibbs_command_runs(tmp_path):
    text = """
model: {family: manneville_pomeau, gamma_winding: 1}
potential: {family: cosine, amplitude: 0.05}
base: {kind: rotation, seed: 9}
count: 2
numerics: {grid_n: 256, burn_in: 24, n_max: 24, gamma: 0.15}
"""
    cfgfile = tmp_path / "c.yaml"
    cfgfile.write_text(text)
    out = tmp_path / "run"
    assert main(["gibbs", "--config", str(cfgfile), "--out", str(out)]) == 0
    rows = (out / "gibbs.csv").read_text().splitlines()
    assert rows[0] == "n_k,log_nu_ball,log_gibbs_sum,d"
    assert len(rows) > 1


def test_remaining_commands_run(tmp_path):
    text = """
model: {family: manneville_pomeau, gamma_winding: 1}
potential: {family: cosine, amplitude: 0.02}
base: {kind: rotation, seed: 9}
count: 2
numerics: {grid_n: 128, burn_in: 24, window: 6, n_max: 8, eps: 0.05}
"""
    cfgfile = tmp_path / "c.yaml"
    cfgfile.write_text(text)
    for cmd, outfile in [("correlations", "correlations.csv"),
                         ("pressure", "pressure.csv"),
                         ("hyperbolic-times", "orbit_000.csv"),
                         ("cylinder-count", "cylinders.csv"),
                         ("threshold", "threshold.csv")]:
        out = tmp_path / cmd
        assert main([cmd, "--config", str(cfgfile), "--out", str(out)]) == 0
        assert (out / outfile).exists()
        assert (out / "manifest.json").exists()
